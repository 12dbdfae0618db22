use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{ObjectInstance, Role, SceneConfig};
use crate::Vec3;

/// 64-bit scene digest, rendered as 16 lowercase hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SceneHash(pub u64);

impl fmt::Display for SceneHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for SceneHash {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 16 {
            return Err(format!("scene hash must be 16 hex digits, got {s:?}"));
        }
        u64::from_str_radix(s, 16).map(SceneHash).map_err(|e| format!("bad scene hash {s:?}: {e}"))
    }
}

impl Serialize for SceneHash {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SceneHash {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

const QUANTUM: f64 = 1e6;

fn q(v: f64) -> i64 {
    (v * QUANTUM).round() as i64
}

fn qv(v: Vec3) -> [i64; 3] {
    [q(v.x), q(v.y), q(v.z)]
}

fn canonical_object(o: &ObjectInstance) -> serde_json::Value {
    json!({
        "record_id": o.record_id,
        "role": o.role,
        "position": qv(o.pose.position),
        "orientation": qv(o.pose.orientation),
    })
}

/// Canonical JSON form used for hashing: sorted keys, quantized reals,
/// targets first and confounders sorted by (record_id, x, y).
/// Scene id, seed and generation metadata are excluded.
pub fn canonical_form(scene: &SceneConfig) -> String {
    let mut objects: Vec<&ObjectInstance> = scene.objects.iter().collect();
    objects.sort_by(|a, b| {
        a.role
            .cmp(&b.role)
            .then_with(|| a.record_id.cmp(&b.record_id))
            .then_with(|| q(a.pose.position.x).cmp(&q(b.pose.position.x)))
            .then_with(|| q(a.pose.position.y).cmp(&q(b.pose.position.y)))
    });
    let cam = &scene.camera;
    // serde_json::Map is ordered by key, so `to_string` emits sorted keys.
    let value = json!({
        "objects": objects.into_iter().map(canonical_object).collect::<Vec<_>>(),
        "lighting": { "intensity_scale": q(scene.lighting.intensity_scale) },
        "camera": {
            "position": qv(cam.position),
            "orientation": qv(cam.orientation),
            "fov_deg": q(cam.fov_deg),
            "resolution": [cam.resolution.0, cam.resolution.1],
        },
        "task": {
            "kind": scene.task.kind,
            "instruction": scene.task.instruction,
            "target_a_id": scene.task.target_a_id,
            "target_b_id": scene.task.target_b_id,
        },
        "table_half_extents": [q(scene.table_half_extents[0]), q(scene.table_half_extents[1])],
    });
    value.to_string()
}

pub fn scene_hash(scene: &SceneConfig) -> SceneHash {
    let digest = Sha256::digest(canonical_form(scene).as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    SceneHash(u64::from_be_bytes(head))
}

impl Role {
    pub fn is_target(self) -> bool {
        matches!(self, Role::TargetA | Role::TargetB)
    }
}
