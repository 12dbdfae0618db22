//! Scene domain types: objects, poses, lighting, camera, task and the full test case.

mod db;
mod hash;
mod validate;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Footprint, Outline};
use crate::scalar::wrap_angle;
use crate::{Vec3, Vector3};

pub use db::{ObjectDatabase, PoolCounts};
pub use hash::{scene_hash, SceneHash};
pub use validate::{validate_scene, ValidationReport, Violation};

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate object id {0:?}")]
    DuplicateId(String),
    #[error("container {0:?} has no cavity dimensions")]
    MissingCavity(String),
    #[error("invalid object record {id:?}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("unknown object id {0:?}")]
    UnknownObject(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Box,
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pool {
    Seen,
    Unseen,
}

/// One entry of an object database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: String,
    pub display_name: String,
    pub shape: Shape,
    /// For cylinders: (radius, radius, half-height).
    pub half_extents: Vec3,
    pub graspable: bool,
    pub is_container: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity_half_extents: Option<Vec3>,
    pub base_color: [u8; 3],
    pub pool: Pool,
}

impl ObjectRecord {
    pub fn half_height(&self) -> f64 {
        self.half_extents.z
    }

    fn outline(&self, half: Vec3) -> Outline<f64> {
        match self.shape {
            Shape::Box => Outline::Rect { half_x: half.x, half_y: half.y },
            Shape::Cylinder => Outline::Disc { radius: half.x },
        }
    }

    /// Top face footprint at the given pose.
    pub fn footprint(&self, pose: &Pose) -> Footprint<f64> {
        Footprint {
            center: (pose.position.x, pose.position.y),
            yaw: pose.yaw(),
            outline: self.outline(self.half_extents),
        }
    }

    /// Interior opening of a container at the given pose.
    pub fn cavity_footprint(&self, pose: &Pose) -> Option<Footprint<f64>> {
        let cavity = self.cavity_half_extents.filter(|_| self.is_container)?;
        Some(Footprint {
            center: (pose.position.x, pose.position.y),
            yaw: pose.yaw(),
            outline: self.outline(cavity),
        })
    }

    pub fn top_z(&self, pose: &Pose) -> f64 {
        pose.position.z + self.half_extents.z
    }

    pub fn bottom_z(&self, pose: &Pose) -> f64 {
        pose.position.z - self.half_extents.z
    }

    /// Height of the cavity floor (containers only).
    pub fn cavity_floor_z(&self, pose: &Pose) -> Option<f64> {
        let cavity = self.cavity_half_extents.filter(|_| self.is_container)?;
        Some(self.top_z(pose) - 2.0 * cavity.z)
    }

    /// World axis-aligned bounding box of the (upright) object.
    pub fn aabb(&self, pose: &Pose) -> Aabb<f64> {
        let (hx, hy) = self.footprint(pose).aabb_half();
        Aabb::from_center_half(pose.position, Vector3::new(hx, hy, self.half_extents.z))
    }

    /// Grasp point: centre of the top face.
    pub fn grasp_point(&self, pose: &Pose) -> Vec3 {
        Vector3::new(pose.position.x, pose.position.y, self.top_z(pose))
    }

    pub(crate) fn check(&self) -> Result<(), SceneError> {
        let bad = |reason: &str| SceneError::InvalidRecord { id: self.id.clone(), reason: reason.to_string() };
        let h = self.half_extents;
        if !(h.is_finite() && h.x > 0.0 && h.y > 0.0 && h.z > 0.0) {
            return Err(bad("half_extents must be finite and positive"));
        }
        if self.shape == Shape::Cylinder && h.x != h.y {
            return Err(bad("cylinder half_extents must be (radius, radius, half-height)"));
        }
        if self.display_name.trim().is_empty() {
            return Err(bad("empty display_name"));
        }
        match (self.is_container, self.cavity_half_extents) {
            (true, None) => return Err(SceneError::MissingCavity(self.id.clone())),
            (false, Some(_)) => return Err(bad("cavity_half_extents given for a non-container")),
            (true, Some(c)) => {
                if !(c.x > 0.0 && c.y > 0.0 && c.z > 0.0 && c.x < h.x && c.y < h.y && c.z < h.z) {
                    return Err(bad("cavity must be positive and strictly inside half_extents"));
                }
            }
            (false, None) => {}
        }
        Ok(())
    }
}

/// Position in the table frame (origin at table centre, z up, z = 0 on the
/// tabletop) and roll/pitch/yaw orientation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Vec3,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Vec3) -> Self {
        Self { position, orientation }.normalized()
    }

    pub fn upright(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self::new(Vector3::new(x, y, z), Vector3::new(0.0, 0.0, yaw))
    }

    pub fn yaw(&self) -> f64 {
        self.orientation.z
    }

    /// Wraps all three angles into `[-pi, pi)`.
    pub fn normalized(self) -> Self {
        Self { position: self.position, orientation: self.orientation.map(wrap_angle) }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.orientation.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    TargetA,
    TargetB,
    Confound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub record_id: String,
    pub pose: Pose,
    pub role: Role,
}

pub const MIN_INTENSITY: f64 = 1.0 / 20.0;
pub const MAX_INTENSITY: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightingConfig {
    pub intensity_scale: f64,
}

impl Default for LightingConfig {
    fn default() -> Self {
        Self { intensity_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub position: Vec3,
    /// Roll/pitch/yaw of the camera body. The camera looks along its local +x
    /// axis with +z up in the image.
    pub orientation: Vec3,
    pub fov_deg: f64,
    /// (width, height) in pixels.
    pub resolution: (u32, u32),
}

impl Default for CameraConfig {
    fn default() -> Self {
        // Opposite the robot, looking down at the table centre.
        let position: Vec3 = Vector3::new(0.0, 0.95, 0.80);
        let pitch = (position.z / position.y).atan();
        Self {
            position,
            orientation: Vector3::new(0.0, pitch, -std::f64::consts::FRAC_PI_2),
            fov_deg: 60.0,
            resolution: (224, 224),
        }
    }
}

impl CameraConfig {
    pub fn is_valid(&self) -> bool {
        self.position.is_finite()
            && self.orientation.is_finite()
            && self.fov_deg > 10.0
            && self.fov_deg < 120.0
            && self.resolution.0 >= 32
            && self.resolution.1 >= 32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    PickUp,
    MoveNear,
    PutOn,
    PutIn,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [TaskKind::PickUp, TaskKind::MoveNear, TaskKind::PutOn, TaskKind::PutIn];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::PickUp => "pick_up",
            TaskKind::MoveNear => "move_near",
            TaskKind::PutOn => "put_on",
            TaskKind::PutIn => "put_in",
        }
    }

    /// Number of target objects the task refers to.
    pub fn n_targets(self) -> usize {
        match self {
            TaskKind::PickUp => 1,
            _ => 2,
        }
    }

    /// Label of the intermediate step column in step tables.
    pub fn mid_step_label(self) -> &'static str {
        match self {
            TaskKind::PickUp => "Lift",
            _ => "Move",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown task kind {s:?} (expected pick_up, move_near, put_on, put_in)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub kind: TaskKind,
    pub instruction: String,
    pub target_a_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_b_id: Option<String>,
}

/// Camera perturbation applied to the default camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraMutation {
    /// Per-axis rotation deltas in radians.
    pub rotation_delta: Vec3,
    /// Unit direction of the translation.
    pub direction: Vec3,
    /// Translation magnitude in meters.
    pub distance: f64,
}

/// Generation provenance. Not part of the scene hash.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneMeta {
    pub safe_dist: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lighting_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_mutation: Option<CameraMutation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_template: Option<String>,
}

pub const DEFAULT_TABLE_HALF_EXTENTS: [f64; 2] = [0.40, 0.40];

/// A complete, hashable test case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub scene_id: String,
    pub seed: u64,
    pub objects: Vec<ObjectInstance>,
    pub lighting: LightingConfig,
    pub camera: CameraConfig,
    pub task: TaskInstance,
    pub table_half_extents: [f64; 2],
    #[serde(default)]
    pub meta: SceneMeta,
}

pub const SCENE_SUFFIX: &str = ".scene.json";

impl SceneConfig {
    pub fn object(&self, record_id: &str) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.record_id == record_id)
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &ObjectInstance> {
        self.objects.iter().filter(move |o| o.role == role)
    }

    pub fn target_a(&self) -> Option<&ObjectInstance> {
        self.with_role(Role::TargetA).next()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SceneError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), SceneError> {
        std::fs::write(path, self.to_json())
            .map_err(|source| SceneError::Io { path: path.display().to_string(), source })
    }

    pub fn hash(&self) -> SceneHash {
        scene_hash(self)
    }
}
