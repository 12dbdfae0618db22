//! Kinematic, quasi-static tabletop simulator.
//!
//! The end-effector is a point with a yaw frame and a scalar aperture.
//! Grasping is point based, carried objects follow the end-effector
//! rigidly, and released objects are placed by [`settle`].

mod episode;
mod settle;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::Aabb;
use crate::scene::{ObjectDatabase, ObjectRecord, Pose, Role, SceneConfig, SceneError};
use crate::{Mat3, Vec3, Vector3};

pub use episode::{read_trace, run_episode, write_trace, EpisodeTrace, FrameSnapshot, Termination, TraceHeader, TRACE_SUFFIX};
pub use settle::{is_resting, settle, SettleOutcome};

/// Home position of the end-effector, above and in front of the table centre.
pub const HOME_POSITION: Vec3 = Vector3::new(0.0, -0.25, 0.30);
/// Aperture at or above which the gripper counts as open.
pub const GRIP_THRESHOLD: f64 = 0.5;
/// Height tolerance for "resting on" checks.
pub const REST_EPS: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("non-finite action component")]
    NonFiniteAction,
    #[error("frame limit {0} reached")]
    FrameLimit(u32),
}

/// One policy step: translation, rotation and gripper deltas.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionCommand {
    pub delta_pos: Vec3,
    pub delta_rot: Vec3,
    pub delta_grip: f64,
}

impl ActionCommand {
    pub fn new(delta_pos: Vec3, delta_rot: Vec3, delta_grip: f64) -> Self {
        Self { delta_pos, delta_rot, delta_grip }
    }

    /// Layout `[dx, dy, dz, droll, dpitch, dyaw, dgrip]`.
    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            delta_pos: Vector3::new(a[0], a[1], a[2]),
            delta_rot: Vector3::new(a[3], a[4], a[5]),
            delta_grip: a[6],
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        let (p, r) = (self.delta_pos, self.delta_rot);
        [p.x, p.y, p.z, r.x, r.y, r.z, self.delta_grip]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub max_steps: u32,
    /// Translation norm clamp per step, meters.
    pub max_translation: f64,
    /// Per-axis rotation clamp per step, radians.
    pub max_rotation: f64,
    pub grasp_radius: f64,
    pub support_margin: f64,
    /// Half extent of the end-effector's contact box.
    pub ee_half_extent: f64,
    /// Pick-up: minimum bottom height of a lifted target.
    pub lift_height: f64,
    /// Pick-up: consecutive lifted frames required.
    pub lift_frames: u32,
    /// Move-near: maximum surface gap.
    pub near_distance: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_steps: 120,
            max_translation: 0.10,
            max_rotation: 0.20,
            grasp_radius: 0.04,
            support_margin: 0.01,
            ee_half_extent: 0.02,
            lift_height: 0.02,
            lift_frames: 5,
            near_distance: 0.05,
        }
    }
}

impl EpisodeConfig {
    pub fn is_valid(&self) -> bool {
        self.max_steps > 0
            && self.lift_frames > 0
            && [
                self.max_translation,
                self.max_rotation,
                self.grasp_radius,
                self.support_margin,
                self.ee_half_extent,
                self.lift_height,
                self.near_distance,
            ]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }

    /// The command actually applied: translation norm, per-axis rotation and
    /// gripper delta clamped to their bounds.
    pub fn clamp(&self, a: &ActionCommand) -> ActionCommand {
        let r = self.max_rotation;
        ActionCommand {
            delta_pos: a.delta_pos.clamp_norm(self.max_translation),
            delta_rot: a.delta_rot.map(|v| v.clamp(-r, r)),
            delta_grip: a.delta_grip.clamp(-1.0, 1.0),
        }
    }
}

/// Static per-object data carried alongside the world state.
#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub record: ObjectRecord,
    pub role: Role,
}

/// Grasp offset of the carried object, in the end-effector's yaw frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attachment {
    pub key: String,
    pub offset: Vec3,
    pub yaw_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Grasp,
    Release,
    ConfounderContact,
    UnstablePlacement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub frame: u32,
    pub kind: EventKind,
    pub object: String,
}

/// Simulator truth. Object keys are scene record ids.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub ee_pose: Pose,
    pub aperture: f64,
    pub attached: Option<Attachment>,
    pub object_poses: BTreeMap<String, Pose>,
    pub frame: u32,
    pub events: Vec<Event>,
    pub bodies: Arc<BTreeMap<String, Body>>,
    /// Pose of the object released during the last step, taken after the
    /// motion and before the release.
    pub released_from: Option<(String, Pose)>,
}

/// Places the scene's objects and the end-effector at home, gripper open.
pub fn init_world(scene: &SceneConfig, db: &ObjectDatabase) -> Result<WorldState, SimError> {
    let mut bodies = BTreeMap::new();
    let mut object_poses = BTreeMap::new();
    for o in &scene.objects {
        let record = db.require(&o.record_id)?.clone();
        bodies.insert(o.record_id.clone(), Body { record, role: o.role });
        object_poses.insert(o.record_id.clone(), o.pose);
    }
    Ok(WorldState {
        ee_pose: Pose::new(HOME_POSITION, Vector3::new(std::f64::consts::PI, 0.0, 0.0)),
        aperture: 1.0,
        attached: None,
        object_poses,
        frame: 0,
        events: Vec::new(),
        bodies: Arc::new(bodies),
        released_from: None,
    })
}

impl WorldState {
    pub fn body(&self, key: &str) -> Option<&Body> {
        self.bodies.get(key)
    }

    pub fn pose(&self, key: &str) -> Option<&Pose> {
        self.object_poses.get(key)
    }

    pub fn attached_key(&self) -> Option<&str> {
        self.attached.as_ref().map(|a| a.key.as_str())
    }

    pub fn key_with_role(&self, role: Role) -> Option<&str> {
        self.bodies.iter().find(|(_, b)| b.role == role).map(|(k, _)| k.as_str())
    }

    /// Events logged during the most recent frame.
    pub fn frame_events(&self) -> &[Event] {
        let start = self.events.iter().rposition(|e| e.frame != self.frame).map_or(0, |i| i + 1);
        &self.events[start..]
    }

    /// Pose an attached object takes for the current end-effector pose.
    pub fn carried_pose(&self, a: &Attachment) -> Pose {
        let yaw = self.ee_pose.yaw();
        let p = self.ee_pose.position + Mat3::rot_z(yaw) * a.offset;
        Pose::upright(p.x, p.y, p.z, yaw + a.yaw_offset)
    }

    pub fn ee_box(&self, cfg: &EpisodeConfig) -> Aabb<f64> {
        let h = cfg.ee_half_extent;
        Aabb::from_center_half(self.ee_pose.position, Vector3::new(h, h, h))
    }

    fn log(&mut self, kind: EventKind, object: &str) {
        self.events.push(Event { frame: self.frame, kind, object: object.to_string() });
    }

    /// Functional form of [`WorldState::apply`].
    pub fn step(&self, action: &ActionCommand, cfg: &EpisodeConfig) -> Result<(WorldState, ActionCommand), SimError> {
        let mut next = self.clone();
        let applied = next.apply(action, cfg)?;
        Ok((next, applied))
    }

    /// Advances one frame in place and returns the applied (clamped) command.
    pub fn apply(&mut self, action: &ActionCommand, cfg: &EpisodeConfig) -> Result<ActionCommand, SimError> {
        if !action.is_finite() {
            return Err(SimError::NonFiniteAction);
        }
        if self.frame >= cfg.max_steps {
            return Err(SimError::FrameLimit(cfg.max_steps));
        }
        let applied = cfg.clamp(action);
        self.frame += 1;
        self.released_from = None;

        let mut pos = self.ee_pose.position + applied.delta_pos;
        let floor = match &self.attached {
            Some(a) => (self.bodies[&a.key].record.half_height() - a.offset.z).max(0.0),
            None => 0.0,
        };
        pos.z = pos.z.max(floor);
        self.ee_pose = Pose::new(pos, self.ee_pose.orientation + applied.delta_rot);
        if let Some(a) = self.attached.clone() {
            let p = self.carried_pose(&a);
            self.object_poses.insert(a.key, p);
        }

        let before = self.aperture;
        self.aperture = (before + applied.delta_grip).clamp(0.0, 1.0);
        if before >= GRIP_THRESHOLD && self.aperture < GRIP_THRESHOLD && self.attached.is_none() {
            self.try_grasp(cfg);
        } else if before < GRIP_THRESHOLD && self.aperture >= GRIP_THRESHOLD {
            if let Some(a) = self.attached.take() {
                self.released_from = Some((a.key.clone(), self.object_poses[&a.key]));
                self.log(EventKind::Release, &a.key);
                settle(self, &a.key, cfg);
            }
        }
        self.restabilize(cfg);
        self.log_contacts(cfg);
        Ok(applied)
    }

    fn try_grasp(&mut self, cfg: &EpisodeConfig) {
        let ee = self.ee_pose.position;
        let mut best: Option<(f64, &str)> = None;
        for (key, body) in self.bodies.iter() {
            if !body.record.graspable {
                continue;
            }
            let d = (body.record.grasp_point(&self.object_poses[key]) - ee).norm();
            if d <= cfg.grasp_radius && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, key));
            }
        }
        let Some((_, key)) = best else { return };
        let key = key.to_string();
        let pose = self.object_poses[&key];
        let yaw = self.ee_pose.yaw();
        let offset = Mat3::rot_z(yaw).transpose() * (pose.position - ee);
        self.attached = Some(Attachment { key: key.clone(), offset, yaw_offset: pose.yaw() - yaw });
        // Re-express through the attachment so the carried pose is exact from now on.
        let a = self.attached.clone().expect("just attached");
        let carried = self.carried_pose(&a);
        self.object_poses.insert(key.clone(), carried);
        self.log(EventKind::Grasp, &key);
    }

    /// Drops every free object that lost its support, lowest first.
    fn restabilize(&mut self, cfg: &EpisodeConfig) {
        for _ in 0..=self.bodies.len() {
            let mut keys: Vec<(f64, String)> = self
                .object_poses
                .iter()
                .filter(|(k, _)| self.attached_key() != Some(k.as_str()))
                .map(|(k, p)| (self.bodies[k].record.bottom_z(p), k.clone()))
                .collect();
            keys.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            let Some((_, key)) = keys.into_iter().find(|(_, k)| !is_resting(self, k)) else { return };
            settle(self, &key, cfg);
        }
    }

    fn log_contacts(&mut self, cfg: &EpisodeConfig) {
        let ee = self.ee_box(cfg);
        let carried = self.attached.as_ref().map(|a| self.bodies[&a.key].record.aabb(&self.object_poses[&a.key]));
        let hits: Vec<String> = self
            .bodies
            .iter()
            .filter(|(k, b)| b.role == Role::Confound && self.attached_key() != Some(k.as_str()))
            .filter(|(k, b)| {
                let bb = b.record.aabb(&self.object_poses[*k]);
                bb.intersects(&ee) || carried.is_some_and(|c| bb.intersects(&c))
            })
            .map(|(k, _)| k.clone())
            .collect();
        for k in hits {
            self.log(EventKind::ConfounderContact, &k);
        }
    }
}
