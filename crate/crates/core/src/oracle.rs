//! Per-frame task oracles and the per-episode result record.

use serde::{Deserialize, Serialize};

use crate::scene::{Pose, SceneHash, TaskInstance, TaskKind};
use crate::sim::{EpisodeConfig, EventKind, Termination, WorldState, REST_EPS};

/// Outcome of one episode, decomposed into ordered sub-goals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scene_id: String,
    pub scene_hash: SceneHash,
    pub task: TaskKind,
    pub grasp_correct: bool,
    /// Lift for pick-up, move for the other tasks.
    pub mid_step: bool,
    pub success: bool,
    pub confounder_contacts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_to_success: Option<u32>,
    pub steps: u32,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EpisodeResult {
    /// Sub-goal flags are ordered: success implies the middle step implies the grasp.
    pub fn is_monotone(&self) -> bool {
        (!self.success || self.mid_step) && (!self.mid_step || self.grasp_correct)
    }
}

/// Running predicates for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleState {
    pub task: TaskInstance,
    pub grasp_correct: bool,
    pub mid_step: bool,
    pub success: bool,
    pub lift_streak: u32,
    pub frames_to_success: Option<u32>,
    pub confounder_contacts: u32,
}

impl OracleState {
    pub fn new(task: &TaskInstance) -> Self {
        Self {
            task: task.clone(),
            grasp_correct: false,
            mid_step: false,
            success: false,
            lift_streak: 0,
            frames_to_success: None,
            confounder_contacts: 0,
        }
    }

    /// Updates the predicates from the state after a step.
    pub fn evaluate_frame(&mut self, state: &WorldState, cfg: &EpisodeConfig) {
        self.confounder_contacts +=
            state.frame_events().iter().filter(|e| e.kind == EventKind::ConfounderContact).count() as u32;
        if self.success {
            return;
        }
        let a = self.task.target_a_id.as_str();
        let (Some(body_a), Some(pose_a)) = (state.body(a), state.pose(a)) else { return };
        let rec_a = &body_a.record;
        let held = state.attached_key() == Some(a);
        self.grasp_correct |= held;
        // Where A was while still in the gripper this frame.
        let carried: Option<Pose> = if held {
            Some(*pose_a)
        } else {
            state.released_from.as_ref().filter(|(k, _)| k == a).map(|(_, p)| *p)
        };

        let reached = match self.task.kind {
            TaskKind::PickUp => {
                if held && rec_a.bottom_z(pose_a) >= cfg.lift_height {
                    self.mid_step = true;
                    self.lift_streak += 1;
                } else {
                    self.lift_streak = 0;
                }
                self.lift_streak >= cfg.lift_frames
            }
            kind => {
                let Some(b) = self.task.target_b_id.as_deref() else { return };
                let (Some(body_b), Some(pose_b)) = (state.body(b), state.pose(b)) else { return };
                let rec_b = &body_b.record;
                match kind {
                    TaskKind::MoveNear => {
                        let near = rec_a.aabb(pose_a).gap(&rec_b.aabb(pose_b)) <= cfg.near_distance;
                        self.mid_step |= self.grasp_correct && near;
                        near && !held
                    }
                    TaskKind::PutOn => {
                        let over = rec_b.footprint(pose_b);
                        self.mid_step |= carried.is_some_and(|p| over.contains(p.position.x, p.position.y, 0.0));
                        !held
                            && over.contains(pose_a.position.x, pose_a.position.y, cfg.support_margin)
                            && (rec_a.bottom_z(pose_a) - rec_b.top_z(pose_b)).abs() <= REST_EPS
                    }
                    _ => {
                        let (Some(cavity), Some(floor)) = (rec_b.cavity_footprint(pose_b), rec_b.cavity_floor_z(pose_b)) else {
                            return;
                        };
                        self.mid_step |= carried.is_some_and(|p| cavity.contains(p.position.x, p.position.y, 0.0));
                        !held
                            && cavity.encloses(&rec_a.footprint(pose_a), 0.0)
                            && rec_a.bottom_z(pose_a) >= floor - REST_EPS
                            && rec_a.top_z(pose_a) <= rec_b.top_z(pose_b) + REST_EPS
                    }
                }
            }
        };
        if reached && self.grasp_correct && self.mid_step {
            self.success = true;
            self.frames_to_success = Some(state.frame);
        }
    }

    pub fn finish(
        &self,
        scene_id: &str,
        scene_hash: SceneHash,
        steps: u32,
        termination: Termination,
        error: Option<String>,
    ) -> EpisodeResult {
        EpisodeResult {
            scene_id: scene_id.to_string(),
            scene_hash,
            task: self.task.kind,
            grasp_correct: self.grasp_correct,
            mid_step: self.mid_step,
            success: self.success,
            confounder_contacts: self.confounder_contacts,
            frames_to_success: self.frames_to_success,
            steps,
            termination,
            error,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{ObjectDatabase, ObjectInstance, Role, SceneConfig};
    use crate::sim::{init_world, ActionCommand, Attachment};
    use crate::{Vec3, Vector3};

    fn world(kind: TaskKind, objs: &[(&str, f64, f64, Role)]) -> (WorldState, TaskInstance) {
        let db = ObjectDatabase::builtin_seen();
        let objects: Vec<ObjectInstance> = objs
            .iter()
            .map(|&(id, x, y, role)| ObjectInstance {
                record_id: id.into(),
                pose: Pose::upright(x, y, db.get(id).unwrap().half_height(), 0.0),
                role,
            })
            .collect();
        let task = TaskInstance {
            kind,
            instruction: "t".into(),
            target_a_id: objs[0].0.into(),
            target_b_id: objs.iter().find(|o| o.3 == Role::TargetB).map(|o| o.0.to_string()),
        };
        let mut scene: SceneConfig = serde_json::from_str(include_str!("../tests/data/render_scene.scene.json")).unwrap();
        scene.objects = objects;
        scene.task = task.clone();
        (init_world(&scene, &db).unwrap(), task)
    }

    fn attach(w: &mut WorldState, key: &str) {
        let p = w.object_poses[key].position;
        let top = p.z + w.bodies[key].record.half_height();
        w.ee_pose.position = Vector3::new(p.x, p.y, top + 0.01);
        w.ee_pose.orientation = Vec3::zeros();
        w.attached = Some(Attachment { key: key.into(), offset: p - w.ee_pose.position, yaw_offset: 0.0 });
    }

    fn step(w: &mut WorldState, d: Vec3, grip: f64) {
        w.apply(&ActionCommand::new(d, Vec3::zeros(), grip), &EpisodeConfig::default()).unwrap();
    }

    #[test]
    fn pick_up_five_frames() {
        let cfg = EpisodeConfig::default();
        let (mut w, task) = world(TaskKind::PickUp, &[("pepsi_can", 0.0, 0.0, Role::TargetA)]);
        let mut o = OracleState::new(&task);
        w.aperture = 0.0;
        attach(&mut w, "pepsi_can");
        step(&mut w, Vector3::new(0.0, 0.0, 0.025), 0.0);
        o.evaluate_frame(&w, &cfg);
        assert!(o.grasp_correct && o.mid_step && !o.success);
        for i in 0..4 {
            step(&mut w, Vec3::zeros(), 0.0);
            o.evaluate_frame(&w, &cfg);
            assert_eq!(o.success, i == 3);
        }
        assert_eq!(o.frames_to_success, Some(5));
    }

    #[test]
    fn pick_up_wrong_object() {
        let cfg = EpisodeConfig::default();
        let (mut w, task) =
            world(TaskKind::PickUp, &[("pepsi_can", 0.0, 0.0, Role::TargetA), ("sevenup_can", 0.2, 0.0, Role::Confound)]);
        let mut o = OracleState::new(&task);
        w.aperture = 0.0;
        attach(&mut w, "sevenup_can");
        for _ in 0..8 {
            step(&mut w, Vector3::new(0.0, 0.0, 0.02), 0.0);
            o.evaluate_frame(&w, &cfg);
        }
        assert!(!o.grasp_correct && !o.mid_step && !o.success);
    }

    #[test]
    fn move_near_release_within_gap() {
        let cfg = EpisodeConfig::default();
        let (mut w, task) =
            world(TaskKind::MoveNear, &[("red_cube", 0.3, 0.0, Role::TargetA), ("blue_cube", 0.0, 0.0, Role::TargetB)]);
        let mut o = OracleState::new(&task);
        w.aperture = 0.0;
        attach(&mut w, "red_cube");
        step(&mut w, Vector3::new(0.0, 0.0, 0.05), 0.0);
        o.evaluate_frame(&w, &cfg);
        // Bring A to an AABB gap of 0.04 m (centres 0.08 apart) at table height.
        step(&mut w, Vector3::new(-0.1, 0.0, 0.0), 0.0);
        step(&mut w, Vector3::new(-0.1, 0.0, 0.0), 0.0);
        step(&mut w, Vector3::new(-0.02, 0.0, -0.05), 0.0);
        o.evaluate_frame(&w, &cfg);
        assert!(o.mid_step && !o.success);
        step(&mut w, Vec3::zeros(), 1.0);
        o.evaluate_frame(&w, &cfg);
        let gap = w.bodies["red_cube"].record.aabb(&w.object_poses["red_cube"]).gap(&w.bodies["blue_cube"].record.aabb(&w.object_poses["blue_cube"]));
        assert!((gap - 0.04).abs() < 1e-9, "{gap}");
        assert!(o.success);
    }

    #[test]
    fn put_on_and_put_in() {
        let cfg = EpisodeConfig::default();
        let (mut w, task) = world(TaskKind::PutOn, &[("red_cube", 0.3, 0.0, Role::TargetA), ("towel", 0.0, 0.0, Role::TargetB)]);
        let mut o = OracleState::new(&task);
        w.aperture = 0.0;
        attach(&mut w, "red_cube");
        step(&mut w, Vector3::new(0.0, 0.0, 0.05), 0.0);
        o.evaluate_frame(&w, &cfg);
        step(&mut w, Vector3::new(-0.1, 0.0, 0.0), 0.0);
        step(&mut w, Vector3::new(-0.1, 0.0, 0.0), 0.0);
        // Released in the same frame that brings A over B.
        step(&mut w, Vector3::new(-0.1, 0.0, 0.0), 1.0);
        o.evaluate_frame(&w, &cfg);
        assert!(o.grasp_correct && o.mid_step && o.success);

        let (mut w, task) = world(TaskKind::PutIn, &[("red_cube", 0.3, 0.0, Role::TargetA), ("basket", 0.0, 0.0, Role::TargetB)]);
        let mut o = OracleState::new(&task);
        w.aperture = 0.0;
        attach(&mut w, "red_cube");
        step(&mut w, Vector3::new(0.0, 0.0, 0.1), 0.0);
        o.evaluate_frame(&w, &cfg);
        step(&mut w, Vector3::new(-0.1, 0.0, 0.0), 0.0);
        step(&mut w, Vector3::new(-0.1, 0.0, 0.0), 0.0);
        step(&mut w, Vector3::new(-0.1, 0.0, 0.0), 0.0);
        o.evaluate_frame(&w, &cfg);
        assert!(o.mid_step && !o.success);
        step(&mut w, Vector3::new(0.0, 0.0, -0.06), 1.0);
        o.evaluate_frame(&w, &cfg);
        assert!(o.success);
        assert!((w.object_poses["red_cube"].position.z - (0.01 + 0.02)).abs() < 1e-12);
    }

    #[test]
    fn never_grasped_never_succeeds() {
        let cfg = EpisodeConfig::default();
        // A already within 0.05 of B at start.
        let (w, task) = world(TaskKind::MoveNear, &[("red_cube", 0.07, 0.0, Role::TargetA), ("blue_cube", 0.0, 0.0, Role::TargetB)]);
        let mut o = OracleState::new(&task);
        o.evaluate_frame(&w, &cfg);
        assert!(!o.grasp_correct && !o.mid_step && !o.success);
    }
}
