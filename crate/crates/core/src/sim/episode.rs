use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{init_world, ActionCommand, EpisodeConfig, Event, SimError, WorldState};
use crate::oracle::{EpisodeResult, OracleState};
use crate::policy::{InitMsg, PolicyHandle, PROTOCOL_VERSION};
use crate::render::observe;
use crate::scene::{ObjectDatabase, Pose, SceneConfig, SceneHash, TaskKind};

pub const TRACE_SUFFIX: &str = ".trace.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TaskSuccess,
    MaxSteps,
    PolicyError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub scene_id: String,
    pub scene_hash: SceneHash,
    pub task: TaskKind,
    pub policy: String,
    pub seed: u64,
    pub config: EpisodeConfig,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSnapshot {
    pub frame: u32,
    pub ee_pose: Pose,
    pub aperture: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attached: Option<String>,
    pub object_poses: BTreeMap<String, Pose>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<Event>,
    /// Clamped command that produced this frame; absent for frame 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub applied: Option<ActionCommand>,
}

impl FrameSnapshot {
    fn of(state: &WorldState, applied: Option<ActionCommand>) -> Self {
        let events = if applied.is_some() { state.frame_events().to_vec() } else { Vec::new() };
        Self {
            frame: state.frame,
            ee_pose: state.ee_pose,
            aperture: state.aperture,
            attached: state.attached_key().map(String::from),
            object_poses: state.object_poses.clone(),
            events,
            applied,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub frames: Vec<FrameSnapshot>,
}

impl EpisodeTrace {
    /// JSONL form: the header line, then one line per frame.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for f in &self.frames {
            out.push_str(&serde_json::to_string(f).expect("frame serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn write_trace(path: &Path, trace: &EpisodeTrace) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(trace.to_jsonl().as_bytes())?;
    f.flush()
}

pub fn read_trace(path: &Path) -> std::io::Result<EpisodeTrace> {
    let invalid = |e: serde_json::Error| std::io::Error::new(std::io::ErrorKind::InvalidData, e);
    let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
    let header_line = lines.next().ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "empty trace"))??;
    let header = serde_json::from_str(&header_line).map_err(invalid)?;
    let mut frames = Vec::new();
    for line in lines {
        frames.push(serde_json::from_str(&line?).map_err(invalid)?);
    }
    Ok(EpisodeTrace { header, frames })
}

/// Runs one closed-loop episode: observe, query the policy, step, score.
///
/// Policy failures end the episode with [`Termination::PolicyError`] and a
/// partial trace; only scene errors are returned as `Err`.
pub fn run_episode(
    scene: &SceneConfig,
    db: &ObjectDatabase,
    policy: &mut PolicyHandle,
    cfg: &EpisodeConfig,
    seed: u64,
) -> Result<(EpisodeTrace, EpisodeResult), SimError> {
    let mut state = init_world(scene, db)?;
    let mut oracle = OracleState::new(&scene.task);
    let mut frames = vec![FrameSnapshot::of(&state, None)];
    let init = InitMsg {
        protocol_version: PROTOCOL_VERSION,
        instruction: scene.task.instruction.clone(),
        image_width: scene.camera.resolution.0,
        image_height: scene.camera.resolution.1,
        max_steps: cfg.max_steps,
        seed,
    };

    let mut error = None;
    let mut policy_name = policy.descriptor.clone();
    let handshake = policy.begin_episode(&init).map(|ack| ack.name.clone());
    let termination = match handshake {
        Err(e) => {
            error = Some(e.to_string());
            Termination::PolicyError
        }
        Ok(name) => loop {
            if !name.is_empty() {
                policy_name.clone_from(&name);
            }
            if state.frame >= cfg.max_steps {
                break Termination::MaxSteps;
            }
            let obs = observe(&state, scene, policy.sends_privileged());
            let action = match policy.query_action(&obs) {
                Ok(a) => a,
                Err(e) => {
                    error = Some(e.to_string());
                    break Termination::PolicyError;
                }
            };
            let applied = match state.apply(&action, cfg) {
                Ok(a) => a,
                Err(e) => {
                    error = Some(e.to_string());
                    break Termination::PolicyError;
                }
            };
            oracle.evaluate_frame(&state, cfg);
            frames.push(FrameSnapshot::of(&state, Some(applied)));
            if oracle.success {
                break Termination::TaskSuccess;
            }
        },
    };
    if policy.is_healthy() {
        if let Err(e) = policy.end_episode(termination) {
            log::warn!("failed to notify policy of episode end: {e}");
        }
    }

    let hash = scene.hash();
    let header = TraceHeader {
        scene_id: scene.scene_id.clone(),
        scene_hash: hash,
        task: scene.task.kind,
        policy: policy_name,
        seed,
        config: cfg.clone(),
        termination,
        error: error.clone(),
    };
    let result = oracle.finish(&scene.scene_id, hash, state.frame, termination, error);
    Ok((EpisodeTrace { header, frames }, result))
}
