use serde::{Deserialize, Serialize};

use super::{EpisodeConfig, EventKind, WorldState, REST_EPS};
use crate::scene::Pose;

/// Where a released object came to rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rest", content = "on", rename_all = "snake_case")]
pub enum SettleOutcome {
    Contained(String),
    Stacked(String),
    Unstable(String),
    Table,
}

/// Drops a free object to its resting height.
///
/// In order: into a container cavity whose opening contains the object's
/// centre (when the object's bottom is below the rim); onto the highest top
/// face whose margin-shrunk footprint contains the centre; to the table with
/// an `unstable_placement` event when the centre is only inside an unshrunk
/// footprint; otherwise to the table.
pub fn settle(state: &mut WorldState, key: &str, cfg: &EpisodeConfig) -> SettleOutcome {
    let bodies = state.bodies.clone();
    let Some(body) = bodies.get(key) else { return SettleOutcome::Table };
    let pose = state.object_poses[key];
    let (x, y) = (pose.position.x, pose.position.y);
    let hz = body.record.half_height();
    let bottom = body.record.bottom_z(&pose);

    let others = bodies.iter().filter(|(k, _)| k.as_str() != key && state.attached_key() != Some(k.as_str()));

    let mut contained: Option<(f64, &str)> = None;
    let mut stacked: Option<(f64, &str)> = None;
    let mut overlapped: Option<&str> = None;
    for (k, other) in others {
        let op = &state.object_poses[k];
        if let (Some(cavity), Some(floor)) = (other.record.cavity_footprint(op), other.record.cavity_floor_z(op)) {
            if cavity.contains(x, y, 0.0) && bottom < other.record.top_z(op) && contained.is_none_or(|(f, _)| floor > f) {
                contained = Some((floor, k));
            }
        }
        let fp = other.record.footprint(op);
        let top = other.record.top_z(op);
        if fp.contains(x, y, cfg.support_margin) {
            if stacked.is_none_or(|(t, _)| top > t) {
                stacked = Some((top, k));
            }
        } else if fp.contains(x, y, 0.0) && overlapped.is_none() {
            overlapped = Some(k);
        }
    }

    let (z, outcome) = match (contained, stacked, overlapped) {
        (Some((floor, k)), _, _) => (floor + hz, SettleOutcome::Contained(k.to_string())),
        (None, Some((top, k)), _) => (top + hz, SettleOutcome::Stacked(k.to_string())),
        (None, None, Some(k)) => (hz, SettleOutcome::Unstable(k.to_string())),
        (None, None, None) => (hz, SettleOutcome::Table),
    };
    state.object_poses.insert(key.to_string(), Pose::upright(x, y, z, pose.yaw()));
    if matches!(outcome, SettleOutcome::Unstable(_)) {
        state.log(EventKind::UnstablePlacement, key);
    }
    outcome
}

/// Whether a free object rests on the table, on a top face whose footprint
/// contains its centre, or on a cavity floor whose opening contains it.
pub fn is_resting(state: &WorldState, key: &str) -> bool {
    if state.attached_key() == Some(key) {
        return true;
    }
    let (Some(body), Some(pose)) = (state.body(key), state.pose(key)) else { return true };
    let bottom = body.record.bottom_z(pose);
    if bottom.abs() <= REST_EPS {
        return true;
    }
    let (x, y) = (pose.position.x, pose.position.y);
    state.bodies.iter().filter(|(k, _)| k.as_str() != key && state.attached_key() != Some(k.as_str())).any(|(k, other)| {
        let op = &state.object_poses[k];
        let on_top = (bottom - other.record.top_z(op)).abs() <= REST_EPS && other.record.footprint(op).contains(x, y, 0.0);
        let in_cavity = match (other.record.cavity_footprint(op), other.record.cavity_floor_z(op)) {
            (Some(c), Some(floor)) => (bottom - floor).abs() <= REST_EPS && c.contains(x, y, 0.0),
            _ => false,
        };
        on_top || in_cavity
    })
}
