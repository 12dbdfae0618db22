use std::collections::HashSet;
use std::fmt;

use super::{ObjectDatabase, Role, SceneConfig, MAX_INTENSITY, MIN_INTENSITY};

/// Tolerance for the pairwise distance check, so that objects placed exactly
/// `safe_dist` apart survive a serialization round trip.
const DIST_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    UnknownRecord { record_id: String },
    DuplicateRecord { record_id: String },
    NonFinitePose { record_id: String },
    OutOfBounds { record_id: String, x: f64, y: f64 },
    TooClose { a: String, b: String, distance: f64, safe_dist: f64 },
    RoleCount { role: Role, count: usize },
    TaskReference { role: Role, record_id: Option<String>, reason: &'static str },
    EmptyInstruction,
    LightingOutOfRange { intensity_scale: f64 },
    InvalidCamera,
    InvalidTable,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownRecord { record_id } => write!(f, "unknown record id {record_id:?}"),
            Violation::DuplicateRecord { record_id } => write!(f, "record {record_id:?} appears more than once"),
            Violation::NonFinitePose { record_id } => write!(f, "non-finite pose for {record_id:?}"),
            Violation::OutOfBounds { record_id, x, y } => {
                write!(f, "{record_id:?} at ({x:.4}, {y:.4}) lies outside the table")
            }
            Violation::TooClose { a, b, distance, safe_dist } => {
                write!(f, "{a:?} and {b:?} are {distance:.4} m apart (< {safe_dist} m)")
            }
            Violation::RoleCount { role, count } => write!(f, "{count} objects with role {role:?}"),
            Violation::TaskReference { role, record_id, reason } => {
                write!(f, "task reference {role:?} -> {record_id:?}: {reason}")
            }
            Violation::EmptyInstruction => f.write_str("empty instruction"),
            Violation::LightingOutOfRange { intensity_scale } => {
                write!(f, "intensity_scale {intensity_scale} outside [1/20, 20]")
            }
            Violation::InvalidCamera => f.write_str("camera fov or resolution out of range"),
            Violation::InvalidTable => f.write_str("table half extents must be positive"),
        }
    }
}

/// Every violated invariant of a scene; empty iff the scene is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_scene(scene: &SceneConfig, db: &ObjectDatabase, safe_dist: f64) -> ValidationReport {
    let mut out = Vec::new();
    let [hx, hy] = scene.table_half_extents;
    if !(hx > 0.0 && hy > 0.0) {
        out.push(Violation::InvalidTable);
    }

    let mut seen = HashSet::new();
    for o in &scene.objects {
        if !db.contains(&o.record_id) {
            out.push(Violation::UnknownRecord { record_id: o.record_id.clone() });
        }
        if !seen.insert(o.record_id.as_str()) {
            out.push(Violation::DuplicateRecord { record_id: o.record_id.clone() });
        }
        if !o.pose.is_finite() {
            out.push(Violation::NonFinitePose { record_id: o.record_id.clone() });
            continue;
        }
        let p = o.pose.position;
        if p.x.abs() > hx || p.y.abs() > hy {
            out.push(Violation::OutOfBounds { record_id: o.record_id.clone(), x: p.x, y: p.y });
        }
    }

    for (i, a) in scene.objects.iter().enumerate() {
        for b in &scene.objects[i + 1..] {
            let d = a.pose.position.planar_distance(b.pose.position);
            if d < safe_dist - DIST_EPS {
                out.push(Violation::TooClose {
                    a: a.record_id.clone(),
                    b: b.record_id.clone(),
                    distance: d,
                    safe_dist,
                });
            }
        }
    }

    for role in [Role::TargetA, Role::TargetB] {
        let count = scene.with_role(role).count();
        if count > 1 {
            out.push(Violation::RoleCount { role, count });
        }
    }

    let task = &scene.task;
    if task.instruction.trim().is_empty() {
        out.push(Violation::EmptyInstruction);
    }
    let check_ref = |role: Role, id: Option<&String>, out: &mut Vec<Violation>| {
        let violation = |reason| Violation::TaskReference { role, record_id: id.cloned(), reason };
        match id {
            None => out.push(violation("missing")),
            Some(id) => match scene.object(id) {
                None => out.push(violation("not present in scene")),
                Some(o) if o.role != role => out.push(violation("object has a different role")),
                Some(_) => {}
            },
        }
    };
    check_ref(Role::TargetA, Some(&task.target_a_id), &mut out);
    if task.kind.n_targets() == 2 {
        check_ref(Role::TargetB, task.target_b_id.as_ref(), &mut out);
    } else if task.target_b_id.is_some() {
        out.push(Violation::TaskReference {
            role: Role::TargetB,
            record_id: task.target_b_id.clone(),
            reason: "task takes a single object",
        });
    } else if scene.with_role(Role::TargetB).next().is_some() {
        out.push(Violation::RoleCount { role: Role::TargetB, count: scene.with_role(Role::TargetB).count() });
    }

    let s = scene.lighting.intensity_scale;
    if !(MIN_INTENSITY..=MAX_INTENSITY).contains(&s) {
        out.push(Violation::LightingOutOfRange { intensity_scale: s });
    }
    if !scene.camera.is_valid() {
        out.push(Violation::InvalidCamera);
    }
    ValidationReport { violations: out }
}
