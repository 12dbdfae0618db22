//! Scripted policies for exercising the framework end to end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::protocol::InitMsg;
use super::Policy;
use crate::render::{Observation, Privileged, PrivilegedObject};
use crate::scene::{Role, Shape, TaskKind};
use crate::sim::{ActionCommand, EpisodeConfig, GRIP_THRESHOLD};
use crate::{Vec3, Vector3};

/// Positional tolerance for "arrived".
const ARRIVE: f64 = 2e-3;
/// Clearance kept above every object top while travelling.
const CLEARANCE: f64 = 0.05;
/// End-effector height above a grasp point when closing.
const GRASP_HOVER: f64 = 0.01;
/// Height above the goal surface at which an object is released.
const RELEASE_GAP: f64 = 0.005;
/// Surface gap targeted by move-near placements.
const NEAR_GAP: f64 = 0.02;

fn open() -> ActionCommand {
    ActionCommand::new(Vec3::zeros(), Vec3::zeros(), 1.0)
}

fn close() -> ActionCommand {
    ActionCommand::new(Vec3::zeros(), Vec3::zeros(), -1.0)
}

fn translate(d: Vec3) -> ActionCommand {
    ActionCommand::new(d, Vec3::zeros(), 0.0)
}

fn top(o: &PrivilegedObject) -> f64 {
    o.pose.position.z + o.half_extents.z
}

fn bottom(o: &PrivilegedObject) -> f64 {
    o.pose.position.z - o.half_extents.z
}

fn planar(a: Vec3, b: Vec3) -> f64 {
    a.planar_distance(b)
}

/// Axis-aligned half extents of an upright object's footprint.
fn aabb_half(o: &PrivilegedObject) -> (f64, f64) {
    match o.shape {
        Shape::Cylinder => (o.half_extents.x, o.half_extents.x),
        Shape::Box => {
            let (s, c) = o.pose.yaw().sin_cos();
            let (hx, hy) = (o.half_extents.x, o.half_extents.y);
            (c.abs() * hx + s.abs() * hy, s.abs() * hx + c.abs() * hy)
        }
    }
}

/// Travel height: clear of every object other than `skip`.
fn cruise_z(p: &Privileged, skip: &str) -> f64 {
    p.objects.iter().filter(|o| o.id != skip).map(top).fold(0.0, f64::max) + CLEARANCE
}

/// Approach `target` from above: rise to `cruise` if below it, travel at
/// (or descend towards) `cruise`, then drop onto the target.
fn approach(ee: Vec3, target: Vec3, cruise: f64) -> Vec3 {
    if planar(ee, target) <= ARRIVE {
        return target - ee;
    }
    if ee.z < cruise - ARRIVE {
        return Vector3::new(0.0, 0.0, cruise - ee.z);
    }
    Vector3::new(target.x - ee.x, target.y - ee.y, cruise - ee.z)
}

/// Steps that bring the gripper to `obj`'s grasp point and close on it.
fn grasp_step(p: &Privileged, obj: &PrivilegedObject) -> ActionCommand {
    let ee = p.ee_pose.position;
    if p.attached.is_some() || p.aperture < GRIP_THRESHOLD {
        // Holding the wrong thing or closed on nothing: let go and rise.
        return ActionCommand::new(Vector3::new(0.0, 0.0, 0.05), Vec3::zeros(), 1.0);
    }
    let g = Vector3::new(obj.pose.position.x, obj.pose.position.y, top(obj) + GRASP_HOVER);
    if (g - ee).norm() <= ARRIVE {
        return close();
    }
    translate(approach(ee, g, cruise_z(p, "").max(g.z)))
}

/// Goal planar position for the carried object and the height of the
/// surface it is released onto.
fn place_goal(kind: TaskKind, a: &PrivilegedObject, b: &PrivilegedObject) -> (f64, f64, f64) {
    let (bx, by) = (b.pose.position.x, b.pose.position.y);
    match kind {
        TaskKind::PutOn => (bx, by, top(b)),
        TaskKind::PutIn => {
            let depth = 2.0 * b.cavity_half_extents.map_or(0.0, |c| c.z);
            (bx, by, top(b) - depth)
        }
        _ => {
            // Beside B along the dominant axis towards A, NEAR_GAP apart.
            let (ax, ay) = (a.pose.position.x, a.pose.position.y);
            let (ahx, ahy) = aabb_half(a);
            let (bhx, bhy) = aabb_half(b);
            let (dx, dy) = (ax - bx, ay - by);
            if dx.abs() >= dy.abs() {
                (bx + dx.signum() * (ahx + bhx + NEAR_GAP), by, 0.0)
            } else {
                (bx, by + dy.signum() * (ahy + bhy + NEAR_GAP), 0.0)
            }
        }
    }
}

/// Carries the attached target to its goal and releases it.
fn place_step(kind: TaskKind, p: &Privileged, a: &PrivilegedObject, b: &PrivilegedObject) -> ActionCommand {
    let (gx, gy, surface) = place_goal(kind, a, b);
    let pos = a.pose.position;
    let here = Vector3::new(gx, gy, pos.z);
    let release_bottom = surface + RELEASE_GAP;
    let carry_bottom = cruise_z(p, &a.id);
    if planar(pos, here) > ARRIVE {
        if bottom(a) < carry_bottom - ARRIVE {
            return translate(Vector3::new(0.0, 0.0, carry_bottom - bottom(a)));
        }
        return translate(Vector3::new(gx - pos.x, gy - pos.y, 0.0));
    }
    let dz = release_bottom - bottom(a);
    if dz.abs() > ARRIVE {
        return translate(Vector3::new(gx - pos.x, gy - pos.y, dz));
    }
    open()
}

/// Ground-truth solver driven by privileged observations.
#[derive(Debug, Default)]
pub struct OraclePolicy {
    kind: Option<TaskKind>,
}

impl OraclePolicy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Infers the task from the instruction's verb phrase.
    fn infer_kind(instruction: &str) -> TaskKind {
        let s = format!(" {} ", instruction.to_ascii_lowercase());
        let has = |words: &[&str]| words.iter().any(|w| s.contains(w));
        if has(&[" into ", " in ", " inside "]) {
            TaskKind::PutIn
        } else if has(&[" near ", " next to ", " close to ", " beside ", " towards ", " toward ", " by ", " over to "]) {
            TaskKind::MoveNear
        } else if has(&[" on ", " onto ", " on top "]) {
            TaskKind::PutOn
        } else {
            TaskKind::PickUp
        }
    }

    pub fn plan(kind: TaskKind, p: &Privileged) -> ActionCommand {
        let Some(a) = p.with_role(Role::TargetA) else { return ActionCommand::default() };
        if p.attached.as_deref() != Some(a.id.as_str()) {
            return grasp_step(p, a);
        }
        match (kind, p.with_role(Role::TargetB)) {
            (TaskKind::PickUp, _) | (_, None) => translate(Vector3::new(0.0, 0.0, 0.05)),
            (kind, Some(b)) => place_step(kind, p, a, b),
        }
    }
}

impl Policy for OraclePolicy {
    fn name(&self) -> String {
        "builtin:oracle".into()
    }

    fn accepts_privileged(&self) -> bool {
        true
    }

    fn reset(&mut self, init: &InitMsg) -> Result<(), String> {
        self.kind = Some(Self::infer_kind(&init.instruction));
        Ok(())
    }

    fn act(&mut self, obs: &Observation) -> Result<ActionCommand, String> {
        let p = obs.privileged.as_ref().ok_or("oracle policy needs privileged observations")?;
        let kind = self.kind.unwrap_or_else(|| Self::infer_kind(&obs.instruction));
        Ok(Self::plan(kind, p))
    }
}

/// Grasps whichever graspable object is nearest the gripper at the first
/// step and lifts it, ignoring the instruction.
#[derive(Debug, Default)]
pub struct GreedyPolicy {
    choice: Option<String>,
}

impl GreedyPolicy {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Policy for GreedyPolicy {
    fn name(&self) -> String {
        "builtin:greedy".into()
    }

    fn accepts_privileged(&self) -> bool {
        true
    }

    fn reset(&mut self, _init: &InitMsg) -> Result<(), String> {
        self.choice = None;
        Ok(())
    }

    fn act(&mut self, obs: &Observation) -> Result<ActionCommand, String> {
        let p = obs.privileged.as_ref().ok_or("greedy policy needs privileged observations")?;
        let ee = p.ee_pose.position;
        if self.choice.is_none() {
            self.choice = p
                .objects
                .iter()
                .filter(|o| o.graspable)
                .map(|o| ((Vector3::new(o.pose.position.x, o.pose.position.y, top(o)) - ee).norm(), &o.id))
                .min_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(y.1)))
                .map(|(_, id)| id.clone());
        }
        let Some(obj) = self.choice.as_deref().and_then(|id| p.object(id)) else { return Ok(ActionCommand::default()) };
        if p.attached.as_deref() == Some(obj.id.as_str()) {
            return Ok(translate(Vector3::new(0.0, 0.0, 0.05)));
        }
        Ok(grasp_step(p, obj))
    }
}

/// Uniform deltas within the step clamps, seeded per episode.
#[derive(Debug)]
pub struct RandomPolicy {
    base_seed: u64,
    bounds: EpisodeConfig,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(base_seed: u64) -> Self {
        Self { base_seed, bounds: EpisodeConfig::default(), rng: ChaCha8Rng::seed_from_u64(base_seed) }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        format!("builtin:random:{}", self.base_seed)
    }

    fn reset(&mut self, init: &InitMsg) -> Result<(), String> {
        self.rng = ChaCha8Rng::seed_from_u64(self.base_seed ^ init.seed);
        Ok(())
    }

    fn act(&mut self, _obs: &Observation) -> Result<ActionCommand, String> {
        let t = self.bounds.max_translation / 3f64.sqrt();
        let r = self.bounds.max_rotation;
        let mut u = |m: f64| self.rng.random_range(-m..=m);
        let pos = Vector3::new(u(t), u(t), u(t));
        let rot = Vector3::new(u(r), u(r), u(r));
        Ok(ActionCommand::new(pos, rot, u(1.0)))
    }
}

/// Always returns the zero action.
#[derive(Debug, Default)]
pub struct EchoPolicy;

impl Policy for EchoPolicy {
    fn name(&self) -> String {
        "builtin:echo".into()
    }

    fn act(&mut self, _obs: &Observation) -> Result<ActionCommand, String> {
        Ok(ActionCommand::default())
    }
}
