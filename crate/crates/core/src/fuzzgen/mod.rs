//! Scene generation: semantically valid target selection, confounder
//! placement, lighting/camera/instruction mutation and suite deduplication.

mod deny;
mod mutate;
mod sampler;
mod suite;
mod templates;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scene::{
    CameraConfig, LightingConfig, ObjectDatabase, ObjectInstance, ObjectRecord, Role, SceneConfig, SceneMeta,
    TaskInstance, TaskKind, DEFAULT_TABLE_HALF_EXTENTS,
};
use crate::Vec3;

pub use deny::{semantic_valid, DenyEntry, DenyList};
pub use mutate::{apply_camera_mutation, camera_frames_table, mutate_camera, mutate_lighting, LightDirection};
pub use sampler::pose_sampler;
pub use suite::{derive_seed, write_suite, ManifestEntry, Suite, SuiteManifest};
pub use templates::{mutate_instruction, render_template, ParaphraseSet};

/// Pose-sampling attempts per object before generation fails.
pub const POSE_ATTEMPTS: usize = 1_000;
/// Target re-selection attempts before generation fails.
pub const SELECTION_ATTEMPTS: usize = 1_000;
/// Camera redraws before a framing failure is reported.
pub const CAMERA_ATTEMPTS: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("database has {have} records but the configuration needs {need}")]
    DatabaseTooSmall { have: usize, need: usize },
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
    #[error("no placement satisfying safe_dist after {0} attempts")]
    SamplerExhausted(usize),
    #[error("no semantically valid target selection after {0} attempts")]
    NoValidTargets(usize),
    #[error("mutated camera failed to frame the table after {0} attempts")]
    CameraFraming(usize),
    #[error("only {got} distinct scenes after {attempts} attempts (wanted {want})")]
    DedupExhausted { got: usize, want: usize, attempts: usize },
    #[error("no instruction template for task {0}")]
    MissingTemplate(TaskKind),
    #[error("bad template {template:?}: {reason}")]
    BadTemplate { template: String, reason: String },
    #[error("deny list references unknown object {0:?}")]
    UnknownDenied(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Number of confounders per scene: fixed, or drawn uniformly from a range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfoundCount {
    Fixed(usize),
    Uniform { min: usize, max: usize },
}

impl ConfoundCount {
    pub fn max(self) -> usize {
        match self {
            ConfoundCount::Fixed(n) => n,
            ConfoundCount::Uniform { max, .. } => max,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> usize {
        match self {
            ConfoundCount::Fixed(n) => n,
            ConfoundCount::Uniform { min, max } => rng.random_range(min..=max),
        }
    }
}

/// Lighting factor intervals: `decrease` is sampled as `[lo, hi)`,
/// `increase` as `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightingRange {
    pub decrease: [f64; 2],
    pub increase: [f64; 2],
}

impl Default for LightingRange {
    fn default() -> Self {
        Self { decrease: [1.0 / 20.0, 1.0], increase: [1.0, 20.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_confound: ConfoundCount,
    pub safe_dist: f64,
    pub lighting_flag: bool,
    pub camera_flag: bool,
    pub lighting_range: LightingRange,
    pub camera_rot_max_deg: f64,
    pub camera_trans_max_m: f64,
    pub seed: u64,
    pub table_half_extents: [f64; 2],
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_confound: ConfoundCount::Uniform { min: 0, max: 3 },
            safe_dist: 0.15,
            lighting_flag: false,
            camera_flag: false,
            lighting_range: LightingRange::default(),
            camera_rot_max_deg: 5.0,
            camera_trans_max_m: 0.05,
            seed: 0,
            table_half_extents: DEFAULT_TABLE_HALF_EXTENTS,
        }
    }
}

impl GeneratorConfig {
    pub fn n_target(kind: TaskKind) -> usize {
        kind.n_targets()
    }

    pub fn check(&self, db: &ObjectDatabase, kind: TaskKind) -> Result<(), GenError> {
        let need = Self::n_target(kind) + self.n_confound.max();
        if need > db.len() {
            return Err(GenError::DatabaseTooSmall { have: db.len(), need });
        }
        if let ConfoundCount::Uniform { min, max } = self.n_confound {
            if min > max {
                return Err(GenError::InvalidConfig(format!("confounder range {min}..={max} is empty")));
            }
        }
        if !(self.safe_dist > 0.0 && self.safe_dist.is_finite()) {
            return Err(GenError::InvalidConfig("safe_dist must be positive".into()));
        }
        let [hx, hy] = self.table_half_extents;
        if !(hx > 0.0 && hy > 0.0) {
            return Err(GenError::InvalidConfig("table half extents must be positive".into()));
        }
        let LightingRange { decrease: [dl, dh], increase: [il, ih] } = self.lighting_range;
        let legal = |v: f64| (1.0 / 20.0..=20.0).contains(&v);
        if !(legal(dl) && legal(dh) && legal(il) && legal(ih) && dl <= dh && dh <= 1.0 && il >= 1.0 && il <= ih) {
            return Err(GenError::InvalidConfig("lighting ranges must lie within [1/20, 1] and [1, 20]".into()));
        }
        if !(self.camera_rot_max_deg >= 0.0 && self.camera_trans_max_m >= 0.0) {
            return Err(GenError::InvalidConfig("camera mutation bounds must be non-negative".into()));
        }
        Ok(())
    }
}

/// Scene generator over one object database and its deny list.
#[derive(Debug, Clone, Copy)]
pub struct Generator<'a> {
    pub db: &'a ObjectDatabase,
    pub deny: &'a DenyList,
}

impl<'a> Generator<'a> {
    pub fn new(db: &'a ObjectDatabase, deny: &'a DenyList) -> Self {
        Self { db, deny }
    }

    /// Generates one scene from a scene-level seed; the seed is stored in the scene.
    pub fn generate_seeded(
        &self,
        kind: TaskKind,
        cfg: &GeneratorConfig,
        seed: u64,
        scene_id: impl Into<String>,
    ) -> Result<SceneConfig, GenError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scene = self.generate_scene(kind, cfg, &mut rng)?;
        scene.seed = seed;
        scene.scene_id = scene_id.into();
        Ok(scene)
    }

    /// Draws a complete scene: targets (re-drawn until semantically valid),
    /// confounders without replacement, then optional lighting and camera
    /// mutations of the defaults.
    pub fn generate_scene<R: Rng + ?Sized>(
        &self,
        kind: TaskKind,
        cfg: &GeneratorConfig,
        rng: &mut R,
    ) -> Result<SceneConfig, GenError> {
        cfg.check(self.db, kind)?;
        let records = self.db.records();
        let n_target = GeneratorConfig::n_target(kind);

        let mut order: Vec<usize> = (0..records.len()).collect();
        let mut selected = None;
        for _ in 0..SELECTION_ATTEMPTS {
            order.shuffle(rng);
            let targets: Vec<&ObjectRecord> = order[..n_target].iter().map(|&i| &records[i]).collect();
            if self.selection_valid(kind, &targets) {
                selected = Some(targets);
                break;
            }
        }
        let targets = selected.ok_or(GenError::NoValidTargets(SELECTION_ATTEMPTS))?;

        let mut objects: Vec<ObjectInstance> = Vec::new();
        let mut placed: Vec<Vec3> = Vec::new();
        for (rec, role) in targets.iter().zip([Role::TargetA, Role::TargetB]) {
            let pose = pose_sampler(&placed, rec.half_height(), cfg.safe_dist, cfg.table_half_extents, rng)?;
            placed.push(pose.position);
            objects.push(ObjectInstance { record_id: rec.id.clone(), pose, role });
        }

        let n_confound = cfg.n_confound.sample(rng);
        for &i in order[n_target..].iter().take(n_confound) {
            let rec = &records[i];
            let pose = pose_sampler(&placed, rec.half_height(), cfg.safe_dist, cfg.table_half_extents, rng)?;
            placed.push(pose.position);
            objects.push(ObjectInstance { record_id: rec.id.clone(), pose, role: Role::Confound });
        }

        let mut meta = SceneMeta { safe_dist: cfg.safe_dist, ..SceneMeta::default() };
        let mut lighting = LightingConfig::default();
        if cfg.lighting_flag {
            let direction = if rng.random_bool(0.5) { LightDirection::Increase } else { LightDirection::Decrease };
            lighting = mutate_lighting(direction, &cfg.lighting_range, rng);
            meta.lighting_alpha = Some(lighting.intensity_scale / LightingConfig::default().intensity_scale);
        }
        let mut camera = CameraConfig::default();
        if cfg.camera_flag {
            let (cam, mutation) = mutate_camera(&camera, cfg.camera_rot_max_deg, cfg.camera_trans_max_m, cfg.table_half_extents, rng)?;
            camera = cam;
            meta.camera_mutation = Some(mutation);
        }

        let a = targets[0];
        let b = targets.get(1).copied();
        let template = ParaphraseSet::standard_template(kind);
        let instruction = render_template(template, kind, &a.display_name, b.map(|r| r.display_name.as_str()))?;
        let task = TaskInstance {
            kind,
            instruction,
            target_a_id: a.id.clone(),
            target_b_id: b.map(|r| r.id.clone()),
        };

        Ok(SceneConfig {
            scene_id: String::new(),
            seed: 0,
            objects,
            lighting,
            camera,
            task,
            table_half_extents: cfg.table_half_extents,
            meta,
        })
    }

    /// Target selection must be semantically valid and the manipulated object graspable.
    fn selection_valid(&self, kind: TaskKind, targets: &[&ObjectRecord]) -> bool {
        let roles: Vec<(Role, &str)> = targets
            .iter()
            .zip([Role::TargetA, Role::TargetB])
            .map(|(r, role)| (role, r.id.as_str()))
            .collect();
        targets[0].graspable && semantic_valid(&roles, kind, self.deny)
    }
}
