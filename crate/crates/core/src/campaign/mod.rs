//! Campaign orchestration: presets, persistence, resume and reports.

mod report;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use report::{build_report, emit_report, fmt_pct, fmt_ratio, Report, COVERAGE_GRID, REPORT_MARKDOWN};

use crate::fuzzgen::{
    derive_seed, mutate_camera, mutate_instruction, mutate_lighting, ConfoundCount, DenyList, GenError, Generator,
    GeneratorConfig, LightDirection, ParaphraseSet, SuiteManifest,
};
use crate::metrics::MetricError;
use crate::oracle::{EpisodeResult, OracleState};
use crate::policy::{Descriptor, PolicyHandle, Timeouts, PROTOCOL_VERSION};
use crate::scene::{
    CameraMutation, LightingConfig, ObjectDatabase, Pool, Role, SceneConfig, SceneError, SceneHash, TaskKind, SCENE_SUFFIX,
};
use crate::sim::{run_episode, EpisodeConfig, SimError, Termination};

pub const RESULTS_FILE: &str = "results.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCENES_DIR: &str = "scenes";
/// Confounder counts of the sweep preset.
pub const CONFOUND_SWEEP: [usize; 5] = [0, 1, 2, 3, 4];
/// Group label of presets without sub-partitions.
pub const DEFAULT_GROUP: &str = "all";

const MUTATION_SALT: u64 = 0x6d75_7461_7465;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Baseline,
    ConfoundSweep,
    Lighting,
    Camera,
    Unseen,
    Instruction,
}

impl Preset {
    pub const ALL: [Preset; 6] =
        [Preset::Baseline, Preset::ConfoundSweep, Preset::Lighting, Preset::Camera, Preset::Unseen, Preset::Instruction];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Baseline => "baseline",
            Preset::ConfoundSweep => "confound_sweep",
            Preset::Lighting => "lighting",
            Preset::Camera => "camera",
            Preset::Unseen => "unseen",
            Preset::Instruction => "instruction",
        }
    }

    /// Presets that re-execute scenes of a prior campaign.
    pub fn needs_source(self) -> bool {
        matches!(self, Preset::Lighting | Preset::Camera | Preset::Instruction)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown preset {s:?} (expected one of baseline, confound_sweep, lighting, camera, unseen, instruction)"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("preset {0} requires a source campaign directory")]
    MissingSource(Preset),
    #[error("invalid campaign config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed record at {path}:{line}: {source}")]
    Parse { path: String, line: usize, source: serde_json::Error },
    #[error("results mix protocol versions {0:?}")]
    MixedProtocol(Vec<u32>),
    #[error("scene {0} not found")]
    SceneNotFound(SceneHash),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io { path: path.display().to_string(), source }
}

/// Mutation applied to a source scene for one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MutationInfo {
    Lighting { alpha: f64, increase: bool },
    Camera(CameraMutation),
    Instruction { template: String, instruction: String },
}

/// One persisted episode: the oracle result plus campaign bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub protocol_version: u32,
    pub preset: Preset,
    pub group: String,
    pub policy: String,
    pub task: TaskKind,
    /// Hash of the unmutated scene; with `repeat` and `policy` it keys the episode.
    pub source_hash: SceneHash,
    pub repeat: u32,
    pub seed: u64,
    pub n_confound: usize,
    /// A confounder shares a product family (cans, cubes) with a target.
    pub similar_confound: bool,
    pub target_xy: [f64; 2],
    pub table_half_extents: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<MutationInfo>,
    /// Success of the source episode, for presets that re-execute scenes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_success: Option<bool>,
    pub result: EpisodeResult,
}

impl EpisodeRecord {
    pub fn key(&self) -> (String, SceneHash, u32) {
        (self.policy.clone(), self.source_hash, self.repeat)
    }

    fn sort_key(&self) -> (TaskKind, &str, &str, SceneHash, u32) {
        (self.task, &self.group, &self.policy, self.source_hash, self.repeat)
    }
}

/// Suite and campaign parameters persisted next to each task's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignManifest {
    pub protocol_version: u32,
    pub preset: Preset,
    pub task: TaskKind,
    pub seed: u64,
    pub suite_size: usize,
    pub repeats: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub episode: EpisodeConfig,
    pub suites: Vec<SuiteManifest>,
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub root: PathBuf,
    pub preset: Preset,
    pub tasks: Vec<TaskKind>,
    /// Scenes per suite (per confounder count for the sweep).
    pub suite_size: usize,
    /// Re-executions per source scene for mutation presets.
    pub repeats: u32,
    pub policy: Descriptor,
    /// Overrides the descriptor's default privileged-observation mode.
    pub cheat_mode: Option<bool>,
    pub seed: u64,
    pub workers: usize,
    /// Prior campaign preset directory, e.g. `<root>/baseline`.
    pub source: Option<PathBuf>,
    /// Replaces the built-in object pools.
    pub custom_db: Option<(ObjectDatabase, DenyList)>,
    pub generator: GeneratorConfig,
    pub paraphrases: ParaphraseSet,
    pub episode: EpisodeConfig,
    pub timeouts: Timeouts,
}

impl CampaignConfig {
    pub fn new(root: impl Into<PathBuf>, preset: Preset, policy: Descriptor) -> Self {
        Self {
            root: root.into(),
            preset,
            tasks: TaskKind::ALL.to_vec(),
            suite_size: 100,
            repeats: 3,
            policy,
            cheat_mode: None,
            seed: 0,
            workers: 1,
            source: None,
            custom_db: None,
            generator: GeneratorConfig::default(),
            paraphrases: ParaphraseSet::builtin_paraphrases(),
            episode: EpisodeConfig::default(),
            timeouts: Timeouts::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let invalid = |m: &str| Err(CampaignError::Invalid(m.into()));
        if self.tasks.is_empty() {
            return invalid("at least one task kind is required");
        }
        if self.suite_size == 0 {
            return invalid("suite size must be at least 1");
        }
        if self.workers == 0 {
            return invalid("worker count must be at least 1");
        }
        if self.preset.needs_source() && self.repeats == 0 {
            return invalid("repeats must be at least 1");
        }
        if !self.episode.is_valid() {
            return invalid("episode config out of range");
        }
        if self.preset.needs_source() && self.source.is_none() {
            return Err(CampaignError::MissingSource(self.preset));
        }
        Ok(())
    }

    pub fn preset_dir(&self) -> PathBuf {
        self.root.join(self.preset.as_str())
    }

    fn cheat(&self) -> bool {
        self.cheat_mode.unwrap_or_else(|| self.policy.default_cheat_mode())
    }
}

/// Object pools available to a campaign.
#[derive(Debug, Clone)]
pub struct Databases {
    seen: ObjectDatabase,
    unseen: ObjectDatabase,
    custom: Option<(ObjectDatabase, DenyList)>,
}

impl Databases {
    pub fn new(custom: Option<(ObjectDatabase, DenyList)>) -> Self {
        Self { seen: ObjectDatabase::builtin_seen(), unseen: ObjectDatabase::builtin_unseen(), custom }
    }

    /// Database and deny list used to generate scenes from `pool`.
    pub fn for_generation(&self, pool: Pool) -> (ObjectDatabase, DenyList) {
        match (&self.custom, pool) {
            (Some(c), _) => c.clone(),
            (None, Pool::Seen) => (self.seen.clone(), DenyList::builtin(Pool::Seen)),
            (None, Pool::Unseen) => (self.unseen.clone(), DenyList::builtin(Pool::Unseen)),
        }
    }

    /// The database that resolves every object of `scene`.
    pub fn resolve(&self, scene: &SceneConfig) -> &ObjectDatabase {
        if let Some((db, _)) = &self.custom {
            return db;
        }
        if scene.objects.iter().all(|o| self.seen.contains(&o.record_id)) {
            &self.seen
        } else {
            &self.unseen
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub executed: usize,
    pub skipped: usize,
    pub policy_errors: usize,
    pub total: usize,
}

#[derive(Debug, Clone)]
struct Job {
    task: TaskKind,
    group: String,
    scene: SceneConfig,
    source_hash: SceneHash,
    repeat: u32,
    seed: u64,
    mutation: Option<MutationInfo>,
    source_success: Option<bool>,
}

fn family(id: &str) -> Option<&'static str> {
    if id.ends_with("_can") {
        Some("can")
    } else if id.ends_with("_cube") {
        Some("cube")
    } else {
        None
    }
}

/// Whether some confounder shares a product family with a target.
pub fn similar_confound(scene: &SceneConfig) -> bool {
    let targets: BTreeSet<&str> =
        scene.objects.iter().filter(|o| o.role != Role::Confound).filter_map(|o| family(&o.record_id)).collect();
    scene.with_role(Role::Confound).any(|o| family(&o.record_id).is_some_and(|f| targets.contains(f)))
}

fn task_index(task: TaskKind) -> u64 {
    TaskKind::ALL.iter().position(|&t| t == task).expect("task kind listed") as u64
}

fn task_dir(preset_dir: &Path, task: TaskKind) -> PathBuf {
    preset_dir.join(task.as_str())
}

/// Reads a results file; a truncated trailing line (interrupted write) is skipped.
pub fn read_records(path: &Path) -> Result<Vec<EpisodeRecord>, CampaignError> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>().map_err(io_err(path))?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(e) if i + 1 == lines.len() => log::warn!("{}: dropping truncated last record: {e}", path.display()),
            Err(source) => return Err(CampaignError::Parse { path: path.display().to_string(), line: i + 1, source }),
        }
    }
    Ok(out)
}

fn write_records(path: &Path, records: &[EpisodeRecord]) -> Result<(), CampaignError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    let tmp = path.with_extension("jsonl.tmp");
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn scene_path(dir: &Path, hash: SceneHash) -> PathBuf {
    dir.join(SCENES_DIR).join(format!("{hash}{SCENE_SUFFIX}"))
}

fn save_scene(dir: &Path, scene: &SceneConfig) -> Result<(), CampaignError> {
    let path = scene_path(dir, scene.hash());
    if !path.exists() {
        scene.save(&path)?;
    }
    Ok(())
}

/// Builds the episode list for the configured preset.
fn plan(cfg: &CampaignConfig, dbs: &Databases) -> Result<BTreeMap<TaskKind, (Vec<Job>, Vec<SuiteManifest>)>, CampaignError> {
    let mut out = BTreeMap::new();
    for &task in &cfg.tasks {
        let task_seed = derive_seed(cfg.seed, task_index(task));
        let mut jobs = Vec::new();
        let mut suites = Vec::new();
        match cfg.preset {
            Preset::Baseline | Preset::Unseen | Preset::ConfoundSweep => {
                let pool = if cfg.preset == Preset::Unseen { Pool::Unseen } else { Pool::Seen };
                let (db, deny) = dbs.for_generation(pool);
                let generator = Generator::new(&db, &deny);
                let variants: Vec<(String, ConfoundCount, u64)> = if cfg.preset == Preset::ConfoundSweep {
                    CONFOUND_SWEEP
                        .iter()
                        .map(|&n| (format!("n={n}"), ConfoundCount::Fixed(n), derive_seed(task_seed, n as u64 + 1)))
                        .collect()
                } else {
                    vec![(DEFAULT_GROUP.to_string(), cfg.generator.n_confound, task_seed)]
                };
                for (group, n_confound, seed) in variants {
                    let gcfg = GeneratorConfig { n_confound, seed, ..cfg.generator.clone() };
                    let suite = generator.generate_suite(task, &gcfg, cfg.suite_size)?;
                    for scene in suite.scenes {
                        let hash = scene.hash();
                        let seed = scene.seed;
                        jobs.push(Job {
                            task,
                            group: group.clone(),
                            scene,
                            source_hash: hash,
                            repeat: 0,
                            seed,
                            mutation: None,
                            source_success: None,
                        });
                    }
                    suites.push(suite.manifest);
                }
            }
            Preset::Lighting | Preset::Camera | Preset::Instruction => {
                let source = cfg.source.as_ref().ok_or(CampaignError::MissingSource(cfg.preset))?;
                let src_dir = task_dir(source, task);
                let policy = cfg.policy.to_string();
                let mut seen = HashSet::new();
                let mut sources = Vec::new();
                for r in read_records(&src_dir.join(RESULTS_FILE))? {
                    if r.policy != policy || r.repeat != 0 {
                        continue;
                    }
                    if cfg.preset != Preset::Instruction && !r.result.success {
                        continue;
                    }
                    if seen.insert(r.source_hash) {
                        let scene = SceneConfig::load(&scene_path(&src_dir, r.result.scene_hash))?;
                        sources.push((scene, r.source_hash, r.result.success));
                    }
                }
                if sources.is_empty() {
                    log::warn!("{} {task}: no eligible source scenes for policy {policy}", cfg.preset);
                }
                sources.sort_by_key(|s| s.1);
                for (scene, source_hash, source_success) in sources {
                    for repeat in 0..cfg.repeats {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scene.seed ^ MUTATION_SALT, repeat as u64));
                        let (mutated, mutation) = mutate_scene(cfg, dbs, &scene, &mut rng)?;
                        jobs.push(Job {
                            task,
                            group: DEFAULT_GROUP.to_string(),
                            scene: mutated,
                            source_hash,
                            repeat,
                            seed: derive_seed(scene.seed, repeat as u64 + 1),
                            mutation: Some(mutation),
                            source_success: Some(source_success),
                        });
                    }
                }
            }
        }
        out.insert(task, (jobs, suites));
    }
    Ok(out)
}

/// Applies the preset's mutation to a default-configured scene.
fn mutate_scene(
    cfg: &CampaignConfig,
    dbs: &Databases,
    scene: &SceneConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(SceneConfig, MutationInfo), CampaignError> {
    let mut out = scene.clone();
    let info = match cfg.preset {
        Preset::Lighting => {
            let increase = rng.random_bool(0.5);
            let dir = if increase { LightDirection::Increase } else { LightDirection::Decrease };
            out.lighting = mutate_lighting(dir, &cfg.generator.lighting_range, rng);
            let alpha = out.lighting.intensity_scale / LightingConfig::default().intensity_scale;
            out.meta.lighting_alpha = Some(alpha);
            MutationInfo::Lighting { alpha, increase }
        }
        Preset::Camera => {
            let (cam, m) = mutate_camera(
                &scene.camera,
                cfg.generator.camera_rot_max_deg,
                cfg.generator.camera_trans_max_m,
                scene.table_half_extents,
                rng,
            )?;
            out.camera = cam;
            out.meta.camera_mutation = Some(m.clone());
            MutationInfo::Camera(m)
        }
        Preset::Instruction => {
            let (task, template) = mutate_instruction(&scene.task, &cfg.paraphrases, dbs.resolve(scene), rng)?;
            out.task = task;
            out.meta.instruction_template = Some(template.clone());
            MutationInfo::Instruction { template, instruction: out.task.instruction.clone() }
        }
        p => return Err(CampaignError::Invalid(format!("preset {p} does not mutate scenes"))),
    };
    Ok((out, info))
}

fn record_for(preset: Preset, job: &Job, policy: &str, result: EpisodeResult) -> EpisodeRecord {
    let target = job.scene.target_a().map_or([0.0, 0.0], |o| [o.pose.position.x, o.pose.position.y]);
    EpisodeRecord {
        protocol_version: PROTOCOL_VERSION,
        preset,
        group: job.group.clone(),
        policy: policy.to_string(),
        task: job.task,
        source_hash: job.source_hash,
        repeat: job.repeat,
        seed: job.seed,
        n_confound: job.scene.with_role(Role::Confound).count(),
        similar_confound: similar_confound(&job.scene),
        target_xy: target,
        table_half_extents: job.scene.table_half_extents,
        mutation: job.mutation.clone(),
        source_success: job.source_success,
        result,
    }
}

fn run_job(
    cfg: &CampaignConfig,
    dbs: &Databases,
    handle: &mut Option<PolicyHandle>,
    job: &Job,
) -> Result<EpisodeRecord, CampaignError> {
    let policy = cfg.policy.to_string();
    if handle.as_ref().is_none_or(|h| !h.is_healthy()) {
        *handle = None;
        match PolicyHandle::start(&cfg.policy, cfg.cheat(), cfg.timeouts) {
            Ok(h) => *handle = Some(h),
            Err(e) => {
                log::warn!("failed to start policy {policy}: {e}");
                let r = OracleState::new(&job.scene.task).finish(
                    &job.scene.scene_id,
                    job.scene.hash(),
                    0,
                    Termination::PolicyError,
                    Some(e.to_string()),
                );
                return Ok(record_for(cfg.preset, job, &policy, r));
            }
        }
    }
    let h = handle.as_mut().expect("policy handle started");
    let (_, result) = run_episode(&job.scene, dbs.resolve(&job.scene), h, &cfg.episode, job.seed)?;
    if let Some(e) = &result.error {
        log::warn!("{} ({}): policy error: {e}", job.scene.scene_id, job.scene.hash());
    }
    Ok(record_for(cfg.preset, job, &policy, result))
}

/// Runs a campaign into `<root>/<preset>/<task>/`, skipping episodes already
/// recorded there. Results files are rewritten sorted on completion.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignSummary, CampaignError> {
    cfg.validate()?;
    let dbs = Databases::new(cfg.custom_db.clone());
    let planned = plan(cfg, &dbs)?;
    let preset_dir = cfg.preset_dir();
    let policy = cfg.policy.to_string();
    let mut summary = CampaignSummary::default();

    let mut pending: Vec<Job> = Vec::new();
    let mut existing: BTreeMap<TaskKind, Vec<EpisodeRecord>> = BTreeMap::new();
    for (&task, (jobs, suites)) in &planned {
        let dir = task_dir(&preset_dir, task);
        fs::create_dir_all(dir.join(SCENES_DIR)).map_err(io_err(&dir))?;
        let manifest = CampaignManifest {
            protocol_version: PROTOCOL_VERSION,
            preset: cfg.preset,
            task,
            seed: cfg.seed,
            suite_size: cfg.suite_size,
            repeats: if cfg.preset.needs_source() { cfg.repeats } else { 1 },
            source: cfg.source.as_ref().map(|p| p.display().to_string()),
            episode: cfg.episode.clone(),
            suites: suites.clone(),
        };
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n").map_err(io_err(&path))?;

        let records = read_records(&dir.join(RESULTS_FILE))?;
        let done: HashSet<_> = records.iter().map(EpisodeRecord::key).collect();
        for job in jobs {
            save_scene(&dir, &job.scene)?;
            if done.contains(&(policy.clone(), job.source_hash, job.repeat)) {
                summary.skipped += 1;
            } else {
                pending.push(job.clone());
            }
        }
        existing.insert(task, records);
    }

    let mut writers = BTreeMap::new();
    for &task in planned.keys() {
        let path = task_dir(&preset_dir, task).join(RESULTS_FILE);
        let f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        writers.insert(task, (path, f));
    }

    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let mut first_error = None;
    std::thread::scope(|s| {
        let (tx, rx) = mpsc::channel::<Result<EpisodeRecord, CampaignError>>();
        for _ in 0..cfg.workers.min(pending.len().max(1)) {
            let tx = tx.clone();
            let (pending, next, abort, dbs) = (&pending, &next, &abort, &dbs);
            s.spawn(move || {
                let mut handle = None;
                while !abort.load(Ordering::Relaxed) {
                    let Some(job) = pending.get(next.fetch_add(1, Ordering::Relaxed)) else { break };
                    let r = run_job(cfg, dbs, &mut handle, job);
                    if tx.send(r).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);
        for r in rx {
            match r {
                Ok(rec) => {
                    summary.executed += 1;
                    summary.policy_errors += (rec.result.termination == Termination::PolicyError) as usize;
                    let (path, f) = writers.get_mut(&rec.task).expect("writer per task");
                    let line = serde_json::to_string(&rec).expect("record serializes") + "\n";
                    if let Err(e) = f.write_all(line.as_bytes()).and_then(|_| f.flush()) {
                        first_error.get_or_insert(io_err(path)(e));
                        abort.store(true, Ordering::Relaxed);
                    }
                    existing.get_mut(&rec.task).expect("records per task").push(rec);
                }
                Err(e) => {
                    first_error.get_or_insert(e);
                    abort.store(true, Ordering::Relaxed);
                }
            }
        }
    });
    drop(writers);
    if let Some(e) = first_error {
        return Err(e);
    }

    for (task, mut records) in existing {
        let mut keys = HashSet::new();
        records.retain(|r| keys.insert(r.key()));
        records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        summary.total += records.len();
        write_records(&task_dir(&preset_dir, task).join(RESULTS_FILE), &records)?;
    }
    Ok(summary)
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = fs::read_dir(dir) else { return };
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        if p.is_dir() {
            walk(&p, out);
        } else {
            out.push(p);
        }
    }
}

/// All results files under a campaign root, in path order.
pub fn results_files(root: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    walk(root, &mut files);
    files.retain(|p| p.file_name().is_some_and(|n| n == RESULTS_FILE));
    files
}

/// Finds a scene by hash anywhere below `root`.
pub fn find_scene(root: &Path, hash: SceneHash) -> Result<(PathBuf, SceneConfig), CampaignError> {
    let mut files = Vec::new();
    walk(root, &mut files);
    let name = format!("{hash}{SCENE_SUFFIX}");
    if let Some(p) = files.iter().find(|p| p.file_name().is_some_and(|n| n.to_string_lossy() == name)) {
        return Ok((p.clone(), SceneConfig::load(p)?));
    }
    for p in files.iter().filter(|p| p.to_string_lossy().ends_with(SCENE_SUFFIX)) {
        if let Ok(scene) = SceneConfig::load(p) {
            if scene.hash() == hash {
                return Ok((p.clone(), scene));
            }
        }
    }
    Err(CampaignError::SceneNotFound(hash))
}

/// The first recorded episode of a scene (by executed-scene hash), if any.
pub fn find_record(root: &Path, hash: SceneHash) -> Result<Option<EpisodeRecord>, CampaignError> {
    for path in results_files(root) {
        if let Some(r) = read_records(&path)?.into_iter().find(|r| r.result.scene_hash == hash) {
            return Ok(Some(r));
        }
    }
    Ok(None)
}
