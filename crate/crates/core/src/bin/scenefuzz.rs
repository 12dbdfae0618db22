use std::io::{self, BufReader};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scenefuzz::campaign::{self, CampaignConfig, Databases, Preset};
use scenefuzz::fuzzgen::{
    derive_seed, mutate_camera, mutate_instruction, mutate_lighting, write_suite, ConfoundCount, DenyList, Generator,
    GeneratorConfig, LightDirection, ParaphraseSet,
};
use scenefuzz::metrics::{suite_coverage, trajectory_coverage};
use scenefuzz::policy::{serve_lines, serve_tcp, Builtin, Descriptor, PolicyHandle, Timeouts};
use scenefuzz::render::observe;
use scenefuzz::scene::{LightingConfig, ObjectDatabase, Pool, SceneConfig, SceneHash, TaskKind, SCENE_SUFFIX};
use scenefuzz::sim::{init_world, run_episode, write_trace, EpisodeConfig, Termination, TRACE_SUFFIX};

#[derive(Parser)]
#[command(name = "scenefuzz", version, about = "Generation-based scene fuzzing for tabletop manipulation policies")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Concurrent episode workers.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Policy descriptor: builtin:oracle|greedy|random[:SEED]|echo, cmd:<command>, tcp:<host>:<port>.
    #[arg(long, global = true, default_value = "builtin:oracle")]
    policy: Descriptor,
    /// Object database: `seen`, `unseen`, or a JSON file.
    #[arg(long, global = true)]
    db: Option<String>,
    /// Deny list for a custom database.
    #[arg(long, global = true)]
    deny: Option<PathBuf>,
    /// Send privileged ground truth to the policy (default: on for oracle and greedy).
    #[arg(long, global = true)]
    cheat: Option<bool>,
    /// Fail when any episode ends in a policy error.
    #[arg(long, global = true)]
    strict: bool,
    /// Write every observation as a PPM image into this directory (replay only).
    #[arg(long, global = true)]
    dump_ppm: Option<PathBuf>,
    /// Seconds to wait for each policy reply.
    #[arg(long, global = true, default_value_t = 30.0)]
    step_timeout: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene suite.
    Gen {
        #[arg(long)]
        task: TaskKind,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Fixed confounder count (default: uniform 0..=3).
        #[arg(long)]
        n_confound: Option<usize>,
        /// Also mutate lighting of each scene.
        #[arg(long)]
        lighting: bool,
        /// Also mutate the camera of each scene.
        #[arg(long)]
        camera: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a campaign preset.
    Run {
        #[arg(long)]
        preset: Preset,
        /// Task kinds (default: all four).
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<TaskKind>,
        #[arg(long, default_value_t = 100)]
        suite_size: usize,
        #[arg(long, default_value_t = 3)]
        repeats: u32,
        /// Prior preset directory whose scenes are re-executed.
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long, default_value = "campaign")]
        root: PathBuf,
        #[arg(long)]
        max_steps: Option<u32>,
        /// Skip writing the report after the run.
        #[arg(long)]
        no_report: bool,
    },
    /// Mutate one scene file.
    Mutate {
        scene: PathBuf,
        #[arg(long)]
        op: MutationOp,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit Markdown and CSV reports for a campaign root.
    Report {
        #[arg(default_value = "campaign")]
        root: PathBuf,
    },
    /// Trajectory coverage of a scene directory, or of freshly generated suites.
    Coverage {
        /// Directory of scene files.
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long, default_value = "pick_up")]
        task: TaskKind,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        suites: usize,
        #[arg(long, default_value_t = 10)]
        grid: usize,
    },
    /// Re-run one scene by hash and write its trace.
    Replay {
        hash: SceneHash,
        #[arg(long, default_value = "campaign")]
        root: PathBuf,
        /// Trace output path (default: <hash>.trace.jsonl).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        max_steps: Option<u32>,
    },
    /// Host a built-in policy over stdio or TCP.
    ServePolicy {
        #[arg(long, default_value = "builtin:echo")]
        builtin: Descriptor,
        /// Listen address; stdio when absent.
        #[arg(long)]
        tcp: Option<String>,
        /// Stop after this many TCP connections.
        #[arg(long)]
        max_connections: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationOp {
    LightingUp,
    LightingDown,
    Camera,
    Instruction,
}

fn load_custom_db(g: &Global) -> Result<Option<(ObjectDatabase, DenyList)>> {
    match g.db.as_deref() {
        None | Some("seen") | Some("unseen") => Ok(None),
        Some(path) => {
            let db = ObjectDatabase::load(Path::new(path)).with_context(|| format!("loading object database {path}"))?;
            let deny = match &g.deny {
                Some(p) => DenyList::load(p)?,
                None => DenyList::default(),
            };
            deny.check(&db)?;
            Ok(Some((db, deny)))
        }
    }
}

fn generation_pool(g: &Global) -> Pool {
    if g.db.as_deref() == Some("unseen") {
        Pool::Unseen
    } else {
        Pool::Seen
    }
}

fn episode_config(max_steps: Option<u32>) -> EpisodeConfig {
    let mut cfg = EpisodeConfig::default();
    if let Some(m) = max_steps {
        cfg.max_steps = m;
    }
    cfg
}

fn timeouts(g: &Global) -> Timeouts {
    Timeouts { step: std::time::Duration::from_secs_f64(g.step_timeout), ..Timeouts::default() }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let g = &cli.global;
    match cli.command {
        Command::Gen { task, count, n_confound, lighting, camera, out } => {
            let dbs = Databases::new(load_custom_db(g)?);
            let (db, deny) = dbs.for_generation(generation_pool(g));
            let cfg = GeneratorConfig {
                n_confound: n_confound.map_or(GeneratorConfig::default().n_confound, ConfoundCount::Fixed),
                lighting_flag: lighting,
                camera_flag: camera,
                seed: g.seed,
                ..GeneratorConfig::default()
            };
            let suite = Generator::new(&db, &deny).generate_suite(task, &cfg, count)?;
            write_suite(&out, &suite)?;
            println!("wrote {} scenes to {}", suite.scenes.len(), out.display());
        }
        Command::Run { preset, tasks, suite_size, repeats, source, root, max_steps, no_report } => {
            let mut cfg = CampaignConfig::new(&root, preset, g.policy.clone());
            if !tasks.is_empty() {
                cfg.tasks = tasks;
            }
            cfg.suite_size = suite_size;
            cfg.repeats = repeats;
            cfg.source = source;
            cfg.seed = g.seed;
            cfg.workers = g.workers;
            cfg.cheat_mode = g.cheat;
            cfg.custom_db = load_custom_db(g)?;
            cfg.episode = episode_config(max_steps);
            cfg.timeouts = timeouts(g);
            let summary = campaign::run_campaign(&cfg)?;
            println!(
                "{preset}: executed {} episodes, skipped {} already recorded, {} policy errors, {} total",
                summary.executed, summary.skipped, summary.policy_errors, summary.total
            );
            if !no_report {
                campaign::emit_report(&root)?;
                println!("report written to {}", root.join(campaign::REPORT_MARKDOWN).display());
            }
            if g.strict && summary.policy_errors > 0 {
                bail!("{} episodes ended in policy errors", summary.policy_errors);
            }
        }
        Command::Mutate { scene, op, out } => {
            let base = SceneConfig::load(&scene)?;
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            let mut mutated = base.clone();
            let range = GeneratorConfig::default().lighting_range;
            match op {
                MutationOp::LightingUp | MutationOp::LightingDown => {
                    let dir = if matches!(op, MutationOp::LightingUp) { LightDirection::Increase } else { LightDirection::Decrease };
                    mutated.lighting = mutate_lighting(dir, &range, &mut rng);
                    mutated.meta.lighting_alpha =
                        Some(mutated.lighting.intensity_scale / LightingConfig::default().intensity_scale);
                }
                MutationOp::Camera => {
                    let d = GeneratorConfig::default();
                    let (cam, m) =
                        mutate_camera(&base.camera, d.camera_rot_max_deg, d.camera_trans_max_m, base.table_half_extents, &mut rng)?;
                    mutated.camera = cam;
                    mutated.meta.camera_mutation = Some(m);
                }
                MutationOp::Instruction => {
                    let dbs = Databases::new(load_custom_db(g)?);
                    let (task, template) =
                        mutate_instruction(&base.task, &ParaphraseSet::builtin_paraphrases(), dbs.resolve(&base), &mut rng)?;
                    mutated.task = task;
                    mutated.meta.instruction_template = Some(template);
                }
            }
            mutated.save(&out)?;
            println!("{} -> {} ({})", base.hash(), mutated.hash(), out.display());
        }
        Command::Report { root } => {
            let report = campaign::emit_report(&root)?;
            print!("{}", report.markdown);
        }
        Command::Coverage { dir, task, count, suites, grid } => {
            let grid = (grid, grid);
            if let Some(dir) = dir {
                let mut scenes = Vec::new();
                for entry in std::fs::read_dir(&dir)? {
                    let p = entry?.path();
                    if p.to_string_lossy().ends_with(SCENE_SUFFIX) {
                        scenes.push(SceneConfig::load(&p)?);
                    }
                }
                let c = suite_coverage(&scenes, grid)?;
                println!("{} scenes: {}/{} cells, coverage {:.3}", scenes.len(), c.covered, c.total(), c.ratio);
            } else {
                let dbs = Databases::new(load_custom_db(g)?);
                let (db, deny) = dbs.for_generation(generation_pool(g));
                let generator = Generator::new(&db, &deny);
                let mut sum = 0.0;
                for i in 0..suites {
                    let cfg = GeneratorConfig { seed: derive_seed(g.seed, i as u64), ..GeneratorConfig::default() };
                    let suite = generator.generate_suite(task, &cfg, count)?;
                    let pts: Vec<(f64, f64)> = suite
                        .scenes
                        .iter()
                        .filter_map(|s| s.target_a().map(|o| (o.pose.position.x, o.pose.position.y)))
                        .collect();
                    sum += trajectory_coverage(&pts, grid, cfg.table_half_extents)?.ratio;
                }
                println!("{suites} suites of {count} scenes: mean coverage {:.3}", sum / suites.max(1) as f64);
            }
        }
        Command::Replay { hash, root, trace, max_steps } => {
            let (path, scene) = campaign::find_scene(&root, hash)?;
            let record = campaign::find_record(&root, hash)?;
            let seed = record.as_ref().map_or(scene.seed, |r| r.seed);
            let dbs = Databases::new(load_custom_db(g)?);
            let db = dbs.resolve(&scene);
            let cheat = g.cheat.unwrap_or_else(|| g.policy.default_cheat_mode());
            let mut handle = PolicyHandle::start(&g.policy, cheat, timeouts(g))?;
            let cfg = episode_config(max_steps);
            let (tr, result) = run_episode(&scene, db, &mut handle, &cfg, seed)?;
            let out = trace.unwrap_or_else(|| PathBuf::from(format!("{hash}{TRACE_SUFFIX}")));
            write_trace(&out, &tr)?;
            if let Some(dir) = &g.dump_ppm {
                std::fs::create_dir_all(dir)?;
                let mut state = init_world(&scene, db)?;
                observe(&state, &scene, false).write_ppm(&dir.join("frame_0000.ppm"))?;
                for f in tr.frames.iter().skip(1) {
                    if let Some(a) = &f.applied {
                        state.apply(a, &cfg)?;
                    }
                    observe(&state, &scene, false).write_ppm(&dir.join(format!("frame_{:04}.ppm", f.frame)))?;
                }
            }
            println!("scene {} ({})", hash, path.display());
            println!("{}", serde_json::to_string_pretty(&result)?);
            println!("trace written to {}", out.display());
            if g.strict && result.termination == Termination::PolicyError {
                bail!("episode ended in a policy error");
            }
        }
        Command::ServePolicy { builtin, tcp, max_connections } => {
            let Descriptor::Builtin(b) = builtin else { bail!("serve-policy hosts built-in policies only") };
            match tcp {
                None => serve_lines(BufReader::new(io::stdin()), io::stdout(), b.instantiate())?,
                Some(addr) => {
                    let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
                    eprintln!("listening on {}", listener.local_addr()?);
                    serve_tcp(listener, move || Builtin::instantiate(b), max_connections)?;
                }
            }
        }
    }
    Ok(())
}
