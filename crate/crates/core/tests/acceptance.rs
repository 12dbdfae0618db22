//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed.

mod common;

use std::collections::HashSet;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::stats_oracle;
use scenefuzz::campaign::{
    build_report, emit_report, find_scene, read_records, results_files, run_campaign, CampaignConfig, EpisodeRecord, Preset,
};
use scenefuzz::fuzzgen::{
    apply_camera_mutation, derive_seed, mutate_camera, mutate_lighting, ConfoundCount, DenyList, Generator, GeneratorConfig,
    LightDirection, LightingRange,
};
use scenefuzz::metrics::{diff_metric, mut_over_def, suite_coverage, transfer_rate, AggregateTable};
use scenefuzz::policy::{Builtin, Descriptor, PolicyHandle};
use scenefuzz::render::render_rgb;
use scenefuzz::scene::{CameraConfig, CameraMutation, LightingConfig, ObjectDatabase, Pool, TaskKind};
use scenefuzz::sim::{init_world, run_episode};
use scenefuzz::stats::{mann_whitney_u, paired_t};
use scenefuzz::Vector3;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get()).clamp(2, 8)
}

fn coverage() -> Outcome {
    let t0 = Instant::now();
    let (db, deny) = (ObjectDatabase::builtin(Pool::Seen), DenyList::builtin(Pool::Seen));
    let g = Generator::new(&db, &deny);
    let suites = 20u64;
    let mut summary = Vec::new();
    for (n, lo, hi) in [(10usize, 0.096 - 0.03, 0.096 + 0.03), (100, 0.634 - 0.05, 0.634 + 0.05), (1000, 0.995, 1.0)] {
        for (ti, kind) in TaskKind::ALL.into_iter().enumerate() {
            let mut total = 0.0;
            for s in 0..suites {
                let cfg = GeneratorConfig { seed: derive_seed(1000 * ti as u64 + n as u64, s), ..Default::default() };
                let suite = g.generate_suite(kind, &cfg, n).map_err(|e| e.to_string())?;
                total += suite_coverage(&suite.scenes, (10, 10)).map_err(|e| e.to_string())?.ratio;
            }
            let mean = total / suites as f64;
            check((lo..=hi).contains(&mean), format!("n={n} {kind}: mean coverage {mean:.4} outside [{lo:.3}, {hi:.3}]"))?;
            summary.push(format!("{mean:.3}"));
        }
    }
    let dt = t0.elapsed();
    check(dt < Duration::from_secs(10), format!("took {dt:?}"))?;
    Ok(format!("n=10/100/1000 x 4 tasks, {suites} suites each: [{}] in {dt:.2?}", summary.join(", ")))
}

fn generator_invariants() -> Outcome {
    let t0 = Instant::now();
    let (db, deny) = (ObjectDatabase::builtin(Pool::Seen), DenyList::builtin(Pool::Seen));
    let g = Generator::new(&db, &deny);
    let mut hashes = HashSet::new();
    let mut count = 0;
    for (ti, kind) in TaskKind::ALL.into_iter().enumerate() {
        let cfg = GeneratorConfig { seed: 7 + ti as u64, ..Default::default() };
        let suite = g.generate_suite(kind, &cfg, 2500).map_err(|e| e.to_string())?;
        for s in &suite.scenes {
            count += 1;
            check(hashes.insert(s.hash()), format!("duplicate hash {}", s.hash()))?;
            let mut ids = HashSet::new();
            for (i, a) in s.objects.iter().enumerate() {
                check(ids.insert(&a.record_id), format!("{}: repeated {}", s.scene_id, a.record_id))?;
                if matches!(kind, TaskKind::PutOn | TaskKind::PutIn) {
                    check(!deny.contains(kind, a.role, &a.record_id), format!("{}: deny-listed {}", s.scene_id, a.record_id))?;
                }
                for b in &s.objects[i + 1..] {
                    let d = a.pose.position.planar_distance(b.pose.position);
                    check(d >= 0.15, format!("{}: {} and {} only {d:.4} m apart", s.scene_id, a.record_id, b.record_id))?;
                }
            }
        }
    }
    let dt = t0.elapsed();
    check(count == 10_000, format!("generated {count}"))?;
    check(dt < Duration::from_secs(60), format!("took {dt:?}"))?;
    Ok(format!("{count} scenes, 0 violations, {} distinct hashes in {dt:.2?}", hashes.len()))
}

fn mutation_ranges() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let range = LightingRange::default();
    for i in 0..10_000 {
        let dir = if i % 2 == 0 { LightDirection::Increase } else { LightDirection::Decrease };
        let a = mutate_lighting(dir, &range, &mut rng).intensity_scale;
        let ok = match dir {
            LightDirection::Increase => a > 1.0 && a <= 20.0,
            LightDirection::Decrease => (1.0 / 20.0..1.0).contains(&a),
        };
        check(ok, format!("lighting draw {a} ({dir:?})"))?;
    }
    let base = CameraConfig::default();
    let limit = 5f64.to_radians();
    for _ in 0..10_000 {
        let (cam, m) = mutate_camera(&base, 5.0, 0.05, [0.4, 0.4], &mut rng).map_err(|e| e.to_string())?;
        let rot_ok = m.rotation_delta.to_array().iter().all(|r| r.abs() <= limit);
        let moved = (cam.position - base.position).norm();
        check(rot_ok && m.distance <= 0.05 && moved <= 0.05 + 1e-12, format!("camera draw {m:?}"))?;
    }

    // Identities on config and rendered buffer.
    let (db, deny) = (ObjectDatabase::builtin(Pool::Seen), DenyList::builtin(Pool::Seen));
    let cfg = GeneratorConfig { n_confound: ConfoundCount::Fixed(3), ..Default::default() };
    let scene = Generator::new(&db, &deny).generate_seeded(TaskKind::PutIn, &cfg, 99, "id").map_err(|e| e.to_string())?;
    let state = init_world(&scene, &db).map_err(|e| e.to_string())?;
    let buf = render_rgb(&state, &scene);
    let unit = LightingRange { decrease: [1.0, 1.0], increase: [1.0, 1.0] };
    let mut lit = scene.clone();
    lit.lighting = mutate_lighting(LightDirection::Increase, &unit, &mut rng);
    check(lit.lighting == LightingConfig::default() && lit == scene, "alpha=1 changed the config".into())?;
    check(render_rgb(&state, &lit) == buf, "alpha=1 changed the buffer".into())?;
    let zero = CameraMutation { rotation_delta: Vector3::zeros(), direction: Vector3::new(1.0, 0.0, 0.0), distance: 0.0 };
    let mut moved = scene.clone();
    moved.camera = apply_camera_mutation(&scene.camera, &zero);
    check(moved == scene, "zero camera delta changed the config".into())?;
    check(render_rgb(&state, &moved) == buf, "zero camera delta changed the buffer".into())?;
    Ok("10000 lighting + 10000 camera draws in range; alpha=1 and zero-delta are identities".into())
}

fn metric_oracles() -> Outcome {
    let close = |got: f64, want: f64, tol: f64, what: &str| check((got - want).abs() <= tol, format!("{what}: {got} vs {want}"));
    // Task 1 step averages (grasp, lift, success).
    let tr: Vec<f64> = transfer_rate(&[0.233, 0.157, 0.128]).into_iter().map(|t| t.unwrap_or(f64::NAN)).collect();
    close(tr[0], 0.233, 1e-12, "Tr1")?;
    close(tr[1], 0.674, 0.001, "Tr2")?;
    close(tr[2], 0.815, 0.001, "Tr3")?;

    // Seen / unseen averages per task and the tabulated differences.
    let table = [(12.8, 3.3, -74.2), (6.0, 2.0, -66.7), (1.2, 0.4, -66.7), (0.5, 0.4, -20.0)];
    let mut diffs = Vec::new();
    for (seen, unseen, want) in table {
        let d = diff_metric(seen, unseen).ok_or("undefined diff")? * 100.0;
        close(d, want, 0.5, "diff")?;
        diffs.push(format!("{d:.1}%"));
    }
    check(diff_metric(0.0, 0.1).is_none(), "diff from a zero baseline must be undefined".into())?;

    // Per-task default passes and mean mutated passes; totals are summed from the task columns.
    let lighting = [(895.0, 404.0), (423.0, 403.0), (79.0, 54.7), (37.0, 16.7)];
    let camera = [(895.0, 366.3), (423.0, 113.9), (79.0, 6.4), (37.0, 1.6)];
    let ratio = |rows: &[(f64, f64)]| {
        let def: f64 = rows.iter().map(|r| r.0).sum();
        let mutated: f64 = rows.iter().map(|r| r.1).sum();
        mut_over_def(def, &[mutated]).map(|r| r * 100.0)
    };
    let l = ratio(&lighting).ok_or("undefined lighting ratio")?;
    let c = ratio(&camera).ok_or("undefined camera ratio")?;
    check(format!("{l:.1}") == "61.3", format!("lighting totals {l}"))?;
    check(format!("{c:.1}") == "34.0", format!("camera totals {c}"))?;
    // Three repeats averaging to the tabulated mean give the same ratio.
    let three = mut_over_def(217.0, &[169.0, 168.0, 170.0]).unwrap() * 100.0;
    check(format!("{three:.1}") == "77.9", format!("per-repeat mean {three}"))?;
    Ok(format!("Tr=({:.3}, {:.3}, {:.3}); diffs [{}]; lighting {l:.1}%, camera {c:.1}%", tr[0], tr[1], tr[2], diffs.join(", ")))
}

fn oracle_end_to_end(root: &Path) -> Outcome {
    let t0 = Instant::now();
    let mut cfg = CampaignConfig::new(root, Preset::Baseline, Descriptor::Builtin(Builtin::Oracle));
    cfg.suite_size = 100;
    cfg.seed = 2024;
    cfg.workers = workers();
    cfg.generator.n_confound = ConfoundCount::Fixed(0);
    let summary = run_campaign(&cfg).map_err(|e| e.to_string())?;
    check(summary.total == 400 && summary.policy_errors == 0, format!("{summary:?}"))?;

    let mut rates = Vec::new();
    let mut replayed = 0;
    let dbs = scenefuzz::campaign::Databases::new(None);
    for path in results_files(&cfg.preset_dir()) {
        let records = read_records(&path).map_err(|e| e.to_string())?;
        let task = records.first().ok_or("empty results")?.task;
        let ok = records.iter().filter(|r| r.result.success).count();
        let rate = ok as f64 / records.len() as f64;
        check(records.len() == 100 && rate >= 0.9, format!("{task}: {ok}/{} succeeded", records.len()))?;
        rates.push(format!("{task} {:.0}%", rate * 100.0));
        // Every failure, plus one success per task so the path is exercised either way.
        for r in records.iter().filter(|r| !r.result.success).chain(records.first()) {
            let (_, scene) = find_scene(root, r.result.scene_hash).map_err(|e| e.to_string())?;
            let mut h = PolicyHandle::in_process(Builtin::Oracle.instantiate(), true);
            let (_, again) = run_episode(&scene, dbs.resolve(&scene), &mut h, &cfg.episode, r.seed).map_err(|e| e.to_string())?;
            check(again == r.result, format!("replay of {} diverged", r.result.scene_hash))?;
            replayed += 1;
        }
    }
    let dt = t0.elapsed();
    check(rates.len() == 4, format!("{} task result files", rates.len()))?;
    check(dt < Duration::from_secs(300), format!("took {dt:?}"))?;
    Ok(format!("{}; {replayed} episodes (all failures + 1 per task) replayed from hash identically; {dt:.2?}", rates.join(", ")))
}

fn greedy_report(root: &Path, workers: usize) -> Result<(String, Vec<(String, String)>), String> {
    let mut cfg = CampaignConfig::new(root, Preset::Baseline, Descriptor::Builtin(Builtin::Greedy));
    cfg.suite_size = 40;
    cfg.seed = 31;
    cfg.workers = workers;
    run_campaign(&cfg).map_err(|e| e.to_string())?;
    let mut sweep = CampaignConfig::new(root, Preset::ConfoundSweep, Descriptor::Builtin(Builtin::Greedy));
    sweep.suite_size = 8;
    sweep.seed = 31;
    sweep.workers = workers;
    run_campaign(&sweep).map_err(|e| e.to_string())?;
    emit_report(root).map_err(|e| e.to_string())?;
    let md = std::fs::read_to_string(root.join("report.md")).map_err(|e| e.to_string())?;
    let mut csv: Vec<(String, String)> = std::fs::read_dir(root)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    csv.sort();
    Ok((md, csv))
}

fn determinism(one: &Path, many: &Path) -> Outcome {
    let a = greedy_report(one, 1)?;
    let b = greedy_report(many, 8)?;
    check(!a.1.is_empty(), "no csv written".into())?;
    check(a == b, "reports differ between 1 and 8 workers".into())?;
    Ok(format!("report.md + {} csv files byte-identical for 1 and 8 workers", a.1.len()))
}

fn monotonicity(roots: &[&Path]) -> Outcome {
    let mut records: Vec<EpisodeRecord> = Vec::new();
    for root in roots {
        for p in results_files(root) {
            records.extend(read_records(&p).map_err(|e| e.to_string())?);
        }
    }
    check(!records.is_empty(), "no results".into())?;
    for r in &records {
        check(r.result.is_monotone(), format!("non-monotone episode {}", r.result.scene_hash))?;
    }
    let table = AggregateTable::from_results(records.iter().map(|r| (r.policy.as_str(), &r.result))).map_err(|e| e.to_string())?;
    table.check().map_err(|e| e.to_string())?;
    build_report(&records).map_err(|e| e.to_string())?;
    Ok(format!("{} episodes in {} (policy, task) partitions ordered", records.len(), table.rows.len()))
}

fn statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let draw = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let tied = rng.random_bool(0.5);
        (0..n).map(|_| if tied { rng.random_range(0..4) as f64 } else { rng.random_range(-5.0..5.0) }).collect()
    };
    let (mut n_mwu, mut n_t, mut worst) = (0, 0, 0.0f64);
    for na in 1..=8 {
        for nb in 1..=8 {
            for _ in 0..12 {
                let a = draw(na, &mut rng);
                let b = draw(nb, &mut rng);
                let got = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
                let (u, p) = stats_oracle::mann_whitney(&a, &b);
                check((got.u - u).abs() <= 1e-9, format!("U {a:?} {b:?}"))?;
                match (got.p, p) {
                    (Some(x), Some(y)) => {
                        worst = worst.max((x - y).abs());
                        check((x - y).abs() <= 1e-9, format!("MWU p {x} vs {y} for {a:?} {b:?}"))?
                    }
                    (None, None) => {}
                    _ => return Err(format!("MWU p definedness differs for {a:?} {b:?}")),
                }
                n_mwu += 1;
            }
        }
    }
    for n in 2..=8 {
        for _ in 0..60 {
            let a = draw(n, &mut rng);
            let b = draw(n, &mut rng);
            let got = paired_t(&a, &b).map_err(|e| e.to_string())?;
            match stats_oracle::paired_t(&a, &b) {
                Some((t, p, d)) => {
                    let (gt, gp, gd) = (got.t.unwrap(), got.p.unwrap(), got.cohen_d.unwrap());
                    worst = worst.max((gp - p).abs());
                    check((gt - t).abs() <= 1e-9 * t.abs().max(1.0), format!("t {gt} vs {t}"))?;
                    check((gp - p).abs() <= 1e-9, format!("paired p {gp} vs {p} for {a:?} {b:?}"))?;
                    check((gd - d).abs() <= 1e-9 * d.abs().max(1.0), format!("d {gd} vs {d}"))?;
                }
                None => check(got.p.is_none(), "zero-variance p must be undefined".into())?,
            }
            n_t += 1;
        }
    }
    Ok(format!("{n_mwu} rank-test pairs, {n_t} paired samples; max |dp| = {worst:.1e}"))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let oracle_root = tmp.path().join("oracle");
    let greedy_1 = tmp.path().join("greedy-1");
    let greedy_8 = tmp.path().join("greedy-8");

    let mut results: Vec<(&str, Outcome)> = vec![
        ("trajectory coverage", coverage()),
        ("generator invariants", generator_invariants()),
        ("mutation ranges", mutation_ranges()),
        ("metric oracles", metric_oracles()),
        ("oracle policy end-to-end", oracle_end_to_end(&oracle_root)),
        ("determinism", determinism(&greedy_1, &greedy_8)),
    ];
    results.push(("step monotonicity", monotonicity(&[&oracle_root, &greedy_1, &greedy_8])));
    results.push(("statistics", statistics()));

    let mut failed = 0;
    println!("acceptance criteria:");
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
