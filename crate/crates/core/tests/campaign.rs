mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use scenefuzz::campaign::{
    emit_report, find_scene, read_records, results_files, run_campaign, CampaignConfig, CampaignError, EpisodeRecord,
    MutationInfo, Preset, RESULTS_FILE,
};
use scenefuzz::policy::{Builtin, Descriptor, Timeouts};
use scenefuzz::scene::TaskKind;
use scenefuzz::sim::{read_trace, EpisodeConfig, Termination};

fn cfg(root: &Path, preset: Preset, policy: Builtin) -> CampaignConfig {
    let mut c = CampaignConfig::new(root, preset, Descriptor::Builtin(policy));
    c.suite_size = 6;
    c.repeats = 2;
    c.seed = 17;
    c.workers = 2;
    c.episode = EpisodeConfig { max_steps: 60, ..Default::default() };
    c
}

fn all_records(root: &Path) -> Vec<EpisodeRecord> {
    results_files(root).iter().flat_map(|p| read_records(p).unwrap()).collect()
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    results_files(root).into_iter().map(|p| (p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap())).collect()
}

fn assert_monotone(records: &[EpisodeRecord]) {
    for r in records {
        assert!(r.result.is_monotone(), "{:?}", r.result);
    }
}

#[test]
fn resume_after_interruption_yields_the_same_results() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let c = cfg(root, Preset::Baseline, Builtin::Greedy);
    let first = run_campaign(&c).unwrap();
    assert_eq!(first.total, 4 * 6);
    assert_eq!(first.executed, first.total);
    let full = snapshot(root);

    // Simulate a crash: keep two complete lines and half of the third.
    for (rel, bytes) in &full {
        let text = String::from_utf8(bytes.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let cut = format!("{}\n{}\n{}", lines[0], lines[1], &lines[2][..lines[2].len() / 2]);
        fs::write(root.join(rel), cut).unwrap();
    }
    let resumed = run_campaign(&c).unwrap();
    assert_eq!(resumed.skipped, 4 * 2);
    assert_eq!(resumed.executed, 4 * 4);
    assert_eq!(snapshot(root), full);

    let again = run_campaign(&c).unwrap();
    assert_eq!((again.executed, again.skipped), (0, again.total));
    assert_eq!(snapshot(root), full);
    assert_monotone(&all_records(root));
}

#[test]
fn worker_count_does_not_change_the_report() {
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut reports = Vec::new();
    for (d, workers) in dirs.iter().zip([1, 8]) {
        let mut c = cfg(d.path(), Preset::Baseline, Builtin::Greedy);
        c.workers = workers;
        run_campaign(&c).unwrap();
        let r = emit_report(d.path()).unwrap();
        reports.push((r.markdown, r.csv, snapshot(d.path())));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn emit_report_is_pure() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut c = cfg(root, Preset::ConfoundSweep, Builtin::Greedy);
    c.tasks = vec![TaskKind::PickUp, TaskKind::PutOn];
    c.suite_size = 3;
    run_campaign(&c).unwrap();
    emit_report(root).unwrap();
    let read_all = || {
        let mut files: Vec<_> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_file()).collect();
        files.sort();
        files.into_iter().map(|p| (p.clone(), fs::read(p).unwrap())).collect::<Vec<_>>()
    };
    let a = read_all();
    assert!(a.iter().any(|(p, _)| p.ends_with("report.md")));
    assert!(a.iter().any(|(p, _)| p.ends_with("steps.csv")));
    emit_report(root).unwrap();
    assert_eq!(read_all(), a);
    let records = all_records(root);
    let groups: BTreeSet<&str> = records.iter().map(|r| r.group.as_str()).collect();
    assert_eq!(groups, ["n=0", "n=1", "n=2", "n=3", "n=4"].into_iter().collect());
    for r in &records {
        assert_eq!(format!("n={}", r.n_confound), r.group);
    }
}

#[test]
fn mutation_presets_reexecute_source_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut base = cfg(root, Preset::Baseline, Builtin::Oracle);
    base.tasks = vec![TaskKind::PickUp, TaskKind::PutIn];
    base.episode.max_steps = 120;
    run_campaign(&base).unwrap();
    let source = root.join("baseline");
    let baseline = all_records(&source);
    let passed: BTreeSet<_> = baseline.iter().filter(|r| r.result.success).map(|r| r.source_hash).collect();
    let all: BTreeSet<_> = baseline.iter().map(|r| r.source_hash).collect();

    for preset in [Preset::Lighting, Preset::Camera, Preset::Instruction] {
        let mut c = cfg(root, preset, Builtin::Oracle);
        c.tasks = base.tasks.clone();
        c.episode = base.episode.clone();
        c.source = Some(source.clone());
        let s = run_campaign(&c).unwrap();
        let recs = all_records(&root.join(preset.as_str()));
        assert_eq!(recs.len(), s.total);
        let expected = if preset == Preset::Instruction { &all } else { &passed };
        assert_eq!(s.total, expected.len() * 2, "{preset}");
        for r in &recs {
            assert!(expected.contains(&r.source_hash));
            assert!(r.repeat < 2);
            assert!(r.source_success.is_some());
            let m = r.mutation.as_ref().expect("mutation recorded");
            let (_, scene) = find_scene(root, r.result.scene_hash).unwrap();
            match (preset, m) {
                (Preset::Lighting, MutationInfo::Lighting { alpha, increase }) => {
                    assert!((1.0 / 20.0..=20.0).contains(alpha) && *alpha != 1.0);
                    assert_eq!(*increase, *alpha > 1.0);
                    assert_eq!(scene.lighting.intensity_scale, *alpha);
                }
                (Preset::Camera, MutationInfo::Camera(cm)) => {
                    assert!(cm.distance <= 0.05);
                    assert!(cm.rotation_delta.to_array().iter().all(|v| v.abs() <= 5f64.to_radians()));
                }
                (Preset::Instruction, MutationInfo::Instruction { instruction, .. }) => {
                    assert_eq!(&scene.task.instruction, instruction);
                }
                other => panic!("unexpected mutation {other:?}"),
            }
        }
        assert_monotone(&recs);
    }
    let report = emit_report(root).unwrap();
    assert!(report.csv.contains_key("mutation.csv"));
}

#[test]
fn mutation_of_an_all_failing_source_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut base = cfg(root, Preset::Baseline, Builtin::Echo);
    base.tasks = vec![TaskKind::MoveNear];
    base.episode.max_steps = 5;
    run_campaign(&base).unwrap();
    let mut c = cfg(root, Preset::Lighting, Builtin::Echo);
    c.tasks = base.tasks.clone();
    c.source = Some(root.join("baseline"));
    let s = run_campaign(&c).unwrap();
    assert_eq!(s.total, 0);
    assert!(all_records(&root.join("lighting")).is_empty());
    emit_report(root).unwrap();

    let mut missing = cfg(root, Preset::Camera, Builtin::Echo);
    missing.source = None;
    assert!(matches!(run_campaign(&missing), Err(CampaignError::MissingSource(Preset::Camera))));
}

#[test]
fn broken_policies_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for (i, script) in [
        "read l; echo garbage; cat >/dev/null",
        "read l; echo '{\"type\":\"init_ack\",\"protocol_version\":1,\"name\":\"x\"}'; read l; sleep 5",
        "exit 3",
    ]
    .into_iter()
    .enumerate()
    {
        let mut c = CampaignConfig::new(root.join(i.to_string()), Preset::Baseline, Descriptor::Command(script.into()));
        c.tasks = vec![TaskKind::PickUp];
        c.suite_size = 3;
        c.workers = 3;
        c.timeouts = Timeouts { handshake: std::time::Duration::from_millis(500), step: std::time::Duration::from_millis(200) };
        let s = run_campaign(&c).unwrap();
        assert_eq!((s.total, s.policy_errors), (3, 3), "{script}");
        let recs = all_records(&root.join(i.to_string()));
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| r.result.termination == Termination::PolicyError && r.result.error.is_some()));
        assert_monotone(&recs);
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_scenefuzz")).args(args).output().unwrap()
}

#[test]
fn cli_strict_mode_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("c");
    let root_s = root.to_str().unwrap();
    let base = ["run", "--preset", "baseline", "--tasks", "pick_up", "--suite-size", "3", "--root", root_s];

    let out = cli(&[&base[..], &["--policy", "cmd:exit 1", "--strict"]].concat());
    assert!(!out.status.success());
    let out = cli(&[&base[..], &["--policy", "cmd:exit 1", "--no-report"]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let root2 = dir.path().join("d");
    let out = cli(&["run", "--preset", "baseline", "--tasks", "put_on", "--suite-size", "2", "--root", root2.to_str().unwrap(), "--strict"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root2.join("report.md").exists());
    let recs = read_records(&root2.join("baseline/put_on").join(RESULTS_FILE)).unwrap();
    assert_eq!(recs.len(), 2);

    let trace = dir.path().join("t.jsonl");
    let hash = recs[0].result.scene_hash.to_string();
    let ppm = dir.path().join("frames");
    let out = cli(&["replay", &hash, "--root", root2.to_str().unwrap(), "--trace", trace.to_str().unwrap(), "--dump-ppm", ppm.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tr = read_trace(&trace).unwrap();
    assert_eq!(tr.header.scene_hash, recs[0].result.scene_hash);
    assert_eq!(tr.header.termination, recs[0].result.termination);
    assert_eq!(tr.frames.len() as u32, recs[0].result.steps + 1);
    assert!(ppm.join("frame_0000.ppm").exists());

    let out = cli(&["report", root2.to_str().unwrap()]);
    assert!(out.status.success());
    let out = cli(&["replay", "0000000000000000", "--root", root2.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn cli_gen_mutate_and_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("suite");
    let out = cli(&["gen", "--task", "put_in", "--count", "12", "--n-confound", "2", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scenes: Vec<_> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".scene.json"))
        .collect();
    assert_eq!(scenes.len(), 12);
    let mutated = dir.path().join("m.scene.json");
    let out = cli(&["mutate", scenes[0].to_str().unwrap(), "--op", "lighting-up", "--out", mutated.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = scenefuzz::scene::SceneConfig::load(&mutated).unwrap();
    assert!(m.lighting.intensity_scale > 1.0);
    let out = cli(&["coverage", "--dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("coverage"));
}
