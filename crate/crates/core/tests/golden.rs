mod common;

use std::path::PathBuf;

use common::{seen, small_scene};
use scenefuzz::policy::{serve_lines, Builtin, InProcess, Message, PolicyHandle, PolicyServer, Recording, Timeouts, TransportKind};
use scenefuzz::scene::TaskKind;
use scenefuzz::sim::{run_episode, EpisodeConfig, Termination};

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_transcript.txt")
}

/// Echo session on a 32x32 scene, three steps.
fn transcript() -> Vec<String> {
    let (db, _) = seen();
    let scene = small_scene(TaskKind::PickUp, 2024, 1, 32);
    let rec = Recording::new(InProcess::new(PolicyServer::new(Builtin::Echo.instantiate())));
    let log = rec.log.clone();
    let mut h = PolicyHandle::with_transport(Box::new(rec), TransportKind::InProcess, "builtin:echo".into(), false, Timeouts::default());
    let cfg = EpisodeConfig { max_steps: 3, ..Default::default() };
    let (_, result) = run_episode(&scene, &db, &mut h, &cfg, 7).unwrap();
    assert_eq!(result.termination, Termination::MaxSteps);
    let lines = log.lock().unwrap().clone();
    lines
}

#[test]
fn transcript_matches_golden() {
    let got = transcript().join("\n") + "\n";
    let path = golden_path();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &got).unwrap();
    }
    let want = std::fs::read_to_string(&path).expect("golden transcript present; regenerate with UPDATE_GOLDEN=1");
    assert_eq!(got, want);
}

#[test]
fn golden_transcript_is_valid_protocol() {
    let text = std::fs::read_to_string(golden_path()).unwrap();
    let mut sent = Vec::new();
    let mut replies = Vec::new();
    let mut kinds = Vec::new();
    for line in text.lines() {
        let (dir, body) = line.split_at(2);
        let msg = Message::from_line(body).unwrap();
        // Every line is the canonical serialization of its message.
        assert_eq!(msg.to_line(), body);
        kinds.push(format!("{}{}", dir.trim(), msg.kind()));
        match dir {
            "> " => sent.push(body.to_string()),
            "< " => replies.push(body.to_string()),
            _ => panic!("bad direction prefix in {line:?}"),
        }
    }
    assert_eq!(
        kinds,
        [">init", "<init_ack", ">observe", "<act", ">observe", "<act", ">observe", "<act", ">done"]
    );

    // Replaying the framework side through the line server reproduces the policy side.
    let input = sent.join("\n") + "\n";
    let mut out = Vec::new();
    serve_lines(input.as_bytes(), &mut out, Builtin::Echo.instantiate()).unwrap();
    let served: Vec<String> = String::from_utf8(out).unwrap().lines().map(String::from).collect();
    assert_eq!(served, replies);
}
