#![allow(dead_code)]

use scenefuzz::fuzzgen::{ConfoundCount, DenyList, Generator, GeneratorConfig};
use scenefuzz::scene::{ObjectDatabase, Pool, SceneConfig, TaskKind};

pub fn seen() -> (ObjectDatabase, DenyList) {
    (ObjectDatabase::builtin(Pool::Seen), DenyList::builtin(Pool::Seen))
}

/// One generated scene with a reduced camera resolution.
pub fn small_scene(kind: TaskKind, seed: u64, n_confound: usize, res: u32) -> SceneConfig {
    let (db, deny) = seen();
    let cfg = GeneratorConfig { n_confound: ConfoundCount::Fixed(n_confound), ..Default::default() };
    let mut scene = Generator::new(&db, &deny).generate_seeded(kind, &cfg, seed, format!("t-{seed}")).unwrap();
    scene.camera.resolution = (res, res);
    scene
}

/// The `scenefuzz` binary, quoted for `sh -c`.
pub fn bin() -> String {
    format!("'{}'", env!("CARGO_BIN_EXE_scenefuzz"))
}

pub mod stats_oracle;
