use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GenError, Generator, GeneratorConfig};
use crate::scene::{SceneConfig, SceneHash, TaskKind, SCENE_SUFFIX};

/// Suite dedup budget: at most this many generation attempts per requested scene.
pub const DEDUP_FACTOR: usize = 10;

/// SplitMix64 finalizer over (suite seed, stream index).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scene_id: String,
    pub hash: SceneHash,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub suite_seed: u64,
    pub task: TaskKind,
    pub count: usize,
    pub config: GeneratorConfig,
    pub scenes: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub scenes: Vec<SceneConfig>,
    pub manifest: SuiteManifest,
}

impl Generator<'_> {
    /// Generates `count` distinct scenes. Scene `k` of the attempt stream is
    /// seeded with `derive_seed(cfg.seed, k)`; duplicates (by scene hash) are
    /// dropped and the stream continues.
    pub fn generate_suite(&self, kind: TaskKind, cfg: &GeneratorConfig, count: usize) -> Result<Suite, GenError> {
        if count == 0 {
            return Err(GenError::InvalidConfig("suite count must be at least 1".into()));
        }
        let budget = count * DEDUP_FACTOR;
        let mut hashes = HashSet::with_capacity(count);
        let mut scenes = Vec::with_capacity(count);
        let mut entries = Vec::with_capacity(count);
        let mut attempt = 0u64;
        while scenes.len() < count {
            if attempt as usize >= budget {
                return Err(GenError::DedupExhausted { got: scenes.len(), want: count, attempts: budget });
            }
            let seed = derive_seed(cfg.seed, attempt);
            attempt += 1;
            let scene_id = format!("{}-{:05}", kind, scenes.len());
            let scene = self.generate_seeded(kind, cfg, seed, scene_id)?;
            let hash = scene.hash();
            if hashes.insert(hash) {
                entries.push(ManifestEntry { scene_id: scene.scene_id.clone(), hash, seed });
                scenes.push(scene);
            }
        }
        Ok(Suite {
            scenes,
            manifest: SuiteManifest { suite_seed: cfg.seed, task: kind, count, config: cfg.clone(), scenes: entries },
        })
    }
}

/// Writes `<scene_id>.scene.json` files and `manifest.json` into `dir`.
pub fn write_suite(dir: &Path, suite: &Suite) -> Result<(), GenError> {
    let io = |source, path: &Path| GenError::Io { path: path.display().to_string(), source };
    std::fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    for scene in &suite.scenes {
        let path = dir.join(format!("{}{}", scene.scene_id, SCENE_SUFFIX));
        std::fs::write(&path, scene.to_json()).map_err(|e| io(e, &path))?;
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&suite.manifest)? + "\n";
    std::fs::write(&path, text).map_err(|e| io(e, &path))
}
