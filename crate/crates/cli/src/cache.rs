//! Optional on-disk cache of preprocessed sequences, enabled by the
//! REHAB_ASSESS_CACHE environment variable (a directory path). Entries are
//! keyed by a digest of the raw sequence document, the skeleton graph, and
//! the preprocessing configuration, so any change to the inputs misses
//! cleanly. Unreadable entries are recomputed and overwritten.

use std::path::PathBuf;

use sha2::{Digest, Sha256};

use rehab_core::error::Result;
use rehab_core::skeleton::graph::{FormatRegistry, SkeletonGraph};
use rehab_core::skeleton::preprocess::{preprocess, PreprocessConfig};
use rehab_core::skeleton::sequence::{parse_sequence, serialize_sequence, MotionSequence, ParseOptions};

pub struct PreprocessCache {
    dir: Option<PathBuf>,
}

impl PreprocessCache {
    pub fn from_env() -> PreprocessCache {
        PreprocessCache {
            dir: std::env::var_os("REHAB_ASSESS_CACHE").map(PathBuf::from),
        }
    }

    #[cfg(test)]
    pub fn at(dir: PathBuf) -> PreprocessCache {
        PreprocessCache { dir: Some(dir) }
    }

    pub fn preprocess(
        &self,
        sequence: &MotionSequence,
        graph: &SkeletonGraph,
        config: &PreprocessConfig,
        registry: &FormatRegistry,
    ) -> Result<MotionSequence> {
        let Some(dir) = &self.dir else {
            return preprocess(sequence, graph, config);
        };

        let raw = serialize_sequence(sequence);
        let mut hasher = Sha256::new();
        hasher.update(&raw);
        hasher.update([0]);
        hasher.update(serde_json::to_vec(graph).expect("graph serialization"));
        hasher.update([0]);
        hasher.update(serde_json::to_vec(config).expect("config serialization"));
        let key = hex::encode(hasher.finalize());
        let path = dir.join(format!("{key}.json"));

        if let Ok(bytes) = std::fs::read(&path) {
            match parse_sequence(&bytes, registry, &ParseOptions::default()) {
                Ok(cached) => return Ok(cached),
                Err(e) => log::warn!("recomputing unreadable cache entry {}: {e}", path.display()),
            }
        }

        let result = preprocess(sequence, graph, config)?;
        std::fs::create_dir_all(dir)?;
        // Concurrent writers race benignly: every writer produces the same
        // bytes for a given key.
        std::fs::write(&path, serialize_sequence(&result))?;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rehab_core::skeleton::sequence::Label;
    use rehab_core::synth::{generate_sequence, SyntheticSpec};

    #[test]
    fn cache_hit_reproduces_the_preprocessed_sequence() {
        let spec = SyntheticSpec::default();
        let sequence = generate_sequence(&spec, "ex", Label::Correct, 0).unwrap();
        let registry = FormatRegistry::with_custom(spec.graph.clone()).unwrap();
        let config = PreprocessConfig::default();

        let dir = tempfile::tempdir().unwrap();
        let cache = PreprocessCache::at(dir.path().to_path_buf());
        let first = cache
            .preprocess(&sequence, &spec.graph, &config, &registry)
            .unwrap();
        let entries = std::fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(entries, 1);

        let second = cache
            .preprocess(&sequence, &spec.graph, &config, &registry)
            .unwrap();
        assert_eq!(first.frames, second.frames);
        assert_eq!(first.timestamps, second.timestamps);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn config_change_is_a_cache_miss() {
        let spec = SyntheticSpec::default();
        let sequence = generate_sequence(&spec, "ex", Label::Correct, 0).unwrap();
        let registry = FormatRegistry::with_custom(spec.graph.clone()).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let cache = PreprocessCache::at(dir.path().to_path_buf());
        let a = PreprocessConfig::default();
        let b = PreprocessConfig {
            target_length: a.target_length + 10,
            ..a.clone()
        };
        cache.preprocess(&sequence, &spec.graph, &a, &registry).unwrap();
        cache.preprocess(&sequence, &spec.graph, &b, &registry).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
