//! Dataset manifests: a JSON index listing sequence documents plus an
//! optional custom skeleton graph shared by all of them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::graph::{FormatRegistry, SkeletonGraph};
use crate::skeleton::sequence::{parse_sequence, MotionSequence, ParseOptions};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Paths to sequence documents, relative to the manifest file.
    pub sequences: Vec<String>,
    /// Custom skeleton graph, required when sequences use the custom format.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<SkeletonGraph>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<DatasetManifest> {
        let bytes = std::fs::read(path)?;
        let manifest: DatasetManifest = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Parse(format!("manifest {}: {e}", path.display())))?;
        if manifest.sequences.is_empty() {
            return Err(Error::Data(format!(
                "manifest {} lists no sequences",
                path.display()
            )));
        }
        if let Some(graph) = &manifest.graph {
            graph.validate()?;
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self).expect("manifest serialization");
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn registry(&self) -> Result<FormatRegistry> {
        match &self.graph {
            Some(graph) => FormatRegistry::with_custom(graph.clone()),
            None => Ok(FormatRegistry::new()),
        }
    }

    /// Loads every listed sequence document. `base_dir` is the directory the
    /// manifest was read from.
    pub fn load_sequences(
        &self,
        base_dir: &Path,
        options: &ParseOptions,
    ) -> Result<Vec<MotionSequence>> {
        let registry = self.registry()?;
        let mut out = Vec::with_capacity(self.sequences.len());
        for rel in &self.sequences {
            let path: PathBuf = base_dir.join(rel);
            let bytes = std::fs::read(&path).map_err(|e| {
                Error::Data(format!("cannot read sequence {}: {e}", path.display()))
            })?;
            let seq = parse_sequence(&bytes, &registry, options)
                .map_err(|e| augment_path(e, &path))?;
            out.push(seq);
        }
        Ok(out)
    }
}

fn augment_path(err: Error, path: &Path) -> Error {
    let tag = format!("{}: ", path.display());
    match err {
        Error::Parse(m) => Error::Parse(format!("{tag}{m}")),
        Error::Schema(m) => Error::Schema(format!("{tag}{m}")),
        Error::Data(m) => Error::Data(format!("{tag}{m}")),
        other => other,
    }
}
