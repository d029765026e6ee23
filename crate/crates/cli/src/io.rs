//! Shared plumbing: spec files, resolved-configuration logging, dataset
//! loading, and name handling.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use rehab_core::error::{Error, Result};
use rehab_core::skeleton::graph::{FormatId, FormatRegistry};
use rehab_core::skeleton::manifest::DatasetManifest;
use rehab_core::skeleton::sequence::{MotionSequence, ParseOptions};

/// Loads a JSON spec file. A `resolved_config.json` written by an earlier run
/// is recognized by its `subcommand` field and unwrapped, so logged
/// configurations replay directly.
pub fn load_spec<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Parse(format!("{what} {}: {e}", path.display())))?;
    let inner = match value {
        serde_json::Value::Object(ref map) if map.contains_key("subcommand") => {
            map.get("spec").cloned().ok_or_else(|| {
                Error::Schema(format!(
                    "{what} {}: resolved configuration has no spec field",
                    path.display()
                ))
            })?
        }
        other => other,
    };
    serde_json::from_value(inner)
        .map_err(|e| Error::Parse(format!("{what} {}: {e}", path.display())))
}

/// Writes the fully resolved configuration of a run into its output
/// directory. The file is a valid `--spec` input for the same subcommand.
pub fn write_resolved_config<S: Serialize>(
    out: &Path,
    subcommand: &str,
    inputs: &[(&str, String)],
    spec: &S,
) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let mut doc = serde_json::Map::new();
    doc.insert("subcommand".into(), subcommand.into());
    for (key, value) in inputs {
        doc.insert((*key).into(), value.as_str().into());
    }
    doc.insert(
        "spec".into(),
        serde_json::to_value(spec).expect("spec serialization"),
    );
    let path = out.join("resolved_config.json");
    let mut bytes = serde_json::to_vec_pretty(&serde_json::Value::Object(doc))
        .expect("config serialization");
    bytes.push(b'\n');
    std::fs::write(&path, bytes)?;
    log::info!("resolved configuration logged to {}", path.display());
    Ok(path)
}

pub struct LoadedDataset {
    pub sequences: Vec<MotionSequence>,
    pub registry: FormatRegistry,
    pub manifest: DatasetManifest,
}

pub fn load_dataset(data: &Path, expected_format: Option<FormatId>) -> Result<LoadedDataset> {
    let manifest = DatasetManifest::load(data)?;
    let base = data.parent().unwrap_or_else(|| Path::new("."));
    let options = ParseOptions {
        expected_format,
        impute_missing: false,
    };
    let sequences = manifest.load_sequences(base, &options)?;
    let registry = manifest.registry()?;
    Ok(LoadedDataset {
        sequences,
        registry,
        manifest,
    })
}

pub fn parse_format(name: &str) -> Result<FormatId> {
    match name {
        "kinect_v2" => Ok(FormatId::KinectV2),
        "openpose" => Ok(FormatId::Openpose),
        "blazepose" => Ok(FormatId::Blazepose),
        "custom" => Ok(FormatId::Custom),
        other => Err(Error::Usage(format!(
            "unknown skeleton format {other:?}; expected kinect_v2, openpose, blazepose, or custom"
        ))),
    }
}

pub fn parse_format_opt(name: &Option<String>) -> Result<Option<FormatId>> {
    name.as_deref().map(parse_format).transpose()
}

/// Exercise identifiers appear in file names; anything outside a conservative
/// character set is replaced.
pub fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn display_path(path: &Path) -> String {
    path.display().to_string()
}
