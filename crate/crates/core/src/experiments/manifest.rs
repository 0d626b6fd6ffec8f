use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentConfig;
use crate::error::{Error, Result};

/// Chains `first_index..first_index+count` run on `rng::stream(root, i)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    pub role: String,
    pub root: u64,
    pub first_index: u64,
    pub count: u64,
}

impl SeedRange {
    pub fn new(role: impl Into<String>, root: u64, count: u64) -> Self {
        SeedRange {
            role: role.into(),
            root,
            first_index: 0,
            count,
        }
    }
}

/// Everything needed to re-run an experiment bit-identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// The resolved configuration, including every applied default.
    pub config: ExperimentConfig,
    /// SHA-256 of the config's JSON encoding.
    pub config_hash: String,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub chain_seeds: Vec<SeedRange>,
    /// Desk-scale stand-ins for the published protocol.
    pub substitutions: Vec<String>,
    pub artifacts: Vec<String>,
}

/// Hex SHA-256 of the config's JSON encoding.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("configs always serialise");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifests always serialise")
    }

    /// Parses and checks a manifest. Errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let manifest: RunManifest = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::Schema {
                field,
                reason: e.into_inner().to_string(),
            }
        })?;
        if manifest.config_hash != config_hash(&manifest.config) {
            return Err(Error::Schema {
                field: "config_hash".into(),
                reason: "does not match the recorded config".into(),
            });
        }
        manifest.config.validate().map_err(|e| Error::Schema {
            field: "config".into(),
            reason: e.to_string(),
        })?;
        Ok(manifest)
    }
}
