//! Artifact schemas and writers: the per-n CSV, the JSON run summary,
//! and the run manifest. Float formatting everywhere is Rust's shortest
//! round-trip notation, which keeps reruns byte-comparable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::deviation::{DeviationSeries, HeydeReport, KsReport, SpataruReport, VarianceEstimate};
use crate::error::{Error, Result};

pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Everything an asymptotics run computes; cached as a unit so a rerun
/// with an unchanged config hash does no sampling at all.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticsPayload {
    pub series: Vec<DeviationSeries>,
    pub heyde: HeydeReport,
    pub spataru: SpataruReport,
    pub sigma2: Vec<VarianceEstimate>,
    pub ks: Vec<KsReport>,
}

/// The per-n estimate table, one row per (ε, n).
pub fn per_n_csv(series: &[DeviationSeries]) -> String {
    let mut out = String::from("eps,n,lambda_plus,lambda_minus,stderr_plus,stderr_minus\n");
    for s in series {
        for e in &s.per_n {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.eps, e.n, e.lambda_plus, e.lambda_minus, e.stderr_plus, e.stderr_minus
            ));
        }
    }
    out
}

/// Provenance record for one CLI run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub timestamp: String,
    pub tool_version: String,
    pub subcommand: String,
    pub output_paths: Vec<String>,
}

impl RunManifest {
    pub fn new(config_hash: &str, subcommand: &str, output_paths: Vec<String>) -> RunManifest {
        RunManifest {
            config_hash: config_hash.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            tool_version: tool_version().to_string(),
            subcommand: subcommand.to_string(),
            output_paths,
        }
    }
}

/// Top-level summary JSON of an asymptotics or iid-baseline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub timestamp: String,
    pub tool_version: String,
    pub subcommand: String,
    #[serde(flatten)]
    pub payload: AsymptoticsPayload,
}

impl RunSummary {
    pub fn new(config_hash: &str, subcommand: &str, payload: AsymptoticsPayload) -> RunSummary {
        RunSummary {
            config_hash: config_hash.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            tool_version: tool_version().to_string(),
            subcommand: subcommand.to_string(),
            payload,
        }
    }
}

/// Write text, creating parent directories.
pub fn write_artifact(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization failure: {e}")))
}

/// Run directory for a given subcommand + config hash.
pub fn run_dir(out_dir: &Path, subcommand: &str, hash: &str) -> PathBuf {
    out_dir.join(format!("{subcommand}-{}", &hash[..hash.len().min(12)]))
}
