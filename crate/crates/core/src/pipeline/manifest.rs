use super::config::RunConfig;
use super::{PipelineError, Stage};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    /// File path → sha256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Deterministic counters (records written, pairs quarantined, ...).
    pub counts: BTreeMap<String, u64>,
    pub status: StageStatus,
}

impl StageRecord {
    pub fn failed(message: String) -> Self {
        Self {
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            counts: BTreeMap::new(),
            status: StageStatus::Failed(message),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == StageStatus::Ok
    }
}

/// Everything needed to reproduce a run; contains no timestamps so that a
/// rerun with the same inputs writes an identical file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub year_tag: String,
    pub prng: String,
    pub model_id: String,
    pub template_digest: String,
    pub config: RunConfig,
    pub stages: BTreeMap<Stage, StageRecord>,
    pub complete: bool,
}

impl RunManifest {
    pub fn new(config: &RunConfig, template_digest: String) -> Self {
        Self {
            tool_version: TOOL_VERSION.into(),
            config_hash: config.hash(),
            seed: config.seed,
            year_tag: config.year_tag.clone(),
            prng: crate::sampling::PRNG_ID.into(),
            model_id: config.provider.model_id.clone(),
            template_digest,
            config: config.clone(),
            stages: BTreeMap::new(),
            complete: false,
        }
    }

    pub fn record(&mut self, stage: Stage, rec: StageRecord) {
        self.stages.insert(stage, rec);
        let required = Stage::pipeline(self.config.prosocial.enabled);
        self.complete = required.iter().all(|s| self.stages.get(s).is_some_and(StageRecord::is_ok));
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialises") + "\n";
        std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
    }
}
