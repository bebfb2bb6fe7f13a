//! Per-community metadata file: CSV with `community,subscriber_count,description`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("cannot read community metadata: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityInfo {
    pub community: String,
    #[serde(default)]
    pub subscriber_count: Option<u64>,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommunityMetadata {
    entries: BTreeMap<String, CommunityInfo>,
}

impl CommunityMetadata {
    pub fn from_entries(entries: impl IntoIterator<Item = CommunityInfo>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|e| (e.community.clone(), e))
                .collect(),
        }
    }

    pub fn read_csv(path: &Path) -> Result<Self, MetadataError> {
        let mut reader = csv::Reader::from_path(path)?;
        let rows = reader
            .deserialize()
            .collect::<Result<Vec<CommunityInfo>, _>>()?;
        Ok(Self::from_entries(rows))
    }

    pub fn get(&self, community: &str) -> Option<&CommunityInfo> {
        self.entries.get(community)
    }

    pub fn description(&self, community: &str) -> &str {
        self.get(community).map_or("", |e| e.description.as_str())
    }

    pub fn subscribers(&self, community: &str) -> Option<u64> {
        self.get(community).and_then(|e| e.subscriber_count)
    }
}
