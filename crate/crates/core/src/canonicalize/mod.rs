//! Keyword canonicalisation: embed, cluster, label, then apply manual overrides.

pub mod cluster;
pub mod embed;
pub mod label;
pub mod overrides;

pub use cluster::{agglomerative_cluster, cosine_distance, merge_sequence, ClusterError, MergeStep, ValueCluster};
pub use embed::{embed_keywords, EmbedError, Embedder, EmbeddingPool, FileEmbedder, HashEmbedder, HttpEmbedder};
pub use label::{label_cluster, modal_member, sanitize_label};
pub use overrides::{apply_regroup_overrides, parse_overrides, read_overrides, CanonicalMap, Override, OverrideError};

use crate::extraction::{ExtractionRecord, Provider, ProviderConfig, ProviderError, ResponseCache};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CanonicalizeError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("labelling cluster {cluster_id}: {source}")]
    Label {
        cluster_id: usize,
        source: ProviderError,
    },
    #[error(transparent)]
    Override(#[from] OverrideError),
}

#[derive(Debug, Clone, Default)]
pub struct CanonicalizeRun {
    pub clusters: Vec<ValueCluster>,
    pub map: CanonicalMap,
    /// Number of records mentioning each keyword.
    pub frequencies: HashMap<String, usize>,
}

pub fn keyword_frequencies(records: &[ExtractionRecord]) -> HashMap<String, usize> {
    let mut freq = HashMap::new();
    for r in records {
        let mut seen: Vec<&String> = r.keywords().iter().collect();
        seen.sort();
        seen.dedup();
        for kw in seen {
            *freq.entry(kw.clone()).or_insert(0) += 1;
        }
    }
    freq
}

/// Clusters every keyword found in `records` into at most `k` canonical values.
///
/// When fewer than `k` distinct keywords exist each keyword becomes its own
/// cluster. Clusters that receive the same label share one canonical value.
pub fn canonicalize(
    records: &[ExtractionRecord],
    embedder: &dyn Embedder,
    k: usize,
    provider: &dyn Provider,
    config: &ProviderConfig,
    overrides: &[Override],
    cache: &mut ResponseCache,
) -> Result<CanonicalizeRun, CanonicalizeError> {
    let frequencies = keyword_frequencies(records);
    let mut keywords: Vec<&str> = frequencies.keys().map(String::as_str).collect();
    keywords.sort_unstable();
    if keywords.is_empty() {
        tracing::warn!("no keywords to canonicalise");
        return Ok(CanonicalizeRun {
            frequencies,
            ..Default::default()
        });
    }
    let pool = embed_keywords(embedder, keywords)?;
    if k > pool.len() {
        tracing::warn!("k = {k} exceeds {} distinct keywords; using {}", pool.len(), pool.len());
    }
    let mut clusters = agglomerative_cluster(&pool, k.min(pool.len()))?;
    for c in &mut clusters {
        let label = label_cluster(provider, config, c, &frequencies, cache).map_err(|source| {
            CanonicalizeError::Label {
                cluster_id: c.cluster_id,
                source,
            }
        })?;
        c.label = Some(label);
    }
    let map = apply_regroup_overrides(&clusters, overrides)?;
    Ok(CanonicalizeRun {
        clusters,
        map,
        frequencies,
    })
}
