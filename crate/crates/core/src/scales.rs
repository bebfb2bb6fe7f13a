//! Value × community matrix, macro/meso/micro scales, prevalence reports and
//! N/A accounting.

use crate::canonicalize::CanonicalMap;
use crate::extraction::ExtractionRecord;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScalesError {
    #[error("keyword `{keyword}` (record {target_id}) has no canonical value")]
    UnmappedKeyword { keyword: String, target_id: String },
    #[error("records mix year tags `{0}` and `{1}`")]
    MixedYears(String, String),
    #[error("unknown value `{0}`")]
    UnknownValue(String),
    #[error("community `{0}` missing from one of the matrices")]
    UnknownCommunity(String),
    #[error("invalid thresholds: need 0 < micro ({micro}) < macro ({macro_}) < 1")]
    BadThresholds { micro: f64, macro_: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueCommunityMatrix {
    pub year_tag: String,
    /// Every community with at least one record, including N/A-only ones.
    pub communities: BTreeSet<String>,
    /// value → community → number of records exhibiting the value. Zero
    /// cells are not stored.
    pub counts: BTreeMap<String, BTreeMap<String, u64>>,
}

impl ValueCommunityMatrix {
    pub fn values(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    pub fn count(&self, value: &str, community: &str) -> u64 {
        self.counts
            .get(value)
            .and_then(|row| row.get(community))
            .copied()
            .unwrap_or(0)
    }

    pub fn prevalence(&self, value: &str) -> Option<usize> {
        self.counts.get(value).map(|row| row.values().filter(|&&n| n > 0).count())
    }

    pub fn comment_count(&self, value: &str) -> u64 {
        self.counts.get(value).map(|row| row.values().sum()).unwrap_or(0)
    }

    pub fn community_values(&self, community: &str) -> BTreeSet<String> {
        self.counts
            .iter()
            .filter(|(_, row)| row.get(community).is_some_and(|&n| n > 0))
            .map(|(v, _)| v.clone())
            .collect()
    }

    /// Adds communities that were studied but produced no records.
    pub fn include_communities<I: IntoIterator<Item = S>, S: Into<String>>(&mut self, communities: I) {
        self.communities.extend(communities.into_iter().map(Into::into));
    }

    pub fn write_json(&self, path: &Path) -> Result<(), ScalesError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self, ScalesError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Counts, per community, the records exhibiting each canonical value. A
/// record with several keywords of one value counts once for it.
pub fn build_matrix(records: &[ExtractionRecord], map: &CanonicalMap) -> Result<ValueCommunityMatrix, ScalesError> {
    let mut m = ValueCommunityMatrix::default();
    if let Some(first) = records.first() {
        m.year_tag = first.year_tag.clone();
    }
    for r in records {
        if r.year_tag != m.year_tag {
            return Err(ScalesError::MixedYears(m.year_tag.clone(), r.year_tag.clone()));
        }
        m.communities.insert(r.community.clone());
        let mut values = BTreeSet::new();
        for kw in r.keywords() {
            let v = map.get(kw).ok_or_else(|| ScalesError::UnmappedKeyword {
                keyword: kw.clone(),
                target_id: r.target_id.clone(),
            })?;
            values.insert(v);
        }
        for v in values {
            *m.counts
                .entry(v.to_string())
                .or_default()
                .entry(r.community.clone())
                .or_insert(0) += 1;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScaleThresholds {
    pub macro_fraction: f64,
    pub micro_fraction: f64,
}

impl Default for ScaleThresholds {
    fn default() -> Self {
        Self {
            macro_fraction: 0.75,
            micro_fraction: 0.25,
        }
    }
}

// Guards against 0.75 * 80 landing a hair off an integer.
const ROUNDING_SLACK: f64 = 1e-9;

impl ScaleThresholds {
    pub fn validate(&self) -> Result<(), ScalesError> {
        let ok = 0.0 < self.micro_fraction && self.micro_fraction < self.macro_fraction && self.macro_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(ScalesError::BadThresholds {
                micro: self.micro_fraction,
                macro_: self.macro_fraction,
            })
        }
    }

    /// Smallest prevalence counted as macro.
    pub fn macro_min(&self, n_communities: usize) -> usize {
        (self.macro_fraction * n_communities as f64 - ROUNDING_SLACK).ceil().max(0.0) as usize
    }

    /// Largest prevalence counted as micro.
    pub fn micro_max(&self, n_communities: usize) -> usize {
        (self.micro_fraction * n_communities as f64 + ROUNDING_SLACK).floor().max(0.0) as usize
    }

    pub fn scale_for(&self, prevalence: usize, n_communities: usize) -> Scale {
        if prevalence >= self.macro_min(n_communities) {
            Scale::Macro
        } else if prevalence <= self.micro_max(n_communities) {
            Scale::Micro
        } else {
            Scale::Meso
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Macro,
    Meso,
    Micro,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Macro => "macro",
            Scale::Meso => "meso",
            Scale::Micro => "micro",
        }
    }
}

impl std::fmt::Display for Scale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify_scale(value: &str, matrix: &ValueCommunityMatrix, thresholds: &ScaleThresholds) -> Result<Scale, ScalesError> {
    let p = matrix
        .prevalence(value)
        .ok_or_else(|| ScalesError::UnknownValue(value.to_string()))?;
    Ok(thresholds.scale_for(p, matrix.communities.len()))
}

pub fn classify_all(matrix: &ValueCommunityMatrix, thresholds: &ScaleThresholds) -> BTreeMap<String, Scale> {
    let n = matrix.communities.len();
    matrix
        .counts
        .iter()
        .map(|(v, row)| (v.clone(), thresholds.scale_for(row.values().filter(|&&c| c > 0).count(), n)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrevalenceRow {
    pub value: String,
    pub prevalence: usize,
    pub scale: Scale,
    pub comment_count: u64,
    pub year: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrevalencePlotRow {
    pub year: String,
    pub value: String,
    pub prevalence: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrevalenceReport {
    pub n_communities: usize,
    pub rows: Vec<PrevalenceRow>,
}

impl PrevalenceReport {
    pub fn plot_rows(&self) -> Vec<PrevalencePlotRow> {
        self.rows
            .iter()
            .map(|r| PrevalencePlotRow {
                year: r.year.clone(),
                value: r.value.clone(),
                prevalence: r.prevalence,
            })
            .collect()
    }

    pub fn scale_of(&self, value: &str) -> Option<Scale> {
        self.rows.iter().find(|r| r.value == value).map(|r| r.scale)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ScalesError> {
        write_rows(path, &self.rows)
    }

    pub fn read_csv(path: &Path) -> Result<Vec<PrevalenceRow>, ScalesError> {
        Ok(crate::table::read_csv(path)?)
    }

    pub fn write_plot_csv(&self, path: &Path) -> Result<(), ScalesError> {
        write_rows(path, &self.plot_rows())
    }

    pub fn write_json(&self, path: &Path) -> Result<(), ScalesError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ScalesError> {
    Ok(crate::table::write_csv(path, rows)?)
}

/// Rows sorted by scale (macro first), then descending prevalence, then label.
pub fn prevalence_report(matrix: &ValueCommunityMatrix, thresholds: &ScaleThresholds) -> PrevalenceReport {
    let n = matrix.communities.len();
    let mut rows: Vec<PrevalenceRow> = matrix
        .counts
        .iter()
        .map(|(v, row)| {
            let prevalence = row.values().filter(|&&c| c > 0).count();
            PrevalenceRow {
                value: v.clone(),
                prevalence,
                scale: thresholds.scale_for(prevalence, n),
                comment_count: row.values().sum(),
                year: matrix.year_tag.clone(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.scale
            .cmp(&b.scale)
            .then(b.prevalence.cmp(&a.prevalence))
            .then_with(|| a.value.cmp(&b.value))
    });
    PrevalenceReport { n_communities: n, rows }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearDiff {
    pub community: String,
    pub kept: BTreeSet<String>,
    pub added: BTreeSet<String>,
    pub removed: BTreeSet<String>,
}

/// Values a community kept, gained and lost between `a` (earlier) and `b`.
pub fn compare_years(a: &ValueCommunityMatrix, b: &ValueCommunityMatrix, community: &str) -> Result<YearDiff, ScalesError> {
    if !a.communities.contains(community) || !b.communities.contains(community) {
        return Err(ScalesError::UnknownCommunity(community.to_string()));
    }
    let va = a.community_values(community);
    let vb = b.community_values(community);
    Ok(YearDiff {
        community: community.to_string(),
        kept: va.intersection(&vb).cloned().collect(),
        added: vb.difference(&va).cloned().collect(),
        removed: va.difference(&vb).cloned().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NaExplanation {
    pub community: String,
    pub target_id: String,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NaCountRow {
    pub community: String,
    pub na_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NaReport {
    pub per_community: BTreeMap<String, u64>,
    pub total: u64,
    pub explanations: Vec<NaExplanation>,
}

impl NaReport {
    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count_rows(&self) -> Vec<NaCountRow> {
        self.per_community
            .iter()
            .map(|(c, &n)| NaCountRow {
                community: c.clone(),
                na_count: n,
            })
            .collect()
    }

    pub fn write_counts_csv(&self, path: &Path) -> Result<(), ScalesError> {
        write_rows(path, &self.count_rows())
    }

    pub fn write_explanations_csv(&self, path: &Path) -> Result<(), ScalesError> {
        write_rows(path, &self.explanations)
    }
}

pub fn na_report(records: &[ExtractionRecord]) -> NaReport {
    let mut report = NaReport::default();
    for r in records.iter().filter(|r| r.is_na()) {
        *report.per_community.entry(r.community.clone()).or_insert(0) += 1;
        report.total += 1;
        report.explanations.push(NaExplanation {
            community: r.community.clone(),
            target_id: r.target_id.clone(),
            reasoning: r.reasoning.clone(),
        });
    }
    report
}
