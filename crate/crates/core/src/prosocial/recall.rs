use super::ProsocialError;
use crate::canonicalize::CanonicalMap;
use crate::extraction::ExtractionRecord;
use crate::scales::Scale;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProsocialLabel {
    HighPro,
    LowPro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub cutoff: f64,
}

impl Threshold {
    pub fn fit(scores: &[f64]) -> Result<Self, ProsocialError> {
        if scores.is_empty() {
            return Err(ProsocialError::EmptyInput);
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
        Ok(Self {
            mean,
            sd,
            cutoff: mean + sd,
        })
    }

    pub fn label(&self, score: f64) -> ProsocialLabel {
        if score > self.cutoff {
            ProsocialLabel::HighPro
        } else {
            ProsocialLabel::LowPro
        }
    }
}

/// HighPro iff a score lies strictly above mean + one standard deviation.
pub fn prosocial_threshold(scores: &[f64]) -> Result<(Threshold, Vec<ProsocialLabel>), ProsocialError> {
    let t = Threshold::fit(scores)?;
    Ok((t, scores.iter().map(|&s| t.label(s)).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RecallBucket {
    #[serde(rename = "<0.1")]
    Low,
    #[serde(rename = "0.1–0.25")]
    Mid,
    #[serde(rename = "≥0.25")]
    High,
}

impl RecallBucket {
    pub const ALL: [RecallBucket; 3] = [RecallBucket::Low, RecallBucket::Mid, RecallBucket::High];

    /// Buckets `hits / n` exactly: [0, 0.1), [0.1, 0.25), [0.25, 1].
    pub fn of(hits: u64, n: u64) -> Self {
        if 10 * hits < n {
            RecallBucket::Low
        } else if 4 * hits < n {
            RecallBucket::Mid
        } else {
            RecallBucket::High
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RecallBucket::Low => "<0.1",
            RecallBucket::Mid => "0.1–0.25",
            RecallBucket::High => "≥0.25",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallRow {
    pub value: String,
    pub scale: Scale,
    pub n_comments: u64,
    pub n_high_prosocial: u64,
    pub recall: f64,
    pub bucket: RecallBucket,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCount {
    pub scale: Scale,
    pub bucket: RecallBucket,
    pub n_values: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub rows: Vec<RecallRow>,
    /// Values with no comments, omitted from `rows`.
    pub omitted: Vec<String>,
}

impl RecallReport {
    /// Number of values per (scale, bucket), every combination listed.
    pub fn bucket_counts(&self) -> Vec<BucketCount> {
        let mut out = Vec::new();
        for scale in [Scale::Macro, Scale::Meso, Scale::Micro] {
            for bucket in RecallBucket::ALL {
                out.push(BucketCount {
                    scale,
                    bucket,
                    n_values: self.rows.iter().filter(|r| r.scale == scale && r.bucket == bucket).count(),
                });
            }
        }
        out
    }
}

/// Share of each value's comments that are high-prosociality. Comments are
/// keyed by target id; a comment counts once per value however many of its
/// keywords map to it.
pub fn recall_per_value(
    records: &[ExtractionRecord],
    map: &CanonicalMap,
    labels: &HashMap<String, ProsocialLabel>,
    scales: &BTreeMap<String, Scale>,
) -> Result<RecallReport, ProsocialError> {
    let mut tally: BTreeMap<&str, (u64, u64)> = map.values().into_iter().map(|v| (v, (0, 0))).collect();
    for r in records.iter().filter(|r| !r.is_na()) {
        let label = labels
            .get(&r.target_id)
            .ok_or_else(|| ProsocialError::MissingScore(r.target_id.clone()))?;
        let values: BTreeSet<&str> = r.keywords().iter().filter_map(|k| map.get(k)).collect();
        for v in values {
            let t = tally.entry(v).or_insert((0, 0));
            t.0 += 1;
            t.1 += u64::from(*label == ProsocialLabel::HighPro);
        }
    }
    let mut report = RecallReport::default();
    for (value, (n, hits)) in tally {
        if n == 0 {
            tracing::warn!("value `{value}` has no comments; omitted from recall");
            report.omitted.push(value.to_string());
            continue;
        }
        let scale = *scales
            .get(value)
            .ok_or_else(|| ProsocialError::UnknownValue(value.to_string()))?;
        report.rows.push(RecallRow {
            value: value.to_string(),
            scale,
            n_comments: n,
            n_high_prosocial: hits,
            recall: hits as f64 / n as f64,
            bucket: RecallBucket::of(hits, n),
        });
    }
    report.rows.sort_by(|a, b| a.scale.cmp(&b.scale).then_with(|| a.value.cmp(&b.value)));
    Ok(report)
}
