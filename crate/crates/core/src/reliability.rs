//! Human validation of extracted values: nominal Krippendorff's α between
//! raters and accuracy of adjudicated labels.

use crate::canonicalize::CanonicalMap;
use crate::corpus::CommentStore;
use crate::extraction::ExtractionRecord;
use crate::sampling::{sample_indices, stream_rng};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReliabilityError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("item {index} ({comment_id}, {value}) has no resolution")]
    UnadjudicatedItem {
        index: usize,
        comment_id: String,
        value: String,
    },
    #[error("row {row}: unrecognised judgment `{text}`")]
    BadJudgment { row: usize, text: String },
    #[error("need at least two raters")]
    TooFewRaters,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Judgment {
    Exhibited,
    NotExhibited,
    Missing,
}

impl Judgment {
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "" | "na" | "n/a" | "missing" => Some(Judgment::Missing),
            "1" | "y" | "yes" | "true" | "exhibited" => Some(Judgment::Exhibited),
            "0" | "n" | "no" | "false" | "not_exhibited" | "not exhibited" => Some(Judgment::NotExhibited),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Judgment::Exhibited => "1",
            Judgment::NotExhibited => "0",
            Judgment::Missing => "",
        }
    }

    fn category(self) -> Option<usize> {
        match self {
            Judgment::Exhibited => Some(1),
            Judgment::NotExhibited => Some(0),
            Judgment::Missing => None,
        }
    }
}

/// One annotation worksheet line: a (comment, value) item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorksheetRow {
    pub comment_id: String,
    pub community: String,
    pub body: String,
    pub value: String,
    pub rater_1: String,
    pub rater_2: String,
    pub resolution: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationItem {
    pub comment_id: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotationTable {
    pub items: Vec<AnnotationItem>,
    pub raters: Vec<String>,
    /// `judgments[item][rater]`.
    pub judgments: Vec<Vec<Judgment>>,
    /// Adjudicated judgment per item, `Missing` when not yet resolved.
    pub resolution: Vec<Judgment>,
}

impl AnnotationTable {
    pub fn from_worksheet(rows: &[WorksheetRow]) -> Result<Self, ReliabilityError> {
        let parse = |row: usize, text: &str| {
            Judgment::parse(text).ok_or_else(|| ReliabilityError::BadJudgment {
                row: row + 1,
                text: text.to_string(),
            })
        };
        let mut t = AnnotationTable {
            raters: vec!["rater_1".into(), "rater_2".into()],
            ..Default::default()
        };
        for (i, r) in rows.iter().enumerate() {
            t.items.push(AnnotationItem {
                comment_id: r.comment_id.clone(),
                value: r.value.clone(),
            });
            t.judgments.push(vec![parse(i, &r.rater_1)?, parse(i, &r.rater_2)?]);
            t.resolution.push(parse(i, &r.resolution)?);
        }
        Ok(t)
    }

    pub fn read_worksheet(path: &Path) -> Result<Self, ReliabilityError> {
        Self::from_worksheet(&crate::table::read_csv::<WorksheetRow>(path)?)
    }

    fn units(&self) -> Vec<Vec<Option<usize>>> {
        self.judgments
            .iter()
            .map(|row| row.iter().map(|j| j.category()).collect())
            .collect()
    }
}

/// Nominal Krippendorff's α over units of category codes (`None` = missing),
/// from the coincidence matrix. Units with fewer than two codes are not
/// pairable and are ignored. Zero observed disagreement gives exactly 1.
pub fn nominal_alpha(units: &[Vec<Option<usize>>]) -> Result<f64, ReliabilityError> {
    let mut coincidence: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut pairable = 0;
    for unit in units {
        let codes: Vec<usize> = unit.iter().flatten().copied().collect();
        let m = codes.len();
        if m < 2 {
            continue;
        }
        pairable += 1;
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for &c in &codes {
            *counts.entry(c).or_insert(0.0) += 1.0;
        }
        for (&c, &nc) in &counts {
            for (&k, &nk) in &counts {
                let pairs = if c == k { nc * (nc - 1.0) } else { nc * nk };
                *coincidence.entry((c, k)).or_insert(0.0) += pairs / (m as f64 - 1.0);
            }
        }
    }
    if pairable < 2 {
        return Err(ReliabilityError::InsufficientData(format!(
            "{pairable} unit(s) with two or more judgments; need 2"
        )));
    }
    let n: f64 = coincidence.values().sum();
    let mut marginals: BTreeMap<usize, f64> = BTreeMap::new();
    for (&(c, _), &o) in &coincidence {
        *marginals.entry(c).or_insert(0.0) += o;
    }
    let observed: f64 = coincidence.iter().filter(|((c, k), _)| c != k).map(|(_, o)| o).sum();
    if observed == 0.0 {
        return Ok(1.0);
    }
    let mut expected = 0.0;
    for (&c, &nc) in &marginals {
        for (&k, &nk) in &marginals {
            if c != k {
                expected += nc * nk;
            }
        }
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

pub fn krippendorff_alpha(table: &AnnotationTable) -> Result<f64, ReliabilityError> {
    if table.raters.len() < 2 {
        return Err(ReliabilityError::TooFewRaters);
    }
    nominal_alpha(&table.units())
}

/// Share of items adjudicated as exhibited.
pub fn label_accuracy(table: &AnnotationTable) -> Result<f64, ReliabilityError> {
    if table.items.is_empty() {
        return Err(ReliabilityError::InsufficientData("no items".into()));
    }
    let mut exhibited = 0usize;
    for (i, item) in table.items.iter().enumerate() {
        match table.resolution.get(i).copied().unwrap_or(Judgment::Missing) {
            Judgment::Exhibited => exhibited += 1,
            Judgment::NotExhibited => {}
            Judgment::Missing => {
                return Err(ReliabilityError::UnadjudicatedItem {
                    index: i,
                    comment_id: item.comment_id.clone(),
                    value: item.value.clone(),
                })
            }
        }
    }
    Ok(exhibited as f64 / table.items.len() as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationSample {
    pub rows: Vec<WorksheetRow>,
    /// Communities with fewer eligible records than requested, with the
    /// number available.
    pub too_small: Vec<(String, usize)>,
}

/// Seeded sample of `per_community` non-N/A records per community, one
/// worksheet row per (comment, value). Values are canonical when `map` is
/// given, raw keywords otherwise; bodies come from `store` when given.
pub fn sample_for_annotation(
    records: &[ExtractionRecord],
    map: Option<&CanonicalMap>,
    store: Option<&CommentStore>,
    per_community: usize,
    seed: u64,
) -> AnnotationSample {
    let mut by_community: BTreeMap<&str, Vec<&ExtractionRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.is_na()) {
        by_community.entry(&r.community).or_default().push(r);
    }
    let mut out = AnnotationSample::default();
    for (community, mut recs) in by_community {
        recs.sort_by(|a, b| a.target_id.cmp(&b.target_id));
        if recs.len() < per_community {
            tracing::warn!("{community}: only {} records for {per_community} requested", recs.len());
            out.too_small.push((community.to_string(), recs.len()));
        }
        let mut rng = stream_rng(seed, "annotation", community);
        for i in sample_indices(&mut rng, recs.len(), per_community.min(recs.len())) {
            let r = recs[i];
            let values: BTreeSet<String> = r
                .keywords()
                .iter()
                .map(|k| map.and_then(|m| m.get(k)).unwrap_or(k).to_string())
                .collect();
            let body = store
                .and_then(|s| s.get(&r.target_id))
                .map(|c| c.body.clone())
                .unwrap_or_default();
            for value in values {
                out.rows.push(WorksheetRow {
                    comment_id: r.target_id.clone(),
                    community: community.to_string(),
                    body: body.clone(),
                    value,
                    rater_1: String::new(),
                    rater_2: String::new(),
                    resolution: String::new(),
                });
            }
        }
    }
    out
}
