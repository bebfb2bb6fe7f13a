//! Per-community score percentiles, Low/Mid/High labels, and the two seeded
//! samples drawn from labeled comments: `{context, target}` pairs for value
//! extraction and class-balanced regression sets.

use crate::corpus::{mask_usernames, resolve_context, Comment, CommentStore};
use crate::sampling::{sample_indices, stream_rng};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LabelingError {
    #[error("percentile of an empty score list")]
    EmptyInput,
    #[error("percentile fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("invalid sample plan: {0}")]
    BadPlan(String),
    #[error("community `{community}` skipped: no {missing} comments")]
    CommunitySkipped {
        community: String,
        missing: &'static str,
    },
}

/// Percentile fractions are resolved to this many parts per unit, which keeps
/// threshold comparisons exact.
const FRACTION_DENOM: i128 = 1_000_000_000;

/// An exact rational `numer / denom` produced by [`percentile`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Quantile {
    numer: i128,
    denom: i128,
}

impl Quantile {
    pub fn from_integer(v: i64) -> Self {
        Self {
            numer: v as i128,
            denom: 1,
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.numer as f64 / self.denom as f64
    }

    /// `(numerator, denominator)`, denominator positive, not reduced.
    pub fn ratio(&self) -> (i128, i128) {
        (self.numer, self.denom)
    }

    pub fn cmp_integer(&self, x: i64) -> Ordering {
        self.numer.cmp(&(x as i128 * self.denom))
    }

    /// `x < self`
    pub fn exceeds(&self, x: i64) -> bool {
        self.cmp_integer(x) == Ordering::Greater
    }

    /// `x > self`
    pub fn is_exceeded_by(&self, x: i64) -> bool {
        self.cmp_integer(x) == Ordering::Less
    }
}

impl PartialEq for Quantile {
    fn eq(&self, other: &Self) -> bool {
        self.numer * other.denom == other.numer * self.denom
    }
}

impl PartialEq<f64> for Quantile {
    fn eq(&self, other: &f64) -> bool {
        self.as_f64() == *other
    }
}

impl fmt::Display for Quantile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

fn fraction_units(p: f64) -> Result<i128, LabelingError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(LabelingError::BadFraction(p));
    }
    Ok((p * FRACTION_DENOM as f64).round() as i128)
}

/// Linear-interpolation percentile over `(n - 1)` ranks.
///
/// With rank `r = p (n - 1)` the result is
/// `sorted[floor r] + (r - floor r) (sorted[ceil r] - sorted[floor r])`.
pub fn percentile(scores: &[i64], p: f64) -> Result<Quantile, LabelingError> {
    if scores.is_empty() {
        return Err(LabelingError::EmptyInput);
    }
    let units = fraction_units(p)?;
    let mut sorted = scores.to_vec();
    sorted.sort_unstable();
    let scaled_rank = units * (sorted.len() as i128 - 1);
    let lo = (scaled_rank / FRACTION_DENOM) as usize;
    let frac = scaled_rank % FRACTION_DENOM;
    let hi = if frac == 0 { lo } else { lo + 1 };
    let (a, b) = (sorted[lo] as i128, sorted[hi] as i128);
    Ok(Quantile {
        numer: a * FRACTION_DENOM + frac * (b - a),
        denom: FRACTION_DENOM,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreLabel {
    Low,
    Mid,
    High,
}

impl ScoreLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreLabel::Low => "low",
            ScoreLabel::Mid => "mid",
            ScoreLabel::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub pairs_per_community: usize,
    pub regression_per_class: usize,
    pub low_percentile: f64,
    pub high_percentile: f64,
    pub seed: u64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self {
            pairs_per_community: 100,
            regression_per_class: 2500,
            low_percentile: 0.70,
            high_percentile: 0.95,
            seed: 0,
        }
    }
}

impl SamplePlan {
    pub fn validate(&self) -> Result<(), LabelingError> {
        let (lo, hi) = (self.low_percentile, self.high_percentile);
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(LabelingError::BadPlan(format!(
                "need 0 < low_percentile ({lo}) < high_percentile ({hi}) < 1"
            )));
        }
        if self.pairs_per_community == 0 || self.regression_per_class == 0 {
            return Err(LabelingError::BadPlan("sample counts must be positive".into()));
        }
        Ok(())
    }
}

/// Labels for one community together with the thresholds that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityLabels {
    pub community: String,
    pub low_threshold: Quantile,
    pub high_threshold: Quantile,
    pub labels: BTreeMap<String, ScoreLabel>,
}

impl CommunityLabels {
    pub fn get(&self, id: &str) -> Option<ScoreLabel> {
        self.labels.get(id).copied()
    }

    pub fn count(&self, label: ScoreLabel) -> usize {
        self.labels.values().filter(|&&l| l == label).count()
    }
}

pub fn label_for(score: i64, low: &Quantile, high: &Quantile) -> ScoreLabel {
    if low.exceeds(score) {
        ScoreLabel::Low
    } else if high.is_exceeded_by(score) {
        ScoreLabel::High
    } else {
        ScoreLabel::Mid
    }
}

/// Low iff strictly below the low threshold, High iff strictly above the high
/// threshold, Mid otherwise. Thresholds use this community's scores only.
pub fn label_scores(
    community_comments: &[&Comment],
    plan: &SamplePlan,
) -> Result<CommunityLabels, LabelingError> {
    let scores: Vec<i64> = community_comments.iter().map(|c| c.score).collect();
    let low = percentile(&scores, plan.low_percentile)?;
    let high = percentile(&scores, plan.high_percentile)?;
    let labels = community_comments
        .iter()
        .map(|c| (c.id.clone(), label_for(c.score, &low, &high)))
        .collect();
    Ok(CommunityLabels {
        community: community_comments[0].community.clone(),
        low_threshold: low,
        high_threshold: high,
        labels,
    })
}

/// Labels every community of the store, keyed by community name.
pub fn label_store(
    store: &CommentStore,
    plan: &SamplePlan,
) -> Result<BTreeMap<String, CommunityLabels>, LabelingError> {
    store
        .communities()
        .map(|name| {
            let comments: Vec<&Comment> = store.community(name).collect();
            label_scores(&comments, plan).map(|l| (name.to_string(), l))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentPair {
    pub community: String,
    pub context: Comment,
    pub target: Comment,
    pub year_tag: String,
}

/// One line of the pair sample manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairManifestEntry {
    pub community: String,
    pub target_id: String,
    pub context_id: String,
    pub year_tag: String,
    pub seed: u64,
}

impl CommentPair {
    pub fn manifest_entry(&self, seed: u64) -> PairManifestEntry {
        PairManifestEntry {
            community: self.community.clone(),
            target_id: self.target.id.clone(),
            context_id: self.context.id.clone(),
            year_tag: self.year_tag.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairSample {
    pub pairs: Vec<CommentPair>,
    /// Communities with fewer candidates than requested; they contribute no pairs.
    pub excluded: Vec<String>,
}

fn masked(c: &Comment) -> Comment {
    Comment {
        body: mask_usernames(&c.body),
        ..c.clone()
    }
}

/// High-labeled comments of `community` whose parent comment is in the store,
/// in `(created_utc, id)` order.
pub fn pair_candidates<'a>(
    store: &'a CommentStore,
    community: &str,
    labels: &CommunityLabels,
) -> Vec<(&'a Comment, &'a Comment)> {
    store
        .community(community)
        .filter(|c| labels.get(&c.id) == Some(ScoreLabel::High))
        .filter_map(|c| resolve_context(store, c).map(|ctx| (ctx, c)))
        .collect()
}

/// Draws exactly `pairs_per_community` pairs per community, uniformly without
/// replacement over the whole year's candidates.
pub fn sample_pairs(
    store: &CommentStore,
    labels: &BTreeMap<String, CommunityLabels>,
    plan: &SamplePlan,
) -> Result<PairSample, LabelingError> {
    plan.validate()?;
    let mut out = PairSample::default();
    for community in store.communities() {
        let Some(community_labels) = labels.get(community) else {
            out.excluded.push(community.to_string());
            continue;
        };
        let candidates = pair_candidates(store, community, community_labels);
        if candidates.len() < plan.pairs_per_community {
            tracing::info!(
                community,
                candidates = candidates.len(),
                "community excluded: too few high-score pairs"
            );
            out.excluded.push(community.to_string());
            continue;
        }
        let mut rng = stream_rng(plan.seed, "pairs", community);
        for i in sample_indices(&mut rng, candidates.len(), plan.pairs_per_community) {
            let (context, target) = candidates[i];
            out.pairs.push(CommentPair {
                community: community.to_string(),
                context: masked(context),
                target: masked(target),
                year_tag: target.year_tag.clone(),
            });
        }
    }
    Ok(out)
}

/// One line of the regression sample manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionEntry {
    pub community: String,
    pub comment_id: String,
    pub label: ScoreLabel,
    pub year_tag: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegressionSample {
    pub sets: BTreeMap<String, Vec<(Comment, ScoreLabel)>>,
    pub skipped: Vec<LabelingError>,
}

impl RegressionSample {
    pub fn manifest(&self, seed: u64) -> Vec<RegressionEntry> {
        self.sets
            .values()
            .flatten()
            .map(|(c, label)| RegressionEntry {
                community: c.community.clone(),
                comment_id: c.id.clone(),
                label: *label,
                year_tag: c.year_tag.clone(),
                seed,
            })
            .collect()
    }
}

/// Draws `min(regression_per_class, |High|, |Low|)` comments from each class.
pub fn sample_regression_community(
    store: &CommentStore,
    community: &str,
    labels: &CommunityLabels,
    plan: &SamplePlan,
) -> Result<Vec<(Comment, ScoreLabel)>, LabelingError> {
    let of_class = |label| -> Vec<&Comment> {
        store
            .community(community)
            .filter(|c| labels.get(&c.id) == Some(label))
            .collect()
    };
    let high = of_class(ScoreLabel::High);
    let low = of_class(ScoreLabel::Low);
    for (class, name) in [(&high, "high"), (&low, "low")] {
        if class.is_empty() {
            return Err(LabelingError::CommunitySkipped {
                community: community.to_string(),
                missing: name,
            });
        }
    }
    let per_class = plan.regression_per_class.min(high.len()).min(low.len());
    let mut out = Vec::with_capacity(2 * per_class);
    for (class, label) in [(high, ScoreLabel::High), (low, ScoreLabel::Low)] {
        let stream = format!("regression/{}", label.as_str());
        let mut rng = stream_rng(plan.seed, &stream, community);
        for i in sample_indices(&mut rng, class.len(), per_class) {
            out.push((masked(class[i]), label));
        }
    }
    Ok(out)
}

pub fn sample_regression_set(
    store: &CommentStore,
    labels: &BTreeMap<String, CommunityLabels>,
    plan: &SamplePlan,
) -> Result<RegressionSample, LabelingError> {
    plan.validate()?;
    let mut out = RegressionSample::default();
    for (community, community_labels) in labels {
        match sample_regression_community(store, community, community_labels, plan) {
            Ok(set) => {
                out.sets.insert(community.clone(), set);
            }
            Err(e @ LabelingError::CommunitySkipped { .. }) => {
                tracing::warn!("{e}");
                out.skipped.push(e);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
