//! Prosociality statistics: score normalisation, collinearity diagnostics,
//! a PCA composite score, per-community logistic regressions of the upvote
//! label, and per-value recall of high-prosociality comments.

pub mod logistic;
pub mod normalize;
pub mod pca;
pub mod recall;
pub mod report;
pub mod scorer;
pub mod vif;

pub use logistic::{logistic_fit, RegressionResult};
pub use normalize::{normalize_scores, Normalized};
pub use pca::{pca_first_component, PcaModel};
pub use recall::{prosocial_threshold, recall_per_value, BucketCount, ProsocialLabel, RecallBucket, RecallReport, RecallRow, Threshold};
pub use report::{analyze_community, odds_ratio_report, CommunityRegression, OddsRatioReport, OddsRatioRow, ProsocialDataset};
pub use scorer::{LexiconScorer, RawScore, ScoreFile, Scorer};
pub use vif::vif;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProsocialError {
    #[error("no observations")]
    EmptyInput,
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("column {0} is constant")]
    DegenerateColumn(usize),
    #[error("column {column} is an exact linear combination of the others (R² = {r_squared})")]
    CollinearInput { column: usize, r_squared: f64 },
    #[error("data have zero total variance")]
    DegenerateInput,
    #[error("outcome has a single class")]
    SingleClass,
    #[error("predictor is constant")]
    ConstantPredictor,
    #[error("classes are perfectly separated; the maximum-likelihood estimate does not exist")]
    SeparationDetected,
    #[error("x and y lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no prosociality score for comment {0}")]
    MissingScore(String),
    #[error("no scale for value `{0}`")]
    UnknownValue(String),
    #[error("score file: {0}")]
    ScoreFile(String),
    #[error("invalid alpha {0}")]
    BadAlpha(f64),
}

/// The three per-comment prosociality metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsocialVector {
    pub supportiveness: f64,
    pub agreement: f64,
    pub politeness: f64,
}

impl ProsocialVector {
    pub const METRICS: [&'static str; 3] = ["supportiveness", "agreement", "politeness"];

    pub fn as_array(&self) -> [f64; 3] {
        [self.supportiveness, self.agreement, self.politeness]
    }

    pub fn from_array([s, a, p]: [f64; 3]) -> Self {
        Self {
            supportiveness: s,
            agreement: a,
            politeness: p,
        }
    }
}
