use super::{ProsocialError, ProsocialVector};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

/// One row of a score file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScore {
    pub comment_id: String,
    pub supportiveness: f64,
    pub agreement: f64,
    pub politeness: f64,
}

/// Source of raw (unnormalised) prosociality scores for a comment.
pub trait Scorer {
    fn score(&self, comment_id: &str, body: &str) -> Result<ProsocialVector, ProsocialError>;
}

/// Scores precomputed by an external classifier, keyed by comment id.
#[derive(Debug, Clone, Default)]
pub struct ScoreFile {
    scores: HashMap<String, ProsocialVector>,
}

impl ScoreFile {
    pub fn from_rows(rows: impl IntoIterator<Item = RawScore>) -> Self {
        let scores = rows
            .into_iter()
            .map(|r| {
                let v = ProsocialVector {
                    supportiveness: r.supportiveness,
                    agreement: r.agreement,
                    politeness: r.politeness,
                };
                (r.comment_id, v)
            })
            .collect();
        Self { scores }
    }

    pub fn read(path: &Path) -> Result<Self, ProsocialError> {
        let rows: Vec<RawScore> =
            crate::table::read_csv(path).map_err(|e| ProsocialError::ScoreFile(format!("{}: {e}", path.display())))?;
        for r in &rows {
            let v = [r.supportiveness, r.agreement, r.politeness];
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ProsocialError::ScoreFile(format!("non-finite score for {}", r.comment_id)));
            }
        }
        Ok(Self::from_rows(rows))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl Scorer for ScoreFile {
    fn score(&self, comment_id: &str, _body: &str) -> Result<ProsocialVector, ProsocialError> {
        self.scores
            .get(comment_id)
            .copied()
            .ok_or_else(|| ProsocialError::MissingScore(comment_id.to_string()))
    }
}

/// Word-list scorer: each metric is the share of tokens found in its list.
/// Transparent and crude; meant for tests and dry runs, not for analysis.
#[derive(Debug, Clone)]
pub struct LexiconScorer {
    lists: [Vec<String>; 3],
}

impl Default for LexiconScorer {
    fn default() -> Self {
        let words = |s: &str| s.split_whitespace().map(str::to_string).collect();
        Self {
            lists: [
                words("support supportive help helpful hope care hug proud love encourage glad luck"),
                words("agree agreed exactly true right yes same indeed correct absolutely"),
                words("please thanks thank sorry appreciate kindly welcome pardon excuse grateful"),
            ],
        }
    }
}

impl LexiconScorer {
    pub fn new(supportive: Vec<String>, agreement: Vec<String>, polite: Vec<String>) -> Self {
        let lower = |v: Vec<String>| v.into_iter().map(|w| w.to_lowercase()).collect();
        Self {
            lists: [lower(supportive), lower(agreement), lower(polite)],
        }
    }
}

impl Scorer for LexiconScorer {
    fn score(&self, _comment_id: &str, body: &str) -> Result<ProsocialVector, ProsocialError> {
        let tokens: Vec<String> = body
            .split(|c: char| !c.is_alphanumeric() && c != '\'')
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect();
        let n = tokens.len().max(1) as f64;
        let share = |list: &[String]| tokens.iter().filter(|t| list.contains(t)).count() as f64 / n;
        Ok(ProsocialVector::from_array([
            share(&self.lists[0]),
            share(&self.lists[1]),
            share(&self.lists[2]),
        ]))
    }
}
