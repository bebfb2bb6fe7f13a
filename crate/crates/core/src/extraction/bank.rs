use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Normalized form of a keyword: trimmed, lowercase, inner whitespace collapsed.
pub fn normalize_keyword(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Keywords already emitted during a run, in order of first use.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct ValueBank {
    entries: Vec<String>,
    seen: HashSet<String>,
}

impl From<Vec<String>> for ValueBank {
    fn from(values: Vec<String>) -> Self {
        let mut bank = Self::new();
        for v in &values {
            bank.insert(v);
        }
        bank
    }
}

impl From<ValueBank> for Vec<String> {
    fn from(bank: ValueBank) -> Self {
        bank.entries
    }
}

impl ValueBank {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `true` when the keyword was not yet present.
    pub fn insert(&mut self, keyword: &str) -> bool {
        let k = normalize_keyword(keyword);
        if k.is_empty() || self.seen.contains(&k) {
            return false;
        }
        self.seen.insert(k.clone());
        self.entries.push(k);
        true
    }

    pub fn contains(&self, keyword: &str) -> bool {
        self.seen.contains(&normalize_keyword(keyword))
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Comma-separated rendering. With a token budget, only the earliest
    /// entries that fit are kept (tokens estimated as one per four bytes).
    pub fn render(&self, token_budget: Option<usize>) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            let extra = if out.is_empty() { entry.len() } else { entry.len() + 2 };
            if let Some(budget) = token_budget {
                if (out.len() + extra).div_ceil(4) > budget {
                    break;
                }
            }
            if !out.is_empty() {
                out.push_str(", ");
            }
            out.push_str(entry);
        }
        out
    }
}
