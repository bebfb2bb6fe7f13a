//! Manual regrouping applied after automatic labelling.
//!
//! One directive per line; `#` starts a comment:
//!
//! ```text
//! merge humor wit -> humor
//! rename kindness -> compassion
//! move "dad jokes" -> humor
//! ```
//!
//! Tokens may be double-quoted to include spaces. Directives apply in order.

use super::cluster::ValueCluster;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OverrideError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown value label `{0}`")]
    UnknownLabel(String),
    #[error("unknown keyword `{0}`")]
    UnknownKeyword(String),
    #[error("cluster {0} has no label")]
    Unlabeled(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Override {
    Merge { labels: Vec<String>, into: String },
    Rename { from: String, to: String },
    Move { keyword: String, to: String },
}

fn tokenize(line: &str, lineno: usize) -> Result<Vec<String>, OverrideError> {
    let mut tokens = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '"' {
            chars.next();
            let mut tok = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some(ch) => tok.push(ch),
                    None => {
                        return Err(OverrideError::Syntax {
                            line: lineno,
                            message: "unterminated quote".into(),
                        })
                    }
                }
            }
            tokens.push(tok);
        } else {
            let mut tok = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() {
                    break;
                }
                tok.push(ch);
                chars.next();
            }
            tokens.push(tok);
        }
    }
    Ok(tokens)
}

pub fn parse_overrides(text: &str) -> Result<Vec<Override>, OverrideError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = match raw.find('#') {
            Some(p) if !raw[..p].contains('"') => &raw[..p],
            _ => raw,
        };
        let tokens = tokenize(line, lineno)?;
        if tokens.is_empty() {
            continue;
        }
        let err = |m: &str| OverrideError::Syntax {
            line: lineno,
            message: m.to_string(),
        };
        let arrow = tokens
            .iter()
            .position(|t| t == "->")
            .ok_or_else(|| err("missing `->`"))?;
        if arrow + 2 != tokens.len() {
            return Err(err("expected exactly one target after `->`"));
        }
        let args: Vec<String> = tokens[1..arrow].iter().map(|t| t.trim().to_lowercase()).collect();
        let target = tokens[arrow + 1].trim().to_lowercase();
        let o = match tokens[0].as_str() {
            "merge" if args.len() >= 2 => Override::Merge { labels: args, into: target },
            "merge" => return Err(err("merge needs at least two labels")),
            "rename" if args.len() == 1 => Override::Rename {
                from: args[0].clone(),
                to: target,
            },
            "move" if args.len() == 1 => Override::Move {
                keyword: args[0].clone(),
                to: target,
            },
            "rename" | "move" => return Err(err("expected one argument before `->`")),
            other => return Err(err(&format!("unknown directive `{other}`"))),
        };
        out.push(o);
    }
    Ok(out)
}

pub fn read_overrides(path: &Path) -> Result<Vec<Override>, OverrideError> {
    parse_overrides(&std::fs::read_to_string(path)?)
}

/// Keyword → canonical value label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalMap {
    map: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct MapRow {
    keyword: String,
    value: String,
}

impl CanonicalMap {
    pub fn from_clusters(clusters: &[ValueCluster]) -> Result<Self, OverrideError> {
        let mut map = BTreeMap::new();
        for c in clusters {
            let label = c.label.clone().ok_or(OverrideError::Unlabeled(c.cluster_id))?;
            for m in &c.members {
                map.insert(m.clone(), label.clone());
            }
        }
        Ok(Self { map })
    }

    pub fn get(&self, keyword: &str) -> Option<&str> {
        self.map.get(keyword).map(String::as_str)
    }

    pub fn insert(&mut self, keyword: impl Into<String>, value: impl Into<String>) {
        self.map.insert(keyword.into(), value.into());
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn values(&self) -> BTreeSet<&str> {
        self.map.values().map(String::as_str).collect()
    }

    pub fn members(&self, value: &str) -> Vec<&str> {
        self.iter().filter(|(_, v)| *v == value).map(|(k, _)| k).collect()
    }

    pub fn apply(&mut self, o: &Override) -> Result<(), OverrideError> {
        let values: BTreeSet<String> = self.map.values().cloned().collect();
        match o {
            Override::Merge { labels, into } => {
                for l in labels {
                    if !values.contains(l) {
                        return Err(OverrideError::UnknownLabel(l.clone()));
                    }
                }
                for v in self.map.values_mut() {
                    if labels.contains(v) {
                        *v = into.clone();
                    }
                }
            }
            Override::Rename { from, to } => {
                if !values.contains(from) {
                    return Err(OverrideError::UnknownLabel(from.clone()));
                }
                for v in self.map.values_mut() {
                    if v == from {
                        *v = to.clone();
                    }
                }
            }
            Override::Move { keyword, to } => {
                if !values.contains(to) {
                    return Err(OverrideError::UnknownLabel(to.clone()));
                }
                let slot = self
                    .map
                    .get_mut(keyword)
                    .ok_or_else(|| OverrideError::UnknownKeyword(keyword.clone()))?;
                *slot = to.clone();
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), OverrideError> {
        let mut w = csv::Writer::from_path(path)?;
        for (k, v) in &self.map {
            w.serialize(MapRow {
                keyword: k.clone(),
                value: v.clone(),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self, OverrideError> {
        let mut r = csv::Reader::from_path(path)?;
        let mut map = BTreeMap::new();
        for row in r.deserialize() {
            let row: MapRow = row?;
            map.insert(row.keyword, row.value);
        }
        Ok(Self { map })
    }
}

pub fn apply_regroup_overrides(
    clusters: &[ValueCluster],
    overrides: &[Override],
) -> Result<CanonicalMap, OverrideError> {
    let mut map = CanonicalMap::from_clusters(clusters)?;
    for o in overrides {
        map.apply(o)?;
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clusters() -> Vec<ValueCluster> {
        let mk = |id, members: &[&str], label: &str| ValueCluster {
            cluster_id: id,
            members: members.iter().map(|s| s.to_string()).collect(),
            label: Some(label.to_string()),
        };
        vec![
            mk(0, &["funny", "witty"], "humor"),
            mk(2, &["jokes", "puns"], "wordplay"),
            mk(4, &["kind", "caring"], "kindness"),
        ]
    }

    #[test]
    fn parses_directives() {
        let o = parse_overrides("# c\nmerge humor wordplay -> humor\n\nrename kindness -> compassion # x\nmove \"dad jokes\" -> humor\n").unwrap();
        assert_eq!(
            o,
            vec![
                Override::Merge {
                    labels: vec!["humor".into(), "wordplay".into()],
                    into: "humor".into()
                },
                Override::Rename {
                    from: "kindness".into(),
                    to: "compassion".into()
                },
                Override::Move {
                    keyword: "dad jokes".into(),
                    to: "humor".into()
                },
            ]
        );
    }

    #[test]
    fn syntax_errors_carry_line() {
        for bad in ["merge a -> b", "rename a b", "split a -> b", "move \"x -> a", "rename a -> b c"] {
            assert!(matches!(parse_overrides(bad), Err(OverrideError::Syntax { line: 1, .. })), "{bad}");
        }
    }

    #[test]
    fn applies_in_order() {
        let o = parse_overrides("merge humor wordplay -> humor\nrename kindness -> compassion\nmove kind -> humor").unwrap();
        let m = apply_regroup_overrides(&clusters(), &o).unwrap();
        assert_eq!(m.get("puns"), Some("humor"));
        assert_eq!(m.get("caring"), Some("compassion"));
        assert_eq!(m.get("kind"), Some("humor"));
        assert_eq!(m.values().into_iter().collect::<Vec<_>>(), vec!["compassion", "humor"]);
    }

    #[test]
    fn unknown_targets_rejected() {
        let c = clusters();
        let e = apply_regroup_overrides(&c, &parse_overrides("rename nope -> x").unwrap());
        assert!(matches!(e, Err(OverrideError::UnknownLabel(l)) if l == "nope"));
        let e = apply_regroup_overrides(&c, &parse_overrides("move ghost -> humor").unwrap());
        assert!(matches!(e, Err(OverrideError::UnknownKeyword(_))));
        let e = apply_regroup_overrides(&c, &parse_overrides("move funny -> newlabel").unwrap());
        assert!(matches!(e, Err(OverrideError::UnknownLabel(_))));
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("map.csv");
        let m = apply_regroup_overrides(&clusters(), &[]).unwrap();
        m.write_csv(&p).unwrap();
        assert_eq!(CanonicalMap::read_csv(&p).unwrap(), m);
    }
}
