use super::bank::normalize_keyword;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const NA_LITERAL: &str = "N/A";
pub const MAX_KEYWORDS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("response is not a JSON object: {0}")]
    Malformed(String),
    #[error("response has no `{0}` field")]
    MissingField(&'static str),
    #[error("`answer` must be \"N/A\" or a list of strings")]
    BadAnswerType,
    #[error("`answer` list is empty")]
    Empty,
    #[error("`answer` has {0} distinct keywords; at most 3 allowed")]
    TooMany(usize),
}

/// Either one to three normalized keywords, or N/A.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Answer {
    Keywords(Vec<String>),
    NotApplicable,
}

impl Answer {
    pub fn keywords(&self) -> &[String] {
        match self {
            Answer::Keywords(k) => k,
            Answer::NotApplicable => &[],
        }
    }

    pub fn is_na(&self) -> bool {
        matches!(self, Answer::NotApplicable)
    }

    /// Normalizes, dedups and checks the 1-3 bound.
    pub fn from_keywords<S: AsRef<str>>(raw: &[S]) -> Result<Self, ParseError> {
        let mut out: Vec<String> = Vec::with_capacity(raw.len());
        for k in raw {
            let k = normalize_keyword(k.as_ref());
            if k.is_empty() {
                return Err(ParseError::BadAnswerType);
            }
            if !out.contains(&k) {
                out.push(k);
            }
        }
        match out.len() {
            0 => Err(ParseError::Empty),
            n if n > MAX_KEYWORDS => Err(ParseError::TooMany(n)),
            _ => Ok(Answer::Keywords(out)),
        }
    }
}

impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Answer::Keywords(k) => k.serialize(s),
            Answer::NotApplicable => s.serialize_str(NA_LITERAL),
        }
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        answer_from_value(&Value::deserialize(d)?).map_err(de::Error::custom)
    }
}

fn answer_from_value(v: &Value) -> Result<Answer, ParseError> {
    match v {
        Value::String(s) if s.trim() == NA_LITERAL => Ok(Answer::NotApplicable),
        Value::Array(items) => {
            let strings = items
                .iter()
                .map(|i| i.as_str().ok_or(ParseError::BadAnswerType))
                .collect::<Result<Vec<_>, _>>()?;
            Answer::from_keywords(&strings)
        }
        _ => Err(ParseError::BadAnswerType),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub answer: Answer,
    pub reasoning: String,
}

fn strip_code_fence(raw: &str) -> &str {
    let t = raw.trim();
    let Some(inner) = t.strip_prefix("```") else {
        return t;
    };
    let inner = inner.strip_prefix("json").unwrap_or(inner);
    inner.strip_suffix("```").unwrap_or(inner).trim()
}

/// Parses `{"thinking": "...", "answer": "N/A" | ["kw", ...]}`.
pub fn parse_response(raw: &str) -> Result<ParsedResponse, ParseError> {
    let value: Value = serde_json::from_str(strip_code_fence(raw))
        .map_err(|e| ParseError::Malformed(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ParseError::Malformed("top-level value is not an object".into()))?;
    let answer = obj.get("answer").ok_or(ParseError::MissingField("answer"))?;
    let answer = answer_from_value(answer)?;
    let reasoning = obj
        .get("thinking")
        .ok_or(ParseError::MissingField("thinking"))?
        .as_str()
        .ok_or(ParseError::MissingField("thinking"))?
        .to_string();
    Ok(ParsedResponse { answer, reasoning })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keywords_are_normalized() {
        let r = parse_response(r#"{"thinking":"it is funny","answer":["Humor"," concise "]}"#).unwrap();
        assert_eq!(r.answer, Answer::Keywords(vec!["humor".into(), "concise".into()]));
        assert_eq!(r.reasoning, "it is funny");
    }

    #[test]
    fn na_literal() {
        let r = parse_response(r#"{"thinking":"rude","answer":"N/A"}"#).unwrap();
        assert!(r.answer.is_na());
        assert!(r.answer.keywords().is_empty());
    }

    #[test]
    fn cardinality_and_shape_errors() {
        assert_eq!(
            parse_response(r#"{"thinking":"x","answer":["a","b","c","d"]}"#),
            Err(ParseError::TooMany(4))
        );
        assert!(parse_response(r#"{"answer":["a","b","c","d"]}"#).is_err());
        assert_eq!(
            parse_response(r#"{"thinking":"x","answer":[]}"#),
            Err(ParseError::Empty)
        );
        assert_eq!(
            parse_response(r#"{"thinking":"x","answer":["a", 3]}"#),
            Err(ParseError::BadAnswerType)
        );
        assert_eq!(
            parse_response(r#"{"thinking":"x","answer":"humor"}"#),
            Err(ParseError::BadAnswerType)
        );
        assert!(matches!(parse_response("humor, concise"), Err(ParseError::Malformed(_))));
        assert_eq!(
            parse_response(r#"{"answer":"N/A"}"#),
            Err(ParseError::MissingField("thinking"))
        );
    }

    #[test]
    fn duplicates_collapse_before_the_bound() {
        let r = parse_response(r#"{"thinking":"","answer":["A","a","b","c"]}"#).unwrap();
        assert_eq!(r.answer.keywords(), ["a", "b", "c"]);
    }

    #[test]
    fn code_fences_are_tolerated() {
        let r = parse_response("```json\n{\"thinking\":\"t\",\"answer\":[\"wit\"]}\n```").unwrap();
        assert_eq!(r.answer.keywords(), ["wit"]);
    }

    #[test]
    fn answer_serializes_like_the_response_shape() {
        let kw = Answer::Keywords(vec!["humor".into()]);
        assert_eq!(serde_json::to_string(&kw).unwrap(), r#"["humor"]"#);
        assert_eq!(serde_json::to_string(&Answer::NotApplicable).unwrap(), r#""N/A""#);
        let back: Answer = serde_json::from_str(r#""N/A""#).unwrap();
        assert!(back.is_na());
    }
}
