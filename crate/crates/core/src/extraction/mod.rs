//! Value extraction: prompt construction, provider calls with caching and
//! retry, response parsing and the run-wide value bank.

pub mod bank;
pub mod cache;
pub mod provider;
pub mod response;
pub mod template;

pub use bank::{normalize_keyword, ValueBank};
pub use cache::{cache_key, ResponseCache};
pub use provider::{CompletionRequest, MockProvider, MockRule, MockScript, Provider, ProviderError, MOCK_MALFORMED};
pub use response::{parse_response, Answer, ParseError, ParsedResponse};
pub use template::{build_prompt, PromptTemplate};

use crate::labeling::CommentPair;
use crate::metadata::CommunityMetadata;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("template error: {0}")]
    Template(String),
    #[error("invalid provider config: {0}")]
    Config(String),
    #[error("no pairs to extract")]
    EmptyInput,
    #[error("provider unavailable after {attempts} attempts: {message}")]
    ProviderUnavailable { attempts: usize, message: String },
    #[error("pair {community}/{target_id} quarantined after {attempts} unparseable responses: {error}")]
    Quarantined {
        community: String,
        target_id: String,
        attempts: usize,
        error: ParseError,
        last_raw: String,
    },
    #[error("{failures} provider failures exceed the run budget of {budget}")]
    FailureBudgetExceeded { failures: usize, budget: usize },
    #[error("response cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub provider_name: String,
    pub model_id: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: usize,
    #[serde(default)]
    pub cache_path: Option<PathBuf>,
}

fn default_top_p() -> f64 {
    1.0
}

fn default_max_retries() -> usize {
    2
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            provider_name: "mock".into(),
            model_id: "gpt-4o-2024-08-06".into(),
            temperature: 0.0,
            top_p: 1.0,
            max_retries: default_max_retries(),
            cache_path: None,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ExtractionError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(ExtractionError::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ExtractionError::Config(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if self.model_id.trim().is_empty() {
            return Err(ExtractionError::Config("model_id is empty".into()));
        }
        Ok(())
    }

    pub fn request<'a>(&'a self, prompt: &'a str) -> CompletionRequest<'a> {
        CompletionRequest {
            model_id: &self.model_id,
            prompt,
            temperature: self.temperature,
            top_p: self.top_p,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankScope {
    /// One bank shared by every community of the run.
    #[default]
    Global,
    PerCommunity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSettings {
    pub provider: ProviderConfig,
    pub bank_scope: BankScope,
    /// Approximate token budget for the rendered bank; `None` renders it whole.
    pub bank_token_budget: Option<usize>,
    /// Fraction of pairs allowed to fail with the provider unavailable.
    pub failure_budget: f64,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        Self {
            provider: ProviderConfig::default(),
            bank_scope: BankScope::Global,
            bank_token_budget: None,
            failure_budget: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub community: String,
    pub target_id: String,
    pub context_id: String,
    pub year_tag: String,
    pub answer: Answer,
    pub reasoning: String,
    pub model_id: String,
    /// Whether the response came from the cache. Not serialised, so outputs
    /// do not depend on cache state.
    #[serde(skip_serializing, default)]
    pub cached: bool,
}

impl ExtractionRecord {
    pub fn keywords(&self) -> &[String] {
        self.answer.keywords()
    }

    pub fn is_na(&self) -> bool {
        self.answer.is_na()
    }
}

fn record(pair: &CommentPair, parsed: ParsedResponse, model_id: &str, cached: bool) -> ExtractionRecord {
    ExtractionRecord {
        community: pair.community.clone(),
        target_id: pair.target.id.clone(),
        context_id: pair.context.id.clone(),
        year_tag: pair.year_tag.clone(),
        answer: parsed.answer,
        reasoning: parsed.reasoning,
        model_id: model_id.to_string(),
        cached,
    }
}

/// Extracts values for one pair.
///
/// A cached, parseable response bypasses the provider. Otherwise the identical
/// prompt is sent up to `max_retries + 1` times; unparseable responses end in
/// quarantine, transport failures in `ProviderUnavailable`.
#[allow(clippy::too_many_arguments)]
pub fn extract_one(
    provider: &dyn Provider,
    config: &ProviderConfig,
    template: &PromptTemplate,
    description: &str,
    bank: &ValueBank,
    bank_token_budget: Option<usize>,
    pair: &CommentPair,
    cache: &mut ResponseCache,
) -> Result<ExtractionRecord, ExtractionError> {
    let prompt = build_prompt(template, &pair.community, description, bank, bank_token_budget, pair);
    let key = cache_key(&config.model_id, &prompt);
    if let Some(raw) = cache.get(&key) {
        match parse_response(raw) {
            Ok(parsed) => return Ok(record(pair, parsed, &config.model_id, true)),
            Err(e) => tracing::warn!("cached response for {} unparseable: {e}", pair.target.id),
        }
    }
    let attempts = config.max_retries + 1;
    let mut last_parse: Option<(ParseError, String)> = None;
    let mut last_unavailable = None;
    for _ in 0..attempts {
        match provider.complete(&config.request(&prompt)) {
            Ok(raw) => match parse_response(&raw) {
                Ok(parsed) => {
                    cache.put(key, raw)?;
                    return Ok(record(pair, parsed, &config.model_id, false));
                }
                Err(e) => last_parse = Some((e, raw)),
            },
            Err(e) => last_unavailable = Some(e.to_string()),
        }
    }
    match last_parse {
        Some((error, last_raw)) => Err(ExtractionError::Quarantined {
            community: pair.community.clone(),
            target_id: pair.target.id.clone(),
            attempts,
            error,
            last_raw,
        }),
        None => Err(ExtractionError::ProviderUnavailable {
            attempts,
            message: last_unavailable.unwrap_or_default(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedPair {
    pub community: String,
    pub target_id: String,
    pub attempts: usize,
    pub error: String,
    pub last_raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedPair {
    pub community: String,
    pub target_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractionRun {
    pub records: Vec<ExtractionRecord>,
    /// Union of all keywords in first-use order.
    pub bank: ValueBank,
    pub quarantined: Vec<QuarantinedPair>,
    pub unavailable: Vec<FailedPair>,
}

/// Runs extraction over all pairs in `(community, target_id)` order.
///
/// Each non-N/A record adds its unseen keywords to the bank before the next
/// prompt is built, so the loop is sequential by construction.
pub fn run_extraction(
    pairs: &[CommentPair],
    provider: &dyn Provider,
    settings: &ExtractionSettings,
    template: &PromptTemplate,
    metadata: &CommunityMetadata,
    cache: &mut ResponseCache,
) -> Result<ExtractionRun, ExtractionError> {
    if pairs.is_empty() {
        return Err(ExtractionError::EmptyInput);
    }
    settings.provider.validate()?;
    let mut ordered: Vec<&CommentPair> = pairs.iter().collect();
    ordered.sort_by(|a, b| (&a.community, &a.target.id).cmp(&(&b.community, &b.target.id)));
    let budget = (settings.failure_budget * pairs.len() as f64).floor() as usize;

    let mut run = ExtractionRun::default();
    let mut community_banks: BTreeMap<&str, ValueBank> = BTreeMap::new();
    for pair in ordered {
        let bank = match settings.bank_scope {
            BankScope::Global => &run.bank,
            BankScope::PerCommunity => community_banks.entry(pair.community.as_str()).or_default(),
        };
        let result = extract_one(
            provider,
            &settings.provider,
            template,
            metadata.description(&pair.community),
            bank,
            settings.bank_token_budget,
            pair,
            cache,
        );
        match result {
            Ok(rec) => {
                for kw in rec.keywords() {
                    run.bank.insert(kw);
                    if settings.bank_scope == BankScope::PerCommunity {
                        community_banks
                            .entry(pair.community.as_str())
                            .or_default()
                            .insert(kw);
                    }
                }
                run.records.push(rec);
            }
            Err(ExtractionError::Quarantined {
                community,
                target_id,
                attempts,
                error,
                last_raw,
            }) => {
                tracing::warn!(%community, %target_id, "quarantined: {error}");
                run.quarantined.push(QuarantinedPair {
                    community,
                    target_id,
                    attempts,
                    error: error.to_string(),
                    last_raw,
                });
            }
            Err(e @ ExtractionError::ProviderUnavailable { .. }) => {
                run.unavailable.push(FailedPair {
                    community: pair.community.clone(),
                    target_id: pair.target.id.clone(),
                    error: e.to_string(),
                });
                if run.unavailable.len() > budget {
                    return Err(ExtractionError::FailureBudgetExceeded {
                        failures: run.unavailable.len(),
                        budget,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Comment;

    fn pair(community: &str, id: &str, body: &str) -> CommentPair {
        let mk = |cid: &str, parent: Option<&str>, body: &str| Comment {
            id: cid.into(),
            parent_id: parent.map(Into::into),
            link_id: "t3_x".into(),
            community: community.into(),
            author: "a".into(),
            body: body.into(),
            score: 1,
            created_utc: 0,
            removed_by_moderator: false,
            deleted_by_author: false,
            year_tag: "2022".into(),
        };
        CommentPair {
            community: community.into(),
            context: mk(&format!("ctx-{id}"), None, "context"),
            target: mk(id, Some(&format!("ctx-{id}")), body),
            year_tag: "2022".into(),
        }
    }

    fn ok(answer: &str) -> String {
        format!(r#"{{"thinking":"because","answer":{answer}}}"#)
    }

    fn settings(max_retries: usize) -> ExtractionSettings {
        ExtractionSettings {
            provider: ProviderConfig {
                max_retries,
                ..ProviderConfig::default()
            },
            ..ExtractionSettings::default()
        }
    }

    #[test]
    fn mock_path_then_cache_hit() {
        let provider = MockProvider::from_fn(|_, _| Ok(ok(r#"["nostalgia"]"#)));
        let mut cache = ResponseCache::in_memory();
        let s = settings(2);
        let p = pair("aww", "t1", "old times");
        let call = |cache: &mut ResponseCache| {
            extract_one(&provider, &s.provider, &PromptTemplate::default(), "", &ValueBank::new(), None, &p, cache)
        };
        let first = call(&mut cache).unwrap();
        assert_eq!(first.keywords(), ["nostalgia"]);
        assert!(!first.cached);
        let second = call(&mut cache).unwrap();
        assert!(second.cached);
        assert_eq!(ExtractionRecord { cached: false, ..second }, first);
        assert_eq!(provider.calls(), 1);
    }

    #[test]
    fn malformed_thrice_is_quarantined() {
        let provider = MockProvider::from_fn(|_, _| Ok("garbage".into()));
        let s = settings(2);
        let err = extract_one(
            &provider,
            &s.provider,
            &PromptTemplate::default(),
            "",
            &ValueBank::new(),
            None,
            &pair("aww", "t1", "x"),
            &mut ResponseCache::in_memory(),
        )
        .unwrap_err();
        assert!(matches!(err, ExtractionError::Quarantined { attempts: 3, .. }));
        assert_eq!(provider.calls(), 3);
    }

    #[test]
    fn retry_recovers_from_transient_garbage() {
        let provider = MockProvider::from_fn(|_, attempt| {
            Ok(if attempt == 0 { "oops".into() } else { ok(r#"["wit"]"#) })
        });
        let s = settings(1);
        let rec = extract_one(
            &provider,
            &s.provider,
            &PromptTemplate::default(),
            "",
            &ValueBank::new(),
            None,
            &pair("aww", "t1", "x"),
            &mut ResponseCache::in_memory(),
        )
        .unwrap();
        assert_eq!(rec.keywords(), ["wit"]);
    }

    #[test]
    fn unavailable_provider() {
        let provider = MockProvider::from_fn(|_, _| Err(ProviderError::Unavailable("down".into())));
        let s = settings(1);
        let err = extract_one(
            &provider,
            &s.provider,
            &PromptTemplate::default(),
            "",
            &ValueBank::new(),
            None,
            &pair("aww", "t1", "x"),
            &mut ResponseCache::in_memory(),
        )
        .unwrap_err();
        assert!(matches!(err, ExtractionError::ProviderUnavailable { attempts: 2, .. }));
    }

    #[test]
    fn bank_accumulates_in_pair_order() {
        let provider = MockProvider::scripted(vec![
            ok(r#"["humor"]"#),
            ok(r#"["Humor","concise"]"#),
            ok(r#""N/A""#),
        ]);
        let pairs = vec![pair("aww", "c", "3"), pair("aww", "a", "1"), pair("aww", "b", "2")];
        let run = run_extraction(
            &pairs,
            &provider,
            &settings(0),
            &PromptTemplate::default(),
            &CommunityMetadata::default(),
            &mut ResponseCache::in_memory(),
        )
        .unwrap();
        assert_eq!(run.bank.entries(), ["humor", "concise"]);
        let ids: Vec<_> = run.records.iter().map(|r| r.target_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(run.records.iter().filter(|r| r.is_na()).count(), 1);
    }

    #[test]
    fn later_prompts_see_earlier_bank_updates() {
        let provider = MockProvider::from_fn(|prompt, _| {
            Ok(if prompt.contains("used so far:\n(empty)") {
                ok(r#"["first"]"#)
            } else if prompt.contains("used so far:\nfirst\n") {
                ok(r#"["second"]"#)
            } else {
                ok(r#""N/A""#)
            })
        });
        let pairs = vec![pair("aww", "1", "x"), pair("aww", "2", "y")];
        let run = run_extraction(
            &pairs,
            &provider,
            &settings(0),
            &PromptTemplate::default(),
            &CommunityMetadata::default(),
            &mut ResponseCache::in_memory(),
        )
        .unwrap();
        assert_eq!(run.bank.entries(), ["first", "second"]);
    }

    #[test]
    fn per_community_banks_are_isolated() {
        let provider = MockProvider::from_fn(|prompt, _| {
            Ok(if prompt.contains("used so far:\n(empty)") {
                ok(r#"["fresh"]"#)
            } else {
                ok(r#"["reused"]"#)
            })
        });
        let pairs = vec![pair("a", "1", "x"), pair("b", "2", "y")];
        let mut s = settings(0);
        s.bank_scope = BankScope::PerCommunity;
        let run = run_extraction(
            &pairs,
            &provider,
            &s,
            &PromptTemplate::default(),
            &CommunityMetadata::default(),
            &mut ResponseCache::in_memory(),
        )
        .unwrap();
        assert!(run.records.iter().all(|r| r.keywords() == ["fresh"]));
    }

    #[test]
    fn failure_budget_aborts_the_run() {
        let provider = MockProvider::from_fn(|_, _| Err(ProviderError::Unavailable("down".into())));
        let pairs: Vec<_> = (0..10).map(|i| pair("aww", &i.to_string(), "x")).collect();
        let err = run_extraction(
            &pairs,
            &provider,
            &settings(0),
            &PromptTemplate::default(),
            &CommunityMetadata::default(),
            &mut ResponseCache::in_memory(),
        )
        .unwrap_err();
        assert!(matches!(err, ExtractionError::FailureBudgetExceeded { failures: 1, budget: 0 }));
    }

    #[test]
    fn empty_input_and_bad_config() {
        let provider = MockProvider::scripted(vec![]);
        let err = run_extraction(
            &[],
            &provider,
            &settings(0),
            &PromptTemplate::default(),
            &CommunityMetadata::default(),
            &mut ResponseCache::in_memory(),
        )
        .unwrap_err();
        assert!(matches!(err, ExtractionError::EmptyInput));
        let bad = ProviderConfig {
            top_p: 0.0,
            ..ProviderConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ProviderConfig {
            temperature: -1.0,
            ..ProviderConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
