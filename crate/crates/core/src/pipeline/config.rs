//! Run configuration (TOML). Unknown keys are rejected and relative paths are
//! resolved against the directory of the config file.

use crate::extraction::{BankScope, ExtractionSettings, ProviderConfig};
use crate::labeling::SamplePlan;
use crate::scales::ScaleThresholds;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub year_tag: String,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    pub input: InputConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub provider: ProviderSection,
    #[serde(default)]
    pub canonicalize: CanonicalizeConfig,
    #[serde(default)]
    pub scales: ScaleThresholds,
    #[serde(default)]
    pub prosocial: ProsocialConfig,
    #[serde(default)]
    pub annotation: AnnotationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Newline-delimited comment dump.
    pub comments: PathBuf,
    pub bots: Option<PathBuf>,
    pub moderators: Option<PathBuf>,
    /// CSV of community, subscriber_count, description.
    pub metadata: Option<PathBuf>,
    /// Prompt template; the built-in one is used when absent.
    pub template: Option<PathBuf>,
    /// Manual regrouping directives applied after clustering.
    pub overrides: Option<PathBuf>,
    /// CSV of comment_id, supportiveness, agreement, politeness.
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub pairs_per_community: usize,
    pub regression_per_class: usize,
    pub low_percentile: f64,
    pub high_percentile: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        let p = SamplePlan::default();
        Self {
            pairs_per_community: p.pairs_per_community,
            regression_per_class: p.regression_per_class,
            low_percentile: p.low_percentile,
            high_percentile: p.high_percentile,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderSection {
    pub name: ProviderKind,
    pub model_id: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_retries: usize,
    /// Response cache file; defaults to `<out_dir>/cache/responses.jsonl`.
    pub cache: Option<PathBuf>,
    /// Mock responses (JSONL rules); without it every pair answers N/A.
    pub mock_script: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub api_key_env: String,
    pub failure_budget: f64,
    pub bank_scope: BankScope,
    pub bank_token_budget: Option<usize>,
}

impl Default for ProviderSection {
    fn default() -> Self {
        let p = ProviderConfig::default();
        let e = ExtractionSettings::default();
        Self {
            name: ProviderKind::Mock,
            model_id: p.model_id,
            temperature: p.temperature,
            top_p: p.top_p,
            max_retries: p.max_retries,
            cache: None,
            mock_script: None,
            endpoint: None,
            api_key_env: crate::extraction::provider::DEFAULT_API_KEY_ENV.into(),
            failure_budget: e.failure_budget,
            bank_scope: e.bank_scope,
            bank_token_budget: e.bank_token_budget,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Hash,
    File,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CanonicalizeConfig {
    pub k: usize,
    pub embedder: EmbedderKind,
    pub dim: usize,
    /// Vector file for the `file` embedder.
    pub vectors: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: String,
}

impl Default for CanonicalizeConfig {
    fn default() -> Self {
        Self {
            k: 100,
            embedder: EmbedderKind::Hash,
            dim: 32,
            vectors: None,
            endpoint: None,
            model: None,
            api_key_env: crate::extraction::provider::DEFAULT_API_KEY_ENV.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    File,
    Lexicon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProsocialConfig {
    pub enabled: bool,
    pub alpha: f64,
    pub scorer: ScorerKind,
}

impl Default for ProsocialConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            alpha: 0.05,
            scorer: ScorerKind::File,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotationConfig {
    pub per_community: usize,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self { per_community: 2 }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn resolve_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(p) = p {
        resolve(base, p);
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads, resolves relative paths against the file's directory, and validates.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.out_dir);
        let i = &mut self.input;
        resolve(base, &mut i.comments);
        for p in [&mut i.bots, &mut i.moderators, &mut i.metadata, &mut i.template, &mut i.overrides, &mut i.scores] {
            resolve_opt(base, p);
        }
        resolve_opt(base, &mut self.provider.cache);
        resolve_opt(base, &mut self.provider.mock_script);
        resolve_opt(base, &mut self.canonicalize.vectors);
        if self.provider.cache.is_none() {
            self.provider.cache = Some(self.out_dir.join("cache").join("responses.jsonl"));
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.year_tag.trim().is_empty() {
            return bad("year_tag is empty".into());
        }
        self.sample_plan().validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.provider_config().validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.scales.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.provider.failure_budget) {
            return bad(format!("failure_budget {} outside [0, 1]", self.provider.failure_budget));
        }
        if self.canonicalize.k == 0 {
            return bad("canonicalize.k must be positive".into());
        }
        if !(self.prosocial.alpha > 0.0 && self.prosocial.alpha < 1.0) {
            return bad(format!("prosocial.alpha {} outside (0, 1)", self.prosocial.alpha));
        }
        if self.provider.name == ProviderKind::Http && self.provider.endpoint.is_none() {
            return bad("provider.endpoint is required for the http provider".into());
        }
        match self.canonicalize.embedder {
            EmbedderKind::File if self.canonicalize.vectors.is_none() => {
                return bad("canonicalize.vectors is required for the file embedder".into())
            }
            EmbedderKind::Http if self.canonicalize.endpoint.is_none() || self.canonicalize.model.is_none() => {
                return bad("canonicalize.endpoint and canonicalize.model are required for the http embedder".into())
            }
            _ => {}
        }
        Ok(())
    }

    pub fn sample_plan(&self) -> SamplePlan {
        SamplePlan {
            pairs_per_community: self.sampling.pairs_per_community,
            regression_per_class: self.sampling.regression_per_class,
            low_percentile: self.sampling.low_percentile,
            high_percentile: self.sampling.high_percentile,
            seed: self.seed,
        }
    }

    pub fn provider_config(&self) -> ProviderConfig {
        ProviderConfig {
            provider_name: match self.provider.name {
                ProviderKind::Mock => "mock".into(),
                ProviderKind::Http => "http".into(),
            },
            model_id: self.provider.model_id.clone(),
            temperature: self.provider.temperature,
            top_p: self.provider.top_p,
            max_retries: self.provider.max_retries,
            cache_path: self.provider.cache.clone(),
        }
    }

    pub fn extraction_settings(&self) -> ExtractionSettings {
        ExtractionSettings {
            provider: self.provider_config(),
            bank_scope: self.provider.bank_scope,
            bank_token_budget: self.provider.bank_token_budget,
            failure_budget: self.provider.failure_budget,
        }
    }

    /// Digest of the resolved configuration.
    pub fn hash(&self) -> String {
        crate::digest::sha256_hex(serde_json::to_string(self).expect("config serialises").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "year_tag = \"2016\"\nout_dir = \"out\"\n[input]\ncomments = \"c.jsonl\"\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let mut c = RunConfig::parse(MINIMAL).unwrap();
        c.resolve_paths(Path::new("/base"));
        c.validate().unwrap();
        assert_eq!(c.input.comments, PathBuf::from("/base/c.jsonl"));
        assert_eq!(c.provider.cache, Some(PathBuf::from("/base/out/cache/responses.jsonl")));
        assert_eq!(c.sample_plan().pairs_per_community, 100);
        assert_eq!(c.canonicalize.k, 100);
        assert_eq!(c.scales, ScaleThresholds::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse(&format!("{MINIMAL}bogus = 1\n")).is_err());
        assert!(RunConfig::parse(&format!("{MINIMAL}[sampling]\npairs = 3\n")).is_err());
    }

    #[test]
    fn validation() {
        let with = |extra: &str| {
            let mut c = RunConfig::parse(&format!("{MINIMAL}{extra}")).unwrap();
            c.resolve_paths(Path::new("/b"));
            c.validate()
        };
        assert!(with("[sampling]\nlow_percentile = 0.99\n").is_err());
        assert!(with("[provider]\nname = \"http\"\n").is_err());
        assert!(with("[canonicalize]\nembedder = \"file\"\n").is_err());
        assert!(with("[scales]\nmacro_fraction = 0.2\nmicro_fraction = 0.25\n").is_err());
        assert!(with("[prosocial]\nalpha = 1.5\n").is_err());
        assert!(with("[provider]\ntop_p = 0\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
