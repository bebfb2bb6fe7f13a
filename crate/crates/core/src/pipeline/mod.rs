//! Stage orchestration. Every stage reads its inputs from files under the
//! output directory (or the configured input files) and writes its outputs
//! there, so any stage can be rerun on its own. The run manifest records the
//! digest of every input and output.

pub mod config;
pub mod manifest;
pub mod reports;

pub use config::RunConfig;
pub use manifest::{RunManifest, StageRecord, StageStatus};
pub use reports::{emit_reports, ReportSummary};

use crate::canonicalize::{
    self, CanonicalMap, Embedder, FileEmbedder, HashEmbedder, HttpEmbedder, Override, ValueCluster,
};
use crate::corpus::{self, CommentStore, ExclusionLists};
use crate::digest::file_sha256;
use crate::extraction::provider::HttpProvider;
use crate::extraction::{self, ExtractionRecord, MockProvider, MockScript, PromptTemplate, Provider, ResponseCache};
use crate::labeling::{self, CommentPair, CommunityLabels, ScoreLabel};
use crate::metadata::CommunityMetadata;
use crate::prosocial::{self, LexiconScorer, ProsocialDataset, ProsocialLabel, ProsocialVector, ScoreFile, Scorer};
use crate::reliability;
use crate::scales;
use config::{EmbedderKind, ProviderKind, ScorerKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("stage {stage} failed: {message}")]
    StageFailed { stage: Stage, message: String },
    #[error("missing output of an earlier stage: {0}")]
    MissingStageOutput(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

type StageError = Box<dyn std::error::Error + Send + Sync>;
type StageResult<T> = Result<T, StageError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Filter,
    Label,
    SamplePairs,
    SampleRegression,
    Extract,
    Canonicalize,
    Scales,
    Prosocial,
    Recall,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Ingest,
        Stage::Filter,
        Stage::Label,
        Stage::SamplePairs,
        Stage::SampleRegression,
        Stage::Extract,
        Stage::Canonicalize,
        Stage::Scales,
        Stage::Prosocial,
        Stage::Recall,
        Stage::Report,
    ];

    /// Stages of a full run, in execution order.
    pub fn pipeline(prosocial: bool) -> Vec<Stage> {
        Stage::ALL
            .into_iter()
            .filter(|s| prosocial || !matches!(s, Stage::SampleRegression | Stage::Prosocial | Stage::Recall))
            .collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Filter => "filter",
            Stage::Label => "label",
            Stage::SamplePairs => "sample-pairs",
            Stage::SampleRegression => "sample-regression",
            Stage::Extract => "extract",
            Stage::Canonicalize => "canonicalize",
            Stage::Scales => "scales",
            Stage::Prosocial => "prosocial",
            Stage::Recall => "recall",
            Stage::Report => "report",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// File names of stage outputs, relative to the output directory.
pub mod files {
    pub const CORPUS: &str = "corpus.jsonl";
    pub const ELIGIBLE: &str = "eligible.jsonl";
    pub const LABELS: &str = "labels.json";
    pub const PAIRS: &str = "pairs.jsonl";
    pub const PAIR_MANIFEST: &str = "pair_manifest.jsonl";
    pub const REGRESSION: &str = "regression.jsonl";
    pub const REGRESSION_MANIFEST: &str = "regression_manifest.jsonl";
    pub const EXTRACTIONS: &str = "extractions.jsonl";
    pub const QUARANTINE: &str = "quarantine.jsonl";
    pub const UNAVAILABLE: &str = "unavailable.jsonl";
    pub const BANK: &str = "bank.json";
    pub const CLUSTERS: &str = "clusters.json";
    pub const CANONICAL_MAP: &str = "canonical_map.csv";
    pub const MATRIX: &str = "matrix.json";
    pub const REGRESSIONS: &str = "regressions.json";
    pub const ODDS_RATIOS: &str = "odds_ratios.json";
    pub const PROSOCIAL_LABELS: &str = "prosocial_labels.csv";
    pub const RECALL: &str = "recall.json";
    pub const WORKSHEET: &str = "annotation_worksheet.csv";
    pub const MANIFEST: &str = "manifest.json";
    pub const REPORTS: &str = "reports";
}

/// A sampled regression comment with its upvote label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub comment: corpus::Comment,
    pub label: ScoreLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsocialLabelRow {
    pub comment_id: String,
    pub community: String,
    pub score: f64,
    pub label: ProsocialLabel,
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> StageResult<Vec<T>> {
    let file = File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")
}

fn read_json<T: DeserializeOwned>(path: &Path) -> StageResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

/// Collects digests of a stage's files as it runs.
struct Tracker<'a> {
    out_dir: &'a Path,
    rec: StageRecord,
}

impl<'a> Tracker<'a> {
    fn new(out_dir: &'a Path) -> Self {
        Self {
            out_dir,
            rec: StageRecord {
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                counts: BTreeMap::new(),
                status: StageStatus::Ok,
            },
        }
    }

    fn key(&self, path: &Path) -> String {
        path.strip_prefix(self.out_dir)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    /// Records and returns an input; absent stage outputs are reported as such.
    fn input(&mut self, path: &Path) -> StageResult<PathBuf> {
        if !path.exists() {
            return Err(Box::new(PipelineError::MissingStageOutput(path.display().to_string())));
        }
        let digest = file_sha256(path).map_err(|e| PipelineError::io(path, e))?;
        self.rec.inputs.insert(self.key(path), digest);
        Ok(path.to_path_buf())
    }

    fn output(&mut self, path: &Path) -> StageResult<()> {
        let digest = file_sha256(path).map_err(|e| PipelineError::io(path, e))?;
        self.rec.outputs.insert(self.key(path), digest);
        Ok(())
    }

    fn count(&mut self, name: &str, n: usize) {
        self.rec.counts.insert(name.to_string(), n as u64);
    }
}

/// A configured run with optional injected components. Components that are
/// not injected are built from the configuration when first needed.
pub struct Pipeline {
    pub config: RunConfig,
    provider: Option<Box<dyn Provider>>,
    embedder: Option<Box<dyn Embedder>>,
    scorer: Option<Box<dyn Scorer>>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self {
            config,
            provider: None,
            embedder: None,
            scorer: None,
        })
    }

    pub fn with_provider(mut self, provider: Box<dyn Provider>) -> Self {
        self.provider = Some(provider);
        self
    }

    pub fn with_embedder(mut self, embedder: Box<dyn Embedder>) -> Self {
        self.embedder = Some(embedder);
        self
    }

    pub fn with_scorer(mut self, scorer: Box<dyn Scorer>) -> Self {
        self.scorer = Some(scorer);
        self
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.out_dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.config.out_dir.join(name)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.path(files::MANIFEST)
    }

    fn template(&self) -> StageResult<PromptTemplate> {
        match &self.config.input.template {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
                Ok(PromptTemplate::new(text)?)
            }
            None => Ok(PromptTemplate::default()),
        }
    }

    pub fn template_digest(&self) -> Result<String, PipelineError> {
        let t = self
            .template()
            .map_err(|e| PipelineError::Config(format!("template: {e}")))?;
        Ok(crate::digest::sha256_hex(t.text().as_bytes()))
    }

    fn build_provider(&self) -> StageResult<Box<dyn Provider>> {
        let p = &self.config.provider;
        Ok(match p.name {
            ProviderKind::Mock => {
                let script = match &p.mock_script {
                    Some(path) => MockScript::read(path)?,
                    None => MockScript::default(),
                };
                Box::new(MockProvider::from_script(script))
            }
            ProviderKind::Http => {
                let endpoint = p.endpoint.as_deref().ok_or("provider.endpoint missing")?;
                Box::new(HttpProvider::from_env(endpoint, &p.api_key_env)?)
            }
        })
    }

    fn build_embedder(&self) -> StageResult<Box<dyn Embedder>> {
        let c = &self.config.canonicalize;
        Ok(match c.embedder {
            EmbedderKind::Hash => Box::new(HashEmbedder {
                dim: c.dim,
                seed: self.config.seed,
            }),
            EmbedderKind::File => Box::new(FileEmbedder::read(c.vectors.as_deref().ok_or("canonicalize.vectors missing")?)?),
            EmbedderKind::Http => Box::new(HttpEmbedder::from_env(
                c.endpoint.as_deref().ok_or("canonicalize.endpoint missing")?,
                c.model.as_deref().ok_or("canonicalize.model missing")?,
                c.dim,
                &c.api_key_env,
            )?),
        })
    }

    fn build_scorer(&self, t: &mut Tracker) -> StageResult<Box<dyn Scorer>> {
        Ok(match self.config.prosocial.scorer {
            ScorerKind::File => {
                let path = self.config.input.scores.as_deref().ok_or("prosocial.scorer = \"file\" needs input.scores")?;
                if !path.exists() {
                    return Err(format!("score file {} not found", path.display()).into());
                }
                t.input(path)?;
                Box::new(ScoreFile::read(path)?)
            }
            ScorerKind::Lexicon => Box::new(LexiconScorer::default()),
        })
    }

    fn metadata(&self, t: &mut Tracker) -> StageResult<CommunityMetadata> {
        match &self.config.input.metadata {
            Some(p) => {
                t.input(p)?;
                Ok(CommunityMetadata::read_csv(p)?)
            }
            None => Ok(CommunityMetadata::default()),
        }
    }

    fn open_cache(&self) -> StageResult<ResponseCache> {
        match &self.config.provider.cache {
            Some(p) => {
                if let Some(dir) = p.parent() {
                    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
                }
                Ok(ResponseCache::open(p).map_err(|e| PipelineError::io(p, e))?)
            }
            None => Ok(ResponseCache::in_memory()),
        }
    }

    fn load_manifest(&self) -> Result<RunManifest, PipelineError> {
        let path = self.manifest_path();
        if path.exists() {
            if let Ok(m) = RunManifest::read(&path) {
                if m.config_hash == self.config.hash() {
                    return Ok(m);
                }
            }
        }
        Ok(RunManifest::new(&self.config, self.template_digest()?))
    }

    fn execute(&self, stage: Stage) -> Result<StageRecord, PipelineError> {
        std::fs::create_dir_all(self.out_dir()).map_err(|e| PipelineError::io(self.out_dir(), e))?;
        let mut t = Tracker::new(self.out_dir());
        let result = match stage {
            Stage::Ingest => self.ingest(&mut t),
            Stage::Filter => self.filter(&mut t),
            Stage::Label => self.label(&mut t),
            Stage::SamplePairs => self.sample_pairs(&mut t),
            Stage::SampleRegression => self.sample_regression(&mut t),
            Stage::Extract => self.extract(&mut t),
            Stage::Canonicalize => self.canonicalize(&mut t),
            Stage::Scales => self.scales(&mut t),
            Stage::Prosocial => self.prosocial(&mut t),
            Stage::Recall => self.recall(&mut t),
            Stage::Report => self.report(&mut t),
        };
        match result {
            Ok(()) => Ok(t.rec),
            Err(e) => Err(PipelineError::StageFailed {
                stage,
                message: error_chain(e.as_ref()),
            }),
        }
    }

    /// Runs one stage from existing outputs and updates the manifest.
    pub fn run_stage(&self, stage: Stage) -> Result<StageRecord, PipelineError> {
        let mut manifest = self.load_manifest()?;
        let result = self.execute(stage);
        let rec = match &result {
            Ok(rec) => rec.clone(),
            Err(e) => StageRecord::failed(e.to_string()),
        };
        manifest.record(stage, rec);
        std::fs::create_dir_all(self.out_dir()).map_err(|e| PipelineError::io(self.out_dir(), e))?;
        manifest.write(&self.manifest_path())?;
        result
    }

    /// Runs every stage in order. On failure the manifest is still written,
    /// marked incomplete, and earlier outputs are left in place.
    pub fn run(&self) -> Result<RunManifest, PipelineError> {
        let mut manifest = RunManifest::new(&self.config, self.template_digest()?);
        for stage in Stage::pipeline(self.config.prosocial.enabled) {
            tracing::info!("stage {stage}");
            match self.execute(stage) {
                Ok(rec) => manifest.record(stage, rec),
                Err(e) => {
                    manifest.record(stage, StageRecord::failed(e.to_string()));
                    if std::fs::create_dir_all(self.out_dir()).is_ok() {
                        manifest.write(&self.manifest_path())?;
                    }
                    return Err(e);
                }
            }
        }
        manifest.write(&self.manifest_path())?;
        Ok(manifest)
    }

    fn ingest(&self, t: &mut Tracker) -> StageResult<()> {
        let input = t.input(&self.config.input.comments)?;
        let load = corpus::load_corpus(&input, &self.config.year_tag)?;
        let masked: Vec<corpus::Comment> = load
            .store
            .into_comments()
            .into_iter()
            .map(|c| corpus::Comment {
                body: corpus::mask_usernames(&c.body),
                ..c
            })
            .collect();
        let store = CommentStore::from_comments(masked)?;
        let out = self.path(files::CORPUS);
        let mut w = BufWriter::new(File::create(&out).map_err(|e| PipelineError::io(&out, e))?);
        store.write_jsonl(&mut w)?;
        w.flush()?;
        t.output(&out)?;
        t.count("comments", store.len());
        t.count("skipped", load.skipped);
        t.count("duplicates", load.duplicates);
        Ok(())
    }

    fn filter(&self, t: &mut Tracker) -> StageResult<()> {
        let store = CommentStore::read_jsonl(&t.input(&self.path(files::CORPUS))?)?;
        let mut excl = ExclusionLists::new();
        if let Some(p) = &self.config.input.bots {
            excl.read_bots(&std::fs::read_to_string(t.input(p)?)?);
        }
        if let Some(p) = &self.config.input.moderators {
            excl.read_moderators(&std::fs::read_to_string(t.input(p)?)?);
        }
        let kept = corpus::filter_eligible(&store, &excl);
        let out = self.path(files::ELIGIBLE);
        let mut w = BufWriter::new(File::create(&out).map_err(|e| PipelineError::io(&out, e))?);
        kept.write_jsonl(&mut w)?;
        w.flush()?;
        t.output(&out)?;
        t.count("eligible", kept.len());
        t.count("excluded", store.len() - kept.len());
        Ok(())
    }

    fn eligible(&self, t: &mut Tracker) -> StageResult<CommentStore> {
        Ok(CommentStore::read_jsonl(&t.input(&self.path(files::ELIGIBLE))?)?)
    }

    fn labels(&self, t: &mut Tracker) -> StageResult<BTreeMap<String, CommunityLabels>> {
        read_json(&t.input(&self.path(files::LABELS))?)
    }

    fn label(&self, t: &mut Tracker) -> StageResult<()> {
        let store = self.eligible(t)?;
        let labels = labeling::label_store(&store, &self.config.sample_plan())?;
        let out = self.path(files::LABELS);
        write_json(&out, &labels)?;
        t.output(&out)?;
        t.count("communities", labels.len());
        Ok(())
    }

    fn sample_pairs(&self, t: &mut Tracker) -> StageResult<()> {
        let store = self.eligible(t)?;
        let labels = self.labels(t)?;
        let sample = labeling::sample_pairs(&store, &labels, &self.config.sample_plan())?;
        let out = self.path(files::PAIRS);
        write_jsonl(&out, &sample.pairs)?;
        t.output(&out)?;
        let entries: Vec<_> = sample.pairs.iter().map(|p| p.manifest_entry(self.config.seed)).collect();
        let out = self.path(files::PAIR_MANIFEST);
        write_jsonl(&out, &entries)?;
        t.output(&out)?;
        t.count("pairs", sample.pairs.len());
        t.count("excluded_communities", sample.excluded.len());
        Ok(())
    }

    fn sample_regression(&self, t: &mut Tracker) -> StageResult<()> {
        let store = self.eligible(t)?;
        let labels = self.labels(t)?;
        let sample = labeling::sample_regression_set(&store, &labels, &self.config.sample_plan())?;
        let rows: Vec<RegressionRow> = sample
            .sets
            .values()
            .flatten()
            .map(|(c, l)| RegressionRow {
                comment: c.clone(),
                label: *l,
            })
            .collect();
        let out = self.path(files::REGRESSION);
        write_jsonl(&out, &rows)?;
        t.output(&out)?;
        let out = self.path(files::REGRESSION_MANIFEST);
        write_jsonl(&out, &sample.manifest(self.config.seed))?;
        t.output(&out)?;
        t.count("comments", rows.len());
        t.count("skipped_communities", sample.skipped.len());
        Ok(())
    }

    fn pairs(&self, t: &mut Tracker) -> StageResult<Vec<CommentPair>> {
        read_jsonl(&t.input(&self.path(files::PAIRS))?)
    }

    fn records(&self, t: &mut Tracker) -> StageResult<Vec<ExtractionRecord>> {
        read_jsonl(&t.input(&self.path(files::EXTRACTIONS))?)
    }

    fn canonical_map(&self, t: &mut Tracker) -> StageResult<CanonicalMap> {
        Ok(CanonicalMap::read_csv(&t.input(&self.path(files::CANONICAL_MAP))?)?)
    }

    fn extract(&self, t: &mut Tracker) -> StageResult<()> {
        let pairs = self.pairs(t)?;
        let metadata = self.metadata(t)?;
        if let Some(p) = &self.config.input.template {
            t.input(p)?;
        }
        let template = self.template()?;
        let built;
        let provider: &dyn Provider = match &self.provider {
            Some(p) => p.as_ref(),
            None => {
                built = self.build_provider()?;
                built.as_ref()
            }
        };
        let mut cache = self.open_cache()?;
        let run = extraction::run_extraction(
            &pairs,
            provider,
            &self.config.extraction_settings(),
            &template,
            &metadata,
            &mut cache,
        )?;
        for (name, write) in [
            (files::EXTRACTIONS, write_jsonl(&self.path(files::EXTRACTIONS), &run.records)),
            (files::QUARANTINE, write_jsonl(&self.path(files::QUARANTINE), &run.quarantined)),
            (files::UNAVAILABLE, write_jsonl(&self.path(files::UNAVAILABLE), &run.unavailable)),
            (files::BANK, write_json(&self.path(files::BANK), &run.bank)),
        ] {
            let path = self.path(name);
            write.map_err(|e| PipelineError::io(&path, e))?;
            t.output(&path)?;
        }
        t.count("records", run.records.len());
        t.count("na", run.records.iter().filter(|r| r.is_na()).count());
        t.count("quarantined", run.quarantined.len());
        t.count("unavailable", run.unavailable.len());
        t.count("bank", run.bank.len());
        Ok(())
    }

    fn canonicalize(&self, t: &mut Tracker) -> StageResult<()> {
        let records = self.records(t)?;
        let overrides: Vec<Override> = match &self.config.input.overrides {
            Some(p) => canonicalize::read_overrides(&t.input(p)?)?,
            None => Vec::new(),
        };
        let built_embedder;
        let embedder: &dyn Embedder = match &self.embedder {
            Some(e) => e.as_ref(),
            None => {
                if let Some(p) = &self.config.canonicalize.vectors {
                    t.input(p)?;
                }
                built_embedder = self.build_embedder()?;
                built_embedder.as_ref()
            }
        };
        let built_provider;
        let provider: &dyn Provider = match &self.provider {
            Some(p) => p.as_ref(),
            None => {
                built_provider = self.build_provider()?;
                built_provider.as_ref()
            }
        };
        let mut cache = self.open_cache()?;
        let run = canonicalize::canonicalize(
            &records,
            embedder,
            self.config.canonicalize.k,
            provider,
            &self.config.provider_config(),
            &overrides,
            &mut cache,
        )?;
        let out = self.path(files::CLUSTERS);
        write_json::<Vec<ValueCluster>>(&out, &run.clusters)?;
        t.output(&out)?;
        let out = self.path(files::CANONICAL_MAP);
        run.map.write_csv(&out)?;
        t.output(&out)?;
        t.count("keywords", run.map.len());
        t.count("clusters", run.clusters.len());
        t.count("values", run.map.values().len());
        Ok(())
    }

    fn scales(&self, t: &mut Tracker) -> StageResult<()> {
        let records = self.records(t)?;
        let map = self.canonical_map(t)?;
        let pairs = self.pairs(t)?;
        let mut matrix = scales::build_matrix(&records, &map)?;
        matrix.year_tag = self.config.year_tag.clone();
        matrix.include_communities(pairs.iter().map(|p| p.community.clone()));
        let out = self.path(files::MATRIX);
        matrix.write_json(&out)?;
        t.output(&out)?;
        t.count("values", matrix.counts.len());
        t.count("communities", matrix.communities.len());
        Ok(())
    }

    fn matrix(&self, t: &mut Tracker) -> StageResult<scales::ValueCommunityMatrix> {
        Ok(scales::ValueCommunityMatrix::read_json(&t.input(&self.path(files::MATRIX))?)?)
    }

    fn scorer<'s>(&'s self, t: &mut Tracker, built: &'s mut Option<Box<dyn Scorer>>) -> StageResult<&'s dyn Scorer> {
        match &self.scorer {
            Some(s) => Ok(s.as_ref()),
            None => {
                let b = self.build_scorer(t)?;
                Ok(&**built.insert(b))
            }
        }
    }

    fn prosocial(&self, t: &mut Tracker) -> StageResult<()> {
        let rows: Vec<RegressionRow> = read_jsonl(&t.input(&self.path(files::REGRESSION))?)?;
        let metadata = self.metadata(t)?;
        let mut built = None;
        let scorer = self.scorer(t, &mut built)?;
        let raw = rows
            .iter()
            .map(|r| scorer.score(&r.comment.id, &r.comment.body))
            .collect::<Result<Vec<_>, _>>()?;
        let normalized = prosocial::normalize_scores(&raw)?;
        let mut datasets: BTreeMap<&str, ProsocialDataset> = BTreeMap::new();
        for (row, v) in rows.iter().zip(&normalized.vectors) {
            let ds = datasets.entry(&row.comment.community).or_insert_with(|| ProsocialDataset {
                community: row.comment.community.clone(),
                year_tag: self.config.year_tag.clone(),
                comment_ids: Vec::new(),
                vectors: Vec::new(),
                high: Vec::new(),
            });
            ds.comment_ids.push(row.comment.id.clone());
            ds.vectors.push(*v);
            ds.high.push(row.label == ScoreLabel::High);
        }
        let fits: Vec<_> = datasets
            .iter()
            .map(|(c, ds)| (c.to_string(), prosocial::analyze_community(ds)))
            .collect();
        if let Ok(v) = prosocial::vif(&normalized.vectors.iter().map(ProsocialVector::as_array).collect::<Vec<_>>()) {
            tracing::info!("pooled VIF: {:.3} {:.3} {:.3}", v[0], v[1], v[2]);
        }
        let report = prosocial::odds_ratio_report(&fits, &metadata, self.config.prosocial.alpha)?;
        let regressions: Vec<_> = fits.into_iter().filter_map(|(_, f)| f.ok()).collect();
        let out = self.path(files::REGRESSIONS);
        write_json(&out, &regressions)?;
        t.output(&out)?;
        let out = self.path(files::ODDS_RATIOS);
        write_json(&out, &report)?;
        t.output(&out)?;
        t.count("communities", report.rows.len());
        t.count("skipped_communities", report.skipped.len());
        Ok(())
    }

    fn recall(&self, t: &mut Tracker) -> StageResult<()> {
        let records = self.records(t)?;
        let map = self.canonical_map(t)?;
        let matrix = self.matrix(t)?;
        let pairs = self.pairs(t)?;
        let bodies: HashMap<&str, &str> = pairs.iter().map(|p| (p.target.id.as_str(), p.target.body.as_str())).collect();
        let mut built = None;
        let scorer = self.scorer(t, &mut built)?;
        let raw = records
            .iter()
            .map(|r| scorer.score(&r.target_id, bodies.get(r.target_id.as_str()).copied().unwrap_or("")))
            .collect::<Result<Vec<_>, _>>()?;
        let normalized = prosocial::normalize_scores(&raw)?;
        let rows: Vec<[f64; 3]> = normalized.vectors.iter().map(ProsocialVector::as_array).collect();
        let (_, scores) = prosocial::pca_first_component(&rows)?;
        let (_, labels) = prosocial::prosocial_threshold(&scores)?;
        let label_rows: Vec<ProsocialLabelRow> = records
            .iter()
            .zip(scores.iter().zip(&labels))
            .map(|(r, (&score, &label))| ProsocialLabelRow {
                comment_id: r.target_id.clone(),
                community: r.community.clone(),
                score,
                label,
            })
            .collect();
        let label_map: HashMap<String, ProsocialLabel> = label_rows.iter().map(|r| (r.comment_id.clone(), r.label)).collect();
        let scales_by_value = scales::classify_all(&matrix, &self.config.scales);
        let report = prosocial::recall_per_value(&records, &map, &label_map, &scales_by_value)?;
        let out = self.path(files::PROSOCIAL_LABELS);
        crate::table::write_csv(&out, &label_rows)?;
        t.output(&out)?;
        let out = self.path(files::RECALL);
        write_json(&out, &report)?;
        t.output(&out)?;
        t.count("values", report.rows.len());
        t.count("high_prosocial", labels.iter().filter(|&&l| l == ProsocialLabel::HighPro).count());
        Ok(())
    }

    fn report(&self, t: &mut Tracker) -> StageResult<()> {
        for name in [files::MATRIX, files::EXTRACTIONS, files::ODDS_RATIOS, files::RECALL] {
            let p = self.path(name);
            if p.exists() {
                t.input(&p)?;
            }
        }
        let summary = emit_reports(self.out_dir(), &self.config.scales)?;
        for path in &summary.written {
            t.output(path)?;
        }
        t.count("reports", summary.written.len());
        Ok(())
    }

    /// Writes an annotation worksheet sampled from the extraction records.
    pub fn annotate_sample(&self) -> Result<PathBuf, PipelineError> {
        let fail = |e: StageError| PipelineError::StageFailed {
            stage: Stage::Report,
            message: error_chain(e.as_ref()),
        };
        let mut t = Tracker::new(self.out_dir());
        let records = self.records(&mut t).map_err(fail)?;
        let map = match self.path(files::CANONICAL_MAP) {
            p if p.exists() => Some(CanonicalMap::read_csv(&p).map_err(|e| fail(e.into()))?),
            _ => None,
        };
        let pairs = self.pairs(&mut t).map_err(fail)?;
        let store = CommentStore::from_comments(pairs.into_iter().map(|p| p.target).collect())
            .map_err(|e| fail(e.into()))?;
        let sample = reliability::sample_for_annotation(
            &records,
            map.as_ref(),
            Some(&store),
            self.config.annotation.per_community,
            self.config.seed,
        );
        let out = self.path(files::WORKSHEET);
        crate::table::write_csv(&out, &sample.rows).map_err(|e| fail(e.into()))?;
        Ok(out)
    }
}

fn error_chain(e: &(dyn std::error::Error + 'static)) -> String {
    let mut msg = e.to_string();
    let mut source = e.source();
    while let Some(s) = source {
        let next = s.to_string();
        if !msg.contains(&next) {
            msg.push_str(": ");
            msg.push_str(&next);
        }
        source = s.source();
    }
    msg
}

/// Validates `config` and runs every stage with components built from it.
pub fn run_pipeline(config: RunConfig) -> Result<RunManifest, PipelineError> {
    Pipeline::new(config)?.run()
}
