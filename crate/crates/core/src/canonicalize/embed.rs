//! Keyword embedders and the embedding pool.

use crate::sampling::stream_rng;
use rand::RngCore;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("embedder unavailable: {0}")]
    Unavailable(String),
    #[error("no vector for keyword `{0}`")]
    MissingVector(String),
    #[error("vector for `{keyword}` has dimension {got}, expected {expected}")]
    DimensionMismatch {
        keyword: String,
        got: usize,
        expected: usize,
    },
    #[error("vector for `{0}` has zero norm")]
    ZeroVector(String),
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, keyword: &str) -> Result<Vec<f64>, EmbedError>;
}

/// Deterministic test embedder: each character trigram of the padded keyword
/// is hashed (with the seed) to a pseudo-random vector, and the vectors are
/// summed. Keywords sharing trigrams land close together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dim: 32, seed: 0 }
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, keyword: &str) -> Result<Vec<f64>, EmbedError> {
        let padded: Vec<char> = format!("^{keyword}$").chars().collect();
        let mut v = vec![0.0; self.dim];
        for gram in padded.windows(3) {
            let gram: String = gram.iter().collect();
            let mut rng = stream_rng(self.seed, "hash-embedder", &gram);
            for x in v.iter_mut() {
                // uniform in [-1, 1)
                *x += (rng.next_u64() >> 11) as f64 / (1u64 << 52) as f64 - 1.0;
            }
        }
        Ok(v)
    }
}

/// Vectors read from a local file: `keyword<TAB>v1 v2 ... vd` per line.
#[derive(Debug, Clone, PartialEq)]
pub struct FileEmbedder {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl FileEmbedder {
    pub fn read(path: &Path) -> Result<Self, EmbedError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EmbedError::Unavailable(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, EmbedError> {
        let mut vectors = BTreeMap::new();
        let mut dim = None;
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (keyword, rest) = line.split_once('\t').ok_or_else(|| {
                EmbedError::Unavailable(format!("vector file line {}: missing tab", n + 1))
            })?;
            let v = rest
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbedError::Unavailable(format!("vector file line {}: {e}", n + 1)))?;
            let expected = *dim.get_or_insert(v.len());
            if v.len() != expected {
                return Err(EmbedError::DimensionMismatch {
                    keyword: keyword.to_string(),
                    got: v.len(),
                    expected,
                });
            }
            vectors.insert(crate::extraction::normalize_keyword(keyword), v);
        }
        Ok(Self {
            dim: dim.unwrap_or(0),
            vectors,
        })
    }

    pub fn from_vectors(vectors: BTreeMap<String, Vec<f64>>) -> Self {
        let dim = vectors.values().next().map_or(0, Vec::len);
        Self { dim, vectors }
    }

    /// Renders the `keyword<TAB>vector` file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.vectors {
            let nums: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&format!("{k}\t{}\n", nums.join(" ")));
        }
        out
    }
}

impl Embedder for FileEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, keyword: &str) -> Result<Vec<f64>, EmbedError> {
        self.vectors
            .get(keyword)
            .cloned()
            .ok_or_else(|| EmbedError::MissingVector(keyword.to_string()))
    }
}

/// OpenAI-compatible `/embeddings` endpoint.
pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    api_key: String,
    dim: usize,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn from_env(endpoint: &str, model: &str, dim: usize, api_key_env: &str) -> Result<Self, EmbedError> {
        let api_key = std::env::var(api_key_env)
            .map_err(|_| EmbedError::Unavailable(format!("environment variable {api_key_env} is not set")))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            dim,
            agent,
        })
    }
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, keyword: &str) -> Result<Vec<f64>, EmbedError> {
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(json!({"model": self.model, "input": keyword}))
            .map_err(|e| EmbedError::Unavailable(e.to_string()))?;
        let value: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::Unavailable(e.to_string()))?;
        value["data"][0]["embedding"]
            .as_array()
            .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
            .ok_or_else(|| EmbedError::Unavailable("response has no embedding".into()))
    }
}

/// Unit-normalized keyword vectors of one fixed dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingPool {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingPool {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, keyword: &str, mut v: Vec<f64>) -> Result<(), EmbedError> {
        if v.len() != self.dim {
            return Err(EmbedError::DimensionMismatch {
                keyword: keyword.to_string(),
                got: v.len(),
                expected: self.dim,
            });
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(EmbedError::ZeroVector(keyword.to_string()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        self.vectors.insert(keyword.to_string(), v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, keyword: &str) -> Option<&[f64]> {
        self.vectors.get(keyword).map(Vec::as_slice)
    }

    /// Keywords in lexicographic order with their vectors.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Embeds each distinct keyword once.
pub fn embed_keywords<'a>(
    embedder: &dyn Embedder,
    keywords: impl IntoIterator<Item = &'a str>,
) -> Result<EmbeddingPool, EmbedError> {
    let mut pool = EmbeddingPool::new(embedder.dim());
    for kw in keywords {
        if pool.get(kw).is_none() {
            pool.insert(kw, embedder.embed(kw)?)?;
        }
    }
    Ok(pool)
}
