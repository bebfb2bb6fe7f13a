//! Bottom-up average-linkage clustering under cosine distance.
//!
//! Keywords are indexed in lexicographic order and a cluster is identified by
//! its smallest member index, so the result does not depend on insertion
//! order. Among equally distant cluster pairs the one with the smallest
//! `(first id, second id)` merges first.

use super::embed::EmbeddingPool;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClusterError {
    #[error("k = {k} outside 1..={n}")]
    BadK { k: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueCluster {
    pub cluster_id: usize,
    pub members: BTreeSet<String>,
    pub label: Option<String>,
}

/// One agglomeration step; `left < right` are the merged cluster ids
/// (smallest member index), and the merged cluster keeps `left`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeStep {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - dot).max(0.0)
}

struct Agglomeration {
    keywords: Vec<String>,
    members: Vec<Vec<usize>>,
    active: Vec<bool>,
    /// Sum of pairwise member distances between active clusters.
    sums: Vec<Vec<f64>>,
    n_active: usize,
}

impl Agglomeration {
    fn new(pool: &EmbeddingPool) -> Self {
        let (keywords, vectors): (Vec<String>, Vec<&[f64]>) =
            pool.iter().map(|(k, v)| (k.to_string(), v)).unzip();
        let n = keywords.len();
        let mut sums = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = cosine_distance(vectors[i], vectors[j]);
                sums[i][j] = d;
                sums[j][i] = d;
            }
        }
        Self {
            keywords,
            members: (0..n).map(|i| vec![i]).collect(),
            active: vec![true; n],
            sums,
            n_active: n,
        }
    }

    fn linkage(&self, a: usize, b: usize) -> f64 {
        self.sums[a][b] / (self.members[a].len() * self.members[b].len()) as f64
    }

    fn step(&mut self) -> MergeStep {
        let n = self.keywords.len();
        let mut best: Option<(f64, usize, usize)> = None;
        for a in (0..n).filter(|&a| self.active[a]) {
            for b in ((a + 1)..n).filter(|&b| self.active[b]) {
                let d = self.linkage(a, b);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let (distance, a, b) = best.expect("at least two active clusters");
        for x in 0..n {
            if self.active[x] && x != a && x != b {
                let s = self.sums[a][x] + self.sums[b][x];
                self.sums[a][x] = s;
                self.sums[x][a] = s;
            }
        }
        let moved = std::mem::take(&mut self.members[b]);
        self.members[a].extend(moved);
        self.active[b] = false;
        self.n_active -= 1;
        MergeStep {
            left: a,
            right: b,
            distance,
            size: self.members[a].len(),
        }
    }

    fn clusters(&self) -> Vec<ValueCluster> {
        (0..self.keywords.len())
            .filter(|&i| self.active[i])
            .enumerate()
            .map(|(cluster_id, i)| ValueCluster {
                cluster_id,
                members: self.members[i]
                    .iter()
                    .map(|&m| self.keywords[m].clone())
                    .collect(),
                label: None,
            })
            .collect()
    }
}

/// Merges until exactly `k` clusters remain. Cluster ids are assigned in
/// order of each cluster's lexicographically smallest member.
pub fn agglomerative_cluster(pool: &EmbeddingPool, k: usize) -> Result<Vec<ValueCluster>, ClusterError> {
    let n = pool.len();
    if k == 0 || k > n {
        return Err(ClusterError::BadK { k, n });
    }
    let mut agg = Agglomeration::new(pool);
    while agg.n_active > k {
        agg.step();
    }
    Ok(agg.clusters())
}

/// The full merge sequence down to a single cluster.
pub fn merge_sequence(pool: &EmbeddingPool) -> Vec<MergeStep> {
    let mut agg = Agglomeration::new(pool);
    let mut steps = Vec::with_capacity(pool.len().saturating_sub(1));
    while agg.n_active > 1 {
        steps.push(agg.step());
    }
    steps
}
