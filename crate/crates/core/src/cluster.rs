//! Hierarchical density clustering over mutual-reachability distances.
//!
//! Core distances, a minimum spanning tree of the mutual-reachability graph,
//! the single-linkage hierarchy it induces, condensation at the minimum
//! cluster size and excess-of-mass cluster selection. Points outside every
//! selected cluster are labelled [`NOISE`].

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{read_jsonl, write_jsonl};
use crate::vectors::EmbeddingMatrix;

pub const NOISE: i64 = -1;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("{rows} points, but min_samples is {min_samples}")]
    TooFewPoints { rows: usize, min_samples: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{0} keys but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

impl DensityParams {
    pub fn new(min_cluster_size: usize, min_samples: usize) -> Result<Self, ClusterError> {
        if min_cluster_size < 2 {
            return Err(ClusterError::InvalidParams("min_cluster_size must be at least 2".into()));
        }
        if min_samples < 1 {
            return Err(ClusterError::InvalidParams("min_samples must be at least 1".into()));
        }
        Ok(Self { min_cluster_size, min_samples })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<i64>,
    pub n_clusters: usize,
    pub params: DensityParams,
}

impl ClusterAssignment {
    pub fn count_outliers(&self) -> usize {
        count_outliers(&self.labels)
    }

    /// Member counts per cluster id.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_clusters];
        for &l in &self.labels {
            if l != NOISE {
                s[l as usize] += 1;
            }
        }
        s
    }
}

pub fn count_outliers(labels: &[i64]) -> usize {
    labels.iter().filter(|&&l| l == NOISE).count()
}

/// A clustering strategy over reduced vectors.
pub trait Clusterer: Send + Sync {
    fn name(&self) -> &'static str;
    fn cluster(&self, points: &EmbeddingMatrix) -> Result<ClusterAssignment, ClusterError>;
}

#[derive(Debug, Clone, Copy)]
pub struct Hdbscan {
    pub params: DensityParams,
}

impl Clusterer for Hdbscan {
    fn name(&self) -> &'static str {
        "hdbscan"
    }

    fn cluster(&self, points: &EmbeddingMatrix) -> Result<ClusterAssignment, ClusterError> {
        let rows: Vec<Vec<f64>> = (0..points.rows()).map(|i| points.row_f64(i)).collect();
        density_cluster(&rows, self.params)
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Distance from each point to its `min_samples`-th nearest neighbour, the
/// point itself counting as the first.
pub fn core_distances(points: &[Vec<f64>], min_samples: usize) -> Vec<f64> {
    let k = min_samples.clamp(1, points.len().max(1)) - 1;
    points
        .par_iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| euclidean(p, q)).collect();
            *d.select_nth_unstable_by(k, f64::total_cmp).1
        })
        .collect()
}

pub fn mutual_reachability(points: &[Vec<f64>], core: &[f64], a: usize, b: usize) -> f64 {
    euclidean(&points[a], &points[b]).max(core[a]).max(core[b])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Dense Prim's algorithm over the complete mutual-reachability graph.
/// Edges are returned in ascending weight order.
pub fn minimum_spanning_tree(points: &[Vec<f64>], core: &[f64]) -> Vec<Edge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let w = mutual_reachability(points, core, current, j);
            if w < best[j] {
                best[j] = w;
                from[j] = current;
            }
            if best[j] < next_w || next == usize::MAX {
                next_w = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push(Edge { a: from[next], b: next, weight: next_w });
        current = next;
    }
    edges.sort_by(|x, y| x.weight.total_cmp(&y.weight));
    edges
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Internal node `n + i` of the single-linkage hierarchy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

/// Single-linkage dendrogram from MST edges sorted by weight. Leaves are
/// `0..n`; merge `i` creates node `n + i`.
pub fn single_linkage(n: usize, mst: &[Edge]) -> Vec<Merge> {
    let mut uf = UnionFind::new(2 * n);
    let mut size = vec![1usize; 2 * n];
    let mut merges = Vec::with_capacity(mst.len());
    for (i, e) in mst.iter().enumerate() {
        let (ra, rb) = (uf.find(e.a), uf.find(e.b));
        let node = n + i;
        size[node] = size[ra] + size[rb];
        uf.parent[ra] = node;
        uf.parent[rb] = node;
        merges.push(Merge { left: ra, right: rb, distance: e.weight, size: size[node] });
    }
    merges
}

/// Row of the condensed tree: `child` is a point (`< n`) or a cluster
/// (`>= n`) leaving `parent` at density `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

fn lambda_of(distance: f64) -> f64 {
    1.0 / distance.max(f64::MIN_POSITIVE.sqrt())
}

fn leaves_under(node: usize, n: usize, merges: &[Merge], out: &mut Vec<usize>) {
    let mut stack = vec![node];
    while let Some(x) = stack.pop() {
        if x < n {
            out.push(x);
        } else {
            let m = merges[x - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
}

/// Condenses the hierarchy: a split counts only when both sides hold at
/// least `min_cluster_size` points, otherwise the small side's points fall
/// out of the surviving cluster. Cluster ids start at `n` (the root).
pub fn condense(n: usize, merges: &[Merge], min_cluster_size: usize) -> Vec<CondensedEdge> {
    if merges.is_empty() {
        return Vec::new();
    }
    let root = n + merges.len() - 1;
    let size = |x: usize| if x < n { 1 } else { merges[x - n].size };
    let mut relabel = vec![usize::MAX; root + 1];
    relabel[root] = n;
    let mut next_label = n + 1;
    let mut out = Vec::new();
    let mut fallen = Vec::new();
    // parents carry larger ids than children, so descending order is top-down
    for node in (n..=root).rev() {
        let cluster = relabel[node];
        if cluster == usize::MAX {
            continue;
        }
        let m = merges[node - n];
        let lambda = lambda_of(m.distance);
        let (big_l, big_r) = (size(m.left) >= min_cluster_size, size(m.right) >= min_cluster_size);
        for (child, big, other_big) in [(m.left, big_l, big_r), (m.right, big_r, big_l)] {
            if big && other_big {
                relabel[child] = next_label;
                out.push(CondensedEdge { parent: cluster, child: next_label, lambda, size: size(child) });
                next_label += 1;
            } else if big {
                relabel[child] = cluster;
            } else {
                fallen.clear();
                leaves_under(child, n, merges, &mut fallen);
                out.extend(fallen.iter().map(|&p| CondensedEdge { parent: cluster, child: p, lambda, size: 1 }));
            }
        }
    }
    out
}

/// Excess-of-mass selection on the condensed tree. The root is never
/// selected. Returns the chosen cluster ids in ascending order.
pub fn select_clusters(n: usize, condensed: &[CondensedEdge]) -> Vec<usize> {
    let Some(max_id) = condensed.iter().map(|e| e.parent.max(e.child)).max() else {
        return Vec::new();
    };
    let count = max_id + 1 - n;
    let mut birth = vec![0.0f64; count];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); count];
    for e in condensed.iter().filter(|e| e.child >= n) {
        birth[e.child - n] = e.lambda;
        children[e.parent - n].push(e.child);
    }
    let mut stability = vec![0.0f64; count];
    for e in condensed {
        stability[e.parent - n] += (e.lambda - birth[e.parent - n]) * e.size as f64;
    }
    let mut selected = vec![true; count];
    selected[0] = false;
    for c in (n + 1..=max_id).rev() {
        let child_sum: f64 = children[c - n].iter().map(|&k| stability[k - n]).sum();
        if child_sum > stability[c - n] {
            selected[c - n] = false;
            stability[c - n] = child_sum;
        } else {
            let mut stack = children[c - n].clone();
            while let Some(d) = stack.pop() {
                selected[d - n] = false;
                stack.extend(&children[d - n]);
            }
        }
    }
    (n + 1..=max_id).filter(|&c| selected[c - n]).collect()
}

fn label_points(n: usize, condensed: &[CondensedEdge], selected: &[usize]) -> Vec<i64> {
    let Some(max_id) = condensed.iter().map(|e| e.parent.max(e.child)).max() else {
        return vec![NOISE; n];
    };
    let mut parent_of = vec![usize::MAX; max_id + 1];
    for e in condensed {
        parent_of[e.child] = e.parent;
    }
    let mut cluster_label = vec![NOISE; max_id + 1];
    for (i, &c) in selected.iter().enumerate() {
        cluster_label[c] = i as i64;
    }
    (0..n)
        .map(|p| {
            let mut x = parent_of[p];
            while x != usize::MAX {
                if cluster_label[x] != NOISE {
                    return cluster_label[x];
                }
                x = parent_of[x];
            }
            NOISE
        })
        .collect()
}

/// Renumbers non-noise labels by order of first appearance.
pub fn canonical_labels(labels: &[i64]) -> Vec<i64> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            if l == NOISE {
                NOISE
            } else {
                let next = map.len() as i64;
                *map.entry(l).or_insert(next)
            }
        })
        .collect()
}

pub fn density_cluster(points: &[Vec<f64>], params: DensityParams) -> Result<ClusterAssignment, ClusterError> {
    let n = points.len();
    if n < params.min_samples {
        return Err(ClusterError::TooFewPoints { rows: n, min_samples: params.min_samples });
    }
    let core = core_distances(points, params.min_samples);
    let mst = minimum_spanning_tree(points, &core);
    let merges = single_linkage(n, &mst);
    let condensed = condense(n, &merges, params.min_cluster_size);
    let selected = select_clusters(n, &condensed);
    let labels = canonical_labels(&label_points(n, &condensed, &selected));
    Ok(ClusterAssignment { labels, n_clusters: selected.len(), params })
}

#[derive(Serialize, Deserialize)]
struct AssignmentLine {
    key: String,
    label: i64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ClusterError + '_ {
    move |e| ClusterError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// JSON lines of `{"key", "label"}` in row order.
pub fn write_assignments(path: &Path, keys: &[String], labels: &[i64]) -> Result<(), ClusterError> {
    if keys.len() != labels.len() {
        return Err(ClusterError::LengthMismatch(keys.len(), labels.len()));
    }
    let lines = keys.iter().zip(labels).map(|(key, &label)| AssignmentLine { key: key.clone(), label });
    write_jsonl(path, lines).map_err(io_err(path))
}

pub fn read_assignments(path: &Path) -> Result<(Vec<String>, Vec<i64>), ClusterError> {
    let lines: Vec<AssignmentLine> = read_jsonl(path).map_err(io_err(path))?;
    Ok(lines.into_iter().map(|a| (a.key, a.label)).unzip())
}
