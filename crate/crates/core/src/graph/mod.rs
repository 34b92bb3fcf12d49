//! Weighted graphs, partitions and the similarity measures used to weight
//! their edges.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod export;
mod louvain;

pub use louvain::{exhaustive_best_partition, louvain, louvain_with, LouvainOptions, LouvainOutcome, EXHAUSTIVE_NODE_LIMIT};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph has no edges; modularity is undefined")]
    Edgeless,
    #[error("operation requires an undirected graph")]
    Directed,
    #[error("duplicate node label `{0}`")]
    DuplicateNode(String),
    #[error("no node labelled `{0}`")]
    UnknownNode(String),
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("edge weight {0} is not finite and positive")]
    InvalidWeight(f64),
    #[error("self-loop on node {0} not enabled")]
    SelfLoop(usize),
    #[error("partition covers {partition} nodes, graph has {graph}")]
    PartitionMismatch { partition: usize, graph: usize },
    #[error("exhaustive search limited to {limit} nodes, graph has {nodes}")]
    TooManyNodes { nodes: usize, limit: usize },
}

/// Labelled graph with positive finite edge weights. Undirected graphs
/// store each pair once with the smaller index first.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    edges: BTreeMap<(usize, usize), f64>,
    directed: bool,
    self_loops: bool,
}

impl Default for WeightedGraph {
    fn default() -> Self {
        Self::undirected()
    }
}

impl WeightedGraph {
    pub fn undirected() -> Self {
        WeightedGraph {
            labels: Vec::new(),
            index: HashMap::new(),
            edges: BTreeMap::new(),
            directed: false,
            self_loops: false,
        }
    }

    pub fn directed() -> Self {
        WeightedGraph {
            directed: true,
            ..Self::undirected()
        }
    }

    pub fn allowing_self_loops(mut self) -> Self {
        self.self_loops = true;
        self
    }

    /// Undirected graph over `labels` with the given index-based edges.
    pub fn from_edges<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self, GraphError> {
        let mut g = Self::undirected();
        for l in labels {
            g.add_node(l)?;
        }
        for &(u, v, w) in edges {
            g.add_edge(u, v, w)?;
        }
        Ok(g)
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn add_node(&mut self, label: impl Into<String>) -> Result<usize, GraphError> {
        let label = label.into();
        if self.index.contains_key(&label) {
            return Err(GraphError::DuplicateNode(label));
        }
        let id = self.labels.len();
        self.index.insert(label.clone(), id);
        self.labels.push(label);
        Ok(id)
    }

    /// Index of `label`, adding the node if needed.
    pub fn ensure_node(&mut self, label: &str) -> usize {
        match self.index.get(label) {
            Some(&i) => i,
            None => self.add_node(label).expect("label checked absent"),
        }
    }

    fn key(&self, u: usize, v: usize, w: f64) -> Result<(usize, usize), GraphError> {
        let n = self.labels.len();
        if u >= n {
            return Err(GraphError::NodeOutOfRange(u));
        }
        if v >= n {
            return Err(GraphError::NodeOutOfRange(v));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(GraphError::InvalidWeight(w));
        }
        if u == v && !self.self_loops {
            return Err(GraphError::SelfLoop(u));
        }
        Ok(if self.directed || u <= v { (u, v) } else { (v, u) })
    }

    /// Sets the weight of edge `(u, v)`, replacing any previous weight.
    pub fn add_edge(&mut self, u: usize, v: usize, weight: f64) -> Result<(), GraphError> {
        let k = self.key(u, v, weight)?;
        self.edges.insert(k, weight);
        Ok(())
    }

    /// Adds `weight` to edge `(u, v)`, creating it if absent.
    pub fn add_weight(&mut self, u: usize, v: usize, weight: f64) -> Result<(), GraphError> {
        let k = self.key(u, v, weight)?;
        *self.edges.entry(k).or_insert(0.0) += weight;
        Ok(())
    }

    pub fn add_edge_by_label(&mut self, u: &str, v: &str, weight: f64) -> Result<(), GraphError> {
        let a = self.index_of(u).ok_or_else(|| GraphError::UnknownNode(u.to_string()))?;
        let b = self.index_of(v).ok_or_else(|| GraphError::UnknownNode(v.to_string()))?;
        self.add_edge(a, b, weight)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let k = if self.directed || u <= v { (u, v) } else { (v, u) };
        self.edges.get(&k).copied()
    }

    /// Edges in key order as `(u, v, weight)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(u, v), &w)| (u, v, w))
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.values().sum()
    }

    /// Weighted degree of every node; a self-loop contributes twice its
    /// weight. For directed graphs this is in + out strength.
    pub fn degrees(&self) -> Vec<f64> {
        let mut k = vec![0.0; self.labels.len()];
        for (u, v, w) in self.edges() {
            k[u] += w;
            k[v] += w;
        }
        k
    }

    pub fn out_strength(&self, node: usize) -> f64 {
        self.edges().filter(|&(u, _, _)| u == node).map(|(_, _, w)| w).sum()
    }

    pub fn in_strength(&self, node: usize) -> f64 {
        self.edges().filter(|&(_, v, _)| v == node).map(|(_, _, w)| w).sum()
    }

    /// Neighbour lists without self-loops; for undirected graphs each edge
    /// shows up at both ends.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.labels.len()];
        for (u, v, w) in self.edges() {
            if u == v {
                continue;
            }
            adj[u].push((v, w));
            if !self.directed {
                adj[v].push((u, w));
            }
        }
        adj
    }

    pub fn self_loop_weights(&self) -> Vec<f64> {
        let mut loops = vec![0.0; self.labels.len()];
        for (u, v, w) in self.edges() {
            if u == v {
                loops[u] += w;
            }
        }
        loops
    }

    pub fn is_isolated(&self, node: usize) -> bool {
        !self.edges.keys().any(|&(u, v)| u == node || v == node)
    }

    pub fn to_record(&self) -> GraphRecord {
        GraphRecord {
            directed: self.directed,
            nodes: self.labels.clone(),
            edges: self
                .edges()
                .map(|(u, v, w)| EdgeRecord {
                    source: self.labels[u].clone(),
                    target: self.labels[v].clone(),
                    weight: w,
                })
                .collect(),
        }
    }

    pub fn from_record(record: &GraphRecord) -> Result<Self, GraphError> {
        let mut g = if record.directed { Self::directed() } else { Self::undirected() };
        if record.edges.iter().any(|e| e.source == e.target) {
            g.self_loops = true;
        }
        for n in &record.nodes {
            g.add_node(n.clone())?;
        }
        for e in &record.edges {
            g.add_edge_by_label(&e.source, &e.target, e.weight)?;
        }
        Ok(g)
    }
}

/// Serializable edge-list form of a [`WeightedGraph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub directed: bool,
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

/// Node → community assignment with dense ids `0..community_count`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    assignment: Vec<usize>,
    community_count: usize,
}

impl Partition {
    /// Relabels arbitrary ids densely in order of first appearance.
    pub fn from_assignment(raw: &[usize]) -> Self {
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let assignment = raw
            .iter()
            .map(|c| {
                let next = remap.len();
                *remap.entry(*c).or_insert(next)
            })
            .collect();
        Partition {
            assignment,
            community_count: remap.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            assignment: (0..n).collect(),
            community_count: n,
        }
    }

    pub fn single_community(n: usize) -> Self {
        Partition {
            assignment: vec![0; n],
            community_count: usize::from(n > 0),
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn community_count(&self) -> usize {
        self.community_count
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Members of each community, ascending node order.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.community_count];
        for (node, &c) in self.assignment.iter().enumerate() {
            out[c].push(node);
        }
        out
    }
}

/// Newman modularity of a partition of an undirected weighted graph.
pub fn modularity(g: &WeightedGraph, p: &Partition) -> Result<f64, GraphError> {
    if g.is_directed() {
        return Err(GraphError::Directed);
    }
    if p.len() != g.node_count() {
        return Err(GraphError::PartitionMismatch {
            partition: p.len(),
            graph: g.node_count(),
        });
    }
    if g.edge_count() == 0 {
        return Err(GraphError::Edgeless);
    }
    let two_w = 2.0 * g.total_weight();
    let mut internal = vec![0.0; p.community_count()];
    let mut total = vec![0.0; p.community_count()];
    for (u, v, w) in g.edges() {
        let (cu, cv) = (p.community_of(u), p.community_of(v));
        total[cu] += w;
        total[cv] += w;
        if cu == cv {
            internal[cu] += 2.0 * w;
        }
    }
    Ok(internal
        .iter()
        .zip(&total)
        .map(|(a, t)| a / two_w - (t / two_w) * (t / two_w))
        .sum())
}

/// `|a ∩ b| / |a ∪ b|`, zero when both sets are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationError {
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations")]
    TooShort,
    #[error("constant vector; correlation undefined")]
    Constant,
}

/// Pearson product-moment correlation, clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(CorrelationError::TooShort);
    }
    if x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]) {
        return Err(CorrelationError::Constant);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelationError::Constant);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
