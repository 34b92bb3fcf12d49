//! Temporal corpus-similarity network: one node per non-empty bucket, edges
//! where base-term frequency profiles correlate strongly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::graph::export::NodeAttribute;
use crate::graph::{modularity, pearson, CorrelationError, GraphError, GraphRecord, Partition, WeightedGraph};
use crate::ingest::{AuthorId, CorpusBucket, TimeWindow};
use crate::lexicon::{frequency_vector, TermSet};

pub const DEFAULT_THRESHOLD: f64 = 0.6;

/// Largest grid distance between a node and its strongest neighbour that
/// still does not count as an outlier.
pub const OUTLIER_GAP: i64 = 2;

#[derive(Debug, Error)]
pub enum CorpusNetError {
    #[error("need at least two non-empty buckets, found {0}")]
    TooFewBuckets(usize),
    #[error("base term set is empty")]
    NoBaseTerms,
    #[error("threshold {0} outside [-1, 1]")]
    InvalidThreshold(f64),
    #[error("partition covers {partition} nodes, network has {network}")]
    PartitionMismatch { partition: usize, network: usize },
    #[error("metadata lists {meta} nodes, graph has {graph}")]
    MetaMismatch { meta: usize, graph: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketMeta {
    pub label: String,
    pub window: TimeWindow,
    pub author: Option<AuthorId>,
    pub document_count: usize,
    pub token_total: usize,
}

impl BucketMeta {
    pub fn of(bucket: &CorpusBucket) -> Self {
        BucketMeta {
            label: bucket.label(),
            window: bucket.window,
            author: bucket.author.clone(),
            document_count: bucket.documents.len(),
            token_total: bucket.token_total(),
        }
    }
}

/// Node `i` of `graph` is described by `meta[i]`; nodes are ordered by
/// window, then author.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusNetwork {
    pub graph: WeightedGraph,
    pub meta: Vec<BucketMeta>,
    pub threshold: f64,
    /// Labels of empty buckets left out of the network.
    pub excluded_empty: Vec<String>,
    /// Labels of nodes whose frequency profile is constant; always isolated.
    pub constant: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CorpusNetworkRecord {
    threshold: f64,
    meta: Vec<BucketMeta>,
    excluded_empty: Vec<String>,
    constant: Vec<String>,
    graph: GraphRecord,
}

impl CorpusNetwork {
    pub fn node_count(&self) -> usize {
        self.meta.len()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&CorpusNetworkRecord {
            threshold: self.threshold,
            meta: self.meta.clone(),
            excluded_empty: self.excluded_empty.clone(),
            constant: self.constant.clone(),
            graph: self.graph.to_record(),
        })
    }

    pub fn from_json(s: &str) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let r: CorpusNetworkRecord = serde_json::from_str(s)?;
        let graph = WeightedGraph::from_record(&r.graph)?;
        if graph.node_count() != r.meta.len() {
            return Err(Box::new(CorpusNetError::MetaMismatch {
                meta: r.meta.len(),
                graph: graph.node_count(),
            }));
        }
        Ok(CorpusNetwork {
            graph,
            meta: r.meta,
            threshold: r.threshold,
            excluded_empty: r.excluded_empty,
            constant: r.constant,
        })
    }

    fn check_partition(&self, p: &Partition) -> Result<(), CorpusNetError> {
        if p.len() != self.node_count() {
            return Err(CorpusNetError::PartitionMismatch {
                partition: p.len(),
                network: self.node_count(),
            });
        }
        Ok(())
    }

    /// Communities ordered by their earliest window, then by id.
    pub fn chronological_communities(&self, p: &Partition) -> Vec<Vec<usize>> {
        let mut communities = p.communities();
        for c in communities.iter_mut() {
            c.sort_by_key(|&i| (self.meta[i].window.grid_index(), i));
        }
        communities.sort_by_key(|c| c.first().map(|&i| (self.meta[i].window.grid_index(), i)));
        communities
    }

    /// GraphML/DOT node attributes: window, document count and, when given,
    /// community id.
    pub fn node_attributes(&self, p: Option<&Partition>) -> Vec<NodeAttribute> {
        let mut attrs = vec![
            NodeAttribute::new("window", self.meta.iter().map(|m| m.window.label()).collect()),
            NodeAttribute::new("documents", self.meta.iter().map(|m| m.document_count.to_string()).collect()),
        ];
        if let Some(p) = p {
            attrs.push(NodeAttribute::community(p));
        }
        attrs
    }
}

/// Links buckets whose relative base-term frequencies correlate at or above
/// `threshold`. Negative correlations never produce edges.
pub fn build_corpus_network(buckets: &[CorpusBucket], base: &TermSet, threshold: f64) -> Result<CorpusNetwork, CorpusNetError> {
    if base.is_empty() {
        return Err(CorpusNetError::NoBaseTerms);
    }
    let mut excluded_empty = Vec::new();
    let mut kept: Vec<&CorpusBucket> = Vec::new();
    for b in buckets {
        if b.is_empty() {
            excluded_empty.push(b.label());
        } else {
            kept.push(b);
        }
    }
    kept.sort_by(|a, b| (a.window, &a.author).cmp(&(b.window, &b.author)));
    excluded_empty.sort();
    let meta: Vec<BucketMeta> = kept.iter().map(|b| BucketMeta::of(b)).collect();
    let vectors: Vec<Vec<f64>> = kept
        .iter()
        .map(|b| {
            let fv = frequency_vector(b, base);
            fv.relative.unwrap_or_else(|| vec![0.0; base.len()])
        })
        .collect();
    let mut net = from_vectors(meta, &vectors, threshold)?;
    net.excluded_empty = excluded_empty;
    Ok(net)
}

/// Network over precomputed profiles; `meta[i]` describes `vectors[i]`.
pub fn from_vectors(meta: Vec<BucketMeta>, vectors: &[Vec<f64>], threshold: f64) -> Result<CorpusNetwork, CorpusNetError> {
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(CorpusNetError::InvalidThreshold(threshold));
    }
    if meta.len() < 2 {
        return Err(CorpusNetError::TooFewBuckets(meta.len()));
    }
    if meta.len() != vectors.len() {
        return Err(CorpusNetError::MetaMismatch {
            meta: meta.len(),
            graph: vectors.len(),
        });
    }
    let mut graph = WeightedGraph::undirected();
    for m in &meta {
        graph.add_node(m.label.clone())?;
    }
    let mut constant = Vec::new();
    let varying: Vec<bool> = vectors.iter().map(|v| v.iter().any(|&x| x != v[0])).collect();
    for (i, m) in meta.iter().enumerate() {
        if !varying[i] {
            log::warn!("bucket {} has a constant base-term profile; left isolated", m.label);
            constant.push(m.label.clone());
        }
    }
    for i in 0..vectors.len() {
        if !varying[i] {
            continue;
        }
        for j in i + 1..vectors.len() {
            if !varying[j] {
                continue;
            }
            match pearson(&vectors[i], &vectors[j]) {
                Ok(r) if r >= threshold && r > 0.0 => graph.add_edge(i, j, r)?,
                Ok(_) | Err(CorrelationError::Constant) => {}
                Err(e) => unreachable!("profiles share a length of at least two: {e}"),
            }
        }
    }
    Ok(CorpusNetwork {
        graph,
        meta,
        threshold,
        excluded_empty: Vec::new(),
        constant,
    })
}

// ---------------------------------------------------------------------------
// Diagnostics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Continuity {
    pub community: usize,
    pub nodes: Vec<String>,
    pub first: String,
    pub last: String,
    pub contiguous: bool,
}

/// Per community, whether its windows form one unbroken run on the
/// calendar grid. Several authors sharing a window count once.
pub fn temporal_continuity(net: &CorpusNetwork, p: &Partition) -> Result<Vec<Continuity>, CorpusNetError> {
    net.check_partition(p)?;
    Ok(net
        .chronological_communities(p)
        .into_iter()
        .map(|nodes| {
            let mut grid: Vec<i64> = nodes.iter().map(|&i| net.meta[i].window.grid_index()).collect();
            grid.dedup();
            let contiguous = grid.windows(2).all(|w| w[1] == w[0] + 1);
            Continuity {
                community: p.community_of(nodes[0]),
                first: net.meta[nodes[0]].window.label(),
                last: net.meta[*nodes.last().expect("communities are non-empty")].window.label(),
                nodes: nodes.iter().map(|&i| net.meta[i].label.clone()).collect(),
                contiguous,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outlier {
    pub node: String,
    pub strongest_neighbor: String,
    pub gap: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiLinearity {
    /// Share of non-isolated nodes whose strongest edge reaches the previous
    /// or next window; `None` without edges.
    pub fraction_adjacent: Option<f64>,
    pub adjacent: usize,
    pub considered: usize,
    pub isolated: Vec<String>,
    pub outliers: Vec<Outlier>,
}

/// Strongest-neighbour structure. Equal-weight neighbours resolve to the
/// nearest window, then to the lower node index.
pub fn quasi_linearity(net: &CorpusNetwork) -> QuasiLinearity {
    let adj = net.graph.adjacency();
    let grid: Vec<i64> = net.meta.iter().map(|m| m.window.grid_index()).collect();
    let mut adjacent = 0;
    let mut considered = 0;
    let mut isolated = Vec::new();
    let mut outliers = Vec::new();
    for (i, nbrs) in adj.iter().enumerate() {
        let gap_to = |j: usize| (grid[j] - grid[i]).abs();
        let best = nbrs.iter().copied().reduce(|best, cand| {
            let better = cand.1 > best.1 || (cand.1 == best.1 && (gap_to(cand.0), cand.0) < (gap_to(best.0), best.0));
            if better {
                cand
            } else {
                best
            }
        });
        let Some((j, _)) = best else {
            isolated.push(net.meta[i].label.clone());
            continue;
        };
        considered += 1;
        let gap = gap_to(j);
        if gap == 1 {
            adjacent += 1;
        }
        if gap > OUTLIER_GAP {
            outliers.push(Outlier {
                node: net.meta[i].label.clone(),
                strongest_neighbor: net.meta[j].label.clone(),
                gap,
            });
        }
    }
    QuasiLinearity {
        fraction_adjacent: (considered > 0).then(|| adjacent as f64 / considered as f64),
        adjacent,
        considered,
        isolated,
        outliers,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p_value: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Unequal-variance two-sample t-test. Both samples need two values. When
/// both variances vanish the test degenerates: p is 1 for equal means and
/// 0 otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Option<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let equal = ma == mb;
        return Some(WelchTest {
            t: if equal { 0.0 } else { (ma - mb).signum() * f64::INFINITY },
            df: na + nb - 2.0,
            p_value: if equal { 1.0 } else { 0.0 },
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Some(WelchTest { t, df, p_value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityActivity {
    pub community: usize,
    pub first: String,
    pub buckets: usize,
    pub document_counts: Vec<usize>,
    pub mean_docs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityComparison {
    pub earlier: usize,
    pub later: usize,
    pub test: WelchTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterActivity {
    /// Chronological.
    pub communities: Vec<CommunityActivity>,
    /// One per chronologically adjacent pair where both sides have two buckets.
    pub comparisons: Vec<ActivityComparison>,
    pub notices: Vec<String>,
}

pub fn cluster_activity(net: &CorpusNetwork, p: &Partition) -> Result<ClusterActivity, CorpusNetError> {
    net.check_partition(p)?;
    let communities: Vec<CommunityActivity> = net
        .chronological_communities(p)
        .into_iter()
        .map(|nodes| {
            let document_counts: Vec<usize> = nodes.iter().map(|&i| net.meta[i].document_count).collect();
            CommunityActivity {
                community: p.community_of(nodes[0]),
                first: net.meta[nodes[0]].window.label(),
                buckets: nodes.len(),
                mean_docs: document_counts.iter().sum::<usize>() as f64 / nodes.len() as f64,
                document_counts,
            }
        })
        .collect();
    let mut comparisons = Vec::new();
    let mut notices = Vec::new();
    for pair in communities.windows(2) {
        let a: Vec<f64> = pair[0].document_counts.iter().map(|&c| c as f64).collect();
        let b: Vec<f64> = pair[1].document_counts.iter().map(|&c| c as f64).collect();
        match welch_t_test(&a, &b) {
            Some(test) => comparisons.push(ActivityComparison {
                earlier: pair[0].community,
                later: pair[1].community,
                test,
            }),
            None => notices.push(format!(
                "communities {} and {} not compared: each needs at least two buckets",
                pair[0].community, pair[1].community
            )),
        }
    }
    Ok(ClusterActivity {
        communities,
        comparisons,
        notices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub nodes: usize,
    pub edges: usize,
    pub threshold: f64,
    pub modularity: f64,
    pub community_count: usize,
    pub continuity: Vec<Continuity>,
    pub quasi_linearity: QuasiLinearity,
    pub activity: ClusterActivity,
    pub excluded_empty: Vec<String>,
    pub constant: Vec<String>,
}

pub fn diagnose(net: &CorpusNetwork, p: &Partition) -> Result<Diagnostics, CorpusNetError> {
    Ok(Diagnostics {
        nodes: net.node_count(),
        edges: net.graph.edge_count(),
        threshold: net.threshold,
        modularity: modularity(&net.graph, p)?,
        community_count: p.community_count(),
        continuity: temporal_continuity(net, p)?,
        quasi_linearity: quasi_linearity(net),
        activity: cluster_activity(net, p)?,
        excluded_empty: net.excluded_empty.clone(),
        constant: net.constant.clone(),
    })
}

impl Diagnostics {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes {}  edges {}  threshold {}", self.nodes, self.edges, self.threshold);
        let _ = writeln!(s, "modularity {:.4}  communities {}", self.modularity, self.community_count);
        if !self.excluded_empty.is_empty() {
            let _ = writeln!(s, "empty buckets excluded: {}", self.excluded_empty.join(", "));
        }
        if !self.constant.is_empty() {
            let _ = writeln!(s, "constant profiles (isolated): {}", self.constant.join(", "));
        }
        let _ = writeln!(s, "\ncommunities (chronological):");
        let activity: BTreeMap<usize, &CommunityActivity> =
            self.activity.communities.iter().map(|a| (a.community, a)).collect();
        for c in &self.continuity {
            let mean = activity.get(&c.community).map_or(0.0, |a| a.mean_docs);
            let _ = writeln!(
                s,
                "  #{:<3} {} .. {}  nodes {:>3}  {}  mean docs {:.1}",
                c.community,
                c.first,
                c.last,
                c.nodes.len(),
                if c.contiguous { "contiguous" } else { "broken" },
                mean
            );
        }
        let q = &self.quasi_linearity;
        let _ = writeln!(s, "\nstrongest-neighbour structure (isolated nodes not counted):");
        match q.fraction_adjacent {
            Some(f) => {
                let _ = writeln!(s, "  adjacent {}/{} = {:.3}", q.adjacent, q.considered, f);
            }
            None => {
                let _ = writeln!(s, "  no edges");
            }
        }
        for o in &q.outliers {
            let _ = writeln!(s, "  outlier {} -> {} (gap {})", o.node, o.strongest_neighbor, o.gap);
        }
        if !self.activity.comparisons.is_empty() || !self.activity.notices.is_empty() {
            let _ = writeln!(s, "\nactivity (Welch t-test on documents per bucket):");
        }
        for c in &self.activity.comparisons {
            let _ = writeln!(
                s,
                "  #{} vs #{}  t {:.4}  df {:.3}  p {:.4e}",
                c.earlier, c.later, c.test.t, c.test.df, c.test.p_value
            );
        }
        for n in &self.activity.notices {
            let _ = writeln!(s, "  {n}");
        }
        s
    }
}
