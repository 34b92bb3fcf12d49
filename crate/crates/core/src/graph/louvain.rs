//! Louvain modularity maximization and an exhaustive small-graph oracle.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{modularity, GraphError, Partition, WeightedGraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LouvainOptions {
    /// Seeds the node visiting order.
    pub seed: u64,
    /// Smallest modularity improvement for which a node is moved.
    pub min_gain: f64,
}

impl Default for LouvainOptions {
    fn default() -> Self {
        LouvainOptions { seed: 42, min_gain: 1e-9 }
    }
}

#[derive(Debug, Clone)]
pub struct LouvainOutcome {
    pub partition: Partition,
    pub modularity: f64,
    /// Modularity after each aggregation level.
    pub level_modularity: Vec<f64>,
}

pub fn louvain(g: &WeightedGraph, seed: u64) -> Result<Partition, GraphError> {
    louvain_with(g, &LouvainOptions { seed, ..Default::default() }).map(|o| o.partition)
}

/// One aggregation level: node `i` has neighbours `adj[i]` (no self
/// entries) and a self-loop of weight `loops[i]`.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
    degree: Vec<f64>,
}

impl Level {
    fn from_graph(g: &WeightedGraph) -> Self {
        let adj = g.adjacency();
        let loops = g.self_loop_weights();
        let degree = adj
            .iter()
            .zip(&loops)
            .map(|(nbrs, l)| nbrs.iter().map(|(_, w)| w).sum::<f64>() + 2.0 * l)
            .collect();
        Level { adj, loops, degree }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn modularity(&self, community: &[usize], two_w: f64) -> f64 {
        let n = self.len();
        let mut internal = vec![0.0; n];
        let mut total = vec![0.0; n];
        for i in 0..n {
            let c = community[i];
            total[c] += self.degree[i];
            internal[c] += 2.0 * self.loops[i];
            for &(j, w) in &self.adj[i] {
                if community[j] == c {
                    internal[c] += w;
                }
            }
        }
        internal
            .iter()
            .zip(&total)
            .map(|(a, t)| a / two_w - (t / two_w) * (t / two_w))
            .sum()
    }

    /// Repeated single-node moves from `start` (community ids below the
    /// node count) until a full sweep changes nothing. Returns the community
    /// of each node and whether anything moved.
    fn local_moves(&self, start: Vec<usize>, rng: &mut ChaCha8Rng, two_w: f64, min_gain: f64) -> (Vec<usize>, bool) {
        let n = self.len();
        let mut community = start;
        let mut total = vec![0.0; n];
        let mut size = vec![0usize; n];
        for (i, &c) in community.iter().enumerate() {
            total[c] += self.degree[i];
            size[c] += 1;
        }
        let mut empty: BTreeSet<usize> = (0..n).filter(|&c| size[c] == 0).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut link = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut is_touched = vec![false; n];
        let mut moved_any = false;

        loop {
            let mut moved = false;
            for &i in &order {
                let own = community[i];
                let k = self.degree[i];
                if k == 0.0 {
                    continue;
                }
                for &(j, w) in &self.adj[i] {
                    let c = community[j];
                    if !is_touched[c] {
                        is_touched[c] = true;
                        touched.push(c);
                    }
                    link[c] += w;
                }
                total[own] -= k;
                size[own] -= 1;

                // gain of joining c, up to the constant factor 2 / 2W
                let gain = |c: usize, link: &[f64]| link[c] - total[c] * k / two_w;
                let stay = gain(own, &link);
                let mut best = own;
                let mut best_gain = stay;
                touched.sort_unstable();
                for &c in &touched {
                    if c != own {
                        let g = gain(c, &link);
                        if g > best_gain {
                            best = c;
                            best_gain = g;
                        }
                    }
                }
                // moving into an empty community has gain zero
                if best_gain < 0.0 && size[own] > 0 {
                    if let Some(&e) = empty.iter().next() {
                        best = e;
                        best_gain = 0.0;
                    }
                }
                let target = if best != own && 2.0 * (best_gain - stay) / two_w > min_gain {
                    best
                } else {
                    own
                };

                if target != own {
                    moved = true;
                    if size[own] == 0 {
                        empty.insert(own);
                    }
                    empty.remove(&target);
                }
                community[i] = target;
                total[target] += k;
                size[target] += 1;

                for &c in &touched {
                    link[c] = 0.0;
                    is_touched[c] = false;
                }
                touched.clear();
            }
            if !moved {
                break;
            }
            moved_any = true;
        }
        (community, moved_any)
    }

    /// Collapses each community into one node. Returns the new level and,
    /// indexed by current node, the node it became.
    fn aggregate(&self, community: &[usize]) -> (Level, Vec<usize>) {
        let mut dense: BTreeMap<usize, usize> = BTreeMap::new();
        let mut remap = Vec::with_capacity(self.len());
        for &c in community {
            let next = dense.len();
            remap.push(*dense.entry(c).or_insert(next));
        }
        let m = dense.len();
        let mut loops = vec![0.0; m];
        let mut degree = vec![0.0; m];
        let mut between: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for i in 0..self.len() {
            let ci = remap[i];
            loops[ci] += self.loops[i];
            degree[ci] += self.degree[i];
            for &(j, w) in &self.adj[i] {
                if j < i {
                    continue;
                }
                let cj = remap[j];
                if ci == cj {
                    loops[ci] += w;
                } else {
                    *between.entry((ci.min(cj), ci.max(cj))).or_insert(0.0) += w;
                }
            }
        }
        let mut adj = vec![Vec::new(); m];
        for ((a, b), w) in between {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        (Level { adj, loops, degree }, remap)
    }
}

/// Multi-level Louvain. Node order within each level is a shuffle seeded
/// from `options.seed`; equal-gain moves go to the lowest community id.
pub fn louvain_with(g: &WeightedGraph, options: &LouvainOptions) -> Result<LouvainOutcome, GraphError> {
    if g.is_directed() {
        return Err(GraphError::Directed);
    }
    if g.edge_count() == 0 {
        return Err(GraphError::Edgeless);
    }
    let two_w = 2.0 * g.total_weight();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let base = Level::from_graph(g);
    let n = g.node_count();
    let mut membership: Vec<usize> = (0..n).collect();
    let mut level_modularity = Vec::new();

    // Each round starts with local moves on the input graph from the current
    // partition, then climbs the aggregation levels. Rounds repeat until the
    // input-level sweep moves nothing, so the result is a local optimum
    // under single-node moves.
    for round in 0.. {
        let (community, moved) = base.local_moves(membership.clone(), &mut rng, two_w, options.min_gain);
        if !moved && round > 0 {
            break;
        }
        level_modularity.push(base.modularity(&community, two_w));
        let (mut level, remap) = base.aggregate(&community);
        // community of each input node, in current-level node ids
        membership = remap;
        if !moved {
            break;
        }
        loop {
            let start = (0..level.len()).collect();
            let (community, moved) = level.local_moves(start, &mut rng, two_w, options.min_gain);
            if !moved {
                break;
            }
            level_modularity.push(level.modularity(&community, two_w));
            let (next, remap) = level.aggregate(&community);
            for m in membership.iter_mut() {
                *m = remap[*m];
            }
            let done = next.len() == level.len();
            level = next;
            if done {
                break;
            }
        }
    }

    let partition = Partition::from_assignment(&membership);
    let q = modularity(g, &partition)?;
    if level_modularity.is_empty() {
        level_modularity.push(q);
    }
    Ok(LouvainOutcome {
        partition,
        modularity: q,
        level_modularity,
    })
}

/// Largest graph [`exhaustive_best_partition`] accepts.
pub const EXHAUSTIVE_NODE_LIMIT: usize = 12;

/// Globally modularity-maximal partition by enumerating every set
/// partition (restricted growth strings). Intended as a test oracle.
pub fn exhaustive_best_partition(g: &WeightedGraph) -> Result<(Partition, f64), GraphError> {
    let n = g.node_count();
    if n > EXHAUSTIVE_NODE_LIMIT {
        return Err(GraphError::TooManyNodes {
            nodes: n,
            limit: EXHAUSTIVE_NODE_LIMIT,
        });
    }
    if g.is_directed() {
        return Err(GraphError::Directed);
    }
    if g.edge_count() == 0 {
        return Err(GraphError::Edgeless);
    }
    let mut w = vec![vec![0.0; n]; n];
    let mut loops = vec![0.0; n];
    for (u, v, x) in g.edges() {
        if u == v {
            loops[u] += x;
        } else {
            w[u][v] += x;
            w[v][u] += x;
        }
    }
    let degree = g.degrees();
    let two_w = 2.0 * g.total_weight();

    struct Search<'a> {
        w: &'a [Vec<f64>],
        loops: &'a [f64],
        degree: &'a [f64],
        two_w: f64,
        labels: Vec<usize>,
        internal: Vec<f64>,
        total: Vec<f64>,
        best: Option<(Vec<usize>, f64)>,
    }

    impl Search<'_> {
        fn visit(&mut self, i: usize, used: usize) {
            let n = self.labels.len();
            if i == n {
                let q: f64 = (0..used)
                    .map(|c| self.internal[c] / self.two_w - (self.total[c] / self.two_w).powi(2))
                    .sum();
                if self.best.as_ref().is_none_or(|(_, b)| q > *b) {
                    self.best = Some((self.labels.clone(), q));
                }
                return;
            }
            for c in 0..=used.min(n - 1) {
                let mut add = 2.0 * self.loops[i];
                for j in 0..i {
                    if self.labels[j] == c {
                        add += 2.0 * self.w[i][j];
                    }
                }
                self.labels[i] = c;
                self.internal[c] += add;
                self.total[c] += self.degree[i];
                self.visit(i + 1, used.max(c + 1));
                self.internal[c] -= add;
                self.total[c] -= self.degree[i];
            }
        }
    }

    let mut search = Search {
        w: &w,
        loops: &loops,
        degree: &degree,
        two_w,
        labels: vec![0; n],
        internal: vec![0.0; n],
        total: vec![0.0; n],
        best: None,
    };
    search.visit(0, 0);
    let (labels, q) = search.best.expect("at least one partition");
    Ok((Partition::from_assignment(&labels), q))
}
