//! Term co-occurrence networks per author and window, their communities
//! (subtopics), and recurring topics merged from overlapping subtopics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::graph::{jaccard, louvain, GraphError, WeightedGraph};
use crate::ingest::{AuthorId, CorpusBucket, TimeWindow};
use crate::lexicon::{TermKind, TermMatcher, TermSet};

pub const DEFAULT_MIN_JACCARD: f64 = 0.1;

/// Nodes are the terms occurring in one author's window; edge weight is the
/// number of documents containing both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticNetwork {
    pub candidate: AuthorId,
    pub window: TimeWindow,
    pub graph: WeightedGraph,
    /// Occurrences of each node term in the bucket, by node index.
    pub term_counts: Vec<u64>,
}

impl SemanticNetwork {
    /// Fewer than two term occurrences leave nothing to connect.
    pub fn is_trivial(&self) -> bool {
        self.term_counts.iter().sum::<u64>() < 2
    }
}

/// Term nodes appear in order of first occurrence. Buckets without an
/// author are attributed to `all`.
pub fn build_semantic_network(bucket: &CorpusBucket, terms: &TermSet) -> SemanticNetwork {
    let matcher = TermMatcher::new(terms);
    let mut graph = WeightedGraph::undirected();
    let mut node_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut term_counts: Vec<u64> = Vec::new();
    for tokens in &bucket.token_lists {
        let mut present = BTreeSet::new();
        for t in matcher.occurrences(tokens) {
            let node = *node_of.entry(t).or_insert_with(|| {
                term_counts.push(0);
                graph.add_node(terms.term(t).text.clone()).expect("term texts are unique")
            });
            term_counts[node] += 1;
            present.insert(node);
        }
        let present: Vec<usize> = present.into_iter().collect();
        for (k, &u) in present.iter().enumerate() {
            for &v in &present[k + 1..] {
                graph.add_weight(u, v, 1.0).expect("distinct valid nodes");
            }
        }
    }
    SemanticNetwork {
        candidate: bucket.author.clone().unwrap_or_else(|| "all".to_string()),
        window: bucket.window,
        graph,
        term_counts,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subtopic {
    pub candidate: AuthorId,
    pub window: TimeWindow,
    /// 0-based; larger communities get smaller indices.
    pub index: usize,
    /// Occurrences within the author's window.
    pub term_counts: BTreeMap<String, u64>,
}

impl Subtopic {
    pub fn terms(&self) -> BTreeSet<&str> {
        self.term_counts.keys().map(String::as_str).collect()
    }

    pub fn key(&self) -> String {
        format!("{}|{}|{}", self.candidate, self.window.label(), self.index)
    }

    /// Terms by decreasing count, ties alphabetical.
    pub fn ranked_terms(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<(&str, u64)> = self.term_counts.iter().map(|(t, &c)| (t.as_str(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtopicRecord {
    pub candidate: AuthorId,
    pub window_start: chrono::NaiveDate,
    pub window: TimeWindow,
    pub index: usize,
    pub terms: Vec<String>,
    pub term_counts: BTreeMap<String, u64>,
}

impl From<&Subtopic> for SubtopicRecord {
    fn from(s: &Subtopic) -> Self {
        SubtopicRecord {
            candidate: s.candidate.clone(),
            window_start: s.window.start,
            window: s.window,
            index: s.index,
            terms: s.ranked_terms().into_iter().map(|(t, _)| t.to_string()).collect(),
            term_counts: s.term_counts.clone(),
        }
    }
}

impl From<SubtopicRecord> for Subtopic {
    fn from(r: SubtopicRecord) -> Self {
        Subtopic {
            candidate: r.candidate,
            window: r.window,
            index: r.index,
            term_counts: r.term_counts,
        }
    }
}

/// One subtopic per Louvain community of the network. Isolated terms are
/// dropped; an edgeless network yields nothing.
pub fn extract_subtopics(net: &SemanticNetwork, seed: u64) -> Vec<Subtopic> {
    if net.graph.edge_count() == 0 {
        return Vec::new();
    }
    let partition = louvain(&net.graph, seed).expect("undirected graph with edges");
    let mut communities: Vec<Vec<usize>> = partition
        .communities()
        .into_iter()
        .filter(|c| !(c.len() == 1 && net.graph.is_isolated(c[0])))
        .collect();
    // stable: equal sizes keep community-id order
    communities.sort_by_key(|c| std::cmp::Reverse(c.len()));
    communities
        .into_iter()
        .enumerate()
        .map(|(index, nodes)| Subtopic {
            candidate: net.candidate.clone(),
            window: net.window,
            index,
            term_counts: nodes
                .iter()
                .map(|&n| (net.graph.label(n).to_string(), net.term_counts[n]))
                .collect(),
        })
        .collect()
}

/// Node `i` stands for `subtopics[i]`; edges carry the Jaccard index of the
/// term sets when it reaches `min_jaccard` (and is positive).
pub fn build_subtopic_network(subtopics: &[Subtopic], min_jaccard: f64) -> Result<WeightedGraph, GraphError> {
    let mut g = WeightedGraph::undirected();
    for s in subtopics {
        g.add_node(s.key())?;
    }
    let sets: Vec<BTreeSet<&str>> = subtopics.iter().map(Subtopic::terms).collect();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let w = jaccard(&sets[i], &sets[j]);
            if w >= min_jaccard && w > 0.0 {
                g.add_edge(i, j, w)?;
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtopicRef {
    pub candidate: AuthorId,
    pub window_start: chrono::NaiveDate,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub text: String,
    pub weight: f64,
}

/// Fuzzy set of terms with aggregated counts as membership weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    /// 1-based, in decreasing total weight.
    pub id: usize,
    /// Decreasing weight, ties alphabetical.
    pub terms: Vec<WeightedTerm>,
    pub subtopics: Vec<SubtopicRef>,
}

impl Topic {
    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    pub fn weight(&self, term: &str) -> f64 {
        self.terms.iter().find(|t| t.text == term).map_or(0.0, |t| t.weight)
    }

    pub fn top_terms(&self, k: usize) -> Vec<&str> {
        self.terms.iter().take(k).map(|t| t.text.as_str()).collect()
    }

    pub fn term_set(&self) -> TermSet {
        TermSet::from_texts(TermKind::Extracted, &self.top_terms(usize::MAX)).expect("topic terms are unique and non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeOptions {
    pub seed: u64,
    /// Subtopics without overlap become topics of their own instead of
    /// being dropped.
    pub keep_isolated: bool,
}

impl Default for MergeOptions {
    fn default() -> Self {
        MergeOptions { seed: 42, keep_isolated: false }
    }
}

/// Louvain over the subtopic network; each community becomes a topic whose
/// term weights sum the constituent subtopics' counts.
pub fn merge_topics(net: &WeightedGraph, subtopics: &[Subtopic], options: &MergeOptions) -> Result<Vec<Topic>, GraphError> {
    if net.node_count() != subtopics.len() {
        return Err(GraphError::PartitionMismatch {
            partition: subtopics.len(),
            graph: net.node_count(),
        });
    }
    let groups: Vec<Vec<usize>> = if net.edge_count() == 0 {
        (0..net.node_count()).map(|i| vec![i]).collect()
    } else {
        louvain(net, options.seed)?.communities()
    };
    let mut topics: Vec<(f64, usize, Topic)> = groups
        .into_iter()
        .filter(|g| options.keep_isolated || !(g.len() == 1 && net.is_isolated(g[0])))
        .map(|members| {
            let mut weights: BTreeMap<&str, f64> = BTreeMap::new();
            for &m in &members {
                for (t, &c) in &subtopics[m].term_counts {
                    *weights.entry(t.as_str()).or_insert(0.0) += c as f64;
                }
            }
            let mut terms: Vec<WeightedTerm> = weights
                .into_iter()
                .map(|(t, w)| WeightedTerm { text: t.to_string(), weight: w })
                .collect();
            terms.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.text.cmp(&b.text)));
            let topic = Topic {
                id: 0,
                terms,
                subtopics: members
                    .iter()
                    .map(|&m| SubtopicRef {
                        candidate: subtopics[m].candidate.clone(),
                        window_start: subtopics[m].window.start,
                        index: subtopics[m].index,
                    })
                    .collect(),
            };
            (topic.total_weight(), members[0], topic)
        })
        .collect();
    topics.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(topics
        .into_iter()
        .enumerate()
        .map(|(i, (_, _, mut t))| {
            t.id = i + 1;
            t
        })
        .collect())
}

/// Numbered listing, one topic per line, top `k` terms joined by `; `.
pub fn render_topics(topics: &[Topic], k: usize) -> String {
    let mut s = String::new();
    for t in topics {
        let _ = writeln!(s, "{}. {}", t.id, t.top_terms(k).join("; "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{default_anchor, Granularity};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn window(day: u32) -> TimeWindow {
        TimeWindow::containing(NaiveDate::from_ymd_opt(2015, 6, day).unwrap(), Granularity::Biweekly, default_anchor())
    }

    fn terms(words: &[&str]) -> TermSet {
        TermSet::from_texts(TermKind::Extracted, words).unwrap()
    }

    fn subtopic(candidate: &str, index: usize, counts: &[(&str, u64)]) -> Subtopic {
        Subtopic {
            candidate: candidate.into(),
            window: window(1),
            index,
            term_counts: counts.iter().map(|&(t, c)| (t.to_string(), c)).collect(),
        }
    }

    #[test]
    fn cooccurrence_counts_documents() {
        let b = CorpusBucket::from_texts(window(1), Some("A"), &["vote trump", "vote hillary"]);
        let net = build_semantic_network(&b, &terms(&["vote", "trump", "hillary"]));
        let g = &net.graph;
        let (v, t, h) = (g.index_of("vote").unwrap(), g.index_of("trump").unwrap(), g.index_of("hillary").unwrap());
        assert_eq!(g.weight(v, t), Some(1.0));
        assert_eq!(g.weight(v, h), Some(1.0));
        assert_eq!(g.weight(t, h), None);
        assert_eq!(net.term_counts[v], 2);
        assert_eq!(net.candidate, "A");
    }

    #[test]
    fn single_document_forms_triangle() {
        let b = CorpusBucket::from_texts(window(1), Some("A"), &["a b c c"]);
        let net = build_semantic_network(&b, &terms(&["a", "b", "c"]));
        assert_eq!(net.graph.edge_count(), 3);
        assert!(net.graph.edges().all(|(_, _, w)| w == 1.0));
    }

    #[test]
    fn absent_terms_are_not_nodes_and_tiny_networks_are_trivial() {
        let b = CorpusBucket::from_texts(window(1), Some("A"), &["a zzz"]);
        let net = build_semantic_network(&b, &terms(&["a", "b"]));
        assert_eq!(net.graph.labels(), ["a"]);
        assert!(net.is_trivial());
        assert!(extract_subtopics(&net, 1).is_empty());
    }

    #[test]
    fn two_triangles_give_two_subtopics() {
        let b = CorpusBucket::from_texts(window(1), Some("A"), &["a b c", "d e f", "d e f", "lonely"]);
        let net = build_semantic_network(&b, &terms(&["a", "b", "c", "d", "e", "f", "lonely"]));
        let subs = extract_subtopics(&net, 7);
        assert_eq!(subs.len(), 2);
        assert!(subs.iter().all(|s| s.term_counts.len() == 3));
        assert_eq!(subs[0].index, 0);
        assert_eq!(subs[1].index, 1);
    }

    #[test]
    fn clique_gives_one_subtopic() {
        let b = CorpusBucket::from_texts(window(1), Some("A"), &["a b c d", "a b c d"]);
        let subs = extract_subtopics(&build_semantic_network(&b, &terms(&["a", "b", "c", "d"])), 3);
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].term_counts["a"], 2);
    }

    #[test]
    fn subtopic_network_weights() {
        let s = [
            subtopic("A", 0, &[("a", 1), ("b", 1), ("c", 1)]),
            subtopic("A", 1, &[("b", 1), ("c", 1), ("d", 1)]),
            subtopic("B", 0, &[("a", 1), ("b", 1), ("c", 1)]),
            subtopic("B", 1, &[("x", 1), ("y", 1)]),
        ];
        let g = build_subtopic_network(&s, 0.1).unwrap();
        assert_eq!(g.weight(0, 1), Some(0.5));
        assert_eq!(g.weight(0, 2), Some(1.0));
        assert_eq!(g.weight(0, 3), None);
        assert!(g.is_isolated(3));
    }

    #[test]
    fn components_become_topics_and_isolated_dropped() {
        let s = [
            subtopic("A", 0, &[("a", 1), ("b", 1)]),
            subtopic("B", 0, &[("a", 1), ("b", 2)]),
            subtopic("A", 1, &[("x", 5), ("y", 1)]),
            subtopic("B", 1, &[("x", 1), ("y", 1)]),
            subtopic("C", 0, &[("q", 100)]),
        ];
        let g = build_subtopic_network(&s, 0.1).unwrap();
        let topics = merge_topics(&g, &s, &MergeOptions::default()).unwrap();
        assert_eq!(topics.len(), 2);
        assert_eq!(topics[0].top_terms(2), ["x", "y"]);
        assert_eq!(topics[0].weight("x"), 6.0);
        assert_eq!(topics[1].id, 2);
        let kept = merge_topics(&g, &s, &MergeOptions { keep_isolated: true, ..Default::default() }).unwrap();
        assert_eq!(kept.len(), 3);
        assert_eq!(kept[0].top_terms(1), ["q"]);
    }

    #[test]
    fn shared_core_ranks_first() {
        let s = [
            subtopic("A", 0, &[("hillary", 9), ("campaign", 7), ("trump", 3)]),
            subtopic("B", 0, &[("hillary", 8), ("campaign", 6), ("clinton", 4)]),
            subtopic("C", 0, &[("hillary", 7), ("campaign", 5), ("vote", 2)]),
        ];
        let g = build_subtopic_network(&s, 0.1).unwrap();
        let topics = merge_topics(&g, &s, &MergeOptions::default()).unwrap();
        assert_eq!(topics.len(), 1);
        assert_eq!(topics[0].top_terms(5), ["hillary", "campaign", "clinton", "trump", "vote"]);
        assert_eq!(topics[0].subtopics.len(), 3);
        assert_eq!(render_topics(&topics, 2), "1. hillary; campaign\n");
    }

    #[test]
    fn a_term_can_belong_to_two_topics() {
        let s = [
            subtopic("A", 0, &[("economy", 5), ("jobs", 4), ("trade", 3), ("america", 1)]),
            subtopic("B", 0, &[("economy", 4), ("jobs", 3), ("trade", 2)]),
            subtopic("A", 1, &[("border", 5), ("wall", 4), ("immigration", 3), ("america", 2)]),
            subtopic("B", 1, &[("border", 3), ("wall", 3), ("immigration", 1)]),
        ];
        let g = build_subtopic_network(&s, 0.1).unwrap();
        let topics = merge_topics(&g, &s, &MergeOptions::default()).unwrap();
        assert_eq!(topics.len(), 2);
        assert!(topics.iter().all(|t| t.weight("america") > 0.0));
    }

    #[test]
    fn record_round_trip() {
        let s = subtopic("A", 2, &[("a", 1), ("b", 3)]);
        let r = SubtopicRecord::from(&s);
        assert_eq!(r.terms, ["b", "a"]);
        let json = serde_json::to_string(&r).unwrap();
        let back: SubtopicRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(Subtopic::from(back), s);
    }

    fn docs() -> impl Strategy<Value = Vec<String>> {
        let words = prop::sample::select(vec!["a", "b", "c", "d", "e", "f", "g"]);
        prop::collection::vec(prop::collection::vec(words, 1..6).prop_map(|w| w.join(" ")), 1..12)
    }

    proptest! {
        #[test]
        fn weights_are_positive_integers(texts in docs()) {
            let b = CorpusBucket::from_texts(window(1), Some("A"), &texts);
            let net = build_semantic_network(&b, &terms(&["a", "b", "c", "d", "e", "f", "g"]));
            for (u, v, w) in net.graph.edges() {
                prop_assert!(w >= 1.0 && w.fract() == 0.0);
                prop_assert_eq!(net.graph.weight(v, u), Some(w));
            }
        }

        #[test]
        fn topics_partition_the_connected_subtopics(texts in docs(), seed in 0u64..50) {
            let t = terms(&["a", "b", "c", "d", "e", "f", "g"]);
            let mut subs = Vec::new();
            for (k, chunk) in texts.chunks(3).enumerate() {
                let mut b = CorpusBucket::from_texts(window(1), Some("A"), chunk);
                b.author = Some(format!("A{k}"));
                subs.extend(extract_subtopics(&build_semantic_network(&b, &t), seed));
            }
            let g = build_subtopic_network(&subs, 0.1).unwrap();
            let topics = merge_topics(&g, &subs, &MergeOptions { seed, keep_isolated: false }).unwrap();
            let connected = (0..g.node_count()).filter(|&i| !g.is_isolated(i)).count();
            prop_assert_eq!(topics.iter().map(|t| t.subtopics.len()).sum::<usize>(), connected);
            for topic in &topics {
                for term in &topic.terms {
                    prop_assert!(topic.subtopics.iter().any(|r| subs.iter().any(|s|
                        s.candidate == r.candidate && s.index == r.index && s.term_counts.contains_key(&term.text))));
                }
            }
        }
    }
}
