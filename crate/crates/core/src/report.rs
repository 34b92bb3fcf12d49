//! Human-readable and JSON summaries of a finished artifact directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpusnet::Diagnostics;
use crate::dynamics::{read_scores_csv, ScoreRow};
use crate::pipeline::{artifacts as a, read_graph_record};
use crate::topicnet::Topic;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("artifact directory incomplete; missing: {}", .0.join(", "))]
    Incomplete(Vec<String>),
    #[error("{artifact} is unreadable: {message}")]
    Corrupt { artifact: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub community: usize,
    pub first: String,
    pub last: String,
    pub nodes: usize,
    pub contiguous: bool,
    pub mean_docs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRow {
    pub id: usize,
    pub top_terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowEdge {
    pub follower: String,
    pub leader: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub modularity: f64,
    pub fraction_adjacent: Option<f64>,
    /// Chronological.
    pub clusters: Vec<ClusterRow>,
    pub topics: Vec<TopicRow>,
    /// Heaviest first.
    pub follow_edges: Vec<FollowEdge>,
    /// Highest leadership first.
    pub scoreboard: Vec<ScoreRow>,
}

const REQUIRED: [&str; 4] = [a::CORPUS_DIAGNOSTICS, a::TOPICS, a::FOLLOWER_NETWORK, a::SCORES];

fn read_json<T: serde::de::DeserializeOwned>(dir: &Path, artifact: &'static str) -> Result<T, ReportError> {
    let corrupt = |e: &dyn std::fmt::Display| ReportError::Corrupt {
        artifact,
        message: e.to_string(),
    };
    let text = fs::read_to_string(dir.join(artifact)).map_err(|e| corrupt(&e))?;
    serde_json::from_str(&text).map_err(|e| corrupt(&e))
}

pub fn build_report(dir: &Path, top_k: usize) -> Result<Report, ReportError> {
    let missing: Vec<String> = REQUIRED
        .iter()
        .filter(|f| !dir.join(f).is_file())
        .map(|f| f.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ReportError::Incomplete(missing));
    }
    let diag: Diagnostics = read_json(dir, a::CORPUS_DIAGNOSTICS)?;
    let topics: Vec<Topic> = read_json(dir, a::TOPICS)?;
    let g = read_graph_record(&dir.join(a::FOLLOWER_NETWORK)).map_err(|e| ReportError::Corrupt {
        artifact: a::FOLLOWER_NETWORK,
        message: e.to_string(),
    })?;
    let scores_file = fs::File::open(dir.join(a::SCORES)).map_err(|e| ReportError::Corrupt {
        artifact: a::SCORES,
        message: e.to_string(),
    })?;
    let mut scoreboard = read_scores_csv(scores_file).map_err(|e| ReportError::Corrupt {
        artifact: a::SCORES,
        message: e.to_string(),
    })?;
    scoreboard.sort_by(|x, y| {
        y.leadership
            .cmp(&x.leadership)
            .then(y.engagement.cmp(&x.engagement))
            .then(x.candidate.cmp(&y.candidate))
    });

    let clusters = diag
        .continuity
        .iter()
        .map(|c| ClusterRow {
            community: c.community,
            first: c.first.clone(),
            last: c.last.clone(),
            nodes: c.nodes.len(),
            contiguous: c.contiguous,
            mean_docs: diag.activity.communities.iter().find(|x| x.community == c.community).map(|x| x.mean_docs),
        })
        .collect();
    let topics = topics
        .iter()
        .map(|t| TopicRow {
            id: t.id,
            top_terms: t.top_terms(top_k).into_iter().map(str::to_string).collect(),
        })
        .collect();
    let mut follow_edges: Vec<FollowEdge> = g
        .edges()
        .map(|(u, v, w)| FollowEdge {
            follower: g.label(u).to_string(),
            leader: g.label(v).to_string(),
            weight: w,
        })
        .collect();
    follow_edges.sort_by(|x, y| {
        y.weight
            .total_cmp(&x.weight)
            .then_with(|| x.follower.cmp(&y.follower))
            .then_with(|| x.leader.cmp(&y.leader))
    });
    Ok(Report {
        modularity: diag.modularity,
        fraction_adjacent: diag.quasi_linearity.fraction_adjacent,
        clusters,
        topics,
        follow_edges,
        scoreboard,
    })
}

impl Report {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "corpus network: modularity {:.4}", self.modularity);
        if let Some(f) = self.fraction_adjacent {
            let _ = writeln!(s, "strongest neighbour adjacent in time: {:.1}%", 100.0 * f);
        }
        let _ = writeln!(s, "\ncluster timeline");
        let _ = writeln!(s, "  {:<9} {:<12} {:<12} {:>5}  {:<10} {:>9}", "community", "first", "last", "nodes", "continuity", "mean docs");
        for c in &self.clusters {
            let mean = c.mean_docs.map_or("-".to_string(), |m| format!("{m:.1}"));
            let _ = writeln!(
                s,
                "  {:<9} {:<12} {:<12} {:>5}  {:<10} {:>9}",
                c.community,
                c.first,
                c.last,
                c.nodes,
                if c.contiguous { "contiguous" } else { "broken" },
                mean
            );
        }
        let _ = writeln!(s, "\ntopics ({})", self.topics.len());
        for t in &self.topics {
            let _ = writeln!(s, "  {:>3}. {}", t.id, t.top_terms.join("; "));
        }
        let _ = writeln!(s, "\nfollow edges (follower -> leader)");
        if self.follow_edges.is_empty() {
            let _ = writeln!(s, "  none");
        }
        for e in &self.follow_edges {
            let _ = writeln!(s, "  {} -> {}  {}", e.follower, e.leader, e.weight);
        }
        let _ = writeln!(s, "\nscoreboard");
        let _ = writeln!(s, "  {:<20} {:>10} {:>10}", "candidate", "leadership", "engagement");
        for sc in &self.scoreboard {
            let _ = writeln!(s, "  {:<20} {:>10} {:>10}", sc.candidate, sc.leadership, sc.engagement);
        }
        s
    }
}

pub fn report(dir: &Path, format: ReportFormat, top_k: usize) -> Result<String, ReportError> {
    let r = build_report(dir, top_k)?;
    Ok(match format {
        ReportFormat::Text => r.render_text(),
        ReportFormat::Json => serde_json::to_string_pretty(&r).expect("report serializes") + "\n",
    })
}
