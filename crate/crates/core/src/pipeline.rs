//! End-to-end run over an artifact directory. Every stage reads only files
//! written by earlier stages, so stages can be rerun one at a time.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::corpusnet::{self, CorpusNetwork};
use crate::dynamics::{self, CoverageMatrix, SpanCounting};
use crate::graph::export::{write_dot, write_graphml, write_partition_csv};
use crate::graph::{louvain_with, modularity, GraphRecord, LouvainOptions, Partition, WeightedGraph};
use crate::ingest::{
    self, default_anchor, ArchiveFormat, BucketConfig, CorpusBucket, Document, Granularity, LoadOptions, ObservationRange,
    TokenizerOptions,
};
use crate::lexicon::{self, ReferenceLexicon, TermKind, TermRules, TermSet};
use crate::topicnet::{self, MergeOptions, Subtopic, SubtopicRecord, Topic};

/// File names inside an artifact directory, in production order.
pub mod artifacts {
    pub const DOCUMENTS: &str = "documents.jsonl";
    pub const INGEST_REPORT: &str = "ingest_report.json";
    pub const BUCKETS: &str = "buckets.csv";
    pub const BASE_TERMS: &str = "base_terms.csv";
    pub const EXTRACTED_TERMS: &str = "extracted_terms.csv";
    pub const CORPUS_NETWORK: &str = "corpus_network.json";
    pub const CORPUS_GRAPHML: &str = "corpus_network.graphml";
    pub const CORPUS_DOT: &str = "corpus_network.dot";
    pub const CORPUS_PARTITION: &str = "corpus_partition.csv";
    pub const CORPUS_DIAGNOSTICS: &str = "corpus_diagnostics.json";
    pub const CORPUS_DIAGNOSTICS_TXT: &str = "corpus_diagnostics.txt";
    pub const SEMANTIC_NETWORKS: &str = "semantic_networks.csv";
    pub const SUBTOPICS: &str = "subtopics.jsonl";
    pub const TOPICS: &str = "topics.json";
    pub const TOPICS_TXT: &str = "topics.txt";
    pub const COVERAGE: &str = "coverage.csv";
    pub const EVENTS: &str = "events.csv";
    pub const FOLLOWER_NETWORK: &str = "follower_network.json";
    pub const FOLLOWER_GRAPHML: &str = "follower_network.graphml";
    pub const FOLLOWER_DOT: &str = "follower_network.dot";
    pub const SCORES: &str = "scores.csv";
    pub const SENSITIVITY: &str = "sensitivity.csv";
    pub const MANIFEST: &str = "manifest.json";
    pub const STATUS: &str = "STATUS";
}

use artifacts as a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Lexicon,
    Terms,
    Corpusnet,
    Topics,
    Dynamics,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// Bad input data, paths or configuration.
    Input,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: FailureKind,
    pub message: String,
}

impl PipelineError {
    pub fn input(stage: Stage, message: impl fmt::Display) -> Self {
        PipelineError {
            stage,
            kind: FailureKind::Input,
            message: message.to_string(),
        }
    }

    pub fn internal(stage: Stage, message: impl fmt::Display) -> Self {
        PipelineError {
            stage,
            kind: FailureKind::Internal,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            FailureKind::Input => 2,
            FailureKind::Internal => 1,
        }
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.message)
    }
}

impl std::error::Error for PipelineError {}

type StageResult<T> = Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub input: PathBuf,
    /// Inferred from the input extension when absent.
    pub input_format: Option<ArchiveFormat>,
    pub lexicon: PathBuf,
    /// Parent of the content-addressed run directory; not part of the hash.
    pub output_root: PathBuf,
    pub strict: bool,
    pub drop_duplicate_text: bool,
    pub range_start: Option<NaiveDate>,
    pub range_end: Option<NaiveDate>,
    pub corpus_granularity: Granularity,
    pub topic_granularity: Granularity,
    pub anchor: NaiveDate,
    pub keep_mentions: bool,
    /// Restricts the corpus network (and its base terms) to one author.
    pub corpus_author: Option<String>,
    pub base_min_count: u64,
    pub max_base_terms: usize,
    pub rare_multiplier: f64,
    pub significant_multiplier: f64,
    pub min_occurrences: u64,
    pub min_ngram_count: u64,
    pub corpus_threshold: f64,
    pub corpus_seed: u64,
    pub subtopic_seed: u64,
    pub topic_seed: u64,
    pub min_jaccard: f64,
    pub keep_isolated: bool,
    pub coverage_threshold: f64,
    pub span_counting: SpanCounting,
    pub sensitivity_thresholds: Vec<f64>,
    pub top_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let rules = TermRules::default();
        PipelineConfig {
            input: PathBuf::new(),
            input_format: None,
            lexicon: PathBuf::new(),
            output_root: PathBuf::from("out"),
            strict: false,
            drop_duplicate_text: false,
            range_start: None,
            range_end: None,
            corpus_granularity: Granularity::Monthly,
            topic_granularity: Granularity::Biweekly,
            anchor: default_anchor(),
            keep_mentions: true,
            corpus_author: None,
            base_min_count: 100,
            max_base_terms: 300,
            rare_multiplier: rules.rare_multiplier,
            significant_multiplier: rules.significant_multiplier,
            min_occurrences: rules.min_occurrences,
            min_ngram_count: rules.min_ngram_count,
            corpus_threshold: corpusnet::DEFAULT_THRESHOLD,
            corpus_seed: 42,
            subtopic_seed: 42,
            topic_seed: 42,
            min_jaccard: topicnet::DEFAULT_MIN_JACCARD,
            keep_isolated: false,
            coverage_threshold: dynamics::DEFAULT_COVERAGE_THRESHOLD,
            span_counting: SpanCounting::Events,
            sensitivity_thresholds: dynamics::SENSITIVITY_THRESHOLDS.to_vec(),
            top_k: 10,
        }
    }
}

fn config_error(message: impl fmt::Display) -> PipelineError {
    PipelineError::input(Stage::Config, message)
}

impl PipelineConfig {
    pub fn from_json(s: &str) -> StageResult<Self> {
        serde_json::from_str(s).map_err(config_error)
    }

    pub fn load(path: &Path) -> StageResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The configuration recorded in a run manifest.
    pub fn from_manifest(path: &Path) -> StageResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let manifest: Value = serde_json::from_str(&text).map_err(config_error)?;
        let config = manifest.get("config").ok_or_else(|| config_error("manifest has no `config`"))?;
        serde_json::from_value(config.clone()).map_err(config_error)
    }

    pub fn validate(&self) -> StageResult<()> {
        let unit = |name: &str, v: f64, lo: f64, lo_open: bool| {
            let ok = v.is_finite() && v <= 1.0 && if lo_open { v > lo } else { v >= lo };
            if ok {
                Ok(())
            } else {
                Err(config_error(format!("{name} = {v} outside its range")))
            }
        };
        if self.input.as_os_str().is_empty() {
            return Err(config_error("input path is required"));
        }
        if self.lexicon.as_os_str().is_empty() {
            return Err(config_error("lexicon path is required"));
        }
        if let (Some(s), Some(e)) = (self.range_start, self.range_end) {
            if s >= e {
                return Err(config_error("range_start must precede range_end"));
            }
        }
        if self.base_min_count == 0 || self.min_occurrences == 0 || self.min_ngram_count == 0 {
            return Err(config_error("minimum counts must be at least 1"));
        }
        if self.max_base_terms < 2 {
            return Err(config_error("max_base_terms must be at least 2"));
        }
        for (name, v) in [("rare_multiplier", self.rare_multiplier), ("significant_multiplier", self.significant_multiplier)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_error(format!("{name} must be positive")));
            }
        }
        unit("corpus_threshold", self.corpus_threshold, 0.0, true)?;
        unit("min_jaccard", self.min_jaccard, 0.0, true)?;
        unit("coverage_threshold", self.coverage_threshold, -1.0, false)?;
        for &t in &self.sensitivity_thresholds {
            unit("sensitivity threshold", t, -1.0, false)?;
        }
        if self.top_k == 0 {
            return Err(config_error("top_k must be at least 1"));
        }
        Ok(())
    }

    /// Every setting except the output location.
    pub fn hashed_view(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").remove("output_root");
        v
    }

    /// First 16 hex digits of the SHA-256 of [`Self::hashed_view`].
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.hashed_view()).expect("value serializes");
        hex::encode(Sha256::digest(bytes))[..16].to_string()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_root.join(self.hash())
    }

    fn input_format(&self) -> StageResult<ArchiveFormat> {
        if let Some(f) = self.input_format {
            return Ok(f);
        }
        match self.input.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(ArchiveFormat::Csv),
            Some("jsonl") | Some("json") => Ok(ArchiveFormat::Jsonl),
            _ => Err(config_error(format!(
                "cannot infer the archive format of {}; set input_format",
                self.input.display()
            ))),
        }
    }

    fn tokenizer(&self) -> TokenizerOptions {
        TokenizerOptions {
            keep_mentions: self.keep_mentions,
        }
    }

    fn range(&self) -> ObservationRange {
        ObservationRange {
            start: self.range_start,
            end: self.range_end,
        }
    }

    fn term_rules(&self) -> TermRules {
        TermRules {
            rare_multiplier: self.rare_multiplier,
            significant_multiplier: self.significant_multiplier,
            min_occurrences: self.min_occurrences,
            min_ngram_count: self.min_ngram_count,
        }
    }

    /// Buckets behind the corpus network, optionally for one author only.
    pub fn corpus_buckets(&self, docs: &[Document]) -> Vec<CorpusBucket> {
        let selected: Vec<Document> = match &self.corpus_author {
            Some(author) => docs.iter().filter(|d| &d.author == author).cloned().collect(),
            None => docs.to_vec(),
        };
        let cfg = BucketConfig {
            granularity: self.corpus_granularity,
            anchor: self.anchor,
            per_author: false,
            range: self.range(),
        };
        ingest::bucket(&selected, &cfg, &self.tokenizer()).buckets
    }

    /// Per-author buckets behind semantic networks and coverage.
    pub fn topic_buckets(&self, docs: &[Document]) -> Vec<CorpusBucket> {
        let cfg = BucketConfig {
            granularity: self.topic_granularity,
            anchor: self.anchor,
            per_author: true,
            range: self.range(),
        };
        ingest::bucket(docs, &cfg, &self.tokenizer()).buckets
    }
}

// ---------------------------------------------------------------------------
// File helpers

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic<F>(stage: Stage, path: &Path, fill: F) -> StageResult<()>
where
    F: FnOnce(&mut dyn Write) -> Result<(), Box<dyn std::error::Error>>,
{
    let dir = path.parent().unwrap_or(Path::new("."));
    let fail = |e: &dyn fmt::Display| PipelineError::internal(stage, format!("writing {}: {e}", path.display()));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w).map_err(|e| fail(&e))?;
        w.flush().map_err(|e| fail(&e))?;
    }
    tmp.persist(path).map_err(|e| fail(&e))?;
    Ok(())
}

fn write_json<T: Serialize>(stage: Stage, path: &Path, value: &T) -> StageResult<()> {
    write_atomic(stage, path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn open_artifact(stage: Stage, dir: &Path, name: &str) -> StageResult<BufReader<File>> {
    let path = dir.join(name);
    File::open(&path)
        .map(BufReader::new)
        .map_err(|e| PipelineError::input(stage, format!("missing artifact {} ({e}); run the earlier stage first", path.display())))
}

fn read_artifact(stage: Stage, dir: &Path, name: &str) -> StageResult<String> {
    let mut s = String::new();
    open_artifact(stage, dir, name)?
        .read_to_string(&mut s)
        .map_err(|e| PipelineError::internal(stage, format!("{name}: {e}")))?;
    Ok(s)
}

fn corrupt(stage: Stage, name: &str, e: impl fmt::Display) -> PipelineError {
    PipelineError::internal(stage, format!("{name} is unreadable: {e}"))
}

fn read_documents(stage: Stage, dir: &Path) -> StageResult<Vec<Document>> {
    open_artifact(stage, dir, a::DOCUMENTS)?;
    let opts = LoadOptions {
        strict: true,
        ..LoadOptions::new(ArchiveFormat::Jsonl)
    };
    ingest::load_documents(&dir.join(a::DOCUMENTS), &opts)
        .map(|r| r.documents)
        .map_err(|e| corrupt(stage, a::DOCUMENTS, e))
}

fn read_terms(stage: Stage, dir: &Path, name: &str, kind: TermKind) -> StageResult<TermSet> {
    TermSet::read_csv(kind, open_artifact(stage, dir, name)?).map_err(|e| corrupt(stage, name, e))
}

fn read_corpus_network(dir: &Path) -> StageResult<CorpusNetwork> {
    let text = read_artifact(Stage::Corpusnet, dir, a::CORPUS_NETWORK)?;
    CorpusNetwork::from_json(&text).map_err(|e| corrupt(Stage::Corpusnet, a::CORPUS_NETWORK, e))
}

fn read_partition(net: &CorpusNetwork, dir: &Path) -> StageResult<Partition> {
    let stage = Stage::Corpusnet;
    let mut rdr = csv::Reader::from_reader(open_artifact(stage, dir, a::CORPUS_PARTITION)?);
    let mut by_label: BTreeMap<String, usize> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| corrupt(stage, a::CORPUS_PARTITION, e))?;
        let c = rec
            .get(1)
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| corrupt(stage, a::CORPUS_PARTITION, "expected node,community"))?;
        by_label.insert(rec[0].to_string(), c);
    }
    let assignment: Option<Vec<usize>> = net.graph.labels().iter().map(|l| by_label.get(l).copied()).collect();
    let assignment = assignment.ok_or_else(|| corrupt(stage, a::CORPUS_PARTITION, "does not cover the network"))?;
    Ok(Partition::from_assignment(&assignment))
}

fn read_subtopics(dir: &Path) -> StageResult<Vec<Subtopic>> {
    let text = read_artifact(Stage::Topics, dir, a::SUBTOPICS)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str::<SubtopicRecord>(l)
                .map(Subtopic::from)
                .map_err(|e| corrupt(Stage::Topics, a::SUBTOPICS, e))
        })
        .collect()
}

fn read_topics(stage: Stage, dir: &Path) -> StageResult<Vec<Topic>> {
    let text = read_artifact(stage, dir, a::TOPICS)?;
    serde_json::from_str(&text).map_err(|e| corrupt(stage, a::TOPICS, e))
}

fn read_coverage(cfg: &PipelineConfig, dir: &Path) -> StageResult<CoverageMatrix> {
    let r = open_artifact(Stage::Dynamics, dir, a::COVERAGE)?;
    CoverageMatrix::read_csv(r, cfg.topic_granularity, cfg.anchor, cfg.coverage_threshold)
        .map_err(|e| corrupt(Stage::Dynamics, a::COVERAGE, e))
}

fn write_graph_exports(stage: Stage, dir: &Path, base: [&str; 2], g: &WeightedGraph, attrs: &[crate::graph::export::NodeAttribute]) -> StageResult<()> {
    write_atomic(stage, &dir.join(base[0]), |w| Ok(write_graphml(g, attrs, w)?))?;
    write_atomic(stage, &dir.join(base[1]), |w| Ok(write_dot(g, attrs, w)?))
}

/// Facts a stage reports for the run manifest.
pub type Summary = BTreeMap<&'static str, Value>;

// ---------------------------------------------------------------------------
// Stages

pub fn stage_ingest(cfg: &PipelineConfig, dir: &Path) -> StageResult<Summary> {
    let stage = Stage::Ingest;
    let opts = LoadOptions {
        format: cfg.input_format()?,
        strict: cfg.strict,
        drop_duplicate_text: cfg.drop_duplicate_text,
    };
    let report = ingest::load_documents(&cfg.input, &opts).map_err(|e| PipelineError::input(stage, e))?;
    if report.documents.is_empty() {
        return Err(PipelineError::input(stage, "archive holds no usable documents"));
    }
    write_atomic(stage, &dir.join(a::DOCUMENTS), |w| Ok(ingest::write_jsonl(&report.documents, w)?))?;
    let buckets = cfg.corpus_buckets(&report.documents);
    let in_range = buckets.iter().map(|b| b.documents.len()).sum::<usize>();
    let skipped: Vec<Value> = report.skipped.iter().map(|s| json!({"line": s.line, "reason": s.reason})).collect();
    let summary_json = json!({
        "rows_read": report.rows_read(),
        "documents": report.documents.len(),
        "documents_in_range": in_range,
        "duplicates_dropped": report.duplicates_dropped,
        "skipped": skipped,
    });
    write_json(stage, &dir.join(a::INGEST_REPORT), &summary_json)?;
    write_atomic(stage, &dir.join(a::BUCKETS), |w| Ok(ingest::write_bucket_listing(&buckets, w)?))?;
    Ok(Summary::from([
        ("documents", json!(report.documents.len())),
        ("skipped_rows", json!(report.skipped.len())),
        ("corpus_buckets", json!(buckets.len())),
    ]))
}

pub fn stage_terms(cfg: &PipelineConfig, dir: &Path) -> StageResult<Summary> {
    let reference = ReferenceLexicon::load(&cfg.lexicon).map_err(|e| PipelineError::input(Stage::Lexicon, e))?;
    let stage = Stage::Terms;
    let docs = read_documents(stage, dir)?;
    let corpus = cfg.corpus_buckets(&docs);
    let base = lexicon::select_base_terms(&corpus, cfg.base_min_count, cfg.max_base_terms).map_err(|e| PipelineError::input(stage, e))?;
    let all = match cfg.corpus_author {
        Some(_) => PipelineConfig {
            corpus_author: None,
            ..cfg.clone()
        }
        .corpus_buckets(&docs),
        None => corpus,
    };
    let extracted = lexicon::extract_terms(&all, &reference, &cfg.term_rules()).map_err(|e| PipelineError::input(stage, e))?;
    write_atomic(stage, &dir.join(a::BASE_TERMS), |w| Ok(base.write_csv(w)?))?;
    write_atomic(stage, &dir.join(a::EXTRACTED_TERMS), |w| Ok(extracted.write_csv(w)?))?;
    Ok(Summary::from([("base_terms", json!(base.len())), ("extracted_terms", json!(extracted.len()))]))
}

pub fn stage_corpusnet_build(cfg: &PipelineConfig, dir: &Path) -> StageResult<Summary> {
    let stage = Stage::Corpusnet;
    let docs = read_documents(stage, dir)?;
    let base = read_terms(stage, dir, a::BASE_TERMS, TermKind::Base)?;
    let net = corpusnet::build_corpus_network(&cfg.corpus_buckets(&docs), &base, cfg.corpus_threshold)
        .map_err(|e| PipelineError::input(stage, e))?;
    let text = net.to_json().map_err(|e| PipelineError::internal(stage, e))?;
    write_atomic(stage, &dir.join(a::CORPUS_NETWORK), |w| Ok(writeln!(w, "{text}")?))?;
    write_graph_exports(stage, dir, [a::CORPUS_GRAPHML, a::CORPUS_DOT], &net.graph, &net.node_attributes(None))?;
    Ok(Summary::from([
        ("corpus_nodes", json!(net.node_count())),
        ("corpus_edges", json!(net.graph.edge_count())),
    ]))
}

pub fn stage_corpusnet_cluster(cfg: &PipelineConfig, dir: &Path) -> StageResult<Summary> {
    let stage = Stage::Corpusnet;
    let net = read_corpus_network(dir)?;
    let outcome = louvain_with(
        &net.graph,
        &LouvainOptions {
            seed: cfg.corpus_seed,
            ..Default::default()
        },
    )
    .map_err(|e| PipelineError::input(stage, format!("cannot cluster the corpus network: {e}")))?;
    let p = &outcome.partition;
    write_atomic(stage, &dir.join(a::CORPUS_PARTITION), |w| Ok(write_partition_csv(&net.graph, p, w)?))?;
    write_graph_exports(stage, dir, [a::CORPUS_GRAPHML, a::CORPUS_DOT], &net.graph, &net.node_attributes(Some(p)))?;
    Ok(Summary::from([
        ("corpus_modularity", json!(outcome.modularity)),
        ("corpus_communities", json!(p.community_count())),
    ]))
}

pub fn stage_corpusnet_diagnose(_cfg: &PipelineConfig, dir: &Path) -> StageResult<Summary> {
    let stage = Stage::Corpusnet;
    let net = read_corpus_network(dir)?;
    let p = read_partition(&net, dir)?;
    let d = corpusnet::diagnose(&net, &p).map_err(|e| PipelineError::internal(stage, e))?;
    write_json(stage, &dir.join(a::CORPUS_DIAGNOSTICS), &d)?;
    let text = d.render_text();
    write_atomic(stage, &dir.join(a::CORPUS_DIAGNOSTICS_TXT), |w| Ok(w.write_all(text.as_bytes())?))?;
    Ok(Summary::from([
        ("contiguous_communities", json!(d.continuity.iter().filter(|c| c.contiguous).count())),
        ("fraction_adjacent", json!(d.quasi_linearity.fraction_adjacent)),
    ]))
}

pub fn stage_topics_build(cfg: &PipelineConfig, dir: &Path) -> StageResult<Summary> {
    let stage = Stage::Topics;
    let docs = read_documents(stage, dir)?;
    let terms = read_terms(stage, dir, a::EXTRACTED_TERMS, TermKind::Extracted)?;
    let mut subtopics = Vec::new();
    let mut listing = csv::Writer::from_writer(Vec::new());
    let row = |l: &mut csv::Writer<Vec<u8>>, r: [String; 5]| l.write_record(r).map_err(|e| PipelineError::internal(stage, e));
    row(&mut listing, ["author", "window_start", "terms", "edges", "subtopics"].map(String::from))?;
    let mut networks = 0;
    for b in cfg.topic_buckets(&docs).iter().filter(|b| !b.is_empty()) {
        let net = topicnet::build_semantic_network(b, &terms);
        if net.is_trivial() {
            continue;
        }
        networks += 1;
        let subs = topicnet::extract_subtopics(&net, cfg.subtopic_seed);
        row(
            &mut listing,
            [
                net.candidate.clone(),
                net.window.start.to_string(),
                net.graph.node_count().to_string(),
                net.graph.edge_count().to_string(),
                subs.len().to_string(),
            ],
        )?;
        subtopics.extend(subs);
    }
    let listing = listing.into_inner().map_err(|e| PipelineError::internal(stage, e))?;
    write_atomic(stage, &dir.join(a::SEMANTIC_NETWORKS), |w| Ok(w.write_all(&listing)?))?;
    write_atomic(stage, &dir.join(a::SUBTOPICS), |w| {
        for s in &subtopics {
            serde_json::to_writer(&mut *w, &SubtopicRecord::from(s))?;
            writeln!(w)?;
        }
        Ok(())
    })?;
    Ok(Summary::from([("semantic_networks", json!(networks)), ("subtopics", json!(subtopics.len()))]))
}

pub fn stage_topics_merge(cfg: &PipelineConfig, dir: &Path) -> StageResult<Summary> {
    let stage = Stage::Topics;
    let subtopics = read_subtopics(dir)?;
    let net = topicnet::build_subtopic_network(&subtopics, cfg.min_jaccard).map_err(|e| PipelineError::internal(stage, e))?;
    let opts = MergeOptions {
        seed: cfg.topic_seed,
        keep_isolated: cfg.keep_isolated,
    };
    let topics = topicnet::merge_topics(&net, &subtopics, &opts).map_err(|e| PipelineError::internal(stage, e))?;
    write_json(stage, &dir.join(a::TOPICS), &topics)?;
    let text = topicnet::render_topics(&topics, cfg.top_k);
    write_atomic(stage, &dir.join(a::TOPICS_TXT), |w| Ok(w.write_all(text.as_bytes())?))?;
    Ok(Summary::from([("topic_count", json!(topics.len()))]))
}

pub fn stage_dynamics_coverage(cfg: &PipelineConfig, dir: &Path) -> StageResult<Summary> {
    let stage = Stage::Dynamics;
    let docs = read_documents(stage, dir)?;
    let topics = read_topics(stage, dir)?;
    let m = CoverageMatrix::build(&cfg.topic_buckets(&docs), &topics, cfg.coverage_threshold)
        .map_err(|e| PipelineError::input(stage, e))?;
    write_atomic(stage, &dir.join(a::COVERAGE), |w| Ok(m.write_csv(w)?))?;
    Ok(Summary::from([("covered_cells", json!(m.covered_count()))]))
}

pub fn stage_dynamics_events(cfg: &PipelineConfig, dir: &Path) -> StageResult<Summary> {
    let stage = Stage::Dynamics;
    let events = dynamics::detect_follow_events(&read_coverage(cfg, dir)?);
    write_atomic(stage, &dir.join(a::EVENTS), |w| Ok(dynamics::write_events_csv(&events, w)?))?;
    Ok(Summary::from([("events", json!(events.len()))]))
}

pub fn stage_dynamics_scores(cfg: &PipelineConfig, dir: &Path) -> StageResult<Summary> {
    let stage = Stage::Dynamics;
    let coverage = read_coverage(cfg, dir)?;
    let events = dynamics::read_events_csv(open_artifact(stage, dir, a::EVENTS)?, cfg.topic_granularity)
        .map_err(|e| corrupt(stage, a::EVENTS, e))?;
    let g = dynamics::follower_network(&events);
    write_json(stage, &dir.join(a::FOLLOWER_NETWORK), &g.to_record())?;
    write_graph_exports(stage, dir, [a::FOLLOWER_GRAPHML, a::FOLLOWER_DOT], &g, &[])?;
    let scores = dynamics::scores(&events, &coverage.candidates, cfg.span_counting);
    write_atomic(stage, &dir.join(a::SCORES), |w| Ok(dynamics::write_scores_csv(&scores, w)?))?;
    let rows = dynamics::sensitivity(&coverage, &cfg.sensitivity_thresholds, cfg.span_counting);
    write_atomic(stage, &dir.join(a::SENSITIVITY), |w| Ok(dynamics::write_sensitivity_csv(&rows, w)?))?;
    let leader = scores.iter().max_by(|a, b| a.leadership.cmp(&b.leadership).then(b.candidate.cmp(&a.candidate)));
    Ok(Summary::from([
        ("follower_edges", json!(g.edge_count())),
        ("top_leader", json!(leader.map(|s| &s.candidate))),
    ]))
}

type StageFn = fn(&PipelineConfig, &Path) -> StageResult<Summary>;

/// All stages of a full run, in order.
pub const STAGES: [(&str, StageFn); 10] = [
    ("ingest", stage_ingest),
    ("terms", stage_terms),
    ("corpusnet build", stage_corpusnet_build),
    ("corpusnet cluster", stage_corpusnet_cluster),
    ("corpusnet diagnose", stage_corpusnet_diagnose),
    ("topics build", stage_topics_build),
    ("topics merge", stage_topics_merge),
    ("dynamics coverage", stage_dynamics_coverage),
    ("dynamics events", stage_dynamics_events),
    ("dynamics scores", stage_dynamics_scores),
];

fn file_digest(path: &Path) -> Option<String> {
    fs::read(path).ok().map(|b| hex::encode(Sha256::digest(b)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub config: Value,
    pub inputs: BTreeMap<String, Value>,
    pub status: String,
    pub failed_stage: Option<Stage>,
    pub error: Option<String>,
    pub completed: Vec<String>,
    pub summary: BTreeMap<String, Value>,
}

impl Manifest {
    fn new(cfg: &PipelineConfig) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            config: cfg.hashed_view(),
            inputs: [("input", &cfg.input), ("lexicon", &cfg.lexicon)]
                .into_iter()
                .map(|(k, p)| (k.to_string(), json!({"path": p, "sha256": file_digest(p)})))
                .collect(),
            status: "running".into(),
            failed_stage: None,
            error: None,
            completed: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, Box<dyn std::error::Error>> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

/// Runs every stage into `output_root/<config hash>`. On failure the
/// artifacts produced so far stay, `STATUS` names the failed stage and the
/// manifest records it.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutcome, (PipelineError, Option<PathBuf>)> {
    run_pipeline_in(cfg, &cfg.run_dir())
}

/// [`run_pipeline`] into an explicit directory.
pub fn run_pipeline_in(cfg: &PipelineConfig, dir: &Path) -> Result<RunOutcome, (PipelineError, Option<PathBuf>)> {
    cfg.validate().map_err(|e| (e, None))?;
    let dir = dir.to_path_buf();
    fs::create_dir_all(&dir).map_err(|e| (PipelineError::input(Stage::Config, format!("{}: {e}", dir.display())), None))?;
    let mut manifest = Manifest::new(cfg);
    let _ = fs::remove_file(dir.join(a::STATUS));
    let mut failure = None;
    for (name, run) in STAGES {
        log::info!("stage {name}");
        match run(cfg, &dir) {
            Ok(summary) => {
                manifest.completed.push(name.to_string());
                manifest.summary.extend(summary.into_iter().map(|(k, v)| (k.to_string(), v)));
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let status = match &failure {
        None => {
            manifest.status = "complete".into();
            "complete\n".to_string()
        }
        Some(e) => {
            manifest.status = "failed".into();
            manifest.failed_stage = Some(e.stage);
            manifest.error = Some(e.message.clone());
            format!("failed stage={}\n{}\n", e.stage, e.message)
        }
    };
    let written = write_json(Stage::Report, &dir.join(a::MANIFEST), &manifest)
        .and_then(|_| write_atomic(Stage::Report, &dir.join(a::STATUS), |w| Ok(w.write_all(status.as_bytes())?)));
    match (failure, written) {
        (Some(e), _) | (None, Err(e)) => Err((e, Some(dir))),
        (None, Ok(())) => Ok(RunOutcome { dir, manifest }),
    }
}

/// Runs one named stage of [`STAGES`] into `dir` and folds it into the
/// directory's manifest.
pub fn run_stage(cfg: &PipelineConfig, dir: &Path, name: &str) -> StageResult<Summary> {
    cfg.validate()?;
    let (_, run) = STAGES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| PipelineError::internal(Stage::Config, format!("no stage `{name}`")))?;
    fs::create_dir_all(dir).map_err(|e| config_error(format!("{}: {e}", dir.display())))?;
    let path = dir.join(a::MANIFEST);
    let mut manifest = match Manifest::load(&path) {
        Ok(m) if m.config_hash == cfg.hash() => m,
        _ => Manifest::new(cfg),
    };
    let summary = run(cfg, dir)?;
    manifest.summary.extend(summary.iter().map(|(k, v)| (k.to_string(), v.clone())));
    manifest.completed.push(name.to_string());
    manifest.completed = STAGES
        .iter()
        .map(|(n, _)| n.to_string())
        .filter(|n| manifest.completed.contains(n))
        .collect();
    manifest.failed_stage = None;
    manifest.error = None;
    manifest.status = if manifest.completed.len() == STAGES.len() { "complete" } else { "partial" }.into();
    write_json(Stage::Report, &path, &manifest)?;
    let status = format!("{}\n", manifest.status);
    write_atomic(Stage::Report, &dir.join(a::STATUS), |w| Ok(w.write_all(status.as_bytes())?))?;
    Ok(summary)
}

/// Reads a graph record artifact.
pub fn read_graph_record(path: &Path) -> Result<WeightedGraph, Box<dyn std::error::Error>> {
    let rec: GraphRecord = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(WeightedGraph::from_record(&rec)?)
}

/// Modularity of the stored corpus partition.
pub fn stored_corpus_modularity(dir: &Path) -> StageResult<f64> {
    let net = read_corpus_network(dir)?;
    let p = read_partition(&net, dir)?;
    modularity(&net.graph, &p).map_err(|e| PipelineError::internal(Stage::Corpusnet, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = PipelineConfig::from_json(r#"{"input":"a.csv","lexicon":"l.csv","treshold":0.5}"#).unwrap_err();
        assert_eq!(err.stage, Stage::Config);
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let c = PipelineConfig::from_json(r#"{"input":"a.csv","lexicon":"l.csv"}"#).unwrap();
        assert_eq!(c.corpus_threshold, 0.6);
        assert_eq!(c.coverage_threshold, 0.5);
        assert_eq!(c.min_jaccard, 0.1);
        assert_eq!(c.sensitivity_thresholds, [0.3, 0.5, 0.7]);
        c.validate().unwrap();
    }

    #[test]
    fn out_of_range_thresholds_rejected() {
        let base = PipelineConfig {
            input: "a.csv".into(),
            lexicon: "l.csv".into(),
            ..Default::default()
        };
        for bad in [
            PipelineConfig { corpus_threshold: 1.5, ..base.clone() },
            PipelineConfig { corpus_threshold: 0.0, ..base.clone() },
            PipelineConfig { min_jaccard: 0.0, ..base.clone() },
            PipelineConfig { coverage_threshold: -2.0, ..base.clone() },
            PipelineConfig { sensitivity_thresholds: vec![f64::NAN], ..base.clone() },
            PipelineConfig { max_base_terms: 1, ..base.clone() },
            PipelineConfig { input: PathBuf::new(), ..base.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn hash_ignores_output_root_only() {
        let a = PipelineConfig {
            input: "a.csv".into(),
            lexicon: "l.csv".into(),
            ..Default::default()
        };
        let b = PipelineConfig {
            output_root: "elsewhere".into(),
            ..a.clone()
        };
        let c = PipelineConfig { corpus_seed: 7, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn format_inferred_from_extension() {
        let c = PipelineConfig {
            input: "x.jsonl".into(),
            ..Default::default()
        };
        assert_eq!(c.input_format().unwrap(), ArchiveFormat::Jsonl);
        let c = PipelineConfig {
            input: "x.txt".into(),
            ..Default::default()
        };
        assert!(c.input_format().is_err());
    }

    #[test]
    fn stage_names() {
        assert_eq!(Stage::Lexicon.to_string(), "lexicon");
        assert_eq!(Stage::Corpusnet.to_string(), "corpusnet");
    }
}
