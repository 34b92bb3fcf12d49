//! Temporal corpus networks, recurring topics and leader/follower
//! dynamics from timestamped short-text corpora.
//!
//! The pipeline runs `ingest` → `lexicon` → `corpusnet` → `topicnet` →
//! `dynamics`; `synth` produces corpora with planted structure and
//! `pipeline` wires everything to an artifact directory.

pub mod corpusnet;
pub mod dynamics;
pub mod graph;
pub mod ingest;
pub mod lexicon;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod topicnet;
