use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use topicflow::corpusnet::Diagnostics;
use chrono::NaiveDate;
use topicflow::ingest::{self, Granularity, TimeWindow};
use topicflow::pipeline::{self, artifacts, FailureKind, PipelineConfig, Stage, STAGES};
use topicflow::report::{self, build_report, ReportError, ReportFormat};
use topicflow::synth::{self, SynthSpec};
use topicflow::topicnet::{build_subtopic_network, merge_topics, MergeOptions, Subtopic};

fn lexicon() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/reference_lexicon.csv")
}

fn write_corpus(dir: &Path, spec: &SynthSpec) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    let docs = synth::generate(spec).unwrap();
    ingest::write_jsonl(&docs, fs::File::create(&path).unwrap()).unwrap();
    path
}

fn config(input: PathBuf, root: &Path) -> PipelineConfig {
    PipelineConfig {
        input,
        lexicon: lexicon(),
        output_root: root.to_path_buf(),
        ..Default::default()
    }
}

fn assert_same_files(a: &Path, b: &Path) {
    let (fa, fb) = (files(a), files(b));
    let names = |m: &BTreeMap<String, Vec<u8>>| m.keys().cloned().collect::<Vec<_>>();
    assert_eq!(names(&fa), names(&fb));
    let differing: Vec<&String> = fa.keys().filter(|k| fa[*k] != fb[*k]).collect();
    assert!(differing.is_empty(), "contents differ: {differing:?}");
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect()
}

#[test]
fn regime_corpus_gives_two_contiguous_clusters() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_corpus(tmp.path(), &synth::regime_change_spec(21, 24, 0.05));
    let run = pipeline::run_pipeline(&config(input, tmp.path())).unwrap();
    let diag: Diagnostics = serde_json::from_slice(&fs::read(run.dir.join(artifacts::CORPUS_DIAGNOSTICS)).unwrap()).unwrap();
    assert_eq!(diag.community_count, 2);
    assert!(diag.continuity.iter().all(|c| c.contiguous));
    assert_eq!(diag.continuity[0].first, "2015-01");
    assert_eq!(diag.continuity[1].last, "2016-12");
    assert!(diag.quasi_linearity.fraction_adjacent.unwrap() >= 0.75);

    let m = &run.manifest;
    assert_eq!(m.status, "complete");
    assert_eq!(m.completed.len(), STAGES.len());
    assert!(m.summary["topic_count"].as_u64().unwrap() >= 1);
    assert!((m.summary["corpus_modularity"].as_f64().unwrap() - diag.modularity).abs() < 1e-12);
    for key in ["corpus_seed", "subtopic_seed", "topic_seed", "corpus_threshold", "min_jaccard", "coverage_threshold", "sensitivity_thresholds"] {
        assert!(m.config.get(key).is_some(), "manifest misses {key}");
    }
    assert!(m.config.get("output_root").is_none());
    assert_eq!(fs::read_to_string(run.dir.join(artifacts::STATUS)).unwrap(), "complete\n");
}

#[test]
fn stages_run_one_at_a_time_match_a_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_corpus(tmp.path(), &synth::regime_change_spec(4, 12, 0.05));
    let cfg = config(input, &tmp.path().join("full"));
    let full = pipeline::run_pipeline(&cfg).unwrap();
    let staged = tmp.path().join("staged");
    for (name, _) in STAGES {
        pipeline::run_stage(&cfg, &staged, name).unwrap();
    }
    assert_same_files(&full.dir, &staged);

    // rerunning a middle stage changes nothing
    let snapshot = tmp.path().join("snapshot");
    fs::create_dir(&snapshot).unwrap();
    for (name, bytes) in files(&staged) {
        fs::write(snapshot.join(name), bytes).unwrap();
    }
    pipeline::run_stage(&cfg, &staged, "topics merge").unwrap();
    assert_same_files(&snapshot, &staged);
}

#[test]
fn stage_without_its_inputs_names_the_missing_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path().join("unused.jsonl"), tmp.path());
    let err = pipeline::run_stage(&cfg, &tmp.path().join("empty"), "corpusnet build").unwrap_err();
    assert_eq!(err.stage, Stage::Corpusnet);
    assert!(err.message.contains(artifacts::DOCUMENTS), "{}", err.message);
}

#[test]
fn missing_lexicon_fails_at_lexicon_stage_and_keeps_partial_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_corpus(tmp.path(), &synth::regime_change_spec(1, 6, 0.0));
    let cfg = PipelineConfig {
        lexicon: tmp.path().join("no_such_lexicon.csv"),
        ..config(input, tmp.path())
    };
    let (err, dir) = pipeline::run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Lexicon);
    assert_eq!(err.kind, FailureKind::Input);
    assert_eq!(err.exit_code(), 2);
    let dir = dir.unwrap();
    assert!(dir.join(artifacts::DOCUMENTS).is_file());
    assert!(!dir.join(artifacts::BASE_TERMS).exists());
    assert!(fs::read_to_string(dir.join(artifacts::STATUS)).unwrap().starts_with("failed stage=lexicon"));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.join(artifacts::MANIFEST)).unwrap()).unwrap();
    assert_eq!(manifest["failed_stage"], "lexicon");
    assert_eq!(manifest["completed"], serde_json::json!(["ingest"]));
}

#[test]
fn report_ranks_planted_leader_first_and_handles_empty_events() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_corpus(tmp.path(), &synth::leader_follower_spec(2));
    let cfg = PipelineConfig {
        corpus_granularity: Granularity::Biweekly,
        topic_granularity: Granularity::Biweekly,
        ..config(input, tmp.path())
    };
    let run = pipeline::run_pipeline(&cfg).unwrap();
    let r = build_report(&run.dir, 5).unwrap();
    assert_eq!(r.scoreboard[0].candidate, "leader");
    assert!(r.scoreboard[0].leadership > 0);
    assert_eq!((r.follow_edges[0].follower.as_str(), r.follow_edges[0].leader.as_str()), ("follower", "leader"));
    let planted: BTreeSet<&str> = ["border00", "economy00", "health00"].into();
    let leading: BTreeSet<&str> = r.topics.iter().map(|t| t.top_terms[0].as_str()).collect();
    assert!(planted.is_subset(&leading), "{leading:?}");
    let text = report::report(&run.dir, ReportFormat::Text, 5).unwrap();
    assert!(text.contains("cluster timeline") && text.contains("scoreboard"));

    // no events: every score is zero and rendering still works
    fs::write(run.dir.join(artifacts::EVENTS), "window_start,topic,follower,leaders\n").unwrap();
    pipeline::run_stage(&cfg, &run.dir, "dynamics scores").unwrap();
    let r = build_report(&run.dir, 5).unwrap();
    assert!(r.follow_edges.is_empty());
    assert_eq!(r.scoreboard.len(), 2);
    assert!(r.scoreboard.iter().all(|s| s.leadership == 0 && s.engagement == 0));
    assert!(report::report(&run.dir, ReportFormat::Text, 5).unwrap().contains("none"));
    let json: serde_json::Value = serde_json::from_str(&report::report(&run.dir, ReportFormat::Json, 5).unwrap()).unwrap();
    assert_eq!(json["scoreboard"][0]["engagement"], 0);
}

fn subtopic(candidate: &str, day: u32, counts: &[(&str, u64)]) -> Subtopic {
    let date = NaiveDate::from_ymd_opt(2015, 8, day).unwrap();
    Subtopic {
        candidate: candidate.into(),
        window: TimeWindow::containing(date, Granularity::Biweekly, ingest::default_anchor()),
        index: 0,
        term_counts: counts.iter().map(|&(t, c)| (t.to_string(), c)).collect(),
    }
}

#[test]
fn report_lists_topic_terms_by_weight() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_corpus(tmp.path(), &synth::regime_change_spec(8, 8, 0.0));
    let run = pipeline::run_pipeline(&config(input, tmp.path())).unwrap();

    // hillary 5+4, campaign 3+3, trump 2+3, vote 1
    let subs = vec![
        subtopic("Clinton", 2, &[("hillary", 5), ("campaign", 3), ("trump", 2), ("vote", 1)]),
        subtopic("Sanders", 16, &[("hillary", 4), ("campaign", 3), ("trump", 3)]),
        subtopic("Trump", 30, &[("wall", 6), ("border", 5)]),
        subtopic("Rubio", 30, &[("wall", 2), ("border", 4)]),
    ];
    let net = build_subtopic_network(&subs, 0.1).unwrap();
    let topics = merge_topics(&net, &subs, &MergeOptions::default()).unwrap();
    fs::write(run.dir.join(artifacts::TOPICS), serde_json::to_string(&topics).unwrap()).unwrap();

    let r = build_report(&run.dir, 3).unwrap();
    assert_eq!(r.topics[0].top_terms, ["hillary", "campaign", "trump"]);
    let text = report::report(&run.dir, ReportFormat::Text, 3).unwrap();
    assert!(text.contains("1. hillary; campaign; trump\n"), "{text}");
}

#[test]
fn report_on_incomplete_directory_lists_what_is_missing() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join(artifacts::TOPICS), "[]").unwrap();
    match build_report(tmp.path(), 5) {
        Err(ReportError::Incomplete(missing)) => {
            assert_eq!(missing, [artifacts::CORPUS_DIAGNOSTICS, artifacts::FOLLOWER_NETWORK, artifacts::SCORES]);
        }
        other => panic!("expected incomplete, got {other:?}"),
    }
}
