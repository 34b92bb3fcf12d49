use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use topicflow::dynamics::SpanCounting;
use topicflow::ingest::{self, ArchiveFormat, Granularity};
use topicflow::pipeline::{self, artifacts, PipelineConfig, PipelineError, Stage};
use topicflow::report::{self, ReportError, ReportFormat};
use topicflow::synth::{self, SynthSpec};
use topicflow::topicnet::{self, Topic};

#[derive(Parser)]
#[command(name = "topicflow", version, about = "Temporal corpus networks, recurring topics and leader/follower dynamics")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a corpus with planted structure.
    Synth {
        #[command(subcommand)]
        action: SynthAction,
    },
    /// Load the archive and write documents plus the bucket listing.
    Ingest(ConfigArgs),
    /// Select base terms and extract topic terms.
    Terms(ConfigArgs),
    Corpusnet {
        #[command(subcommand)]
        action: CorpusnetAction,
    },
    Topics {
        #[command(subcommand)]
        action: TopicsAction,
    },
    Dynamics {
        #[command(subcommand)]
        action: DynamicsAction,
    },
    /// Run every stage into `<output-root>/<config hash>`.
    Run(ConfigArgs),
    /// Summarize a finished artifact directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
}

#[derive(Subcommand)]
enum SynthAction {
    Generate {
        /// JSON corpus specification.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        spec: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Overrides the specification's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output JSONL archive.
        #[arg(long)]
        out: PathBuf,
        /// Also write the effective specification here.
        #[arg(long)]
        write_spec: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Two vocabulary regimes over 24 months.
    RegimeChange,
    /// One candidate picking up three topics a window after another.
    LeaderFollower,
}

#[derive(Subcommand)]
enum CorpusnetAction {
    Build(ConfigArgs),
    Cluster(ConfigArgs),
    Diagnose(ConfigArgs),
}

#[derive(Subcommand)]
enum TopicsAction {
    Build(ConfigArgs),
    Merge(ConfigArgs),
    /// Print the merged topics.
    Show {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        top: Option<usize>,
    },
}

#[derive(Subcommand)]
enum DynamicsAction {
    Coverage(ConfigArgs),
    Events(ConfigArgs),
    Scores(ConfigArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

/// Configuration sources: a manifest, a config file or the manifest found
/// in `--dir`, then flags on top.
#[derive(Args, Default)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replay the configuration recorded in a run manifest.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
    /// Artifact directory; defaults to `<output-root>/<config hash>`.
    #[arg(long)]
    dir: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_parser = parse_via::<ArchiveFormat>)]
    format: Option<ArchiveFormat>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    output_root: Option<PathBuf>,
    /// Fail on the first malformed row.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    drop_duplicate_text: bool,
    #[arg(long)]
    range_start: Option<NaiveDate>,
    #[arg(long)]
    range_end: Option<NaiveDate>,
    #[arg(long, value_parser = parse_via::<Granularity>)]
    corpus_granularity: Option<Granularity>,
    #[arg(long, value_parser = parse_via::<Granularity>)]
    topic_granularity: Option<Granularity>,
    #[arg(long)]
    anchor: Option<NaiveDate>,
    /// Drop @mentions during tokenization.
    #[arg(long)]
    no_mentions: bool,
    #[arg(long)]
    corpus_author: Option<String>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    max_base_terms: Option<usize>,
    #[arg(long)]
    rare_multiplier: Option<f64>,
    #[arg(long)]
    significant_multiplier: Option<f64>,
    #[arg(long)]
    min_occurrences: Option<u64>,
    #[arg(long)]
    min_ngram_count: Option<u64>,
    /// Corpus network edge threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Sets every Louvain seed at once.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    corpus_seed: Option<u64>,
    #[arg(long)]
    subtopic_seed: Option<u64>,
    #[arg(long)]
    topic_seed: Option<u64>,
    #[arg(long)]
    min_jaccard: Option<f64>,
    #[arg(long)]
    keep_isolated: bool,
    #[arg(long)]
    coverage_threshold: Option<f64>,
    #[arg(long, value_parser = parse_via::<SpanCounting>)]
    span_counting: Option<SpanCounting>,
    #[arg(long, value_delimiter = ',')]
    sensitivity_thresholds: Option<Vec<f64>>,
    #[arg(long)]
    top_k: Option<usize>,
}

fn parse_via<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

impl ConfigArgs {
    fn resolve(&self) -> Result<(PipelineConfig, PathBuf), PipelineError> {
        let in_dir = self.dir.as_ref().map(|d| d.join(artifacts::MANIFEST)).filter(|m| m.is_file());
        let mut c = match (&self.manifest, &self.config, in_dir) {
            (Some(m), _, _) => PipelineConfig::from_manifest(m)?,
            (None, Some(f), _) => PipelineConfig::load(f)?,
            (None, None, Some(m)) => PipelineConfig::from_manifest(&m)?,
            (None, None, None) => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),* $(,)?) => {$(
                if let Some(v) = &self.$flag {
                    c.$field = v.clone();
                }
            )*};
        }
        set!(
            input => input, lexicon => lexicon, output_root => output_root, anchor => anchor,
            corpus_granularity => corpus_granularity, topic_granularity => topic_granularity,
            min_count => base_min_count, max_base_terms => max_base_terms,
            rare_multiplier => rare_multiplier, significant_multiplier => significant_multiplier,
            min_occurrences => min_occurrences, min_ngram_count => min_ngram_count,
            threshold => corpus_threshold, min_jaccard => min_jaccard,
            coverage_threshold => coverage_threshold, span_counting => span_counting,
            sensitivity_thresholds => sensitivity_thresholds, top_k => top_k,
        );
        if let Some(f) = self.format {
            c.input_format = Some(f);
        }
        if self.range_start.is_some() {
            c.range_start = self.range_start;
        }
        if self.range_end.is_some() {
            c.range_end = self.range_end;
        }
        if self.corpus_author.is_some() {
            c.corpus_author = self.corpus_author.clone();
        }
        if let Some(s) = self.seed {
            (c.corpus_seed, c.subtopic_seed, c.topic_seed) = (s, s, s);
        }
        set!(corpus_seed => corpus_seed, subtopic_seed => subtopic_seed, topic_seed => topic_seed);
        c.strict |= self.strict;
        c.drop_duplicate_text |= self.drop_duplicate_text;
        c.keep_isolated |= self.keep_isolated;
        if self.no_mentions {
            c.keep_mentions = false;
        }
        c.validate()?;
        let dir = self.dir.clone().unwrap_or_else(|| c.run_dir());
        Ok((c, dir))
    }
}

enum Failure {
    Pipeline(PipelineError),
    Report(ReportError),
    Other { code: u8, message: String },
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

fn stage(args: &ConfigArgs, name: &str) -> Result<(), Failure> {
    let (cfg, dir) = args.resolve()?;
    let summary = pipeline::run_stage(&cfg, &dir, name)?;
    println!("{}", dir.display());
    for (k, v) in summary {
        log::info!("{k}: {v}");
    }
    Ok(())
}

fn synth_generate(spec: Option<&Path>, preset: Option<Preset>, seed: Option<u64>, out: &Path, write_spec: Option<&Path>) -> Result<(), Failure> {
    let bad = |message: String| Failure::Other { code: 2, message };
    let mut s: SynthSpec = match (spec, preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
            SynthSpec::from_json(&text).map_err(|e| bad(e.to_string()))?
        }
        (None, Some(Preset::RegimeChange)) => synth::regime_change_spec(seed.unwrap_or(0), 24, 0.05),
        (None, Some(Preset::LeaderFollower)) => synth::leader_follower_spec(seed.unwrap_or(0)),
        (None, None) => return Err(bad("either --spec or --preset is required".into())),
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let docs = synth::generate(&s).map_err(|e| bad(e.to_string()))?;
    let io = |e: std::io::Error| Failure::Other {
        code: 1,
        message: format!("writing {}: {e}", out.display()),
    };
    let mut w = std::io::BufWriter::new(fs::File::create(out).map_err(io)?);
    ingest::write_jsonl(&docs, &mut w).map_err(io)?;
    w.flush().map_err(io)?;
    if let Some(p) = write_spec {
        let text = serde_json::to_string_pretty(&s).expect("spec serializes");
        fs::write(p, text + "\n").map_err(io)?;
    }
    eprintln!("{} documents written to {}", docs.len(), out.display());
    Ok(())
}

fn show_topics(args: &ConfigArgs, top: Option<usize>) -> Result<(), Failure> {
    let (cfg, dir) = args.resolve()?;
    let path = dir.join(artifacts::TOPICS);
    let text = fs::read_to_string(&path).map_err(|e| PipelineError::input(Stage::Topics, format!("{}: {e}", path.display())))?;
    let topics: Vec<Topic> =
        serde_json::from_str(&text).map_err(|e| PipelineError::internal(Stage::Topics, format!("{}: {e}", path.display())))?;
    print!("{}", topicnet::render_topics(&topics, top.unwrap_or(cfg.top_k)));
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Synth {
            action: SynthAction::Generate { spec, preset, seed, out, write_spec },
        } => synth_generate(spec.as_deref(), preset, seed, &out, write_spec.as_deref()),
        Command::Ingest(a) => stage(&a, "ingest"),
        Command::Terms(a) => stage(&a, "terms"),
        Command::Corpusnet { action } => match action {
            CorpusnetAction::Build(a) => stage(&a, "corpusnet build"),
            CorpusnetAction::Cluster(a) => stage(&a, "corpusnet cluster"),
            CorpusnetAction::Diagnose(a) => stage(&a, "corpusnet diagnose"),
        },
        Command::Topics { action } => match action {
            TopicsAction::Build(a) => stage(&a, "topics build"),
            TopicsAction::Merge(a) => stage(&a, "topics merge"),
            TopicsAction::Show { config, top } => show_topics(&config, top),
        },
        Command::Dynamics { action } => match action {
            DynamicsAction::Coverage(a) => stage(&a, "dynamics coverage"),
            DynamicsAction::Events(a) => stage(&a, "dynamics events"),
            DynamicsAction::Scores(a) => stage(&a, "dynamics scores"),
        },
        Command::Run(a) => {
            let (cfg, dir) = a.resolve()?;
            let outcome = pipeline::run_pipeline_in(&cfg, &dir).map_err(|(e, dir)| {
                if let Some(d) = dir {
                    eprintln!("partial artifacts kept in {}", d.display());
                }
                e
            })?;
            println!("{}", outcome.dir.display());
            Ok(())
        }
        Command::Report { dir, format, top } => {
            let format = match format {
                OutputFormat::Text => ReportFormat::Text,
                OutputFormat::Json => ReportFormat::Json,
            };
            let text = report::report(&dir, format, top).map_err(Failure::Report)?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Pipeline(e)) => {
            eprintln!("error [{}]: {}", e.stage, e.message);
            ExitCode::from(e.exit_code())
        }
        Err(Failure::Report(e)) => {
            eprintln!("error [report]: {e}");
            ExitCode::from(match e {
                ReportError::Incomplete(_) => 2,
                ReportError::Corrupt { .. } => 1,
            })
        }
        Err(Failure::Other { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
