//! Loading, tokenizing and time-bucketing of document archives.
//!
//! Archives are local CSV (`id,author,timestamp,text`) or JSONL files with
//! the same four keys. Documents are grouped into calendar-month or
//! 14-day windows, optionally split per author.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Author key, e.g. a candidate handle.
pub type AuthorId = String;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("missing CSV column `{0}`")]
    MissingColumn(&'static str),
    #[error("unknown {what} `{value}`")]
    UnknownVariant { what: &'static str, value: String },
}

/// One timestamped, author-attributed text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub author: AuthorId,
    pub timestamp: DateTime<Utc>,
    pub text: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    #[default]
    Monthly,
    Biweekly,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Monthly => "monthly",
            Granularity::Biweekly => "biweekly",
        })
    }
}

impl FromStr for Granularity {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "monthly" => Ok(Granularity::Monthly),
            "biweekly" => Ok(Granularity::Biweekly),
            _ => Err(IngestError::UnknownVariant {
                what: "granularity",
                value: s.to_string(),
            }),
        }
    }
}

/// Default biweekly anchor: Sunday 2015-01-04.
pub fn default_anchor() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 4).expect("valid date")
}

/// Half-open date span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub granularity: Granularity,
}

impl TimeWindow {
    /// The window of the given granularity containing `date`. Biweekly
    /// windows are aligned on `anchor`, extending in both directions.
    pub fn containing(date: NaiveDate, granularity: Granularity, anchor: NaiveDate) -> Self {
        match granularity {
            Granularity::Monthly => {
                let start = date.with_day(1).expect("day 1 exists");
                TimeWindow {
                    start,
                    end: add_month(start),
                    granularity,
                }
            }
            Granularity::Biweekly => {
                let offset = (date - anchor).num_days().div_euclid(14);
                let start = anchor + Duration::days(offset * 14);
                TimeWindow {
                    start,
                    end: start + Duration::days(14),
                    granularity,
                }
            }
        }
    }

    pub fn next(&self) -> Self {
        match self.granularity {
            Granularity::Monthly => TimeWindow {
                start: self.end,
                end: add_month(self.end),
                granularity: self.granularity,
            },
            Granularity::Biweekly => TimeWindow {
                start: self.end,
                end: self.end + Duration::days(14),
                granularity: self.granularity,
            },
        }
    }

    pub fn contains(&self, ts: &DateTime<Utc>) -> bool {
        let d = ts.date_naive();
        self.start <= d && d < self.end
    }

    /// `YYYY-MM` for monthly windows, `YYYY-MM-DD` (the start) for biweekly.
    pub fn label(&self) -> String {
        match self.granularity {
            Granularity::Monthly => self.start.format("%Y-%m").to_string(),
            Granularity::Biweekly => self.start.format("%Y-%m-%d").to_string(),
        }
    }

    /// Position on an absolute grid of this granularity; consecutive windows
    /// differ by exactly one.
    pub fn grid_index(&self) -> i64 {
        match self.granularity {
            Granularity::Monthly => self.start.year() as i64 * 12 + self.start.month0() as i64,
            Granularity::Biweekly => {
                (self.start - NaiveDate::from_ymd_opt(1970, 1, 4).unwrap()).num_days().div_euclid(14)
            }
        }
    }
}

fn add_month(first_of_month: NaiveDate) -> NaiveDate {
    let (y, m) = if first_of_month.month() == 12 {
        (first_of_month.year() + 1, 1)
    } else {
        (first_of_month.year(), first_of_month.month() + 1)
    };
    NaiveDate::from_ymd_opt(y, m, 1).expect("valid month start")
}

// ---------------------------------------------------------------------------
// Loading

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchiveFormat {
    Csv,
    Jsonl,
}

impl FromStr for ArchiveFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ArchiveFormat::Csv),
            "jsonl" => Ok(ArchiveFormat::Jsonl),
            _ => Err(IngestError::UnknownVariant {
                what: "format",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub format: ArchiveFormat,
    /// Fail on the first malformed row instead of skipping it.
    pub strict: bool,
    /// Keep only the first of several documents with identical text.
    pub drop_duplicate_text: bool,
}

impl LoadOptions {
    pub fn new(format: ArchiveFormat) -> Self {
        LoadOptions {
            format,
            strict: false,
            drop_duplicate_text: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub documents: Vec<Document>,
    pub skipped: Vec<SkippedRow>,
    pub duplicates_dropped: usize,
}

impl LoadReport {
    pub fn rows_read(&self) -> usize {
        self.documents.len() + self.skipped.len() + self.duplicates_dropped
    }
}

pub fn load_documents(path: &Path, options: &LoadOptions) -> Result<LoadReport, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_documents(file, options).map_err(|e| match e {
        IngestError::Io { source, .. } => IngestError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

pub fn read_documents<R: Read>(reader: R, options: &LoadOptions) -> Result<LoadReport, IngestError> {
    let mut sink = RowSink::new(options);
    match options.format {
        ArchiveFormat::Jsonl => read_jsonl(reader, &mut sink)?,
        ArchiveFormat::Csv => read_csv(reader, &mut sink)?,
    }
    Ok(sink.report)
}

struct RowSink<'a> {
    options: &'a LoadOptions,
    seen_ids: HashSet<String>,
    seen_texts: HashSet<String>,
    report: LoadReport,
}

impl<'a> RowSink<'a> {
    fn new(options: &'a LoadOptions) -> Self {
        RowSink {
            options,
            seen_ids: HashSet::new(),
            seen_texts: HashSet::new(),
            report: LoadReport::default(),
        }
    }

    fn bad_row(&mut self, line: usize, reason: String) -> Result<(), IngestError> {
        if self.options.strict {
            return Err(IngestError::Malformed { line, reason });
        }
        log::warn!("skipping line {line}: {reason}");
        self.report.skipped.push(SkippedRow { line, reason });
        Ok(())
    }

    fn row(&mut self, line: usize, id: String, author: String, timestamp: &str, text: String) -> Result<(), IngestError> {
        if id.is_empty() {
            return self.bad_row(line, "empty id".into());
        }
        if author.is_empty() {
            return self.bad_row(line, "empty author".into());
        }
        let timestamp = match parse_timestamp(timestamp) {
            Some(ts) => ts,
            None => return self.bad_row(line, format!("unparseable timestamp `{timestamp}`")),
        };
        if self.seen_ids.contains(&id) {
            return self.bad_row(line, format!("duplicate id `{id}`"));
        }
        if self.options.drop_duplicate_text && !self.seen_texts.insert(text.clone()) {
            self.report.duplicates_dropped += 1;
            return Ok(());
        }
        self.seen_ids.insert(id.clone());
        self.report.documents.push(Document {
            id,
            author,
            timestamp,
            text,
        });
        Ok(())
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    id: serde_json::Value,
    author: String,
    timestamp: String,
    text: String,
}

fn read_jsonl<R: Read>(reader: R, sink: &mut RowSink<'_>) -> Result<(), IngestError> {
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: String::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                sink.bad_row(line_no, e.to_string())?;
                continue;
            }
        };
        let id = match record.id {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => {
                sink.bad_row(line_no, format!("id must be a string or number, got {other}"))?;
                continue;
            }
        };
        sink.row(line_no, id, record.author, &record.timestamp, record.text)?;
    }
    Ok(())
}

fn read_csv<R: Read>(reader: R, sink: &mut RowSink<'_>) -> Result<(), IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Malformed {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    if headers.is_empty() {
        return Ok(());
    }
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.trim().trim_start_matches('\u{feff}') == name)
            .ok_or(IngestError::MissingColumn(name))
    };
    let (id_col, author_col, ts_col, text_col) = (col("id")?, col("author")?, col("timestamp")?, col("text")?);
    for result in rdr.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                sink.bad_row(line, e.to_string())?;
                continue;
            }
        };
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != headers.len() {
            sink.bad_row(line, format!("expected {} fields, found {}", headers.len(), record.len()))?;
            continue;
        }
        sink.row(
            line,
            record[id_col].to_string(),
            record[author_col].to_string(),
            &record[ts_col],
            record[text_col].to_string(),
        )?;
    }
    Ok(())
}

/// Parses ISO-8601 / RFC 3339 timestamps (offset-less values are taken as
/// UTC), bare dates, and the classic Twitter `created_at` layout. The
/// result is truncated to whole seconds.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    let parsed = DateTime::parse_from_rfc3339(raw)
        .map(|dt| dt.with_timezone(&Utc))
        .ok()
        .or_else(|| DateTime::parse_from_str(raw, "%a %b %d %H:%M:%S %z %Y").ok().map(|dt| dt.with_timezone(&Utc)))
        .or_else(|| {
            ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
                .iter()
                .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
                .map(|n| n.and_utc())
        })
        .or_else(|| {
            NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .ok()
                .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc())
        })?;
    parsed.with_nanosecond(0)
}

/// Writes documents in the JSONL archive layout.
pub fn write_jsonl<W: Write>(documents: &[Document], mut out: W) -> std::io::Result<()> {
    for doc in documents {
        let line = serde_json::json!({
            "id": doc.id,
            "author": doc.author,
            "timestamp": doc.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            "text": doc.text,
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tokenizing

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerOptions {
    /// Emit `@mention` tokens.
    pub keep_mentions: bool,
}

impl Default for TokenizerOptions {
    fn default() -> Self {
        TokenizerOptions { keep_mentions: true }
    }
}

fn url_pattern() -> &'static Regex {
    static URL: OnceLock<Regex> = OnceLock::new();
    URL.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S*").expect("valid regex"))
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn is_tag_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Lowercased tokens; hashtags keep their `#`, URLs are removed, and
/// apostrophes or hyphens survive only between two word characters.
pub fn tokenize(text: &str, options: &TokenizerOptions) -> Vec<String> {
    let lowered = url_pattern().replace_all(text, " ").to_lowercase();
    let chars: Vec<char> = lowered
        .chars()
        .map(|c| match c {
            '\u{2019}' | '\u{2018}' | '\u{02bc}' => '\'',
            '\u{2010}' | '\u{2011}' => '-',
            other => other,
        })
        .collect();

    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if (c == '#' || c == '@') && chars.get(i + 1).is_some_and(|&n| is_tag_char(n)) {
            let start = i;
            i += 1;
            while i < chars.len() && is_tag_char(chars[i]) {
                i += 1;
            }
            if c == '#' || options.keep_mentions {
                tokens.push(chars[start..i].iter().collect());
            }
        } else if is_word_char(c) {
            let start = i;
            i += 1;
            loop {
                if i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                } else if i + 1 < chars.len()
                    && (chars[i] == '\'' || chars[i] == '-')
                    && is_word_char(chars[i + 1])
                {
                    i += 2;
                } else {
                    break;
                }
            }
            tokens.push(chars[start..i].iter().collect());
        } else {
            i += 1;
        }
    }
    tokens
}

// ---------------------------------------------------------------------------
// Bucketing

/// Optional observation range; `start` inclusive, `end` exclusive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationRange {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl ObservationRange {
    pub fn contains(&self, ts: &DateTime<Utc>) -> bool {
        let d = ts.date_naive();
        self.start.is_none_or(|s| d >= s) && self.end.is_none_or(|e| d < e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BucketConfig {
    pub granularity: Granularity,
    pub anchor: NaiveDate,
    pub per_author: bool,
    pub range: ObservationRange,
}

impl BucketConfig {
    pub fn new(granularity: Granularity) -> Self {
        BucketConfig {
            granularity,
            anchor: default_anchor(),
            per_author: false,
            range: ObservationRange::default(),
        }
    }
}

/// All documents of one window, for one author or for everybody.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusBucket {
    pub window: TimeWindow,
    /// `None` stands for all authors.
    pub author: Option<AuthorId>,
    pub documents: Vec<Document>,
    pub token_lists: Vec<Vec<String>>,
}

impl CorpusBucket {
    pub fn new(window: TimeWindow, author: Option<AuthorId>) -> Self {
        CorpusBucket {
            window,
            author,
            documents: Vec::new(),
            token_lists: Vec::new(),
        }
    }

    /// Builds a bucket from raw texts; handy for fixtures.
    pub fn from_texts<S: AsRef<str>>(window: TimeWindow, author: Option<&str>, texts: &[S]) -> Self {
        let mut bucket = CorpusBucket::new(window, author.map(str::to_string));
        let opts = TokenizerOptions::default();
        for (i, t) in texts.iter().enumerate() {
            let doc = Document {
                id: format!("{}-{i}", window.label()),
                author: author.unwrap_or("all").to_string(),
                timestamp: window.start.and_hms_opt(0, 0, 0).unwrap().and_utc(),
                text: t.as_ref().to_string(),
            };
            bucket.push(doc, &opts);
        }
        bucket
    }

    pub fn push(&mut self, document: Document, options: &TokenizerOptions) {
        self.token_lists.push(tokenize(&document.text, options));
        self.documents.push(document);
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn token_total(&self) -> usize {
        self.token_lists.iter().map(Vec::len).sum()
    }

    pub fn label(&self) -> String {
        match &self.author {
            Some(a) => format!("{a}:{}", self.window.label()),
            None => self.window.label(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Bucketing {
    pub buckets: Vec<CorpusBucket>,
    /// Documents outside the observation range.
    pub excluded: usize,
}

impl Bucketing {
    pub fn empty_count(&self) -> usize {
        self.buckets.iter().filter(|b| b.is_empty()).count()
    }
}

/// Groups documents into windows. Every window between the first and last
/// one touched by the range (or by the data, when the range is open) gets
/// a bucket, empty or not; per-author bucketing repeats the grid for each
/// author. Buckets come out ordered by window start, then author.
pub fn bucket(documents: &[Document], config: &BucketConfig, tokenizer: &TokenizerOptions) -> Bucketing {
    let in_range: Vec<&Document> = documents.iter().filter(|d| config.range.contains(&d.timestamp)).collect();
    let excluded = documents.len() - in_range.len();

    let first = config
        .range
        .start
        .or_else(|| in_range.iter().map(|d| d.timestamp.date_naive()).min());
    let last = config
        .range
        .end
        .map(|e| e.pred_opt().expect("date above minimum"))
        .or_else(|| in_range.iter().map(|d| d.timestamp.date_naive()).max());
    let (Some(first), Some(last)) = (first, last) else {
        return Bucketing {
            buckets: Vec::new(),
            excluded,
        };
    };
    if last < first {
        return Bucketing {
            buckets: Vec::new(),
            excluded,
        };
    }

    let mut windows = vec![TimeWindow::containing(first, config.granularity, config.anchor)];
    while windows.last().unwrap().end <= last {
        let next = windows.last().unwrap().next();
        windows.push(next);
    }

    let authors: Vec<Option<AuthorId>> = if config.per_author {
        in_range
            .iter()
            .map(|d| d.author.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(Some)
            .collect()
    } else {
        vec![None]
    };
    let author_slot = |a: &str| -> usize {
        if config.per_author {
            authors.iter().position(|x| x.as_deref() == Some(a)).expect("author collected")
        } else {
            0
        }
    };

    let mut buckets: Vec<CorpusBucket> = windows
        .iter()
        .flat_map(|w| authors.iter().map(move |a| CorpusBucket::new(*w, a.clone())))
        .collect();
    let origin = windows[0].grid_index();
    let mut sorted = in_range;
    sorted.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
    for doc in sorted {
        let w = TimeWindow::containing(doc.timestamp.date_naive(), config.granularity, config.anchor);
        let slot = (w.grid_index() - origin) as usize * authors.len() + author_slot(&doc.author);
        buckets[slot].push(doc.clone(), tokenizer);
    }
    Bucketing { buckets, excluded }
}

/// CSV listing of buckets: `label,window_start,window_end,author,documents,tokens,empty`.
pub fn write_bucket_listing<W: Write>(buckets: &[CorpusBucket], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "window_start", "window_end", "author", "documents", "tokens", "empty"])?;
    for b in buckets {
        w.write_record([
            b.label(),
            b.window.start.to_string(),
            b.window.end.to_string(),
            b.author.clone().unwrap_or_else(|| "ALL".into()),
            b.documents.len().to_string(),
            b.token_total().to_string(),
            b.is_empty().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
