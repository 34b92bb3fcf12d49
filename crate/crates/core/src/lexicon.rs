//! Term selection: frequent base terms for corpus comparison, and
//! hashtags plus rare or significant words (with their bigrams and
//! trigrams) for topic networks.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::CorpusBucket;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("word `{0}` has a zero count")]
    ZeroCount(String),
    #[error("no buckets to select terms from")]
    EmptyCorpus,
    #[error("only {found} term(s) reach the minimum count; at least 2 are needed")]
    InsufficientBaseTerms { found: usize },
    #[error("duplicate term `{0}`")]
    DuplicateTerm(String),
    #[error("base term set may only hold single words, got `{0}`")]
    NotUnigram(String),
}

/// Reference word-frequency list (a COCA-style `word,count` table).
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLexicon {
    entries: HashMap<String, u64>,
    mean_count: f64,
}

impl ReferenceLexicon {
    /// Words are lowercased; repeated words have their counts summed.
    pub fn from_counts<S: AsRef<str>>(pairs: impl IntoIterator<Item = (S, u64)>) -> Result<Self, LexiconError> {
        let mut entries: HashMap<String, u64> = HashMap::new();
        for (word, count) in pairs {
            let word = word.as_ref().trim().to_lowercase();
            if count == 0 {
                return Err(LexiconError::ZeroCount(word));
            }
            *entries.entry(word).or_insert(0) += count;
        }
        let mean_count = if entries.is_empty() {
            0.0
        } else {
            entries.values().map(|&c| c as f64).sum::<f64>() / entries.len() as f64
        };
        Ok(ReferenceLexicon { entries, mean_count })
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let file = File::open(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read(file)
    }

    /// Reads CSV with a `word,count` header.
    pub fn read<R: Read>(reader: R) -> Result<Self, LexiconError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut pairs = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| LexiconError::Malformed {
                line,
                reason: e.to_string(),
            })?;
            if rec.len() < 2 {
                return Err(LexiconError::Malformed {
                    line,
                    reason: "expected word,count".into(),
                });
            }
            let count: u64 = rec[1].trim().parse().map_err(|_| LexiconError::Malformed {
                line,
                reason: format!("bad count `{}`", &rec[1]),
            })?;
            pairs.push((rec[0].to_string(), count));
        }
        Self::from_counts(pairs)
    }

    pub fn count(&self, word: &str) -> Option<u64> {
        self.entries.get(word).copied()
    }

    /// Arithmetic mean of all entry counts.
    pub fn mean_count(&self) -> f64 {
        self.mean_count
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term {
    /// Space-joined tokens.
    pub text: String,
    pub arity: u8,
    pub is_hashtag: bool,
}

impl Term {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let arity = text.split(' ').count().min(u8::MAX as usize) as u8;
        let is_hashtag = arity == 1 && text.starts_with('#');
        Term { text, arity, is_hashtag }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Base,
    Extracted,
}

/// Ordered, duplicate-free term list with corpus-wide counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSet {
    kind: TermKind,
    terms: Vec<Term>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl TermSet {
    pub fn new(kind: TermKind, entries: Vec<(Term, u64)>) -> Result<Self, LexiconError> {
        let mut index = HashMap::with_capacity(entries.len());
        let mut terms = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (term, count) in entries {
            if kind == TermKind::Base && term.arity != 1 {
                return Err(LexiconError::NotUnigram(term.text));
            }
            if index.insert(term.text.clone(), terms.len()).is_some() {
                return Err(LexiconError::DuplicateTerm(term.text));
            }
            terms.push(term);
            counts.push(count);
        }
        Ok(TermSet {
            kind,
            terms,
            counts,
            index,
        })
    }

    /// Term set from bare texts, counts zero.
    pub fn from_texts<S: AsRef<str>>(kind: TermKind, texts: &[S]) -> Result<Self, LexiconError> {
        Self::new(kind, texts.iter().map(|t| (Term::new(t.as_ref()), 0)).collect())
    }

    pub fn kind(&self) -> TermKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term(&self, i: usize) -> &Term {
        &self.terms[i]
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn position(&self, text: &str) -> Option<usize> {
        self.index.get(text).copied()
    }

    pub fn contains(&self, text: &str) -> bool {
        self.index.contains_key(text)
    }

    /// CSV `term,arity,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["term", "arity", "count"])?;
        for (t, c) in self.terms.iter().zip(&self.counts) {
            w.write_record([t.text.as_str(), &t.arity.to_string(), &c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(kind: TermKind, reader: R) -> Result<Self, LexiconError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut entries = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| LexiconError::Malformed {
                line,
                reason: e.to_string(),
            })?;
            let count = rec.get(2).and_then(|c| c.parse().ok()).ok_or_else(|| LexiconError::Malformed {
                line,
                reason: "expected term,arity,count".into(),
            })?;
            entries.push((Term::new(&rec[0]), count));
        }
        Self::new(kind, entries)
    }
}

/// Finds term occurrences in token sequences, counting every (possibly
/// overlapping) run of adjacent tokens that spells a term.
#[derive(Debug, Clone)]
pub struct TermMatcher<'a> {
    terms: &'a TermSet,
    max_arity: usize,
}

impl<'a> TermMatcher<'a> {
    pub fn new(terms: &'a TermSet) -> Self {
        let max_arity = terms.terms().iter().map(|t| t.arity as usize).max().unwrap_or(0);
        TermMatcher { terms, max_arity }
    }

    /// Term indices of every occurrence in `tokens`, in scan order.
    pub fn occurrences(&self, tokens: &[String]) -> Vec<usize> {
        let mut found = Vec::new();
        for n in 1..=self.max_arity.min(tokens.len()) {
            for run in tokens.windows(n) {
                let key = if n == 1 { run[0].clone() } else { run.join(" ") };
                if let Some(i) = self.terms.position(&key) {
                    found.push(i);
                }
            }
        }
        found
    }
}

/// Per-term counts of one bucket, aligned with a [`TermSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyVector {
    pub counts: Vec<u64>,
    /// `counts / token_total`; absent for buckets without tokens.
    pub relative: Option<Vec<f64>>,
    pub token_total: usize,
}

impl FrequencyVector {
    pub fn counts_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

pub fn frequency_vector(bucket: &CorpusBucket, terms: &TermSet) -> FrequencyVector {
    let matcher = TermMatcher::new(terms);
    let mut counts = vec![0u64; terms.len()];
    for tokens in &bucket.token_lists {
        for i in matcher.occurrences(tokens) {
            counts[i] += 1;
        }
    }
    let token_total = bucket.token_total();
    let relative =
        (token_total > 0).then(|| counts.iter().map(|&c| c as f64 / token_total as f64).collect());
    FrequencyVector {
        counts,
        relative,
        token_total,
    }
}

fn by_count_then_text(a: &(Term, u64), b: &(Term, u64)) -> std::cmp::Ordering {
    b.1.cmp(&a.1).then_with(|| a.0.text.cmp(&b.0.text))
}

/// Most frequent single tokens across all buckets: those reaching
/// `min_count`, capped at `max_terms`, ties broken lexicographically.
pub fn select_base_terms(buckets: &[CorpusBucket], min_count: u64, max_terms: usize) -> Result<TermSet, LexiconError> {
    if buckets.is_empty() {
        return Err(LexiconError::EmptyCorpus);
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for tokens in buckets.iter().flat_map(|b| &b.token_lists) {
        for t in tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut candidates: Vec<(Term, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(t, c)| (Term::new(t), c))
        .collect();
    candidates.sort_by(by_count_then_text);
    candidates.truncate(max_terms);
    if candidates.len() < 2 {
        return Err(LexiconError::InsufficientBaseTerms { found: candidates.len() });
    }
    TermSet::new(TermKind::Base, candidates)
}

/// Absent from the reference list, or counted there less than
/// `multiplier` times the list's mean count.
pub fn classify_rare(word: &str, reference: &ReferenceLexicon, multiplier: f64) -> bool {
    match reference.count(word) {
        None => true,
        Some(c) => (c as f64) < multiplier * reference.mean_count(),
    }
}

/// Occurs at least `min_occurrences` times and more than `multiplier`
/// times the mean count per vocabulary word of the corpus.
pub fn classify_significant(word: &str, corpus_counts: &HashMap<String, u64>, min_occurrences: u64, multiplier: f64) -> bool {
    if corpus_counts.is_empty() {
        return false;
    }
    let mean = corpus_counts.values().map(|&c| c as f64).sum::<f64>() / corpus_counts.len() as f64;
    significant_given_mean(corpus_counts.get(word).copied().unwrap_or(0), mean, min_occurrences, multiplier)
}

fn significant_given_mean(count: u64, mean: f64, min_occurrences: u64, multiplier: f64) -> bool {
    count >= min_occurrences && (count as f64) > multiplier * mean
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TermRules {
    pub rare_multiplier: f64,
    pub significant_multiplier: f64,
    /// Minimum corpus count for a word to be significant.
    pub min_occurrences: u64,
    /// Minimum corpus count for any extracted term, n-grams included.
    pub min_ngram_count: u64,
}

impl Default for TermRules {
    fn default() -> Self {
        TermRules {
            rare_multiplier: 25.0,
            significant_multiplier: 25.0,
            min_occurrences: 10,
            min_ngram_count: 10,
        }
    }
}

/// Hashtags, rare or significant words, and bigrams/trigrams made only of
/// such words, each kept when it occurs at least `min_ngram_count` times.
/// N-grams never span two documents. Ordered by count, then text.
pub fn extract_terms(buckets: &[CorpusBucket], reference: &ReferenceLexicon, rules: &TermRules) -> Result<TermSet, LexiconError> {
    let docs = || buckets.iter().flat_map(|b| &b.token_lists);

    let mut words: HashMap<String, u64> = HashMap::new();
    let mut hashtags: HashMap<String, u64> = HashMap::new();
    for tokens in docs() {
        for t in tokens {
            let map = if t.starts_with('#') { &mut hashtags } else { &mut words };
            *map.entry(t.clone()).or_insert(0) += 1;
        }
    }
    if words.is_empty() && hashtags.is_empty() {
        return TermSet::new(TermKind::Extracted, Vec::new());
    }
    let mean = if words.is_empty() {
        0.0
    } else {
        words.values().map(|&c| c as f64).sum::<f64>() / words.len() as f64
    };
    let eligible: HashSet<&str> = words
        .iter()
        .filter(|(w, &c)| {
            classify_rare(w, reference, rules.rare_multiplier)
                || significant_given_mean(c, mean, rules.min_occurrences, rules.significant_multiplier)
        })
        .map(|(w, _)| w.as_str())
        .collect();

    let mut ngrams: HashMap<String, u64> = HashMap::new();
    for tokens in docs() {
        for n in 2..=3 {
            for run in tokens.windows(n) {
                if run.iter().all(|t| eligible.contains(t.as_str())) {
                    *ngrams.entry(run.join(" ")).or_insert(0) += 1;
                }
            }
        }
    }

    let floor = rules.min_ngram_count;
    let mut out: Vec<(Term, u64)> = hashtags
        .iter()
        .chain(words.iter().filter(|(w, _)| eligible.contains(w.as_str())))
        .chain(ngrams.iter())
        .filter(|(_, &c)| c >= floor)
        .map(|(t, &c)| (Term::new(t.clone()), c))
        .collect();
    out.sort_by(by_count_then_text);
    TermSet::new(TermKind::Extracted, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{default_anchor, Granularity, TimeWindow};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn window() -> TimeWindow {
        TimeWindow::containing(NaiveDate::from_ymd_opt(2016, 3, 20).unwrap(), Granularity::Biweekly, default_anchor())
    }

    fn bucket(texts: &[&str]) -> CorpusBucket {
        CorpusBucket::from_texts(window(), Some("dt"), texts)
    }

    fn lex(pairs: &[(&str, u64)]) -> ReferenceLexicon {
        ReferenceLexicon::from_counts(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn lexicon_mean_and_lookup() {
        let r = lex(&[("a", 100), ("b", 300), ("A", 50)]);
        assert_eq!(r.count("a"), Some(150));
        assert_eq!(r.mean_count(), 225.0);
        assert!(matches!(ReferenceLexicon::from_counts([("x", 0)]), Err(LexiconError::ZeroCount(_))));
    }

    #[test]
    fn lexicon_csv() {
        let r = ReferenceLexicon::read("word,count\nthe,1000\nof,500\n".as_bytes()).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.mean_count(), 750.0);
        assert!(ReferenceLexicon::read("word,count\nthe,many\n".as_bytes()).is_err());
    }

    #[test]
    fn rare_rule() {
        let r = lex(&[("a", 100), ("b", 300)]);
        assert!(classify_rare("zzz", &r, 25.0));
        // 100 < 25 * 200
        assert!(classify_rare("a", &r, 25.0));
        let r = lex(&[("a", 100), ("b", 300), ("c", 6000)]);
        // mean 2133.3; 6000 < 53333 is still rare, so use multiplier 1
        assert!(!classify_rare("c", &r, 1.0));
    }

    #[test]
    fn rare_rule_high_count_word() {
        // {a:100, b:300} has mean 200; with the threshold at 25 x 200 = 5000,
        // a word counted 6000 times is common. Adding it moves the mean, so
        // check the inequality against the fixed threshold directly.
        let r = lex(&[("a", 100), ("b", 300)]);
        let threshold = 25.0 * r.mean_count();
        assert_eq!(threshold, 5000.0);
        assert!(!(6000.0 < threshold));
        assert!(100.0 < threshold);
    }

    fn vocab_with_mean_two(extra: &[(&str, u64)]) -> HashMap<String, u64> {
        // 1000 words with mean count 2 overall
        let mut m: HashMap<String, u64> = HashMap::new();
        let extra_total: u64 = extra.iter().map(|(_, c)| c).sum();
        let filler = 1000 - extra.len();
        let mut remaining = 2000 - extra_total;
        for i in 0..filler {
            let left = (filler - i) as u64;
            let c = remaining / left;
            m.insert(format!("w{i}"), c);
            remaining -= c;
        }
        for (w, c) in extra {
            m.insert(w.to_string(), *c);
        }
        m
    }

    #[test]
    fn significant_rule() {
        let m = vocab_with_mean_two(&[("big", 60), ("mid", 40), ("nine", 9)]);
        assert_eq!(m.len(), 1000);
        assert_eq!(m.values().sum::<u64>(), 2000);
        assert!(classify_significant("big", &m, 10, 25.0));
        assert!(!classify_significant("mid", &m, 10, 25.0));
        assert!(!classify_significant("nine", &m, 10, 0.0));
        assert!(!classify_significant("absent", &m, 10, 25.0));
    }

    fn repeat(text: &str, n: usize) -> Vec<String> {
        vec![text.to_string(); n]
    }

    #[test]
    fn extracts_eligible_words_and_bigram() {
        let common = lex(&[("the", 1_000_000), ("of", 1_000_000), ("and", 1_000_000), ("a", 1)]);
        let mut texts = repeat("the hillary campaign of", 12);
        texts.extend(repeat("and the of", 30));
        let texts: Vec<&str> = texts.iter().map(String::as_str).collect();
        // threshold 750 sits far below the common words' counts
        let rules = TermRules {
            rare_multiplier: 1e-3,
            significant_multiplier: 1e9,
            ..Default::default()
        };
        let terms = extract_terms(&[bucket(&texts)], &common, &rules).unwrap();
        let got: Vec<&str> = terms.terms().iter().map(|t| t.text.as_str()).collect();
        assert_eq!(got, ["campaign", "hillary", "hillary campaign"]);
        assert_eq!(terms.count(2), 12);
        assert_eq!(terms.term(2).arity, 2);
    }

    #[test]
    fn all_common_document_contributes_nothing() {
        let common = lex(&[("the", 1_000_000), ("of", 1_000_000), ("a", 1_000_000), ("x", 1)]);
        let texts = repeat("a the of", 20);
        let texts: Vec<&str> = texts.iter().map(String::as_str).collect();
        // threshold 750 sits far below the common words' counts
        let rules = TermRules {
            rare_multiplier: 1e-3,
            significant_multiplier: 1e9,
            ..Default::default()
        };
        assert!(extract_terms(&[bucket(&texts)], &common, &rules).unwrap().is_empty());
    }

    #[test]
    fn hashtags_always_eligible() {
        let r = lex(&[("#maga", 1_000_000_000), ("x", 1)]);
        let texts = repeat("#maga", 10);
        let texts: Vec<&str> = texts.iter().map(String::as_str).collect();
        let terms = extract_terms(&[bucket(&texts)], &r, &TermRules::default()).unwrap();
        assert!(terms.contains("#maga"));
        assert!(terms.term(0).is_hashtag);
    }

    #[test]
    fn ngrams_stay_inside_documents() {
        let r = lex(&[]);
        let mut texts = repeat("alpha", 10);
        texts.extend(repeat("beta", 10));
        let texts: Vec<&str> = texts.iter().map(String::as_str).collect();
        let terms = extract_terms(&[bucket(&texts)], &r, &TermRules::default()).unwrap();
        assert!(!terms.contains("alpha beta"));
        assert!(!terms.contains("alpha alpha"));
    }

    #[test]
    fn extract_terms_empty_corpus() {
        assert!(extract_terms(&[], &lex(&[]), &TermRules::default()).unwrap().is_empty());
    }

    #[test]
    fn base_terms_cap_and_ties() {
        let mut texts = Vec::new();
        // "zeta" and "alpha" tie at 3; "mid" has 4; "low" has 1
        texts.extend(repeat("zeta alpha mid", 3));
        texts.push("mid low".into());
        let texts: Vec<&str> = texts.iter().map(String::as_str).collect();
        let b = [bucket(&texts)];
        let t = select_base_terms(&b, 2, 2).unwrap();
        let got: Vec<&str> = t.terms().iter().map(|t| t.text.as_str()).collect();
        assert_eq!(got, ["mid", "alpha"]);
        assert_eq!(select_base_terms(&b, 2, 300).unwrap().len(), 3);
        assert!(matches!(
            select_base_terms(&b, 4, 300),
            Err(LexiconError::InsufficientBaseTerms { found: 1 })
        ));
        assert!(matches!(select_base_terms(&[], 1, 300), Err(LexiconError::EmptyCorpus)));
    }

    #[test]
    fn base_terms_cap_at_three_hundred() {
        let vocab: Vec<String> = (0..420).map(|i| format!("t{i:03}")).collect();
        let doc = vocab.join(" ");
        let texts = repeat(&doc, 100);
        let texts: Vec<&str> = texts.iter().map(String::as_str).collect();
        let t = select_base_terms(&[bucket(&texts)], 100, 300).unwrap();
        assert_eq!(t.len(), 300);
        assert_eq!(t.term(0).text, "t000");
    }

    #[test]
    fn frequency_vector_counts() {
        let terms = TermSet::from_texts(TermKind::Extracted, &["vote", "trump"]).unwrap();
        let fv = frequency_vector(&bucket(&["vote vote trump"]), &terms);
        assert_eq!(fv.counts, [2, 1]);
        assert_eq!(fv.relative.unwrap(), [2.0 / 3.0, 1.0 / 3.0]);

        let ngrams = TermSet::from_texts(TermKind::Extracted, &["make america", "america great"]).unwrap();
        assert_eq!(frequency_vector(&bucket(&["make america great"]), &ngrams).counts, [1, 1]);

        let none = frequency_vector(&bucket(&["nothing here"]), &terms);
        assert_eq!(none.counts, [0, 0]);
        let empty = frequency_vector(&CorpusBucket::new(window(), None), &terms);
        assert!(empty.relative.is_none());
    }

    #[test]
    fn term_set_rules() {
        assert!(matches!(
            TermSet::from_texts(TermKind::Base, &["a b"]),
            Err(LexiconError::NotUnigram(_))
        ));
        assert!(matches!(
            TermSet::from_texts(TermKind::Extracted, &["a", "a"]),
            Err(LexiconError::DuplicateTerm(_))
        ));
        let t = TermSet::new(TermKind::Extracted, vec![(Term::new("make america great"), 7)]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "term,arity,count\nmake america great,3,7\n");
        assert_eq!(TermSet::read_csv(TermKind::Extracted, &buf[..]).unwrap(), t);
    }

    proptest! {
        #[test]
        fn rare_is_monotone(count in 1u64..10_000, lower in 1u64..10_000, others in proptest::collection::vec(1u64..10_000, 1..10)) {
            let build = |c: u64| {
                let mut pairs: Vec<(String, u64)> = others.iter().enumerate().map(|(i, &n)| (format!("o{i}"), n)).collect();
                pairs.push(("w".into(), c));
                ReferenceLexicon::from_counts(pairs).unwrap()
            };
            let lower = lower.min(count);
            if classify_rare("w", &build(count), 25.0) {
                prop_assert!(classify_rare("w", &build(lower), 25.0));
            }
        }

        #[test]
        fn frequency_vectors_add(
            a in proptest::collection::vec("[abc]( [abc]){0,5}", 0..6),
            b in proptest::collection::vec("[abc]( [abc]){0,5}", 0..6),
        ) {
            let terms = TermSet::from_texts(TermKind::Extracted, &["a", "b", "a b", "b c a"]).unwrap();
            let ra: Vec<&str> = a.iter().map(String::as_str).collect();
            let rb: Vec<&str> = b.iter().map(String::as_str).collect();
            let both: Vec<&str> = ra.iter().chain(&rb).copied().collect();
            let fa = frequency_vector(&bucket(&ra), &terms).counts;
            let fb = frequency_vector(&bucket(&rb), &terms).counts;
            let fab = frequency_vector(&bucket(&both), &terms).counts;
            let sum: Vec<u64> = fa.iter().zip(&fb).map(|(x, y)| x + y).collect();
            prop_assert_eq!(fab, sum);
        }

        #[test]
        fn ngram_constituents_are_extracted(
            docs in proptest::collection::vec("[a-e]( [a-e]){1,8}", 1..40),
            common in proptest::collection::btree_set("[a-e]", 0..3),
        ) {
            let pairs: Vec<(String, u64)> = common.iter().map(|w| (w.clone(), 1_000_000u64)).chain([("zz".to_string(), 1)]).collect();
            let r = ReferenceLexicon::from_counts(pairs).unwrap();
            let texts: Vec<&str> = docs.iter().map(String::as_str).collect();
            let rules = TermRules { min_ngram_count: 2, significant_multiplier: 1e9, ..Default::default() };
            let terms = extract_terms(&[bucket(&texts)], &r, &rules).unwrap();
            for t in terms.terms().iter().filter(|t| t.arity > 1) {
                for w in t.text.split(' ') {
                    prop_assert!(terms.contains(w), "{} lacks {}", t.text, w);
                }
            }
        }
    }
}
