//! Synthetic corpora with planted vocabulary regimes and leader/follower
//! topic adoptions.

use chrono::{Duration, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{default_anchor, AuthorId, Document, Granularity, TimeWindow};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("spec is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> SynthError {
    SynthError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regime {
    pub start_window: usize,
    pub vocabulary: Vec<String>,
}

/// The leader talks about `topic_vocab` from `onset_window`, the follower
/// `lag_windows` later; each keeps at it for `duration_windows`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantFollow {
    pub leader: AuthorId,
    pub follower: AuthorId,
    pub topic_vocab: Vec<String>,
    pub onset_window: usize,
    pub lag_windows: usize,
    #[serde(default = "one")]
    pub duration_windows: usize,
}

fn one() -> usize {
    1
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date")
}

fn default_docs() -> usize {
    50
}

fn default_lengths() -> [usize; 2] {
    [8, 30]
}

fn default_topic_share() -> f64 {
    0.3
}

fn default_filler() -> usize {
    200
}

fn default_zipf() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub candidates: Vec<AuthorId>,
    pub windows: usize,
    #[serde(default)]
    pub granularity: Granularity,
    /// Any date inside the first window.
    #[serde(default = "default_start")]
    pub start: NaiveDate,
    pub regimes: Vec<Regime>,
    #[serde(default)]
    pub plant_follow: Vec<PlantFollow>,
    pub noise_rate: f64,
    pub seed: u64,
    /// Per candidate and window.
    #[serde(default = "default_docs")]
    pub docs_per_window: usize,
    /// Inclusive token-count range.
    #[serde(default = "default_lengths")]
    pub doc_length: [usize; 2],
    /// Share of a candidate's documents given to active planted topics.
    #[serde(default = "default_topic_share")]
    pub topic_doc_share: f64,
    #[serde(default = "default_filler")]
    pub filler_vocabulary: usize,
    #[serde(default = "default_zipf")]
    pub zipf_exponent: f64,
    /// Height of a bump that sweeps across each regime's vocabulary over the
    /// regime's lifetime; 0 keeps regimes stationary.
    #[serde(default)]
    pub drift: f64,
}

impl SynthSpec {
    pub fn from_json(s: &str) -> Result<Self, SynthError> {
        let spec: SynthSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.candidates.is_empty() {
            return Err(invalid("candidates", "must not be empty"));
        }
        for (i, c) in self.candidates.iter().enumerate() {
            if c.is_empty() || c.chars().any(char::is_whitespace) {
                return Err(invalid(format!("candidates[{i}]"), "must be a non-empty token"));
            }
            if self.candidates[..i].contains(c) {
                return Err(invalid(format!("candidates[{i}]"), format!("duplicate `{c}`")));
            }
        }
        if self.windows == 0 {
            return Err(invalid("windows", "must be at least 1"));
        }
        if self.regimes.is_empty() {
            return Err(invalid("regimes", "must not be empty"));
        }
        if self.regimes[0].start_window != 0 {
            return Err(invalid("regimes[0].start_window", "first regime must start at window 0"));
        }
        for (i, r) in self.regimes.iter().enumerate() {
            if i > 0 && r.start_window <= self.regimes[i - 1].start_window {
                return Err(invalid(format!("regimes[{i}].start_window"), "starts must be strictly increasing"));
            }
            if r.start_window >= self.windows {
                return Err(invalid(format!("regimes[{i}].start_window"), "beyond the last window"));
            }
            if r.vocabulary.is_empty() {
                return Err(invalid(format!("regimes[{i}].vocabulary"), "must not be empty"));
            }
        }
        for (i, p) in self.plant_follow.iter().enumerate() {
            let f = |name: &str| format!("plant_follow[{i}].{name}");
            for (name, who) in [("leader", &p.leader), ("follower", &p.follower)] {
                if !self.candidates.contains(who) {
                    return Err(invalid(f(name), format!("unknown candidate `{who}`")));
                }
            }
            if p.leader == p.follower {
                return Err(invalid(f("follower"), "must differ from the leader"));
            }
            if p.topic_vocab.is_empty() {
                return Err(invalid(f("topic_vocab"), "must not be empty"));
            }
            if p.lag_windows < 1 {
                return Err(invalid(f("lag_windows"), "must be at least 1"));
            }
            if p.duration_windows < 1 {
                return Err(invalid(f("duration_windows"), "must be at least 1"));
            }
            if p.onset_window + p.lag_windows >= self.windows {
                return Err(invalid(f("onset_window"), "follower onset falls after the last window"));
            }
        }
        if !(0.0..0.5).contains(&self.noise_rate) {
            return Err(invalid("noise_rate", "must lie in [0, 0.5)"));
        }
        if self.noise_rate > 0.0 && self.filler_vocabulary == 0 {
            return Err(invalid("filler_vocabulary", "noise needs at least one filler word"));
        }
        if self.docs_per_window == 0 {
            return Err(invalid("docs_per_window", "must be at least 1"));
        }
        if self.doc_length[0] == 0 || self.doc_length[0] > self.doc_length[1] {
            return Err(invalid("doc_length", "need 1 <= min <= max"));
        }
        if !(0.0..=1.0).contains(&self.topic_doc_share) {
            return Err(invalid("topic_doc_share", "must lie in [0, 1]"));
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0) {
            return Err(invalid("zipf_exponent", "must be finite and non-negative"));
        }
        if !(self.drift.is_finite() && self.drift >= 0.0) {
            return Err(invalid("drift", "must be finite and non-negative"));
        }
        Ok(())
    }

    /// Window `i` of the generated timeline.
    pub fn window(&self, i: usize) -> TimeWindow {
        let anchor = default_anchor();
        let mut w = TimeWindow::containing(self.start, self.granularity, anchor);
        for _ in 0..i {
            w = w.next();
        }
        w
    }

    fn regime_at(&self, w: usize) -> usize {
        self.regimes.iter().rposition(|r| r.start_window <= w).expect("first regime starts at 0")
    }

    fn regime_len(&self, r: usize) -> usize {
        self.regimes.get(r + 1).map_or(self.windows, |n| n.start_window) - self.regimes[r].start_window
    }

    fn zipf(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 + 1.0).powf(-self.zipf_exponent)).collect()
    }

    /// Word weights of the regime active in window `w`.
    pub fn regime_weights(&self, w: usize) -> Vec<f64> {
        let r = self.regime_at(w);
        let k = self.regimes[r].vocabulary.len();
        let len = self.regime_len(r);
        let progress = if len > 1 {
            (w - self.regimes[r].start_window) as f64 / (len - 1) as f64
        } else {
            0.0
        };
        let center = progress * (k - 1) as f64;
        let sigma = (k as f64 / 6.0).max(1.0);
        self.zipf(k)
            .into_iter()
            .enumerate()
            .map(|(i, z)| z * (1.0 + self.drift * (-(i as f64 - center).powi(2) / (2.0 * sigma * sigma)).exp()))
            .collect()
    }

    /// Planted topics the candidate talks about in window `w`.
    pub fn active_plants(&self, candidate: &str, w: usize) -> Vec<usize> {
        self.plant_follow
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let from = if p.leader == candidate {
                    Some(p.onset_window)
                } else if p.follower == candidate {
                    Some(p.onset_window + p.lag_windows)
                } else {
                    None
                };
                from.is_some_and(|s| s <= w && w < s + p.duration_windows)
            })
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn filler_word(i: usize) -> String {
    format!("filler{i:03}")
}

struct Sampler<'a> {
    words: &'a [String],
    index: WeightedIndex<f64>,
}

impl<'a> Sampler<'a> {
    fn new(words: &'a [String], weights: &[f64]) -> Self {
        Sampler {
            words,
            index: WeightedIndex::new(weights).expect("positive weights"),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> &'a str {
        &self.words[self.index.sample(rng)]
    }
}

/// Documents ordered by timestamp, then id. Each candidate draws from its
/// own random stream, so adding a candidate leaves the others unchanged.
pub fn generate(spec: &SynthSpec) -> Result<Vec<Document>, SynthError> {
    spec.validate()?;
    let filler: Vec<String> = (0..spec.filler_vocabulary).map(filler_word).collect();
    let plant_samplers: Vec<Sampler> = spec
        .plant_follow
        .iter()
        .map(|p| Sampler::new(&p.topic_vocab, &spec.zipf(p.topic_vocab.len())))
        .collect();
    let mut docs = Vec::new();
    for (ci, candidate) in spec.candidates.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(ci as u64);
        for w in 0..spec.windows {
            let window = spec.window(w);
            let regime = &spec.regimes[spec.regime_at(w)];
            let background = Sampler::new(&regime.vocabulary, &spec.regime_weights(w));
            let plants = spec.active_plants(candidate, w);
            let span_secs = (window.end - window.start).num_seconds();
            for k in 0..spec.docs_per_window {
                let source = if !plants.is_empty() && rng.random::<f64>() < spec.topic_doc_share {
                    &plant_samplers[plants[rng.random_range(0..plants.len())]]
                } else {
                    &background
                };
                let len = rng.random_range(spec.doc_length[0]..=spec.doc_length[1]);
                let words: Vec<&str> = (0..len)
                    .map(|_| {
                        if spec.noise_rate > 0.0 && rng.random::<f64>() < spec.noise_rate {
                            filler[rng.random_range(0..filler.len())].as_str()
                        } else {
                            source.draw(&mut rng)
                        }
                    })
                    .collect();
                let offset = Duration::seconds(rng.random_range(0..span_secs));
                docs.push(Document {
                    id: format!("{candidate}-{w:03}-{k:04}"),
                    author: candidate.clone(),
                    timestamp: window.start.and_hms_opt(0, 0, 0).expect("midnight").and_utc() + offset,
                    text: words.join(" "),
                });
            }
        }
    }
    docs.sort_by(|a, b| (a.timestamp, &a.id).cmp(&(b.timestamp, &b.id)));
    Ok(docs)
}

fn vocabulary(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i:02}")).collect()
}

/// Monthly corpus whose vocabulary switches between two disjoint regimes
/// halfway through, with a slow drift inside each regime.
pub fn regime_change_spec(seed: u64, windows: usize, noise_rate: f64) -> SynthSpec {
    SynthSpec {
        candidates: vec!["alpha".into(), "beta".into()],
        windows,
        granularity: Granularity::Monthly,
        start: default_start(),
        regimes: vec![
            Regime {
                start_window: 0,
                vocabulary: vocabulary("early", 40),
            },
            Regime {
                start_window: windows / 2,
                vocabulary: vocabulary("late", 40),
            },
        ],
        plant_follow: vec![],
        noise_rate,
        seed,
        docs_per_window: default_docs(),
        doc_length: default_lengths(),
        topic_doc_share: default_topic_share(),
        filler_vocabulary: default_filler(),
        zipf_exponent: default_zipf(),
        drift: 3.0,
    }
}

/// Biweekly corpus where `leader` introduces three unrelated topics, each
/// picked up by `follower` one window later.
pub fn leader_follower_spec(seed: u64) -> SynthSpec {
    let plant = |name: &str, onset| PlantFollow {
        leader: "leader".into(),
        follower: "follower".into(),
        topic_vocab: vocabulary(name, 6),
        onset_window: onset,
        lag_windows: 1,
        duration_windows: 2,
    };
    SynthSpec {
        candidates: vec!["follower".into(), "leader".into()],
        windows: 12,
        granularity: Granularity::Biweekly,
        start: default_anchor(),
        regimes: vec![Regime {
            start_window: 0,
            vocabulary: vocabulary("common", 30),
        }],
        plant_follow: vec![plant("border", 1), plant("economy", 4), plant("health", 7)],
        noise_rate: 0.05,
        seed,
        // enough text that background topics keep a steady correlation
        docs_per_window: 200,
        doc_length: default_lengths(),
        topic_doc_share: default_topic_share(),
        filler_vocabulary: default_filler(),
        zipf_exponent: default_zipf(),
        drift: 0.0,
    }
}
