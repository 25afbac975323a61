//! Sliding-window document scoring and rank-based filtering.
//!
//! A sub-document is cut into overlapping windows of consecutive segments,
//! each window's concatenated source/target text is scored by a reference-free
//! quality estimator, and the window scores are averaged. Sub-documents are
//! then ranked by that average and the top fraction is kept.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{
    self, format_real, serialize_record, AnnotatedRecord, RecordError, SubDocument, ABSENT,
    RECORD_COLUMNS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("scorer failed at window {first_window}{}: {message}", batch_suffix(*.batch))]
    Backend {
        first_window: usize,
        batch: Option<usize>,
        retryable: bool,
        message: String,
    },
    #[error("protocol error at window {first_window}{}: expected {expected} scores, got {got}", batch_suffix(*.batch))]
    Protocol {
        first_window: usize,
        batch: Option<usize>,
        expected: usize,
        got: usize,
    },
    #[error("score {value} for window {window} is outside [0, 1]")]
    OutOfRange { window: usize, value: f64 },
    #[error("fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("invalid window config: {0}")]
    Config(String),
}

fn batch_suffix(batch: Option<usize>) -> String {
    batch.map(|b| format!(" (batch {b})")).unwrap_or_default()
}

impl ScoreError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ScoreError::Backend { retryable: true, .. })
    }

    fn shifted(self, by: usize) -> Self {
        match self {
            ScoreError::Backend {
                first_window,
                batch,
                retryable,
                message,
            } => ScoreError::Backend {
                first_window: first_window + by,
                batch,
                retryable,
                message,
            },
            ScoreError::Protocol {
                first_window,
                batch,
                expected,
                got,
            } => ScoreError::Protocol {
                first_window: first_window + by,
                batch,
                expected,
                got,
            },
            ScoreError::OutOfRange { window, value } => ScoreError::OutOfRange {
                window: window + by,
                value,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub window: usize,
    pub stride: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window: 3,
            stride: 1,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.window == 0 || self.stride == 0 {
            return Err(ScoreError::Config(format!(
                "window ({}) and stride ({}) must be positive",
                self.window, self.stride
            )));
        }
        Ok(())
    }
}

/// Reference-free translation quality estimator.
pub trait QualityScorer: Send + Sync {
    fn identifier(&self) -> &str;

    /// One score in [0, 1] per pair, in input order.
    fn score_batch(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, ScoreError>;

    /// How many pairs callers should send per `score_batch` call.
    fn preferred_batch_size(&self) -> usize {
        1024
    }
}

/// Index ranges of the windows over `n` segments. Full windows start at
/// multiples of the stride; a sequence shorter than the window gets a single
/// window over everything.
pub fn window_ranges(n: usize, cfg: &WindowConfig) -> Vec<Range<usize>> {
    if n == 0 {
        return Vec::new();
    }
    if n < cfg.window {
        return std::iter::once(0..n).collect();
    }
    (0..=n - cfg.window)
        .step_by(cfg.stride.max(1))
        .map(|i| i..i + cfg.window)
        .collect()
}

fn join_side<'a>(texts: impl Iterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for (i, t) in texts.enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

/// Window texts of a sub-document: each side's segments joined by single spaces.
pub fn windows(subdoc: &SubDocument, cfg: &WindowConfig) -> Vec<(String, String)> {
    window_ranges(subdoc.records.len(), cfg)
        .into_iter()
        .map(|r| {
            let recs = &subdoc.records[r];
            (
                join_side(recs.iter().map(|r| r.src_text.as_str())),
                join_side(recs.iter().map(|r| r.tgt_text.as_str())),
            )
        })
        .collect()
}

fn check_scores(scores: &[f64], expected: usize) -> Result<(), ScoreError> {
    if scores.len() != expected {
        return Err(ScoreError::Protocol {
            first_window: 0,
            batch: None,
            expected,
            got: scores.len(),
        });
    }
    if let Some((i, &v)) = scores
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(ScoreError::OutOfRange { window: i, value: v });
    }
    Ok(())
}

fn mean(scores: &[f64]) -> f64 {
    scores.iter().sum::<f64>() / scores.len() as f64
}

/// Document score: arithmetic mean of the window scores.
pub fn score_subdoc(
    subdoc: &SubDocument,
    scorer: &dyn QualityScorer,
    cfg: &WindowConfig,
) -> Result<f64, ScoreError> {
    cfg.validate()?;
    let wins = windows(subdoc, cfg);
    if wins.is_empty() {
        return Err(ScoreError::Config("cannot score an empty sub-document".into()));
    }
    let scores = scorer.score_batch(&wins)?;
    check_scores(&scores, wins.len())?;
    Ok(mean(&scores))
}

/// Score many sub-documents, batching windows across sub-document boundaries
/// and fanning batches out over the rayon pool. Results come back in input
/// order and equal per-document [`score_subdoc`] exactly.
pub fn score_subdocs(
    subdocs: &[SubDocument],
    scorer: &dyn QualityScorer,
    cfg: &WindowConfig,
) -> Result<Vec<f64>, ScoreError> {
    cfg.validate()?;
    let mut bounds = Vec::with_capacity(subdocs.len() + 1);
    bounds.push(0usize);
    let mut all = Vec::new();
    for sd in subdocs {
        if sd.records.is_empty() {
            return Err(ScoreError::Config(format!("sub-document {} is empty", sd.sub_doc_id)));
        }
        all.extend(windows(sd, cfg));
        bounds.push(all.len());
    }
    let batch = scorer.preferred_batch_size().max(1);
    let chunks: Vec<Result<Vec<f64>, ScoreError>> = all
        .par_chunks(batch)
        .enumerate()
        .map(|(ci, chunk)| {
            let offset = ci * batch;
            let scores = scorer.score_batch(chunk).map_err(|e| e.shifted(offset))?;
            check_scores(&scores, chunk.len()).map_err(|e| e.shifted(offset))?;
            Ok(scores)
        })
        .collect();
    let mut scores = Vec::with_capacity(all.len());
    for c in chunks {
        scores.extend(c?);
    }
    Ok(bounds.windows(2).map(|b| mean(&scores[b[0]..b[1]])).collect())
}

/// Filtering levels: keep the top 75 %, 50 % or 25 % of sub-documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cutoff {
    Loose75,
    Medium50,
    Strict25,
}

impl Cutoff {
    pub const ALL: [Cutoff; 3] = [Cutoff::Loose75, Cutoff::Medium50, Cutoff::Strict25];

    pub fn fraction(&self) -> f64 {
        match self {
            Cutoff::Loose75 => 0.75,
            Cutoff::Medium50 => 0.5,
            Cutoff::Strict25 => 0.25,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Cutoff::Loose75 => "loose75",
            Cutoff::Medium50 => "medium50",
            Cutoff::Strict25 => "strict25",
        }
    }

    fn bit(&self) -> u8 {
        match self {
            Cutoff::Loose75 => 1,
            Cutoff::Medium50 => 2,
            Cutoff::Strict25 => 4,
        }
    }
}

impl FromStr for Cutoff {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Cutoff::ALL
            .into_iter()
            .find(|c| c.tag() == s)
            .ok_or_else(|| format!("unknown cutoff {s:?} (expected loose75, medium50 or strict25)"))
    }
}

/// Set of cutoffs at which a sub-document survives. Written as a
/// comma-separated tag list, `-` when empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct KeptAt(u8);

impl KeptAt {
    pub fn none() -> Self {
        KeptAt(0)
    }

    pub fn insert(&mut self, c: Cutoff) {
        self.0 |= c.bit();
    }

    pub fn contains(&self, c: Cutoff) -> bool {
        self.0 & c.bit() != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Cutoff> + '_ {
        Cutoff::ALL.into_iter().filter(|c| self.contains(*c))
    }
}

impl fmt::Display for KeptAt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str(ABSENT);
        }
        let tags: Vec<&str> = self.iter().map(|c| c.tag()).collect();
        f.write_str(&tags.join(","))
    }
}

impl FromStr for KeptAt {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut k = KeptAt::none();
        if s == ABSENT {
            return Ok(k);
        }
        for tag in s.split(',') {
            k.insert(tag.parse()?);
        }
        if k.to_string() != s {
            return Err(format!("non-canonical cutoff list {s:?}"));
        }
        Ok(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSubDocument {
    pub sub_doc_id: String,
    pub n_segments: usize,
    pub score: f64,
    pub kept_at: KeptAt,
}

/// Indices of `scored` ordered best first: score descending, then
/// sub_doc_id ascending.
pub fn rank_order(scored: &[ScoredSubDocument]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scored.len()).collect();
    idx.sort_by(|&a, &b| {
        scored[b]
            .score
            .total_cmp(&scored[a].score)
            .then_with(|| scored[a].sub_doc_id.cmp(&scored[b].sub_doc_id))
    });
    idx
}

/// Number kept at `fraction` of `n`: `round(fraction * n)`, halves rounded up.
pub fn kept_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 + 0.5).floor() as usize).min(n)
}

/// The best `round(fraction * N)` sub-documents, in rank order.
pub fn select_top(
    scored: &[ScoredSubDocument],
    fraction: f64,
) -> Result<Vec<&ScoredSubDocument>, ScoreError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(ScoreError::InvalidFraction(fraction));
    }
    let k = kept_count(fraction, scored.len());
    Ok(rank_order(scored)
        .into_iter()
        .take(k)
        .map(|i| &scored[i])
        .collect())
}

/// Fill `kept_at` for the three standard cutoffs. Nested by construction:
/// every cutoff keeps a prefix of the same ranking.
pub fn assign_cutoffs(scored: &mut [ScoredSubDocument]) {
    let order = rank_order(scored);
    let n = scored.len();
    for s in scored.iter_mut() {
        s.kept_at = KeptAt::none();
    }
    for c in Cutoff::ALL {
        for &i in order.iter().take(kept_count(c.fraction(), n)) {
            scored[i].kept_at.insert(c);
        }
    }
}

fn trigrams(s: &str) -> Vec<u64> {
    let chars: Vec<char> = s.to_lowercase().chars().collect();
    let mut grams: Vec<u64> = chars
        .windows(3)
        .map(|w| ((w[0] as u64) << 42) | ((w[1] as u64) << 21) | w[2] as u64)
        .collect();
    grams.sort_unstable();
    grams.dedup();
    grams
}

/// Deterministic stand-in for a QE model: Jaccard overlap of the lowercased
/// character-trigram sets, `|A ∩ B| / max(1, |A ∪ B|)`.
pub fn mock_score(src: &str, tgt: &str) -> f64 {
    let a = trigrams(src);
    let b = trigrams(tgt);
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    inter as f64 / union.max(1) as f64
}

/// Backend identifier shared with the reference scoring service.
pub const MOCK_BACKEND_ID: &str = "mock-trigram-v1";

#[derive(Debug, Clone, Copy, Default)]
pub struct MockScorer;

impl QualityScorer for MockScorer {
    fn identifier(&self) -> &str {
        MOCK_BACKEND_ID
    }

    fn score_batch(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, ScoreError> {
        Ok(pairs.iter().map(|(s, t)| mock_score(s, t)).collect())
    }
}

#[derive(Serialize)]
struct WirePair<'a> {
    src: &'a str,
    tgt: &'a str,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    pairs: Vec<WirePair<'a>>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
    #[allow(dead_code)]
    #[serde(default)]
    backend: Option<String>,
}

/// Body of `GET /health`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ServiceHealth {
    pub status: String,
    #[serde(default)]
    pub backend: Option<String>,
}

impl ServiceHealth {
    pub fn is_ready(&self) -> bool {
        self.status == "ok"
    }
}

/// Maximum pairs per request accepted by the scoring service.
pub const SERVICE_MAX_BATCH: usize = 128;

/// HTTP client for a scoring service speaking
/// `POST /score {"pairs":[{"src":..,"tgt":..}]} -> {"scores":[..],"backend":".."}`.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    id: String,
    score_url: String,
    batch_size: usize,
    max_retries: usize,
    backoff: Duration,
    client: reqwest::blocking::Client,
}

impl RemoteScorer {
    pub fn new(endpoint: &str, batch_size: usize) -> Self {
        let base = endpoint.trim_end_matches('/');
        let score_url = if base.ends_with("/score") {
            base.to_string()
        } else {
            format!("{base}/score")
        };
        RemoteScorer {
            id: format!("remote:{base}"),
            score_url,
            batch_size: batch_size.clamp(1, SERVICE_MAX_BATCH),
            max_retries: 3,
            backoff: Duration::from_millis(200),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("default HTTP client"),
        }
    }

    pub fn with_retries(mut self, max_retries: usize, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    /// One `GET /health` probe. A 503 (model still loading) comes back as a
    /// retryable backend error.
    pub fn health(&self) -> Result<ServiceHealth, ScoreError> {
        let url = format!("{}/health", self.score_url.trim_end_matches("/score"));
        let fail = |message: String, retryable: bool| ScoreError::Backend {
            first_window: 0,
            batch: None,
            retryable,
            message,
        };
        let resp = self
            .client
            .get(url)
            .send()
            .map_err(|e| fail(format!("request failed: {e}"), true))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(fail(format!("HTTP {status}"), status.as_u16() == 503));
        }
        resp.json()
            .map_err(|e| fail(format!("malformed health body: {e}"), false))
    }

    fn post_batch(&self, batch_idx: usize, first_window: usize, pairs: &[(String, String)]) -> Result<Vec<f64>, ScoreError> {
        let body = ScoreRequest {
            pairs: pairs
                .iter()
                .map(|(s, t)| WirePair { src: s, tgt: t })
                .collect(),
        };
        let mut attempt = 0;
        loop {
            let fail = |message: String, retryable: bool| ScoreError::Backend {
                first_window,
                batch: Some(batch_idx),
                retryable,
                message,
            };
            let err = match self.client.post(&self.score_url).json(&body).send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let parsed: ScoreResponse = resp
                            .json()
                            .map_err(|e| fail(format!("malformed response body: {e}"), false))?;
                        if parsed.scores.len() != pairs.len() {
                            return Err(ScoreError::Protocol {
                                first_window,
                                batch: Some(batch_idx),
                                expected: pairs.len(),
                                got: parsed.scores.len(),
                            });
                        }
                        return Ok(parsed.scores);
                    }
                    let transient = status.is_server_error() || status.as_u16() == 429;
                    fail(format!("HTTP {status}"), transient)
                }
                Err(e) => fail(format!("request failed: {e}"), true),
            };
            if !err.is_retryable() || attempt >= self.max_retries {
                return Err(err);
            }
            std::thread::sleep(self.backoff * 2u32.pow(attempt as u32));
            attempt += 1;
        }
    }
}

impl QualityScorer for RemoteScorer {
    fn identifier(&self) -> &str {
        &self.id
    }

    fn score_batch(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, ScoreError> {
        let mut out = Vec::with_capacity(pairs.len());
        for (b, chunk) in pairs.chunks(self.batch_size).enumerate() {
            out.extend(self.post_batch(b, b * self.batch_size, chunk)?);
        }
        Ok(out)
    }

    fn preferred_batch_size(&self) -> usize {
        self.batch_size
    }
}

/// Score `pairs` against a remote service in batches of `batch_size`.
pub fn remote_score_batch(
    pairs: &[(String, String)],
    endpoint: &str,
    batch_size: usize,
) -> Result<Vec<f64>, ScoreError> {
    RemoteScorer::new(endpoint, batch_size).score_batch(pairs)
}

pub const SCORED_COLUMNS: usize = RECORD_COLUMNS.len() + 1;

/// Record line followed by a `kept_at` column.
pub fn serialize_scored(r: &AnnotatedRecord, kept: KeptAt) -> Result<String, RecordError> {
    let mut line = serialize_record(r)?;
    line.push('\t');
    line.push_str(&kept.to_string());
    Ok(line)
}

pub fn parse_scored(line: &str) -> Result<(AnnotatedRecord, KeptAt), RecordError> {
    let mut names: Vec<&str> = RECORD_COLUMNS.to_vec();
    names.push("kept_at");
    let cols = record::split_columns(line, &names)?;
    let rec = record::parse_columns(&cols[..RECORD_COLUMNS.len()])?;
    let kept = cols[RECORD_COLUMNS.len()]
        .parse()
        .map_err(|reason| RecordError::Parse {
            line: None,
            column: "kept_at",
            value: cols[RECORD_COLUMNS.len()].to_string(),
            reason,
        })?;
    Ok((rec, kept))
}

/// Summary line for a scored sub-document: id, segments, score, cutoffs.
pub fn summary_line(s: &ScoredSubDocument) -> String {
    format!(
        "{}\t{}\t{}\t{}",
        s.sub_doc_id,
        s.n_segments,
        format_real(s.score),
        s.kept_at
    )
}
