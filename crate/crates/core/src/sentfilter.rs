//! Sentence-level bitext filtering baseline: exact-pair deduplication followed
//! by per-pair heuristic rules.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reconstruct::LanguageClassifier;
use crate::slide::mock_score;

#[derive(Debug, Error)]
pub enum FilterConfigError {
    #[error("no character histogram for language {0:?}")]
    MissingCharset(String),
    #[error("threshold {name} = {value} outside {range}")]
    Threshold {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("reading histogram {path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SentFilterConfig {
    pub max_punct_frac: f64,
    pub max_len_ratio: f64,
    pub lid_threshold: f64,
    pub sim_threshold: f64,
    pub charset_min_frac: f64,
}

impl Default for SentFilterConfig {
    fn default() -> Self {
        SentFilterConfig {
            max_punct_frac: 0.5,
            max_len_ratio: 1.5,
            lid_threshold: 0.5,
            sim_threshold: 0.85,
            charset_min_frac: 0.8,
        }
    }
}

impl SentFilterConfig {
    pub fn validate(&self) -> Result<(), FilterConfigError> {
        let unit = [
            ("max_punct_frac", self.max_punct_frac),
            ("lid_threshold", self.lid_threshold),
            ("sim_threshold", self.sim_threshold),
            ("charset_min_frac", self.charset_min_frac),
        ];
        for (name, value) in unit {
            if !(0.0..=1.0).contains(&value) {
                return Err(FilterConfigError::Threshold {
                    name,
                    value,
                    range: "[0, 1]",
                });
            }
        }
        if self.max_len_ratio.is_nan() || self.max_len_ratio < 1.0 {
            return Err(FilterConfigError::Threshold {
                name: "max_len_ratio",
                value: self.max_len_ratio,
                range: "[1, inf)",
            });
        }
        Ok(())
    }
}

/// Cross-lingual sentence similarity behind an interface.
pub trait SimilarityModel: Send + Sync {
    fn identifier(&self) -> &str;
    fn similarity(&self, src: &str, tgt: &str) -> f64;
}

#[derive(Debug, Clone)]
pub struct ConstantSimilarity {
    id: String,
    value: f64,
}

impl ConstantSimilarity {
    pub fn new(value: f64) -> Self {
        ConstantSimilarity {
            id: format!("constant:{value}"),
            value,
        }
    }
}

impl SimilarityModel for ConstantSimilarity {
    fn identifier(&self) -> &str {
        &self.id
    }

    fn similarity(&self, _: &str, _: &str) -> f64 {
        self.value
    }
}

/// Character-trigram overlap; only meaningful for closely related texts.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigramSimilarity;

impl SimilarityModel for TrigramSimilarity {
    fn identifier(&self) -> &str {
        "trigram"
    }

    fn similarity(&self, src: &str, tgt: &str) -> f64 {
        mock_score(src, tgt)
    }
}

/// Expected character set per language.
#[derive(Debug, Clone, Default)]
pub struct CharsetTable {
    sets: HashMap<String, HashSet<char>>,
}

impl CharsetTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse a histogram file: one character per line, optionally followed by
    /// a tab and its count. Every listed character belongs to the set; lines
    /// whose first field is not exactly one character are ignored.
    pub fn parse_histogram(text: &str) -> HashSet<char> {
        text.lines()
            .filter_map(|line| {
                let ch = line.split('\t').next()?;
                let mut chars = ch.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Some(c),
                    _ => None,
                }
            })
            .collect()
    }

    pub fn insert(&mut self, lang: &str, chars: impl IntoIterator<Item = char>) {
        self.sets
            .entry(lang.to_string())
            .or_default()
            .extend(chars);
    }

    /// Load every `<lang>` or `<lang>.txt` file in a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, FilterConfigError> {
        let io_err = |source| FilterConfigError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut table = Self::new();
        for entry in fs::read_dir(dir).map_err(io_err)? {
            let path = entry.map_err(io_err)?.path();
            if !path.is_file() {
                continue;
            }
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let lang = name.strip_suffix(".txt").unwrap_or(name).to_string();
            let text = fs::read_to_string(&path).map_err(|source| FilterConfigError::Io {
                path: path.display().to_string(),
                source,
            })?;
            table.insert(&lang, Self::parse_histogram(&text));
        }
        Ok(table)
    }

    pub fn get(&self, lang: &str) -> Option<&HashSet<char>> {
        self.sets.get(lang)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RejectReason {
    Duplicate,
    Empty,
    Punct,
    Charset,
    Ratio,
    Lid,
    Similarity,
}

impl RejectReason {
    pub const ALL: [RejectReason; 7] = [
        RejectReason::Duplicate,
        RejectReason::Empty,
        RejectReason::Punct,
        RejectReason::Charset,
        RejectReason::Ratio,
        RejectReason::Lid,
        RejectReason::Similarity,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            RejectReason::Duplicate => "duplicate",
            RejectReason::Empty => "empty",
            RejectReason::Punct => "punct",
            RejectReason::Charset => "charset",
            RejectReason::Ratio => "ratio",
            RejectReason::Lid => "lid",
            RejectReason::Similarity => "similarity",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for RejectReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RejectReason::ALL
            .into_iter()
            .find(|r| r.tag() == s)
            .ok_or_else(|| format!("unknown reject reason {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Reject(RejectReason),
}

fn punct_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{P}").expect("valid regex"))
}

/// Fraction of non-whitespace characters in Unicode punctuation categories.
pub fn punct_fraction(text: &str) -> f64 {
    let total = text.chars().filter(|c| !c.is_whitespace()).count();
    if total == 0 {
        return 0.0;
    }
    punct_re().find_iter(text).count() as f64 / total as f64
}

/// Fraction of non-whitespace characters found in `expected`.
pub fn charset_fraction(text: &str, expected: &HashSet<char>) -> f64 {
    let mut total = 0usize;
    let mut inside = 0usize;
    for c in text.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        if expected.contains(&c) {
            inside += 1;
        }
    }
    if total == 0 {
        return 1.0;
    }
    inside as f64 / total as f64
}

/// `max(s, t) / min(s, t)` over whitespace token counts; symmetric.
pub fn length_ratio(src: &str, tgt: &str) -> f64 {
    let s = src.split_whitespace().count();
    let t = tgt.split_whitespace().count();
    let (lo, hi) = if s < t { (s, t) } else { (t, s) };
    if lo == 0 {
        return f64::INFINITY;
    }
    hi as f64 / lo as f64
}

/// The per-pair rule chain, bound to one language pair and its models.
pub struct SentenceFilter<'a> {
    cfg: SentFilterConfig,
    src_lang: String,
    tgt_lang: String,
    src_charset: &'a HashSet<char>,
    tgt_charset: &'a HashSet<char>,
    lids: [&'a dyn LanguageClassifier; 2],
    sim: &'a dyn SimilarityModel,
}

impl<'a> SentenceFilter<'a> {
    pub fn new(
        cfg: SentFilterConfig,
        src_lang: &str,
        tgt_lang: &str,
        charsets: &'a CharsetTable,
        lids: [&'a dyn LanguageClassifier; 2],
        sim: &'a dyn SimilarityModel,
    ) -> Result<Self, FilterConfigError> {
        cfg.validate()?;
        let lookup = |lang: &str| {
            charsets
                .get(lang)
                .ok_or_else(|| FilterConfigError::MissingCharset(lang.to_string()))
        };
        Ok(SentenceFilter {
            cfg,
            src_charset: lookup(src_lang)?,
            tgt_charset: lookup(tgt_lang)?,
            src_lang: src_lang.to_string(),
            tgt_lang: tgt_lang.to_string(),
            lids,
            sim,
        })
    }

    /// Apply the rules in order and report the first that fails.
    pub fn check(&self, src: &str, tgt: &str) -> Verdict {
        use RejectReason::*;
        let cfg = &self.cfg;
        if src.trim().is_empty() || tgt.trim().is_empty() {
            return Verdict::Reject(Empty);
        }
        if punct_fraction(src) > cfg.max_punct_frac || punct_fraction(tgt) > cfg.max_punct_frac {
            return Verdict::Reject(Punct);
        }
        if charset_fraction(src, self.src_charset) < cfg.charset_min_frac
            || charset_fraction(tgt, self.tgt_charset) < cfg.charset_min_frac
        {
            return Verdict::Reject(Charset);
        }
        if length_ratio(src, tgt) > cfg.max_len_ratio {
            return Verdict::Reject(Ratio);
        }
        if self
            .lids
            .iter()
            .all(|l| l.classify(tgt, &self.tgt_lang) < cfg.lid_threshold)
        {
            return Verdict::Reject(Lid);
        }
        if self.sim.similarity(src, tgt) < cfg.sim_threshold {
            return Verdict::Reject(Similarity);
        }
        Verdict::Keep
    }

    pub fn src_lang(&self) -> &str {
        &self.src_lang
    }
}

/// Single-pair convenience wrapper around [`SentenceFilter`].
#[allow(clippy::too_many_arguments)]
pub fn filter_record(
    src: &str,
    tgt: &str,
    src_lang: &str,
    tgt_lang: &str,
    cfg: &SentFilterConfig,
    lids: [&dyn LanguageClassifier; 2],
    sim: &dyn SimilarityModel,
    charsets: &CharsetTable,
) -> Result<Verdict, FilterConfigError> {
    Ok(SentenceFilter::new(*cfg, src_lang, tgt_lang, charsets, lids, sim)?.check(src, tgt))
}

/// Drops every exact repeat of an earlier `(src, tgt)` pair.
pub struct Dedup<I> {
    inner: I,
    seen: HashSet<(String, String)>,
}

impl<I> Iterator for Dedup<I>
where
    I: Iterator<Item = (String, String)>,
{
    type Item = (String, String);

    fn next(&mut self) -> Option<Self::Item> {
        for pair in self.inner.by_ref() {
            if !self.seen.contains(&pair) {
                self.seen.insert(pair.clone());
                return Some(pair);
            }
        }
        None
    }
}

pub fn dedup_stream<I>(records: I) -> Dedup<I::IntoIter>
where
    I: IntoIterator<Item = (String, String)>,
{
    Dedup {
        inner: records.into_iter(),
        seen: HashSet::new(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FilterReport {
    pub input: usize,
    pub kept: usize,
    pub rejected: BTreeMap<RejectReason, usize>,
}

impl FilterReport {
    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }
}

/// Deduplicate then filter a pair stream, handing every pair to exactly one
/// of the callbacks.
pub fn run_filter<I, K, R>(
    records: I,
    filter: &SentenceFilter<'_>,
    mut on_keep: K,
    mut on_reject: R,
) -> FilterReport
where
    I: IntoIterator<Item = (String, String)>,
    K: FnMut(&str, &str),
    R: FnMut(&str, &str, RejectReason),
{
    let mut report = FilterReport::default();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for pair in records {
        report.input += 1;
        let reason = if seen.contains(&pair) {
            Some(RejectReason::Duplicate)
        } else {
            let verdict = filter.check(&pair.0, &pair.1);
            seen.insert(pair.clone());
            match verdict {
                Verdict::Keep => None,
                Verdict::Reject(r) => Some(r),
            }
        };
        match reason {
            None => {
                report.kept += 1;
                on_keep(&pair.0, &pair.1);
            }
            Some(r) => {
                *report.rejected.entry(r).or_insert(0) += 1;
                on_reject(&pair.0, &pair.1, r);
            }
        }
    }
    report
}
