//! Span reconstruction: locating each bitext segment inside its monolingual
//! document by exact string matching and attaching per-side annotations.

use std::collections::HashMap;

use thiserror::Error;

use crate::mono::{normalize_whitespace, MonoDocument};
use crate::record::{AnnotatedRecord, CorpusId, Location, SideAnnotation, Span};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReconstructError {
    #[error("cannot match an empty segment")]
    EmptySegment,
    #[error("source document {src:?} and target document {tgt:?} do not share a doc_id")]
    DocIdMismatch { src: String, tgt: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Source,
    Target,
}

/// Language identification behind a narrow interface; the real model lives
/// outside this crate.
pub trait LanguageClassifier: Send + Sync {
    fn identifier(&self) -> &str;

    /// Probability in [0, 1] that `text` is written in `lang`.
    fn classify(&self, text: &str, lang: &str) -> f64;
}

/// Returns the same probability for everything.
#[derive(Debug, Clone)]
pub struct ConstantClassifier {
    id: String,
    prob: f64,
}

impl ConstantClassifier {
    pub fn new(prob: f64) -> Self {
        let prob = prob.clamp(0.0, 1.0);
        ConstantClassifier {
            id: format!("constant:{prob}"),
            prob,
        }
    }
}

impl LanguageClassifier for ConstantClassifier {
    fn identifier(&self) -> &str {
        &self.id
    }

    fn classify(&self, _text: &str, _lang: &str) -> f64 {
        self.prob
    }
}

/// Lookup-table classifier keyed by `(lang, text)`, with a fallback value.
#[derive(Debug, Clone)]
pub struct FixtureClassifier {
    id: String,
    table: HashMap<String, HashMap<String, f64>>,
    default: f64,
}

impl FixtureClassifier {
    pub fn new(id: impl Into<String>, default: f64) -> Self {
        FixtureClassifier {
            id: id.into(),
            table: HashMap::new(),
            default: default.clamp(0.0, 1.0),
        }
    }

    pub fn with(mut self, lang: &str, text: &str, prob: f64) -> Self {
        self.insert(lang, text, prob);
        self
    }

    pub fn insert(&mut self, lang: &str, text: &str, prob: f64) {
        self.table
            .entry(lang.to_string())
            .or_default()
            .insert(text.to_string(), prob.clamp(0.0, 1.0));
    }

    /// Parse `text<TAB>lang<TAB>prob` lines.
    pub fn parse_table(id: &str, default: f64, table: &str) -> Result<Self, String> {
        let mut c = Self::new(id, default);
        for (i, line) in table.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(format!("line {}: expected text<TAB>lang<TAB>prob", i + 1));
            }
            let prob: f64 = cols[2]
                .parse()
                .map_err(|e| format!("line {}: bad probability {:?}: {e}", i + 1, cols[2]))?;
            c.insert(cols[1], cols[0], prob);
        }
        Ok(c)
    }
}

impl LanguageClassifier for FixtureClassifier {
    fn identifier(&self) -> &str {
        &self.id
    }

    fn classify(&self, text: &str, lang: &str) -> f64 {
        self.table
            .get(lang)
            .and_then(|t| t.get(text))
            .copied()
            .unwrap_or(self.default)
    }
}

/// Corpus-wide exact occurrence counts of segment texts, per side.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DupTable {
    src: HashMap<String, u64>,
    tgt: HashMap<String, u64>,
}

impl DupTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, src: &str, tgt: &str) {
        bump(&mut self.src, src);
        bump(&mut self.tgt, tgt);
    }

    /// Occurrence count, 0 for unseen text.
    pub fn count(&self, side: Side, text: &str) -> u64 {
        let map = match side {
            Side::Source => &self.src,
            Side::Target => &self.tgt,
        };
        map.get(text).copied().unwrap_or(0)
    }

    /// Fold a partial table (e.g. from another shard) into this one.
    pub fn merge(&mut self, other: DupTable) {
        for (k, v) in other.src {
            *self.src.entry(k).or_insert(0) += v;
        }
        for (k, v) in other.tgt {
            *self.tgt.entry(k).or_insert(0) += v;
        }
    }

    pub fn distinct(&self, side: Side) -> usize {
        match side {
            Side::Source => self.src.len(),
            Side::Target => self.tgt.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty() && self.tgt.is_empty()
    }
}

fn bump(map: &mut HashMap<String, u64>, key: &str) {
    if let Some(n) = map.get_mut(key) {
        *n += 1;
    } else {
        map.insert(key.to_string(), 1);
    }
}

/// First pass of reconstruction: count every source and target text.
/// Texts are counted as given; callers normalize beforehand if they want
/// whitespace-insensitive counts.
pub fn count_duplicates<I, S, T>(corpus: I) -> DupTable
where
    I: IntoIterator<Item = (S, T)>,
    S: AsRef<str>,
    T: AsRef<str>,
{
    let mut table = DupTable::new();
    for (s, t) in corpus {
        table.add(s.as_ref(), t.as_ref());
    }
    table
}

/// Leftmost exact occurrence of `segment` starting at or after char offset
/// `search_from`; if there is none, the leftmost occurrence overall.
pub fn match_segment(
    doc: &MonoDocument,
    segment: &str,
    search_from: usize,
) -> Result<Option<Span>, ReconstructError> {
    if segment.is_empty() {
        return Err(ReconstructError::EmptySegment);
    }
    let text = &doc.norm_text;
    let from_byte = if search_from >= doc.char_len() {
        text.len()
    } else {
        doc.byte_offset(search_from)
    };
    let hit = text[from_byte..]
        .find(segment)
        .map(|b| b + from_byte)
        .or_else(|| if from_byte > 0 { text.find(segment) } else { None });
    Ok(hit.map(|b| {
        let start = doc.char_offset(b);
        let end = doc.char_offset(b + segment.len()) - 1;
        Span::new(start, end)
    }))
}

/// Normalize a bitext segment the same way documents are normalized.
pub fn normalize_segment(text: &str) -> String {
    normalize_whitespace(text).0
}

struct SideCursor<'a> {
    doc: &'a MonoDocument,
    side: Side,
    search_from: usize,
}

impl SideCursor<'_> {
    fn annotate(
        &mut self,
        text: &str,
        lid: &dyn LanguageClassifier,
        dups: Option<&DupTable>,
    ) -> SideAnnotation {
        let lid_prob = lid.classify(text, &self.doc.lang).clamp(0.0, 1.0);
        let dup_count = dups.map(|d| d.count(self.side, text));
        let span = if text.is_empty() {
            None
        } else {
            // non-empty, so match_segment cannot fail
            match_segment(self.doc, text, self.search_from).ok().flatten()
        };
        let location = span.and_then(|span| {
            self.search_from = span.end_char + 1;
            let paragraph_idx = self.doc.paragraph_index_at(span.start_char)?;
            let sentence_idx = self.doc.sentence_index_at(span.start_char)?;
            Some(Location {
                paragraph_idx,
                sentence_idx,
                span,
            })
        });
        SideAnnotation {
            location,
            lid_prob,
            dup_count,
        }
    }
}

/// Annotate one document's segment pairs, in bitext order.
///
/// Matching on each side resumes one character after the previous match.
/// Segments that cannot be found keep a not-found annotation. Duplication
/// counts are attached only for corpora that track them.
pub fn annotate_document(
    corpus: CorpusId,
    src_doc: &MonoDocument,
    tgt_doc: &MonoDocument,
    segments: &[(String, String)],
    lid: &dyn LanguageClassifier,
    dups: Option<&DupTable>,
) -> Result<Vec<AnnotatedRecord>, ReconstructError> {
    if src_doc.doc_id != tgt_doc.doc_id {
        return Err(ReconstructError::DocIdMismatch {
            src: src_doc.doc_id.clone(),
            tgt: tgt_doc.doc_id.clone(),
        });
    }
    let dups = dups.filter(|_| corpus.tracks_duplicates());
    let mut src_cursor = SideCursor {
        doc: src_doc,
        side: Side::Source,
        search_from: 0,
    };
    let mut tgt_cursor = SideCursor {
        doc: tgt_doc,
        side: Side::Target,
        search_from: 0,
    };
    let mut out = Vec::with_capacity(segments.len());
    for (seg_index, (src, tgt)) in segments.iter().enumerate() {
        let src_text = normalize_segment(src);
        let tgt_text = normalize_segment(tgt);
        let src_ann = src_cursor.annotate(&src_text, lid, dups);
        let tgt_ann = tgt_cursor.annotate(&tgt_text, lid, dups);
        out.push(AnnotatedRecord {
            corpus,
            doc_id: src_doc.doc_id.clone(),
            seg_index,
            src_text,
            tgt_text,
            src: src_ann,
            tgt: tgt_ann,
            sub_doc_id: None,
            slide_score: None,
        });
    }
    Ok(out)
}
