//! Annotated bitext records and their tab-separated line format.
//!
//! One line per aligned segment pair, UTF-8, LF-terminated, 19 columns:
//!
//! ```text
//! corpus_id doc_id seg_index src_text tgt_text
//! src_paragraph_idx src_sentence_idx src_start_char src_end_char src_lid_prob src_dup_count
//! tgt_paragraph_idx tgt_sentence_idx tgt_start_char tgt_end_char tgt_lid_prob tgt_dup_count
//! sub_doc_id slide_score
//! ```
//!
//! Absent optional values are written as `-`. Reals are written with exactly
//! four decimals. The encoding is strict: a field is only accepted if
//! re-encoding it reproduces the input bytes, so `serialize_record` and
//! `parse_record` are mutual inverses on every accepted line.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Sentinel for an absent optional field.
pub const ABSENT: &str = "-";

pub const RECORD_COLUMNS: [&str; 19] = [
    "corpus_id",
    "doc_id",
    "seg_index",
    "src_text",
    "tgt_text",
    "src_paragraph_idx",
    "src_sentence_idx",
    "src_start_char",
    "src_end_char",
    "src_lid_prob",
    "src_dup_count",
    "tgt_paragraph_idx",
    "tgt_sentence_idx",
    "tgt_start_char",
    "tgt_end_char",
    "tgt_lid_prob",
    "tgt_dup_count",
    "sub_doc_id",
    "slide_score",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordError {
    #[error("line {line}: expected {expected} columns, found {found} (first missing or extra column: {column})", line = fmt_line(*.line))]
    Schema {
        line: Option<usize>,
        expected: usize,
        found: usize,
        column: String,
    },
    #[error("line {line}: column {column}: cannot parse {value:?}: {reason}", line = fmt_line(*.line))]
    Parse {
        line: Option<usize>,
        column: &'static str,
        value: String,
        reason: String,
    },
    #[error("field {field} cannot be encoded: {reason}")]
    Encoding { field: &'static str, reason: String },
}

fn fmt_line(line: Option<usize>) -> String {
    line.map_or_else(|| "?".to_string(), |l| l.to_string())
}

impl RecordError {
    /// Attach a 1-based line number to a parse or schema error.
    pub fn at_line(mut self, n: usize) -> Self {
        match &mut self {
            RecordError::Schema { line, .. } | RecordError::Parse { line, .. } => *line = Some(n),
            RecordError::Encoding { .. } => {}
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorpusId {
    Paracrawl,
    NewsCommentary,
    Europarl,
    Other,
}

impl CorpusId {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorpusId::Paracrawl => "paracrawl",
            CorpusId::NewsCommentary => "news_commentary",
            CorpusId::Europarl => "europarl",
            CorpusId::Other => "other",
        }
    }

    /// Only web-crawled corpora carry duplication counts.
    pub fn tracks_duplicates(&self) -> bool {
        matches!(self, CorpusId::Paracrawl)
    }
}

impl fmt::Display for CorpusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorpusId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paracrawl" => Ok(CorpusId::Paracrawl),
            "news_commentary" => Ok(CorpusId::NewsCommentary),
            "europarl" => Ok(CorpusId::Europarl),
            "other" => Ok(CorpusId::Other),
            _ => Err(format!("unknown corpus id {s:?}")),
        }
    }
}

/// Inclusive character span over a normalized text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start_char: usize,
    pub end_char: usize,
}

impl Span {
    pub fn new(start_char: usize, end_char: usize) -> Self {
        debug_assert!(start_char <= end_char);
        Span {
            start_char,
            end_char,
        }
    }

    pub fn len(&self) -> usize {
        self.end_char - self.start_char + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start_char <= offset && offset <= self.end_char
    }
}

/// Where a matched segment sits inside its monolingual document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Location {
    pub paragraph_idx: usize,
    pub sentence_idx: usize,
    pub span: Span,
}

/// Per-side annotation. `location` is `None` when the segment text could not
/// be found in the document.
#[derive(Debug, Clone, PartialEq)]
pub struct SideAnnotation {
    pub location: Option<Location>,
    pub lid_prob: f64,
    pub dup_count: Option<u64>,
}

impl SideAnnotation {
    pub fn not_found(lid_prob: f64, dup_count: Option<u64>) -> Self {
        SideAnnotation {
            location: None,
            lid_prob,
            dup_count,
        }
    }

    pub fn is_found(&self) -> bool {
        self.location.is_some()
    }

    pub fn span(&self) -> Option<Span> {
        self.location.map(|l| l.span)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedRecord {
    pub corpus: CorpusId,
    pub doc_id: String,
    pub seg_index: usize,
    pub src_text: String,
    pub tgt_text: String,
    pub src: SideAnnotation,
    pub tgt: SideAnnotation,
    pub sub_doc_id: Option<String>,
    pub slide_score: Option<f64>,
}

/// A maximal run of consecutive, criteria-passing records of one parent
/// document. Built by [`crate::docbreak::break_document`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubDocument {
    pub sub_doc_id: String,
    pub parent_doc_id: String,
    pub records: Vec<AnnotatedRecord>,
}

impl SubDocument {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn check_text(field: &'static str, s: &str) -> Result<(), RecordError> {
    if let Some(c) = s.chars().find(|c| matches!(c, '\t' | '\n' | '\r')) {
        return Err(RecordError::Encoding {
            field,
            reason: format!("contains control separator {c:?}"),
        });
    }
    Ok(())
}

fn check_unit(field: &'static str, x: f64) -> Result<(), RecordError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(RecordError::Encoding {
            field,
            reason: format!("{x} outside [0, 1]"),
        });
    }
    Ok(())
}

/// Four-decimal rendering used for every real-valued column.
pub fn format_real(x: f64) -> String {
    // -0.0 would otherwise print with a sign
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.4}")
}

fn push_side(out: &mut String, side: &SideAnnotation, prefix: &'static str) -> Result<(), RecordError> {
    match side.location {
        Some(loc) => {
            if loc.span.start_char > loc.span.end_char {
                return Err(RecordError::Encoding {
                    field: if prefix == "src" { "src_start_char" } else { "tgt_start_char" },
                    reason: "start_char > end_char".into(),
                });
            }
            out.push_str(&format!(
                "\t{}\t{}\t{}\t{}",
                loc.paragraph_idx, loc.sentence_idx, loc.span.start_char, loc.span.end_char
            ));
        }
        None => out.push_str("\t-\t-\t-\t-"),
    }
    check_unit(
        if prefix == "src" { "src_lid_prob" } else { "tgt_lid_prob" },
        side.lid_prob,
    )?;
    out.push('\t');
    out.push_str(&format_real(side.lid_prob));
    out.push('\t');
    match side.dup_count {
        Some(n) => out.push_str(&n.to_string()),
        None => out.push_str(ABSENT),
    }
    Ok(())
}

/// Encode a record as one TSV line (without the trailing newline).
pub fn serialize_record(r: &AnnotatedRecord) -> Result<String, RecordError> {
    check_text("doc_id", &r.doc_id)?;
    check_text("src_text", &r.src_text)?;
    check_text("tgt_text", &r.tgt_text)?;
    let mut out = String::with_capacity(r.src_text.len() + r.tgt_text.len() + r.doc_id.len() + 96);
    out.push_str(r.corpus.as_str());
    out.push('\t');
    out.push_str(&r.doc_id);
    out.push('\t');
    out.push_str(&r.seg_index.to_string());
    out.push('\t');
    out.push_str(&r.src_text);
    out.push('\t');
    out.push_str(&r.tgt_text);
    push_side(&mut out, &r.src, "src")?;
    push_side(&mut out, &r.tgt, "tgt")?;
    out.push('\t');
    match &r.sub_doc_id {
        Some(id) => {
            check_text("sub_doc_id", id)?;
            if id == ABSENT {
                return Err(RecordError::Encoding {
                    field: "sub_doc_id",
                    reason: "collides with the absent sentinel".into(),
                });
            }
            out.push_str(id);
        }
        None => out.push_str(ABSENT),
    }
    out.push('\t');
    match r.slide_score {
        Some(s) => {
            check_unit("slide_score", s)?;
            out.push_str(&format_real(s));
        }
        None => out.push_str(ABSENT),
    }
    Ok(out)
}

fn parse_err(column: &'static str, value: &str, reason: impl Into<String>) -> RecordError {
    RecordError::Parse {
        line: None,
        column,
        value: value.to_string(),
        reason: reason.into(),
    }
}

pub(crate) fn parse_count(column: &'static str, v: &str) -> Result<usize, RecordError> {
    let n: usize = v
        .parse()
        .map_err(|e: std::num::ParseIntError| parse_err(column, v, e.to_string()))?;
    if n.to_string() != v {
        return Err(parse_err(column, v, "non-canonical integer"));
    }
    Ok(n)
}

/// Parse a four-decimal real in [0, 1].
pub fn parse_real(column: &'static str, v: &str) -> Result<f64, RecordError> {
    let x: f64 = v
        .parse()
        .map_err(|e: std::num::ParseFloatError| parse_err(column, v, e.to_string()))?;
    if !(0.0..=1.0).contains(&x) {
        return Err(parse_err(column, v, "outside [0, 1]"));
    }
    if format_real(x) != v {
        return Err(parse_err(column, v, "expected exactly four decimals"));
    }
    Ok(x)
}

fn parse_side(cols: &[&str], names: &[&'static str]) -> Result<SideAnnotation, RecordError> {
    let loc_cols = &cols[..4];
    let location = if loc_cols.iter().all(|c| *c == ABSENT) {
        None
    } else {
        let paragraph_idx = parse_count(names[0], cols[0])?;
        let sentence_idx = parse_count(names[1], cols[1])?;
        let start_char = parse_count(names[2], cols[2])?;
        let end_char = parse_count(names[3], cols[3])?;
        if start_char > end_char {
            return Err(parse_err(names[2], cols[2], "start_char exceeds end_char"));
        }
        Some(Location {
            paragraph_idx,
            sentence_idx,
            span: Span::new(start_char, end_char),
        })
    };
    let lid_prob = parse_real(names[4], cols[4])?;
    let dup_count = match cols[5] {
        ABSENT => None,
        v => Some(parse_count(names[5], v)? as u64),
    };
    Ok(SideAnnotation {
        location,
        lid_prob,
        dup_count,
    })
}

/// Split a line into exactly `expected` tab-separated columns.
pub(crate) fn split_columns<'a>(
    line: &'a str,
    names: &[&str],
) -> Result<Vec<&'a str>, RecordError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != names.len() {
        let column = if cols.len() < names.len() {
            names[cols.len()].to_string()
        } else {
            format!("extra column #{}", names.len() + 1)
        };
        return Err(RecordError::Schema {
            line: None,
            expected: names.len(),
            found: cols.len(),
            column,
        });
    }
    Ok(cols)
}

/// Decode one TSV line. A single trailing `\n` is tolerated.
pub fn parse_record(line: &str) -> Result<AnnotatedRecord, RecordError> {
    let cols = split_columns(line, &RECORD_COLUMNS)?;
    parse_columns(&cols)
}

pub(crate) fn parse_columns(cols: &[&str]) -> Result<AnnotatedRecord, RecordError> {
    let corpus = cols[0]
        .parse::<CorpusId>()
        .map_err(|e| parse_err("corpus_id", cols[0], e))?;
    let seg_index = parse_count("seg_index", cols[2])?;
    let src = parse_side(&cols[5..11], &RECORD_COLUMNS[5..11])?;
    let tgt = parse_side(&cols[11..17], &RECORD_COLUMNS[11..17])?;
    let sub_doc_id = match cols[17] {
        ABSENT => None,
        v => Some(v.to_string()),
    };
    let slide_score = match cols[18] {
        ABSENT => None,
        v => Some(parse_real("slide_score", v)?),
    };
    Ok(AnnotatedRecord {
        corpus,
        doc_id: cols[1].to_string(),
        seg_index,
        src_text: cols[3].to_string(),
        tgt_text: cols[4].to_string(),
        src,
        tgt,
        sub_doc_id,
        slide_score,
    })
}
