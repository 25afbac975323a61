//! Sub-document extraction.
//!
//! A document's records are cut wherever two neighbours are not adjacent in
//! the original text on both sides, and around every record that is
//! unaligned, has a low language-id probability, or is boilerplate (too many
//! duplicates). Runs shorter than the minimum length are dropped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{AnnotatedRecord, SideAnnotation, SubDocument};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BreakError {
    #[error("document {doc_id:?}: seg_index {found} follows {previous}; records must be sorted")]
    Unsorted {
        doc_id: String,
        previous: usize,
        found: usize,
    },
    #[error("record for document {found:?} mixed into document {expected:?}")]
    MixedDocuments { expected: String, found: String },
    #[error("invalid break config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreakConfig {
    /// Records with a language-id probability below this on either side are cut out.
    pub lid_threshold: f64,
    /// Records duplicated more than this many times on either side are cut out.
    pub dup_threshold: u64,
    pub min_subdoc_len: usize,
}

impl Default for BreakConfig {
    fn default() -> Self {
        BreakConfig {
            lid_threshold: 0.5,
            dup_threshold: 100,
            min_subdoc_len: 2,
        }
    }
}

impl BreakConfig {
    pub fn validate(&self) -> Result<(), BreakError> {
        if !(0.0..=1.0).contains(&self.lid_threshold) {
            return Err(BreakError::Config(format!(
                "lid_threshold {} outside [0, 1]",
                self.lid_threshold
            )));
        }
        if self.min_subdoc_len < 2 {
            return Err(BreakError::Config(format!(
                "min_subdoc_len {} must be at least 2",
                self.min_subdoc_len
            )));
        }
        Ok(())
    }
}

/// Two segments are adjacent in the original document when exactly one
/// normalized space separates them: `next.start == prev.end + 2`.
/// Unmatched annotations are never consecutive.
pub fn is_consecutive(prev: &SideAnnotation, next: &SideAnnotation) -> bool {
    match (prev.span(), next.span()) {
        (Some(p), Some(n)) => n.start_char == p.end_char + 2,
        _ => false,
    }
}

fn side_passes(side: &SideAnnotation, cfg: &BreakConfig) -> bool {
    side.is_found()
        && side.lid_prob >= cfg.lid_threshold
        && side.dup_count.is_none_or(|d| d <= cfg.dup_threshold)
}

/// Per-record conditions: aligned, language id not below threshold, not
/// boilerplate. Checked on both sides.
pub fn record_passes(r: &AnnotatedRecord, cfg: &BreakConfig) -> bool {
    side_passes(&r.src, cfg) && side_passes(&r.tgt, cfg)
}

pub fn records_consecutive(prev: &AnnotatedRecord, next: &AnnotatedRecord) -> bool {
    is_consecutive(&prev.src, &next.src) && is_consecutive(&prev.tgt, &next.tgt)
}

/// Split one document's records into sub-documents. Records of kept runs get
/// `sub_doc_id = "<doc_id>#<k>"`; everything else is dropped.
pub fn break_document(
    records: Vec<AnnotatedRecord>,
    cfg: &BreakConfig,
) -> Result<Vec<SubDocument>, BreakError> {
    cfg.validate()?;
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    let doc_id = first.doc_id.clone();
    for pair in records.windows(2) {
        if pair[1].doc_id != doc_id {
            return Err(BreakError::MixedDocuments {
                expected: doc_id,
                found: pair[1].doc_id.clone(),
            });
        }
        if pair[1].seg_index <= pair[0].seg_index {
            return Err(BreakError::Unsorted {
                doc_id,
                previous: pair[0].seg_index,
                found: pair[1].seg_index,
            });
        }
    }

    let mut out = Vec::new();
    let mut run: Vec<AnnotatedRecord> = Vec::new();
    let flush = |run: &mut Vec<AnnotatedRecord>, out: &mut Vec<SubDocument>| {
        if run.len() >= cfg.min_subdoc_len {
            let sub_doc_id = format!("{doc_id}#{}", out.len());
            let mut records = std::mem::take(run);
            for r in &mut records {
                r.sub_doc_id = Some(sub_doc_id.clone());
            }
            out.push(SubDocument {
                sub_doc_id,
                parent_doc_id: doc_id.clone(),
                records,
            });
        } else {
            run.clear();
        }
    };

    for rec in records {
        if !record_passes(&rec, cfg) {
            flush(&mut run, &mut out);
            continue;
        }
        if let Some(last) = run.last() {
            if !records_consecutive(last, &rec) {
                flush(&mut run, &mut out);
            }
        }
        run.push(rec);
    }
    flush(&mut run, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{CorpusId, Location, Span};

    fn side(start: usize, len: usize) -> SideAnnotation {
        SideAnnotation {
            location: Some(Location {
                paragraph_idx: 0,
                sentence_idx: 0,
                span: Span::new(start, start + len - 1),
            }),
            lid_prob: 1.0,
            dup_count: Some(1),
        }
    }

    /// `n` records laid end to end with single spaces, 10 chars each.
    fn clean_doc(n: usize) -> Vec<AnnotatedRecord> {
        (0..n)
            .map(|i| AnnotatedRecord {
                corpus: CorpusId::Paracrawl,
                doc_id: "doc".into(),
                seg_index: i,
                src_text: format!("src {i}"),
                tgt_text: format!("tgt {i}"),
                src: side(i * 11, 10),
                tgt: side(i * 11, 10),
                sub_doc_id: None,
                slide_score: None,
            })
            .collect()
    }

    fn seg_indices(subs: &[SubDocument]) -> Vec<Vec<usize>> {
        subs.iter()
            .map(|s| s.records.iter().map(|r| r.seg_index).collect())
            .collect()
    }

    #[test]
    fn consecutiveness_rule() {
        assert!(is_consecutive(&side(0, 1828), &side(1829, 5)));
        assert!(is_consecutive(&side(0, 6), &side(7, 2)));
        assert!(!is_consecutive(&side(0, 11), &side(13, 2)));
        assert!(!is_consecutive(&side(0, 11), &SideAnnotation::not_found(1.0, None)));
    }

    #[test]
    fn boilerplate_record_splits_document() {
        let mut recs = clean_doc(5);
        recs[2].src.dup_count = Some(101);
        let subs = break_document(recs, &BreakConfig::default()).unwrap();
        assert_eq!(seg_indices(&subs), vec![vec![0, 1], vec![3, 4]]);
        assert_eq!(subs[0].sub_doc_id, "doc#0");
        assert_eq!(subs[1].sub_doc_id, "doc#1");
        assert_eq!(subs[1].records[0].sub_doc_id.as_deref(), Some("doc#1"));
    }

    #[test]
    fn minimum_document() {
        let subs = break_document(clean_doc(2), &BreakConfig::default()).unwrap();
        assert_eq!(seg_indices(&subs), vec![vec![0, 1]]);
    }

    #[test]
    fn low_lid_in_middle_leaves_nothing() {
        let mut recs = clean_doc(3);
        recs[1].tgt.lid_prob = 0.4;
        assert!(break_document(recs, &BreakConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn thresholds_are_inclusive_for_keeping() {
        let mut recs = clean_doc(2);
        recs[0].src.lid_prob = 0.5;
        recs[1].tgt.dup_count = Some(100);
        assert_eq!(break_document(recs, &BreakConfig::default()).unwrap().len(), 1);
    }

    #[test]
    fn gap_on_one_side_splits() {
        let mut recs = clean_doc(4);
        for r in &mut recs[2..] {
            let span = r.tgt.location.as_mut().unwrap();
            span.span = Span::new(span.span.start_char + 1, span.span.end_char + 1);
        }
        let subs = break_document(recs, &BreakConfig::default()).unwrap();
        assert_eq!(seg_indices(&subs), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn unaligned_record_splits() {
        let mut recs = clean_doc(6);
        recs[3].src.location = None;
        let subs = break_document(recs, &BreakConfig::default()).unwrap();
        assert_eq!(seg_indices(&subs), vec![vec![0, 1, 2], vec![4, 5]]);
    }

    #[test]
    fn rejects_unsorted_and_mixed() {
        let mut recs = clean_doc(3);
        recs.swap(0, 1);
        assert!(matches!(
            break_document(recs, &BreakConfig::default()),
            Err(BreakError::Unsorted { .. })
        ));
        let mut recs = clean_doc(3);
        recs[2].doc_id = "other".into();
        assert!(matches!(
            break_document(recs, &BreakConfig::default()),
            Err(BreakError::MixedDocuments { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let cfg = BreakConfig {
            min_subdoc_len: 1,
            ..Default::default()
        };
        assert!(break_document(clean_doc(2), &cfg).is_err());
        assert!(break_document(Vec::new(), &BreakConfig::default()).unwrap().is_empty());
    }
}
