//! Corpus-level drivers: grouping streams by document and running the stages
//! over many documents in parallel with deterministic output order.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::docbreak::{break_document, BreakConfig};
use crate::error::{Error, Result};
use crate::mono::{MonoDocument, MonoStore, SentenceSplitter};
use crate::reconstruct::{annotate_document, count_duplicates, normalize_segment, DupTable, LanguageClassifier};
use crate::record::{self, AnnotatedRecord, CorpusId, RecordError, SubDocument};
use crate::slide::{assign_cutoffs, score_subdocs, KeptAt, QualityScorer, ScoredSubDocument, WindowConfig};

/// One line of the unfiltered bitext: `doc_id<TAB>src<TAB>tgt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitextRow {
    pub doc_id: String,
    pub src: String,
    pub tgt: String,
}

pub fn parse_bitext_line(line: &str) -> Result<BitextRow, RecordError> {
    let cols = record::split_columns(line, &["doc_id", "src_text", "tgt_text"])?;
    Ok(BitextRow {
        doc_id: cols[0].to_string(),
        src: cols[1].to_string(),
        tgt: cols[2].to_string(),
    })
}

/// Split a stream into runs sharing a key. A key that reappears after a
/// different one is an error: inputs must be grouped by document.
pub fn group_contiguous<T, F>(items: Vec<T>, key: F) -> Result<Vec<Vec<T>>>
where
    F: Fn(&T) -> &str,
{
    let mut groups: Vec<Vec<T>> = Vec::new();
    let mut done: HashSet<String> = HashSet::new();
    for item in items {
        let same = groups
            .last()
            .and_then(|g| g.last())
            .is_some_and(|last| key(last) == key(&item));
        if same {
            groups.last_mut().unwrap().push(item);
            continue;
        }
        if let Some(prev) = groups.last().and_then(|g| g.last()) {
            done.insert(key(prev).to_string());
        }
        if done.contains(key(&item)) {
            return Err(Error::Input(format!(
                "document {:?} appears in more than one block; input must be grouped by document",
                key(&item)
            )));
        }
        groups.push(vec![item]);
    }
    Ok(groups)
}

/// Everything reconstruction needs besides the bitext itself.
pub struct ReconstructJob<'a> {
    pub corpus: CorpusId,
    pub src_lang: &'a str,
    pub tgt_lang: &'a str,
    pub src_store: &'a MonoStore,
    pub tgt_store: &'a MonoStore,
    pub splitter: &'a dyn SentenceSplitter,
    pub lid: &'a dyn LanguageClassifier,
}

/// Duplication table over whitespace-normalized segment texts.
pub fn count_row_duplicates(rows: &[BitextRow]) -> DupTable {
    let normalized: Vec<(String, String)> = rows
        .par_iter()
        .map(|r| (normalize_segment(&r.src), normalize_segment(&r.tgt)))
        .collect();
    count_duplicates(normalized.iter().map(|(s, t)| (s.as_str(), t.as_str())))
}

/// Annotate documents (each a run of rows sharing a doc_id). Documents with
/// no monolingual text are annotated against an empty text, so every segment
/// comes out unmatched.
pub fn reconstruct_documents(
    job: &ReconstructJob<'_>,
    docs: &[Vec<BitextRow>],
    dups: Option<&DupTable>,
) -> Result<Vec<AnnotatedRecord>> {
    let per_doc: Vec<Result<Vec<AnnotatedRecord>>> = docs
        .par_iter()
        .map(|rows| {
            let doc_id = &rows[0].doc_id;
            let load = |store: &MonoStore, lang: &str| {
                let raw = store.get(doc_id).unwrap_or_else(|| {
                    log::warn!("no {lang} monolingual text for document {doc_id:?}");
                    ""
                });
                MonoDocument::index(doc_id.as_str(), lang, raw, job.splitter)
            };
            let src_doc = load(job.src_store, job.src_lang);
            let tgt_doc = load(job.tgt_store, job.tgt_lang);
            let segments: Vec<(String, String)> =
                rows.iter().map(|r| (r.src.clone(), r.tgt.clone())).collect();
            Ok(annotate_document(job.corpus, &src_doc, &tgt_doc, &segments, job.lid, dups)?)
        })
        .collect();
    let mut out = Vec::new();
    for d in per_doc {
        out.extend(d?);
    }
    Ok(out)
}

/// Two-pass reconstruction of a whole bitext: count duplicates (only for
/// corpora that track them), then annotate every document.
pub fn reconstruct_corpus(job: &ReconstructJob<'_>, rows: Vec<BitextRow>) -> Result<Vec<AnnotatedRecord>> {
    let dups = job.corpus.tracks_duplicates().then(|| count_row_duplicates(&rows));
    let docs = group_contiguous(rows, |r| r.doc_id.as_str())?;
    reconstruct_documents(job, &docs, dups.as_ref())
}

/// Break every document of an annotated stream into sub-documents.
pub fn break_corpus(records: Vec<AnnotatedRecord>, cfg: &BreakConfig) -> Result<Vec<SubDocument>> {
    cfg.validate()?;
    let docs = group_contiguous(records, |r| r.doc_id.as_str())?;
    let per_doc: Vec<Result<Vec<SubDocument>>> = docs
        .into_par_iter()
        .map(|d| Ok(break_document(d, cfg)?))
        .collect();
    let mut out = Vec::new();
    for d in per_doc {
        out.extend(d?);
    }
    Ok(out)
}

/// Rebuild sub-documents from records carrying `sub_doc_id`; records without
/// one are skipped.
pub fn subdocs_from_records(records: Vec<AnnotatedRecord>) -> Result<Vec<SubDocument>> {
    let records: Vec<AnnotatedRecord> = records.into_iter().filter(|r| r.sub_doc_id.is_some()).collect();
    let groups = group_contiguous(records, |r| r.sub_doc_id.as_deref().unwrap_or_default())?;
    Ok(groups
        .into_iter()
        .map(|records| SubDocument {
            sub_doc_id: records[0].sub_doc_id.clone().unwrap_or_default(),
            parent_doc_id: records[0].doc_id.clone(),
            records,
        })
        .collect())
}

/// Score every sub-document, write the score into its records, and tag the
/// standard cutoffs.
pub fn score_corpus(
    subdocs: &mut [SubDocument],
    scorer: &dyn QualityScorer,
    cfg: &WindowConfig,
) -> Result<Vec<ScoredSubDocument>> {
    let scores = score_subdocs(subdocs, scorer, cfg)?;
    let mut scored: Vec<ScoredSubDocument> = subdocs
        .iter_mut()
        .zip(scores)
        .map(|(sd, score)| {
            for r in &mut sd.records {
                r.slide_score = Some(score);
            }
            ScoredSubDocument {
                sub_doc_id: sd.sub_doc_id.clone(),
                n_segments: sd.records.len(),
                score,
                kept_at: KeptAt::none(),
            }
        })
        .collect();
    assign_cutoffs(&mut scored);
    Ok(scored)
}
