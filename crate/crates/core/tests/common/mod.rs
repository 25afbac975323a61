#![allow(dead_code)]

use docmend::record::{AnnotatedRecord, CorpusId, Location, SideAnnotation, Span, SubDocument};

pub fn side(span: Option<(usize, usize)>, lid: f64, dup: Option<u64>) -> SideAnnotation {
    SideAnnotation {
        location: span.map(|(s, e)| Location {
            paragraph_idx: 0,
            sentence_idx: 0,
            span: Span::new(s, e),
        }),
        lid_prob: lid,
        dup_count: dup,
    }
}

/// A record whose two sides both sit at `span`.
pub fn record(doc: &str, seg: usize, span: Option<(usize, usize)>) -> AnnotatedRecord {
    AnnotatedRecord {
        corpus: CorpusId::Other,
        doc_id: doc.to_string(),
        seg_index: seg,
        src_text: format!("src {seg}"),
        tgt_text: format!("tgt {seg}"),
        src: side(span, 0.9, None),
        tgt: side(span, 0.9, None),
        sub_doc_id: None,
        slide_score: None,
    }
}

/// A sub-document of `texts` laid out back to back, as docbreak would emit it.
pub fn subdoc(id: &str, texts: &[(&str, &str)]) -> SubDocument {
    let mut pos = 0;
    let records = texts
        .iter()
        .enumerate()
        .map(|(i, (s, t))| {
            let mut r = record("doc", i, Some((pos, pos + 4)));
            pos += 6;
            r.src_text = s.to_string();
            r.tgt_text = t.to_string();
            r.sub_doc_id = Some(id.to_string());
            r
        })
        .collect();
    SubDocument {
        sub_doc_id: id.to_string(),
        parent_doc_id: "doc".to_string(),
        records,
    }
}

pub fn owned_subdoc(id: &str, texts: &[(String, String)]) -> SubDocument {
    let borrowed: Vec<(&str, &str)> = texts.iter().map(|(s, t)| (s.as_str(), t.as_str())).collect();
    subdoc(id, &borrowed)
}
