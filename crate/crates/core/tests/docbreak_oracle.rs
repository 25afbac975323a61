mod common;

use docmend::docbreak::{break_document, BreakConfig};
use docmend::record::AnnotatedRecord;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Gen {
    src_gap: usize,
    tgt_gap: usize,
    len: usize,
    src_found: bool,
    tgt_found: bool,
    src_lid: f64,
    tgt_lid: f64,
    src_dup: u64,
    tgt_dup: u64,
}

fn gen() -> impl Strategy<Value = Gen> {
    let gap = prop_oneof![6 => Just(2usize), 1 => Just(1usize), 1 => Just(3usize), 1 => 4usize..40];
    let found = prop_oneof![9 => Just(true), 1 => Just(false)];
    let lid = prop_oneof![Just(0.2), Just(0.4999), Just(0.5), Just(0.9)];
    let dup = prop_oneof![Just(1u64), Just(100), Just(101), Just(5000)];
    (gap.clone(), gap, 1usize..30, found.clone(), found, lid.clone(), lid, dup.clone(), dup).prop_map(
        |(src_gap, tgt_gap, len, src_found, tgt_found, src_lid, tgt_lid, src_dup, tgt_dup)| Gen {
            src_gap,
            tgt_gap,
            len,
            src_found,
            tgt_found,
            src_lid,
            tgt_lid,
            src_dup,
            tgt_dup,
        },
    )
}

fn build(gens: &[Gen]) -> Vec<AnnotatedRecord> {
    let (mut s, mut t) = (0usize, 0usize);
    gens.iter()
        .enumerate()
        .map(|(i, g)| {
            let mut r = common::record("doc", i, None);
            // spans advance even when unmatched so the layout stays fixed
            if i > 0 {
                s += g.src_gap;
                t += g.tgt_gap;
            }
            r.src = common::side(g.src_found.then_some((s, s + g.len - 1)), g.src_lid, Some(g.src_dup));
            r.tgt = common::side(g.tgt_found.then_some((t, t + g.len - 1)), g.tgt_lid, Some(g.tgt_dup));
            s += g.len - 1;
            t += g.len - 1;
            r
        })
        .collect()
}

fn passes(r: &AnnotatedRecord, cfg: &BreakConfig) -> bool {
    [&r.src, &r.tgt].iter().all(|side| {
        side.location.is_some()
            && side.lid_prob >= cfg.lid_threshold
            && side.dup_count.unwrap_or(0) <= cfg.dup_threshold
    })
}

fn linked(a: &AnnotatedRecord, b: &AnnotatedRecord) -> bool {
    let ok = |x: Option<docmend::record::Span>, y: Option<docmend::record::Span>| match (x, y) {
        (Some(x), Some(y)) => y.start_char == x.end_char + 2,
        _ => false,
    };
    ok(a.src.span(), b.src.span()) && ok(a.tgt.span(), b.tgt.span())
}

/// Every interval that is valid and cannot be extended, found by brute force.
fn maximal_runs(recs: &[AnnotatedRecord], cfg: &BreakConfig) -> Vec<(usize, usize)> {
    let n = recs.len();
    let valid = |i: usize, j: usize| {
        (i..=j).all(|k| passes(&recs[k], cfg)) && (i..j).all(|k| linked(&recs[k], &recs[k + 1]))
    };
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            if !valid(i, j) {
                continue;
            }
            let left = i > 0 && valid(i - 1, j);
            let right = j + 1 < n && valid(i, j + 1);
            if !left && !right && j - i + 1 >= cfg.min_subdoc_len {
                out.push((i, j));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn matches_brute_force(gens in proptest::collection::vec(gen(), 0..=20), min_len in 2usize..5) {
        let cfg = BreakConfig { min_subdoc_len: min_len, ..BreakConfig::default() };
        let recs = build(&gens);
        let subs = break_document(recs.clone(), &cfg).unwrap();
        let got: Vec<(usize, usize)> = subs
            .iter()
            .map(|s| (s.records[0].seg_index, s.records.last().unwrap().seg_index))
            .collect();
        prop_assert_eq!(got, maximal_runs(&recs, &cfg));
        for (k, s) in subs.iter().enumerate() {
            prop_assert_eq!(&s.sub_doc_id, &format!("doc#{k}"));
            prop_assert_eq!(&s.parent_doc_id, "doc");
            prop_assert!(s.records.iter().all(|r| r.sub_doc_id.as_deref() == Some(s.sub_doc_id.as_str())));
            for w in s.records.windows(2) {
                prop_assert_eq!(w[1].seg_index, w[0].seg_index + 1);
            }
        }
    }
}
