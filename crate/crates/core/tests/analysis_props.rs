mod common;

use docmend::analysis::{
    assign_quartiles, dataset_stats, phenomenon_distribution, Level, PhenomenonExample, PronounCategory,
    QuartileAssignment,
};
use docmend::slide::{Cutoff, KeptAt};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// Stable sort by score descending, then cut into four slices whose sizes
/// differ by at most one, earlier slices larger.
fn oracle_quartiles(scores: &[f64]) -> Vec<u8> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let n = scores.len();
    let sizes: Vec<usize> = (0..4).map(|q| n / 4 + usize::from(q < n % 4)).collect();
    let mut out = vec![0u8; n];
    let mut pos = 0;
    for (q, size) in sizes.iter().enumerate() {
        for &i in &idx[pos..pos + size] {
            out[i] = q as u8 + 1;
        }
        pos += size;
    }
    out
}

proptest! {
    #[test]
    fn quartiles_match_oracle(scores in proptest::collection::vec((0u8..10).prop_map(|k| k as f64 / 10.0), 0..300)) {
        prop_assert_eq!(assign_quartiles(&scores), oracle_quartiles(&scores));
    }
}

#[test]
fn quartile_sizes_at_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let scores: Vec<f64> = (0..10_001).map(|_| rng.gen_range(0..1000) as f64 / 999.0).collect();
    let q = assign_quartiles(&scores);
    assert_eq!(q, oracle_quartiles(&scores));
    let sizes: Vec<usize> = (1..=4).map(|k| q.iter().filter(|v| **v == k).count()).collect();
    assert_eq!(sizes, vec![2501, 2500, 2500, 2500]);
}

#[test]
fn planted_distribution_is_recovered() {
    // 200 sub-documents, scores strictly decreasing so quartile k holds ids 50(k-1)..50k
    let ids: Vec<String> = (0..200).map(|i| format!("doc{i:03}#0")).collect();
    let assignment = QuartileAssignment::from_scores(ids.iter().map(|id| id.as_str()).zip((0..200).map(|i| 1.0 - i as f64 / 200.0)));
    let fem: PronounCategory = "inter-fem".parse().unwrap();
    let masc: PronounCategory = "intra-masc".parse().unwrap();
    let mut examples = Vec::new();
    // feminine: 30 / 10 / 6 / 4 across quartiles; masculine: 10 in each
    for (q, n) in [(0usize, 30usize), (1, 10), (2, 6), (3, 4)] {
        for i in 0..n {
            examples.push(PhenomenonExample {
                sub_doc_id: ids[q * 50 + i].clone(),
                category: fem,
                score: None,
            });
        }
    }
    for q in 0..4 {
        for i in 0..10 {
            examples.push(PhenomenonExample {
                sub_doc_id: ids[q * 50 + 40 + i].clone(),
                category: masc,
                score: None,
            });
        }
    }
    let table = phenomenon_distribution(&examples, &assignment).unwrap();
    assert_eq!(table.percentages(fem).unwrap(), [60.0, 20.0, 12.0, 8.0]);
    assert_eq!(table.percentages(masc).unwrap(), [25.0, 25.0, 25.0, 25.0]);
    for q in [fem, masc] {
        assert!((table.percentages(q).unwrap().iter().sum::<f64>() - 100.0).abs() < 1e-9);
    }

    examples.push(PhenomenonExample {
        sub_doc_id: "unknown#9".into(),
        category: fem,
        score: None,
    });
    assert!(phenomenon_distribution(&examples, &assignment).is_err());
}

#[test]
fn stats_agree_with_direct_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rows = Vec::new();
    for i in 0..2000 {
        let mut r = common::record(&format!("d{}", i / 10), i % 10, None);
        let mut kept = KeptAt::none();
        if rng.gen_bool(0.7) {
            let sub = format!("d{}#{}", i / 10, (i % 10) / 4);
            r.sub_doc_id = Some(sub);
            let tier = rng.gen_range(0..4);
            for (k, c) in Cutoff::ALL.iter().enumerate() {
                if tier > k {
                    kept.insert(*c);
                }
            }
        }
        rows.push((r, kept));
    }
    let report = dataset_stats("de-en", rows.iter().map(|(r, k)| (r, *k)));
    let count = |pred: &dyn Fn(&(docmend::AnnotatedRecord, KeptAt)) -> bool| {
        let segs = rows.iter().filter(|x| pred(x)).count();
        let docs: HashSet<&str> = rows.iter().filter(|x| pred(x)).filter_map(|x| x.0.sub_doc_id.as_deref()).collect();
        (segs, docs.len())
    };
    let pairs = [
        (Level::Raw, count(&|_| true)),
        (Level::Docs, count(&|x| x.0.sub_doc_id.is_some())),
        (Level::Loose75, count(&|x| x.1.contains(Cutoff::Loose75))),
        (Level::Medium50, count(&|x| x.1.contains(Cutoff::Medium50))),
        (Level::Strict25, count(&|x| x.1.contains(Cutoff::Strict25))),
    ];
    for (level, (segs, docs)) in pairs {
        let got = report.get(level);
        assert_eq!(got.n_segments, segs, "{level:?}");
        if level != Level::Raw {
            assert_eq!(got.n_subdocs, docs, "{level:?}");
        }
    }
    assert!(report.is_monotone());
}
