//! Dataset statistics per filtering level and the quartile analysis of
//! annotated pronoun phenomena.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::io::BufRead;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::record::AnnotatedRecord;
use crate::slide::{Cutoff, KeptAt};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("line {line}: {message}")]
    Input { line: usize, message: String },
    #[error("sub-document {0:?} has no quartile assignment")]
    Unassigned(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Level {
    Raw,
    Docs,
    Loose75,
    Medium50,
    Strict25,
}

impl Level {
    pub const ALL: [Level; 5] = [
        Level::Raw,
        Level::Docs,
        Level::Loose75,
        Level::Medium50,
        Level::Strict25,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Level::Raw => "raw",
            Level::Docs => "docs",
            Level::Loose75 => "loose75",
            Level::Medium50 => "medium50",
            Level::Strict25 => "strict25",
        }
    }

    fn cutoff(&self) -> Option<Cutoff> {
        match self {
            Level::Loose75 => Some(Cutoff::Loose75),
            Level::Medium50 => Some(Cutoff::Medium50),
            Level::Strict25 => Some(Cutoff::Strict25),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LevelCounts {
    pub n_segments: usize,
    pub n_subdocs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsReport {
    pub lang_pair: String,
    pub levels: BTreeMap<Level, LevelCounts>,
}

impl StatsReport {
    pub fn get(&self, level: Level) -> LevelCounts {
        self.levels.get(&level).copied().unwrap_or_default()
    }

    /// Counts never grow from one level to the next.
    pub fn is_monotone(&self) -> bool {
        Level::ALL.windows(2).all(|w| {
            let (a, b) = (self.get(w[0]), self.get(w[1]));
            b.n_segments <= a.n_segments && (w[0] == Level::Raw || b.n_subdocs <= a.n_subdocs)
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("lang_pair\tlevel\tn_segments\tn_subdocs\n");
        for level in Level::ALL {
            let c = self.get(level);
            let _ = writeln!(out, "{}\t{}\t{}\t{}", self.lang_pair, level.name(), c.n_segments, c.n_subdocs);
        }
        out
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>12} {:>12}", self.lang_pair, "# segs.", "# docs.")?;
        for level in Level::ALL {
            let c = self.get(level);
            let docs = if level == Level::Raw {
                "-".to_string()
            } else {
                c.n_subdocs.to_string()
            };
            writeln!(f, "{:<10} {:>12} {:>12}", level.name(), c.n_segments, docs)?;
        }
        Ok(())
    }
}

/// Segment and distinct sub-document counts at every level. `raw` counts all
/// records; `docs` those assigned to a sub-document; the cutoff levels those
/// whose `kept_at` includes the cutoff.
pub fn dataset_stats<'a, I>(lang_pair: &str, records: I) -> StatsReport
where
    I: IntoIterator<Item = (&'a AnnotatedRecord, KeptAt)>,
{
    let mut counts: BTreeMap<Level, LevelCounts> =
        Level::ALL.iter().map(|l| (*l, LevelCounts::default())).collect();
    let mut seen: BTreeMap<Level, HashSet<&'a str>> = BTreeMap::new();
    for (rec, kept) in records {
        counts.get_mut(&Level::Raw).unwrap().n_segments += 1;
        let Some(id) = rec.sub_doc_id.as_deref() else {
            continue;
        };
        for level in &Level::ALL[1..] {
            let included = level.cutoff().is_none_or(|c| kept.contains(c));
            if included {
                counts.get_mut(level).unwrap().n_segments += 1;
                seen.entry(*level).or_default().insert(id);
            }
        }
    }
    for (level, ids) in seen {
        counts.get_mut(&level).unwrap().n_subdocs = ids.len();
    }
    StatsReport {
        lang_pair: lang_pair.to_string(),
        levels: counts,
    }
}

/// Quartile (1 = best) of every score. Ranks descend by score with ties kept
/// in input order; quartile sizes differ by at most one, earlier quartiles
/// taking the remainder.
pub fn assign_quartiles(scores: &[f64]) -> Vec<u8> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (base, rem) = (n / 4, n % 4);
    let mut out = vec![0u8; n];
    let mut rank = 0;
    for q in 0..4 {
        let size = base + usize::from(q < rem);
        for &i in &order[rank..rank + size] {
            out[i] = q as u8 + 1;
        }
        rank += size;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Antecedent {
    Inter,
    Intra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Gender {
    Fem,
    Masc,
    Neut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PronounCategory {
    pub antecedent: Antecedent,
    pub gender: Gender,
}

impl fmt::Display for PronounCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = match self.antecedent {
            Antecedent::Inter => "inter",
            Antecedent::Intra => "intra",
        };
        let g = match self.gender {
            Gender::Fem => "fem",
            Gender::Masc => "masc",
            Gender::Neut => "neut",
        };
        write!(f, "{a}-{g}")
    }
}

impl FromStr for PronounCategory {
    type Err = String;

    /// Accepts `inter-fem`, `Intra. Neut`, `intra_masc` and similar spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_lowercase();
        let parts: Vec<&str> = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|p| !p.is_empty())
            .collect();
        let bad = || format!("unknown phenomenon category {s:?}");
        let [a, g] = parts.as_slice() else {
            return Err(bad());
        };
        let antecedent = match *a {
            "inter" | "intersentential" => Antecedent::Inter,
            "intra" | "intrasentential" => Antecedent::Intra,
            _ => return Err(bad()),
        };
        let gender = match *g {
            "fem" | "feminine" => Gender::Fem,
            "masc" | "masculine" => Gender::Masc,
            "neut" | "neuter" => Gender::Neut,
            _ => return Err(bad()),
        };
        Ok(PronounCategory { antecedent, gender })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhenomenonExample {
    pub sub_doc_id: String,
    pub category: PronounCategory,
    pub score: Option<f64>,
}

/// Read `sub_doc_id<TAB>category[<TAB>...]` lines; extra columns are ignored.
pub fn read_phenomena<R: BufRead>(reader: R) -> Result<Vec<PhenomenonExample>, AnalysisError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(id), Some(cat)) = (cols.next(), cols.next()) else {
            return Err(AnalysisError::Input {
                line: i + 1,
                message: "expected sub_doc_id<TAB>category".into(),
            });
        };
        let category = cat.parse().map_err(|message| AnalysisError::Input {
            line: i + 1,
            message,
        })?;
        out.push(PhenomenonExample {
            sub_doc_id: id.to_string(),
            category,
            score: None,
        });
    }
    Ok(out)
}

/// Quartile of each sub-document, ranked by score.
#[derive(Debug, Clone, Default)]
pub struct QuartileAssignment {
    by_id: HashMap<String, (u8, f64)>,
}

impl QuartileAssignment {
    pub fn from_scores<'a, I>(scored: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let (ids, scores): (Vec<&str>, Vec<f64>) = scored.into_iter().unzip();
        let q = assign_quartiles(&scores);
        QuartileAssignment {
            by_id: ids
                .into_iter()
                .zip(q.into_iter().zip(scores))
                .map(|(id, qs)| (id.to_string(), qs))
                .collect(),
        }
    }

    pub fn quartile(&self, sub_doc_id: &str) -> Option<u8> {
        self.by_id.get(sub_doc_id).map(|(q, _)| *q)
    }

    pub fn score(&self, sub_doc_id: &str) -> Option<f64> {
        self.by_id.get(sub_doc_id).map(|(_, s)| *s)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}

/// Example counts per category and quartile.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DistributionTable {
    pub counts: BTreeMap<PronounCategory, [usize; 4]>,
}

impl DistributionTable {
    /// Row-normalized percentages, rounded to one decimal.
    pub fn percentages(&self, category: PronounCategory) -> Option<[f64; 4]> {
        let row = self.counts.get(&category)?;
        let total: usize = row.iter().sum();
        if total == 0 {
            return None;
        }
        Some(row.map(|c| (c as f64 * 1000.0 / total as f64).round() / 10.0))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("category\tn\tq1\tq2\tq3\tq4\n");
        for (cat, row) in &self.counts {
            let p = self.percentages(*cat).unwrap_or([0.0; 4]);
            let _ = writeln!(
                out,
                "{cat}\t{}\t{:.1}\t{:.1}\t{:.1}\t{:.1}",
                row.iter().sum::<usize>(),
                p[0],
                p[1],
                p[2],
                p[3]
            );
        }
        out
    }
}

impl fmt::Display for DistributionTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>8} {:>7} {:>7} {:>7} {:>7}", "category", "n", "1st", "2nd", "3rd", "4th")?;
        for (cat, row) in &self.counts {
            let p = self.percentages(*cat).unwrap_or([0.0; 4]);
            writeln!(
                f,
                "{:<12} {:>8} {:>6.1}% {:>6.1}% {:>6.1}% {:>6.1}%",
                cat.to_string(),
                row.iter().sum::<usize>(),
                p[0],
                p[1],
                p[2],
                p[3]
            )?;
        }
        Ok(())
    }
}

/// Tally each example into the quartile of its sub-document.
pub fn phenomenon_distribution(
    examples: &[PhenomenonExample],
    quartiles: &QuartileAssignment,
) -> Result<DistributionTable, AnalysisError> {
    let mut table = DistributionTable::default();
    for ex in examples {
        let q = quartiles
            .quartile(&ex.sub_doc_id)
            .ok_or_else(|| AnalysisError::Unassigned(ex.sub_doc_id.clone()))?;
        table.counts.entry(ex.category).or_insert([0; 4])[q as usize - 1] += 1;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{CorpusId, SideAnnotation};

    fn rec(sub: Option<&str>) -> AnnotatedRecord {
        AnnotatedRecord {
            corpus: CorpusId::Other,
            doc_id: "d".into(),
            seg_index: 0,
            src_text: "a".into(),
            tgt_text: "b".into(),
            src: SideAnnotation::not_found(1.0, None),
            tgt: SideAnnotation::not_found(1.0, None),
            sub_doc_id: sub.map(String::from),
            slide_score: None,
        }
    }

    fn kept(tags: &str) -> KeptAt {
        tags.parse().unwrap()
    }

    #[test]
    fn stats_hand_count() {
        // sizes 2, 3, 4; all loose; "b" and "c" at medium; "c" strict
        let mut rows = Vec::new();
        for (id, n, k) in [
            ("a", 2, "loose75"),
            ("b", 3, "loose75,medium50"),
            ("c", 4, "loose75,medium50,strict25"),
        ] {
            for _ in 0..n {
                rows.push((rec(Some(id)), kept(k)));
            }
        }
        rows.push((rec(None), KeptAt::none()));
        let r = dataset_stats("de-en", rows.iter().map(|(r, k)| (r, *k)));
        assert_eq!(r.get(Level::Raw).n_segments, 10);
        assert_eq!(r.get(Level::Docs), LevelCounts { n_segments: 9, n_subdocs: 3 });
        assert_eq!(r.get(Level::Loose75), LevelCounts { n_segments: 9, n_subdocs: 3 });
        assert_eq!(r.get(Level::Medium50), LevelCounts { n_segments: 7, n_subdocs: 2 });
        assert_eq!(r.get(Level::Strict25), LevelCounts { n_segments: 4, n_subdocs: 1 });
        assert!(r.is_monotone());
        assert!(r.to_tsv().contains("de-en\tmedium50\t7\t2"));
    }

    #[test]
    fn empty_stats() {
        let r = dataset_stats("de-en", std::iter::empty());
        for l in Level::ALL {
            assert_eq!(r.get(l), LevelCounts::default());
        }
    }

    #[test]
    fn quartile_sizes() {
        let q = assign_quartiles(&[0.8, 0.1, 0.5, 0.7, 0.2, 0.6, 0.3, 0.4]);
        assert_eq!(q, vec![1, 4, 2, 1, 4, 2, 3, 3]);
        assert_eq!(assign_quartiles(&[0.9]), vec![1]);
        assert!(assign_quartiles(&[]).is_empty());
        // ties stay in input order
        assert_eq!(assign_quartiles(&[0.5, 0.5, 0.5, 0.5, 0.5]), vec![1, 1, 2, 3, 4]);
    }

    #[test]
    fn category_spellings() {
        let c: PronounCategory = "Intra. Fem.".parse().unwrap();
        assert_eq!(c.to_string(), "intra-fem");
        assert_eq!("inter_neut".parse::<PronounCategory>().unwrap().gender, Gender::Neut);
        assert!("intra-plural".parse::<PronounCategory>().is_err());
    }

    #[test]
    fn unknown_category_reports_line() {
        let err = read_phenomena(std::io::Cursor::new("d#0\tinter-fem\nd#1\tbogus\n")).unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "{err}");
    }

    #[test]
    fn degenerate_distribution() {
        let qa = QuartileAssignment::from_scores([("a", 0.9), ("b", 0.1), ("c", 0.2), ("d", 0.3)]);
        let cat: PronounCategory = "inter-masc".parse().unwrap();
        let ex = vec![
            PhenomenonExample { sub_doc_id: "a".into(), category: cat, score: None },
            PhenomenonExample { sub_doc_id: "a".into(), category: cat, score: None },
        ];
        let t = phenomenon_distribution(&ex, &qa).unwrap();
        assert_eq!(t.percentages(cat), Some([100.0, 0.0, 0.0, 0.0]));
        let missing = vec![PhenomenonExample { sub_doc_id: "zz".into(), category: cat, score: None }];
        assert!(matches!(
            phenomenon_distribution(&missing, &qa),
            Err(AnalysisError::Unassigned(_))
        ));
    }
}
