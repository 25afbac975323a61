use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::Context;
use docmend::analysis::{dataset_stats, phenomenon_distribution, read_phenomena, QuartileAssignment};
use docmend::contextgen::{emit_eval_inputs, emit_train_samples, mix_streams, ContextSample};
use docmend::mono::{MonoStore, RuleSplitter};
use docmend::pipeline::{self, parse_bitext_line, ReconstructJob};
use docmend::reconstruct::{ConstantClassifier, FixtureClassifier, LanguageClassifier};
use docmend::record::{parse_record, serialize_record, AnnotatedRecord};
use docmend::sentfilter::{
    run_filter, CharsetTable, ConstantSimilarity, SentenceFilter, SimilarityModel, TrigramSimilarity,
};
use docmend::slide::{
    parse_scored, select_top, serialize_scored, summary_line, Cutoff, KeptAt, MockScorer, QualityScorer,
    RemoteScorer, ScoreError,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_similarity, PipelineConfig, SimilarityChoice};
use crate::manifest::{digest, AtomicFile, Manifest, OutputCount};
use crate::{
    AnalyzeArgs, BreakArgs, Cli, Command, ContextgenArgs, FilterDocsArgs, FilterSentsArgs, ReconstructArgs,
    SampleMode, ScoreArgs, StatsArgs,
};

/// Bad invocation or configuration; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 1 for usage errors, 3 when the scoring service failed, 2 for everything
/// else (unreadable or malformed input).
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if let Some(err) = cause.downcast_ref::<docmend::Error>() {
            return if err.is_external() { 3 } else { 2 };
        }
        if let Some(ScoreError::Backend { .. } | ScoreError::Protocol { .. }) = cause.downcast_ref::<ScoreError>() {
            return 3;
        }
    }
    2
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(l) = cli.src_lang {
        cfg.src_lang = l;
    }
    if let Some(l) = cli.tgt_lang {
        cfg.tgt_lang = l;
    }
    apply_overrides(&mut cfg, &cli.command);
    cfg.validate().map_err(|e| usage(format!("invalid configuration: {e:#}")))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .context("starting worker pool")?;
    pool.install(|| match &cli.command {
        Command::Reconstruct(a) => reconstruct(&cfg, a),
        Command::Break(a) => docbreak(&cfg, a),
        Command::Score(a) => score(&cfg, a),
        Command::FilterDocs(a) => filter_docs(&cfg, a),
        Command::FilterSents(a) => filter_sents(&cfg, a),
        Command::Contextgen(a) => contextgen(&cfg, a),
        Command::Stats(a) => stats(&cfg, a),
        Command::Analyze(a) => analyze(&cfg, a),
    })
}

fn apply_overrides(cfg: &mut PipelineConfig, cmd: &Command) {
    fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
        if let Some(v) = v {
            *slot = v.clone();
        }
    }
    match cmd {
        Command::Reconstruct(a) => {
            set(&mut cfg.corpus, &a.corpus);
            set(&mut cfg.lid_default, &a.lid_default);
            if a.prefixes.is_some() {
                cfg.paths.prefixes = a.prefixes.clone();
            }
            if a.lid_table.is_some() {
                cfg.paths.lid_table = a.lid_table.clone();
            }
        }
        Command::Break(a) => {
            set(&mut cfg.docbreak.lid_threshold, &a.lid_threshold);
            set(&mut cfg.docbreak.dup_threshold, &a.dup_threshold);
            set(&mut cfg.docbreak.min_subdoc_len, &a.min_len);
        }
        Command::Score(a) => {
            set(&mut cfg.scorer, &a.scorer);
            set(&mut cfg.batch_size, &a.batch_size);
            set(&mut cfg.window.window, &a.window);
            set(&mut cfg.window.stride, &a.stride);
        }
        Command::FilterSents(a) => {
            set(&mut cfg.similarity, &a.similarity);
            if a.charsets.is_some() {
                cfg.paths.charsets = a.charsets.clone();
            }
            if a.lid_table.is_some() {
                cfg.paths.lid_table = a.lid_table.clone();
            }
            if a.lid_table_secondary.is_some() {
                cfg.paths.lid_table_secondary = a.lid_table_secondary.clone();
            }
        }
        Command::Contextgen(a) => {
            set(&mut cfg.context.separator, &a.separator);
            set(&mut cfg.context.max_segments, &a.max_segments);
            set(&mut cfg.context.max_tokens, &a.max_tokens);
        }
        Command::FilterDocs(_) | Command::Stats(_) | Command::Analyze(_) => {}
    }
}

struct Run<'a> {
    command: &'static str,
    cfg: &'a PipelineConfig,
    args: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<OutputCount>,
    counts: serde_json::Map<String, serde_json::Value>,
}

impl<'a> Run<'a> {
    fn new(command: &'static str, cfg: &'a PipelineConfig, args: &impl Serialize) -> Self {
        Run {
            command,
            cfg,
            args: serde_json::to_value(args).unwrap_or_default(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            counts: serde_json::Map::new(),
        }
    }

    fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    fn count(&mut self, key: &str, v: impl Into<serde_json::Value>) {
        self.counts.insert(key.to_string(), v.into());
    }

    fn write_lines<I, S>(&mut self, path: &Path, lines: I) -> anyhow::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut f = AtomicFile::create(path)?;
        for l in lines {
            f.line(l.as_ref())?;
        }
        self.outputs.push(f.commit()?);
        Ok(())
    }

    fn finish(self) -> anyhow::Result<()> {
        let inputs = self.inputs.iter().map(|p| digest(p)).collect::<anyhow::Result<Vec<_>>>()?;
        for o in &self.outputs {
            log::info!("{}: wrote {} lines to {}", self.command, o.records, o.path);
        }
        Manifest {
            tool: "docmend",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command.to_string(),
            config: serde_json::to_value(self.cfg)?,
            args: self.args,
            inputs,
            outputs: self.outputs,
            counts: self.counts,
        }
        .write()
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::with_capacity(1 << 20, f))
}

/// Apply `parse` to every line, attaching the file and line number to errors.
fn parse_lines<T, F>(path: &Path, mut parse: F) -> anyhow::Result<Vec<T>>
where
    F: FnMut(usize, &str) -> Result<T, docmend::Error>,
{
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        out.push(parse(i + 1, &line).with_context(|| format!("in {}", path.display()))?);
    }
    Ok(out)
}

fn read_records(path: &Path) -> anyhow::Result<Vec<AnnotatedRecord>> {
    parse_lines(path, |n, l| Ok(parse_record(l).map_err(|e| e.at_line(n))?))
}

fn read_scored(path: &Path) -> anyhow::Result<Vec<(AnnotatedRecord, KeptAt)>> {
    parse_lines(path, |n, l| Ok(parse_scored(l).map_err(|e| e.at_line(n))?))
}

fn read_pairs(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    parse_lines(path, |n, l| {
        let mut cols = l.split('\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(s), Some(t), None) => Ok((s.to_string(), t.to_string())),
            _ => Err(docmend::Error::Input(format!(
                "line {n}: expected 2 tab-separated columns, found {}",
                l.split('\t').count()
            ))),
        }
    })
}

fn serialize_all<'r>(records: impl Iterator<Item = &'r AnnotatedRecord>) -> anyhow::Result<Vec<String>> {
    Ok(records
        .map(serialize_record)
        .collect::<Result<Vec<_>, _>>()
        .map_err(docmend::Error::from)?)
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_lid(path: Option<&Path>, default: f64) -> anyhow::Result<Box<dyn LanguageClassifier>> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let id = format!("table:{}", p.display());
            let table = FixtureClassifier::parse_table(&id, default, &text)
                .map_err(|e| docmend::Error::Input(format!("{}: {e}", p.display())))?;
            Ok(Box::new(table))
        }
        None => Ok(Box::new(ConstantClassifier::new(default))),
    }
}

fn reconstruct(cfg: &PipelineConfig, a: &ReconstructArgs) -> anyhow::Result<()> {
    let mut run = Run::new("reconstruct", cfg, a);
    run.input(&a.bitext);
    run.input(&a.src_mono);
    run.input(&a.tgt_mono);
    let rows = parse_lines(&a.bitext, |n, l| Ok(parse_bitext_line(l).map_err(|e| e.at_line(n))?))?;
    let load = |p: &Path| MonoStore::open(p).with_context(|| format!("loading documents from {}", p.display()));
    let (src_store, tgt_store) = (load(&a.src_mono)?, load(&a.tgt_mono)?);

    let mut splitter = RuleSplitter::with_builtin_prefixes();
    if let Some(dir) = &cfg.paths.prefixes {
        run.input(dir);
        splitter
            .load_prefix_dir(dir)
            .with_context(|| format!("loading prefixes from {}", dir.display()))?;
    }
    if let Some(p) = &cfg.paths.lid_table {
        run.input(p);
    }
    let lid = load_lid(cfg.paths.lid_table.as_deref(), cfg.lid_default)?;
    let job = ReconstructJob {
        corpus: cfg.corpus_id()?,
        src_lang: &cfg.src_lang,
        tgt_lang: &cfg.tgt_lang,
        src_store: &src_store,
        tgt_store: &tgt_store,
        splitter: &splitter,
        lid: lid.as_ref(),
    };
    let records = pipeline::reconstruct_corpus(&job, rows)?;
    run.count("segments", records.len());
    run.count("src_matched", records.iter().filter(|r| r.src.is_found()).count());
    run.count("tgt_matched", records.iter().filter(|r| r.tgt.is_found()).count());
    let lines = serialize_all(records.iter())?;
    run.write_lines(&a.out, &lines)?;
    run.finish()
}

fn docbreak(cfg: &PipelineConfig, a: &BreakArgs) -> anyhow::Result<()> {
    let mut run = Run::new("break", cfg, a);
    run.input(&a.input);
    let records = read_records(&a.input)?;
    run.count("input_segments", records.len());
    let subdocs = pipeline::break_corpus(records, &cfg.docbreak)?;
    run.count("subdocs", subdocs.len());
    run.count("segments", subdocs.iter().map(|s| s.len()).sum::<usize>());
    let lines = serialize_all(subdocs.iter().flat_map(|s| s.records.iter()))?;
    run.write_lines(&a.out, &lines)?;
    run.finish()
}

fn build_scorer(cfg: &PipelineConfig) -> Box<dyn QualityScorer> {
    if cfg.scorer == "mock" {
        Box::new(MockScorer)
    } else {
        Box::new(RemoteScorer::new(&cfg.scorer, cfg.batch_size))
    }
}

fn score(cfg: &PipelineConfig, a: &ScoreArgs) -> anyhow::Result<()> {
    if let Some(f) = a.fraction {
        if !(f > 0.0 && f <= 1.0) {
            return Err(usage(format!("--fraction {f} must be in (0, 1]")));
        }
    }
    let mut run = Run::new("score", cfg, a);
    run.input(&a.input);
    let records = read_records(&a.input)?;
    let mut subdocs = pipeline::subdocs_from_records(records)?;
    let scorer = build_scorer(cfg);
    let scored = pipeline::score_corpus(&mut subdocs, scorer.as_ref(), &cfg.window)?;
    run.count("scorer", scorer.identifier());
    run.count("subdocs", scored.len());
    for c in Cutoff::ALL {
        run.count(c.tag(), scored.iter().filter(|s| s.kept_at.contains(c)).count());
    }

    let mut lines = Vec::new();
    for (sd, s) in subdocs.iter().zip(&scored) {
        for r in &sd.records {
            lines.push(serialize_scored(r, s.kept_at).map_err(docmend::Error::from)?);
        }
    }
    run.write_lines(&a.out, &lines)?;
    if let Some(path) = &a.summary {
        let ranked = select_top(&scored, 1.0)?;
        run.write_lines(path, ranked.into_iter().map(summary_line))?;
    }
    if let Some(f) = a.fraction {
        let kept = select_top(&scored, f)?;
        run.count("kept", kept.len());
        let path = a.kept.clone().unwrap_or_else(|| sibling(&a.out, ".kept"));
        run.write_lines(&path, kept.into_iter().map(|s| s.sub_doc_id.as_str()))?;
    }
    run.finish()
}

fn parse_level(s: &str) -> anyhow::Result<Cutoff> {
    match s {
        "loose" => Ok(Cutoff::Loose75),
        "medium" => Ok(Cutoff::Medium50),
        "strict" => Ok(Cutoff::Strict25),
        other => other.parse().map_err(|e: String| usage(e)),
    }
}

fn filter_docs(cfg: &PipelineConfig, a: &FilterDocsArgs) -> anyhow::Result<()> {
    let level = parse_level(&a.level)?;
    let mut run = Run::new("filter-docs", cfg, a);
    run.input(&a.input);
    let scored = read_scored(&a.input)?;
    let kept: Vec<&AnnotatedRecord> = scored.iter().filter(|(_, k)| k.contains(level)).map(|(r, _)| r).collect();
    run.count("input_segments", scored.len());
    run.count("segments", kept.len());
    let lines = serialize_all(kept.into_iter())?;
    run.write_lines(&a.out, &lines)?;
    run.finish()
}

fn filter_sents(cfg: &PipelineConfig, a: &FilterSentsArgs) -> anyhow::Result<()> {
    let mut run = Run::new("filter-sents", cfg, a);
    run.input(&a.input);
    let charset_dir = cfg
        .paths
        .charsets
        .as_deref()
        .ok_or_else(|| usage("filter-sents needs a charset directory (--charsets or paths.charsets)"))?;
    run.input(charset_dir);
    let charsets = CharsetTable::load_dir(charset_dir).map_err(docmend::Error::from)?;
    for p in [&cfg.paths.lid_table, &cfg.paths.lid_table_secondary].into_iter().flatten() {
        run.input(p);
    }
    let primary = load_lid(cfg.paths.lid_table.as_deref(), cfg.lid_default)?;
    let secondary = match &cfg.paths.lid_table_secondary {
        Some(p) => Some(load_lid(Some(p), cfg.lid_default)?),
        None => None,
    };
    let second: &dyn LanguageClassifier = secondary.as_deref().unwrap_or(primary.as_ref());
    let sim: Box<dyn SimilarityModel> = match parse_similarity(&cfg.similarity)? {
        SimilarityChoice::Constant(v) => Box::new(ConstantSimilarity::new(v)),
        SimilarityChoice::Trigram => Box::new(TrigramSimilarity),
    };
    let filter = SentenceFilter::new(
        cfg.sentfilter,
        &cfg.src_lang,
        &cfg.tgt_lang,
        &charsets,
        [primary.as_ref(), second],
        sim.as_ref(),
    )
    .map_err(|e| usage(e.to_string()))?;

    let pairs = read_pairs(&a.input)?;
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    let report = run_filter(
        pairs,
        &filter,
        |s, t| kept.push(format!("{s}\t{t}")),
        |s, t, r| rejected.push(format!("{s}\t{t}\t{r}")),
    );
    run.count("input", report.input);
    run.count("kept", report.kept);
    run.count(
        "rejected",
        report.rejected.iter().map(|(r, n)| (r.tag().to_string(), json!(n))).collect::<serde_json::Map<_, _>>(),
    );
    run.write_lines(&a.out, &kept)?;
    let rejects = a.rejects.clone().unwrap_or_else(|| sibling(&a.out, ".rejects"));
    run.write_lines(&rejects, &rejected)?;
    run.finish()
}

fn parse_ratio(s: &str) -> anyhow::Result<(usize, usize)> {
    let bad = || usage(format!("--ratio {s:?} must look like a:b with positive integers"));
    let (x, y) = s.split_once(':').ok_or_else(bad)?;
    let r = (x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?);
    if r.0 == 0 || r.1 == 0 {
        return Err(bad());
    }
    Ok(r)
}

fn sidecar_line(s: &ContextSample) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}",
        s.sub_doc_id,
        s.first_seg_index,
        s.last_seg_index,
        s.n_segments,
        u8::from(s.oversize)
    )
}

fn contextgen(cfg: &PipelineConfig, a: &ContextgenArgs) -> anyhow::Result<()> {
    let ratio = parse_ratio(&a.ratio)?;
    let mut run = Run::new("contextgen", cfg, a);
    run.input(&a.input);
    let subdocs = pipeline::subdocs_from_records(read_records(&a.input)?)?;
    let samples: Vec<ContextSample> = subdocs
        .par_iter()
        .map(|sd| match a.mode {
            SampleMode::Train => emit_train_samples(sd, &cfg.context),
            SampleMode::Eval => emit_eval_inputs(sd, &cfg.context),
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    run.count("subdocs", subdocs.len());
    run.count("samples", samples.len());
    run.count("oversize", samples.iter().filter(|s| s.oversize).count());

    let mut rows: Vec<(String, String)> = samples
        .iter()
        .map(|s| (format!("{}\t{}", s.src_text, s.tgt_text), sidecar_line(s)))
        .collect();
    if let Some(other) = &a.mix_with {
        run.input(other);
        let extra: Vec<(String, String)> = read_pairs(other)?
            .into_iter()
            .map(|(s, t)| (format!("{s}\t{t}"), "-\t-\t-\t1\t0".to_string()))
            .collect();
        run.count("mixed_in", extra.len());
        rows = mix_streams(rows, extra, ratio, false, cfg.seed)?.collect();
    }
    run.write_lines(&a.out, rows.iter().map(|r| r.0.as_str()))?;
    let sidecar = a.sidecar.clone().unwrap_or_else(|| sibling(&a.out, ".ranges"));
    run.write_lines(&sidecar, rows.iter().map(|r| r.1.as_str()))?;
    run.finish()
}

fn stats(cfg: &PipelineConfig, a: &StatsArgs) -> anyhow::Result<()> {
    let mut run = Run::new("stats", cfg, a);
    run.input(&a.scored);
    let scored = read_scored(&a.scored)?;
    let report = match &a.annotated {
        Some(p) => {
            run.input(p);
            let all = read_records(p)?;
            let by_seg: HashMap<(&str, usize), &(AnnotatedRecord, KeptAt)> =
                scored.iter().map(|x| ((x.0.doc_id.as_str(), x.0.seg_index), x)).collect();
            let joined: Vec<(&AnnotatedRecord, KeptAt)> = all
                .iter()
                .map(|r| match by_seg.get(&(r.doc_id.as_str(), r.seg_index)) {
                    Some((s, k)) => (s, *k),
                    None => (r, KeptAt::none()),
                })
                .collect();
            dataset_stats(&cfg.lang_pair(), joined)
        }
        None => dataset_stats(&cfg.lang_pair(), scored.iter().map(|(r, k)| (r, *k))),
    };
    print!("{report}");
    if let Some(out) = &a.out {
        run.write_lines(out, report.to_tsv().lines())?;
        run.finish()?;
    }
    Ok(())
}

fn analyze(cfg: &PipelineConfig, a: &AnalyzeArgs) -> anyhow::Result<()> {
    let mut run = Run::new("analyze", cfg, a);
    run.input(&a.scored);
    run.input(&a.phenomena);
    let scored = read_scored(&a.scored)?;
    let mut seen = std::collections::HashSet::new();
    let per_doc: Vec<(&str, f64)> = scored
        .iter()
        .filter_map(|(r, _)| Some((r.sub_doc_id.as_deref()?, r.slide_score?)))
        .filter(|(id, _)| seen.insert(*id))
        .collect();
    let quartiles = QuartileAssignment::from_scores(per_doc);
    let examples = read_phenomena(open(&a.phenomena)?)
        .map_err(docmend::Error::from)
        .with_context(|| format!("in {}", a.phenomena.display()))?;
    let table = phenomenon_distribution(&examples, &quartiles).map_err(docmend::Error::from)?;
    run.count("subdocs", quartiles.len());
    run.count("examples", examples.len());
    print!("{table}");
    if let Some(out) = &a.out {
        run.write_lines(out, table.to_tsv().lines())?;
        run.finish()?;
    }
    Ok(())
}
