mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Restore document structure to sentence-aligned bitext and build
/// document-level training data from it.
#[derive(Debug, Parser)]
#[command(name = "docmend", version)]
pub struct Cli {
    /// TOML pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    src_lang: Option<String>,
    #[arg(long, global = true)]
    tgt_lang: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Locate every bitext segment in its monolingual source documents.
    Reconstruct(ReconstructArgs),
    /// Cut annotated documents into consecutive sub-documents.
    Break(BreakArgs),
    /// Score sub-documents with sliding windows and tag the cutoffs.
    Score(ScoreArgs),
    /// Keep the records of sub-documents that survive a cutoff.
    FilterDocs(FilterDocsArgs),
    /// Sentence-level filtering baseline over a two-column bitext.
    FilterSents(FilterSentsArgs),
    /// Concatenate sub-documents into training samples or inference inputs.
    Contextgen(ContextgenArgs),
    /// Segment and sub-document counts at every filtering level.
    Stats(StatsArgs),
    /// Share of each phenomenon category per score quartile.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ReconstructArgs {
    /// Bitext TSV: doc_id, src_text, tgt_text, grouped by document.
    #[arg(long)]
    pub bitext: PathBuf,
    /// Source-language documents: a directory of files or a doc_id/base64 TSV.
    #[arg(long)]
    pub src_mono: PathBuf,
    #[arg(long)]
    pub tgt_mono: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// paracrawl, news_commentary, europarl or other.
    #[arg(long)]
    pub corpus: Option<String>,
    /// Directory of non-breaking prefix files.
    #[arg(long)]
    pub prefixes: Option<PathBuf>,
    /// Language-id table: text, lang, probability.
    #[arg(long)]
    pub lid_table: Option<PathBuf>,
    #[arg(long)]
    pub lid_default: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct BreakArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub lid_threshold: Option<f64>,
    #[arg(long)]
    pub dup_threshold: Option<u64>,
    #[arg(long)]
    pub min_len: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    /// Records carrying sub_doc_id, as written by `break`.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// "mock" or a scoring service URL.
    #[arg(long)]
    pub scorer: Option<String>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Also list the top fraction of sub-documents.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Where the kept list goes (default: <out>.kept).
    #[arg(long)]
    pub kept: Option<PathBuf>,
    /// Per-sub-document summary in rank order.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FilterDocsArgs {
    /// Scored records, as written by `score`.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// loose, medium or strict.
    #[arg(long)]
    pub level: String,
}

#[derive(Debug, Args, Serialize)]
pub struct FilterSentsArgs {
    /// Two-column TSV: src_text, tgt_text.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Rejected pairs with their reason (default: <out>.rejects).
    #[arg(long)]
    pub rejects: Option<PathBuf>,
    /// Directory of per-language character histograms.
    #[arg(long)]
    pub charsets: Option<PathBuf>,
    #[arg(long)]
    pub lid_table: Option<PathBuf>,
    #[arg(long)]
    pub lid_table_secondary: Option<PathBuf>,
    /// "trigram" or "constant:<value>".
    #[arg(long)]
    pub similarity: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    Train,
    Eval,
}

#[derive(Debug, Args, Serialize)]
pub struct ContextgenArgs {
    /// Records carrying sub_doc_id.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "train")]
    pub mode: SampleMode,
    #[arg(long)]
    pub separator: Option<String>,
    #[arg(long)]
    pub max_segments: Option<usize>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    /// Segment ranges of each sample (default: <out>.ranges).
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Two-column sample file to interleave with the generated samples.
    #[arg(long)]
    pub mix_with: Option<PathBuf>,
    /// Interleaving ratio generated:mixed, e.g. 1:1.
    #[arg(long, default_value = "1:1")]
    pub ratio: String,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    /// Scored records, as written by `score`.
    #[arg(long)]
    pub scored: PathBuf,
    /// Full reconstruct output, for the raw segment count.
    #[arg(long)]
    pub annotated: Option<PathBuf>,
    /// Also write the report as TSV.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Scored records, as written by `score`.
    #[arg(long)]
    pub scored: PathBuf,
    /// Phenomenon annotations: sub_doc_id, category.
    #[arg(long)]
    pub phenomena: PathBuf,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
