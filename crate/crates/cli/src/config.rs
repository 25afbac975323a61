use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use docmend::contextgen::ContextConfig;
use docmend::docbreak::BreakConfig;
use docmend::record::CorpusId;
use docmend::sentfilter::SentFilterConfig;
use docmend::slide::{WindowConfig, SERVICE_MAX_BATCH};
use serde::{Deserialize, Serialize};

pub const SCORER_ENV: &str = "DOCMEND_SCORER_ENDPOINT";

/// Model and resource locations. Every path given must exist.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub prefixes: Option<PathBuf>,
    pub charsets: Option<PathBuf>,
    pub lid_table: Option<PathBuf>,
    pub lid_table_secondary: Option<PathBuf>,
}

/// Shared configuration, read from TOML. Command-line flags override it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub src_lang: String,
    pub tgt_lang: String,
    pub corpus: String,
    /// "mock" or the base URL of a scoring service.
    pub scorer: String,
    pub batch_size: usize,
    /// 0 means one worker per core.
    pub workers: usize,
    pub seed: u64,
    /// Probability assigned by the table classifier to texts it does not list.
    pub lid_default: f64,
    /// "constant:<value>" or "trigram".
    pub similarity: String,
    pub paths: Paths,
    #[serde(rename = "break")]
    pub docbreak: BreakConfig,
    pub window: WindowConfig,
    pub sentfilter: SentFilterConfig,
    pub context: ContextConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            src_lang: "de".into(),
            tgt_lang: "en".into(),
            corpus: "other".into(),
            scorer: "mock".into(),
            batch_size: SERVICE_MAX_BATCH,
            workers: 0,
            seed: 0,
            lid_default: 1.0,
            similarity: "constant:1.0".into(),
            paths: Paths::default(),
            docbreak: BreakConfig::default(),
            window: WindowConfig::default(),
            sentfilter: SentFilterConfig::default(),
            context: ContextConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => PipelineConfig::default(),
        };
        if let Ok(endpoint) = std::env::var(SCORER_ENV) {
            if !endpoint.is_empty() {
                cfg.scorer = endpoint;
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.corpus_id()?;
        self.docbreak.validate()?;
        self.window.validate()?;
        self.sentfilter.validate()?;
        self.context.validate()?;
        if !(0.0..=1.0).contains(&self.lid_default) {
            bail!("lid_default {} outside [0, 1]", self.lid_default);
        }
        if self.batch_size == 0 {
            bail!("batch_size must be at least 1");
        }
        if self.src_lang.is_empty() || self.tgt_lang.is_empty() {
            bail!("src_lang and tgt_lang must be set");
        }
        parse_similarity(&self.similarity)?;
        let p = &self.paths;
        for path in [&p.prefixes, &p.charsets, &p.lid_table, &p.lid_table_secondary].into_iter().flatten() {
            if !path.exists() {
                bail!("configured path {} does not exist", path.display());
            }
        }
        Ok(())
    }

    pub fn corpus_id(&self) -> anyhow::Result<CorpusId> {
        self.corpus.parse().map_err(|e: String| anyhow::anyhow!(e))
    }

    pub fn lang_pair(&self) -> String {
        format!("{}-{}", self.src_lang, self.tgt_lang)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimilarityChoice {
    Constant(f64),
    Trigram,
}

pub fn parse_similarity(s: &str) -> anyhow::Result<SimilarityChoice> {
    if s == "trigram" {
        return Ok(SimilarityChoice::Trigram);
    }
    if let Some(v) = s.strip_prefix("constant:") {
        let v: f64 = v.parse().with_context(|| format!("bad similarity constant {v:?}"))?;
        if !(0.0..=1.0).contains(&v) {
            bail!("similarity constant {v} outside [0, 1]");
        }
        return Ok(SimilarityChoice::Constant(v));
    }
    bail!("unknown similarity model {s:?}; expected \"trigram\" or \"constant:<value>\"")
}
