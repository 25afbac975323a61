//! Context-concatenated sample emission for document-level training and
//! contextual inference, plus the two-stream mixer.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::SubDocument;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid context config: {0}")]
pub struct ContextError(pub String);

pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl TokenCounter for WhitespaceTokenizer {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextConfig {
    pub max_segments: usize,
    pub max_tokens: usize,
    pub separator: String,
    #[serde(skip)]
    pub tokenizer: Arc<dyn TokenCounter>,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            max_segments: 10,
            max_tokens: 256,
            separator: "<eos>".to_string(),
            tokenizer: Arc::new(WhitespaceTokenizer),
        }
    }
}

impl fmt::Debug for ContextConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContextConfig")
            .field("max_segments", &self.max_segments)
            .field("max_tokens", &self.max_tokens)
            .field("separator", &self.separator)
            .finish_non_exhaustive()
    }
}

impl ContextConfig {
    pub fn validate(&self) -> Result<(), ContextError> {
        if self.max_segments == 0 || self.max_tokens == 0 {
            return Err(ContextError("max_segments and max_tokens must be at least 1".into()));
        }
        if self.separator.trim().is_empty() {
            return Err(ContextError("separator must be non-empty".into()));
        }
        if self.separator.contains(['\t', '\n', '\r']) {
            return Err(ContextError("separator cannot contain tabs or newlines".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextSample {
    pub sub_doc_id: String,
    pub first_seg_index: usize,
    pub last_seg_index: usize,
    pub src_text: String,
    pub tgt_text: String,
    pub n_segments: usize,
    /// A lone segment longer than the token cap; passed through untruncated.
    pub oversize: bool,
}

struct Packer<'a> {
    subdoc: &'a SubDocument,
    cfg: &'a ContextConfig,
    joint: String,
}

impl<'a> Packer<'a> {
    fn new(subdoc: &'a SubDocument, cfg: &'a ContextConfig) -> Self {
        Packer {
            subdoc,
            cfg,
            joint: format!(" {} ", cfg.separator),
        }
    }

    fn join(&self, range: Range<usize>, src: bool) -> String {
        let texts: Vec<&str> = self.subdoc.records[range]
            .iter()
            .map(|r| if src { r.src_text.as_str() } else { r.tgt_text.as_str() })
            .collect();
        texts.join(&self.joint)
    }

    /// Token count of the longer side, separators included.
    fn tokens(&self, range: Range<usize>) -> usize {
        let tok = &self.cfg.tokenizer;
        tok.count(&self.join(range.clone(), true))
            .max(tok.count(&self.join(range, false)))
    }

    fn fits(&self, range: Range<usize>) -> bool {
        range.len() <= self.cfg.max_segments && self.tokens(range) <= self.cfg.max_tokens
    }

    fn sample(&self, range: Range<usize>, oversize: bool) -> ContextSample {
        let recs = &self.subdoc.records;
        ContextSample {
            sub_doc_id: self.subdoc.sub_doc_id.clone(),
            first_seg_index: recs[range.start].seg_index,
            last_seg_index: recs[range.end - 1].seg_index,
            src_text: self.join(range.clone(), true),
            tgt_text: self.join(range.clone(), false),
            n_segments: range.len(),
            oversize,
        }
    }
}

/// Greedy left-to-right partition of a sub-document into samples that respect
/// both caps. Every segment lands in exactly one sample.
pub fn emit_train_samples(subdoc: &SubDocument, cfg: &ContextConfig) -> Vec<ContextSample> {
    let p = Packer::new(subdoc, cfg);
    let n = subdoc.records.len();
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        let oversize = !p.fits(start..end);
        if !oversize {
            while end < n && p.fits(start..end + 1) {
                end += 1;
            }
        }
        out.push(p.sample(start..end, oversize));
        start = end;
    }
    out
}

/// One sample per segment: the segment preceded by as much context as the
/// caps allow. The segment to translate is always last.
pub fn emit_eval_inputs(subdoc: &SubDocument, cfg: &ContextConfig) -> Vec<ContextSample> {
    let p = Packer::new(subdoc, cfg);
    (0..subdoc.records.len())
        .map(|j| {
            let oversize = !p.fits(j..j + 1);
            let mut start = j;
            if !oversize {
                while start > 0 && p.fits(start - 1..j + 1) {
                    start -= 1;
                }
            }
            p.sample(start..j + 1, oversize)
        })
        .collect()
}

/// Interleaves two sample streams at a fixed `a:b` ratio.
///
/// Bounded mode drains the remaining stream once the other runs out. Cycling
/// mode restarts an exhausted stream, reshuffling it with a seeded RNG on
/// every restart, and never ends unless both sources are empty.
#[derive(Debug, Clone)]
pub struct MixStream<T> {
    sources: [Vec<T>; 2],
    order: [Vec<usize>; 2],
    pos: [usize; 2],
    epoch: [u64; 2],
    exhausted: [bool; 2],
    quota: [usize; 2],
    turn: usize,
    taken: usize,
    cycle: bool,
    seed: u64,
}

pub fn mix_streams<T: Clone>(
    first: Vec<T>,
    second: Vec<T>,
    ratio: (usize, usize),
    cycle: bool,
    seed: u64,
) -> Result<MixStream<T>, ContextError> {
    if ratio.0 == 0 || ratio.1 == 0 {
        return Err(ContextError(format!("mixing ratio {}:{} must be positive", ratio.0, ratio.1)));
    }
    let order = [(0..first.len()).collect(), (0..second.len()).collect()];
    Ok(MixStream {
        exhausted: [first.is_empty(), second.is_empty()],
        sources: [first, second],
        order,
        pos: [0, 0],
        epoch: [0, 0],
        quota: [ratio.0, ratio.1],
        turn: 0,
        taken: 0,
        cycle,
        seed,
    })
}

impl<T: Clone> MixStream<T> {
    fn restart(&mut self, s: usize) {
        self.epoch[s] += 1;
        self.pos[s] = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.seed ^ ((s as u64) << 56) ^ self.epoch[s].wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        self.order[s].shuffle(&mut rng);
    }
}

impl<T: Clone> Iterator for MixStream<T> {
    type Item = T;

    fn next(&mut self) -> Option<T> {
        loop {
            if self.exhausted[0] && self.exhausted[1] {
                return None;
            }
            let s = self.turn;
            if self.exhausted[s] {
                self.turn = 1 - s;
                self.taken = 0;
                continue;
            }
            if self.pos[s] == self.sources[s].len() {
                if self.cycle {
                    self.restart(s);
                } else {
                    self.exhausted[s] = true;
                }
                continue;
            }
            let item = self.sources[s][self.order[s][self.pos[s]]].clone();
            self.pos[s] += 1;
            self.taken += 1;
            if self.taken >= self.quota[s] && !self.exhausted[1 - s] {
                self.turn = 1 - s;
                self.taken = 0;
            }
            return Some(item);
        }
    }
}
