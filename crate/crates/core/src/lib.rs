//! Restores document structure to sentence-level bitext and derives
//! document-level training data from it.
//!
//! Stages, each usable on its own:
//!
//! - [`mono`]: whitespace normalization, paragraph map and sentence spans of
//!   monolingual source documents.
//! - [`reconstruct`]: exact-match span annotation of every bitext segment.
//! - [`docbreak`]: cutting annotated documents into consecutive sub-documents.
//! - [`slide`]: sliding-window quality scoring and top-fraction selection.
//! - [`sentfilter`]: the sentence-level filtering baseline.
//! - [`contextgen`]: context-concatenated training and inference samples.
//! - [`analysis`]: per-level dataset statistics and quartile analysis.
//!
//! [`record`] defines the TSV record shared between stages and [`pipeline`]
//! holds the corpus-level drivers used by the command-line tool.

pub mod analysis;
pub mod contextgen;
pub mod docbreak;
pub mod error;
pub mod mono;
pub mod pipeline;
pub mod reconstruct;
pub mod record;
pub mod sentfilter;
pub mod slide;

pub use error::{Error, Result};
pub use record::{AnnotatedRecord, CorpusId, SideAnnotation, Span, SubDocument};
