//! Analysis toolkit for MQM-annotated machine translation output: error
//! taxonomies, annotated corpora, inter-annotator agreement, token-normalized
//! error ratios with chi-squared significance, agreement-scope analysis,
//! report rendering, and an annotation session service.

pub mod cli;
pub mod corpus;
pub mod dataset_io;
pub mod iaa;
pub mod report;
pub mod scope;
pub mod service;
pub mod stats;
pub mod taxonomy;

pub use corpus::{AnnotationSpan, CategoryFilter, CorpusError, Dataset, Segment, SystemOutput, TokenSpan};
pub use taxonomy::{ErrorCategory, Taxonomy, TaxonomyError};
