//! chrF / chrF++, document-level chrF over pseudo-documents, and the
//! result-table arithmetic (averages, deltas, language-group means).

mod chrf;
mod tables;

use thiserror::Error;

pub use chrf::{chrf, chrf_stats, dchrf, make_pseudo_docs, ChrfConfig, ChrfStats, OrderStats};
pub use tables::{
    delta, group_average, language_averages, mean_relative_delta, overall_average, round_half_even, DeltaReport, GroupMode, GroupScore,
    ScoreTable,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid chrF config: {0}")]
    InvalidConfig(String),
    #[error("pseudo-document size must be at least 1")]
    InvalidGroupSize,
    #[error("hypothesis has {hyp} sentences but reference has {reference}")]
    LengthMismatch { hyp: usize, reference: usize },
    #[error("relative delta is undefined for a zero base")]
    ZeroBase,
    #[error("cannot average an empty row")]
    EmptyRow,
    #[error("no covered cells for model {model:?} in group {group}")]
    EmptyGroup { model: String, group: String },
    #[error("duplicate score for ({model}, {task}, {lang})")]
    DuplicateKey { model: String, task: String, lang: String },
    #[error("malformed score table: {0}")]
    MalformedTable(String),
}
