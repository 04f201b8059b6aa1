//! Corpus-mixture compiler and continued-pretraining run planner.
//!
//! The crate covers the whole data side of a multilingual CPT recipe:
//!
//! * [`registry`]: language records, resource classes and evaluation groups.
//! * [`ingest`]: JSON-lines document streaming, tokenization and token statistics.
//! * [`sampling`]: threshold-based language selection, UniMax water-filling and
//!   deterministic per-epoch document schedules.
//! * [`mixture`]: named recipes (M, CM, CMP, CMS, CMSP), quality-gated parallel
//!   data, synthetic quotas, translation prompts and job manifests.
//! * [`packing`]: carry-over sequence packing and checksummed JSON-lines shards.
//! * [`runplan`]: step counts, cosine-with-min-lr schedule, FLOPs and MFU.
//! * [`metrics`]: chrF / chrF++, document-level chrF and result-table arithmetic.
//!
//! Data-parallel loops go through [`parallel`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.
//! Every parallel entry point takes a worker count and produces identical
//! output for any value of it.

#![forbid(unsafe_code)]

pub mod digest;
pub mod error;
pub mod fixtures;
pub mod ingest;
pub mod metrics;
pub mod mixture;
pub mod packing;
pub mod parallel;
pub mod registry;
pub mod runplan;
pub mod sampling;

pub use error::{Error, Result};
