//! Visually grounded subtitle translation.
//!
//! The crate is organised along the pipeline: [`timedtext`] parses and pairs
//! SubRip corpora, [`timeline`] models sampled frame descriptions, [`context`]
//! turns frames into attribute or gap summaries, [`backends`] talks to the
//! describer/summarizer/translator models, [`scoring`] computes corpus metrics
//! and oracle selective grounding, [`report`] aggregates results, and
//! [`pipeline`] drives the staged, resumable command line workflow.
//!
//! Interchangeable algorithms (context strategies, model backends, corpus
//! metrics, delta aggregation rules) sit behind traits and are looked up by
//! name in small registries so that configuration files and CLI flags can
//! select them at runtime.

pub mod backends;
pub mod context;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod scoring;
pub mod timedtext;
pub mod timeline;

pub use error::{Error, Result};
