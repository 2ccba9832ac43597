//! Core library for building and evaluating temporally grounded
//! instruction–response datasets from longitudinal patient records.
//!
//! The pipeline stages map onto the top-level modules:
//!
//! - [`timeline`] — ingest event streams, build per-patient timelines,
//!   serialize them to the XML record format, and chunk them to a token budget.
//! - [`temporal`] — normalized temporal positions of evidence timestamps,
//!   position histograms, region fractions, and distribution classification.
//! - [`genpipe`] — generation prompts, provider abstraction, response parsing
//!   and validation, and the multi-evidence filter.
//! - [`sampler`] — distribution-controlled sampling (recency / edge / uniform)
//!   and tuning/benchmark exports.
//! - [`metrics`] — ROUGE-L, chrF, METEOR (exact-match variant), Google BLEU,
//!   bootstrap resampling, and length statistics.
//! - [`judge`] — LLM-as-judge verdicts, head-to-head comparison with
//!   presentation-order de-biasing, aggregation, and Spearman validation.
//! - [`synth`] — deterministic synthetic cohort generator for offline runs.

pub mod fsio;
pub mod genpipe;
pub mod judge;
pub mod metrics;
mod rng;
pub mod sampler;
pub mod synth;
pub mod temporal;
pub mod timeline;
