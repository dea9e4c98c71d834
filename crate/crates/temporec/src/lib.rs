//! Temporally faithful offline evaluation and multi-objective training for
//! implicit-feedback recommenders.
//!
//! The library covers the full experiment pipeline: interaction-log
//! preprocessing, train/validation/test assembly under random-holdout and
//! temporal split protocols, recency-weighted top-K metrics, baseline and
//! neural recommenders with hand-derived gradients, and a multi-gradient
//! trainer that balances relevance against recency and tracks the Pareto
//! front of the two objectives.
//!
//! See the `examples/` directory for end-to-end walkthroughs of each
//! capability; the `temporec` binary wires the same pieces into a CLI.

pub mod config;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod recency;
pub mod report;
pub mod seeds;
pub mod split;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
