//! Recommenders producing full item-score vectors. All three share the
//! [`crate::metrics::ScoreProvider`] interface so evaluation code never
//! cares which model it is ranking.

pub mod linalg;
pub mod popularity;
pub mod svd;
pub mod vae;

pub use popularity::{fit_popularity, PopularityModel};
pub use svd::{fit_truncated_svd, SvdModel};
pub use vae::{LossPair, Objective, RowNoise, VaeArch, VaeParams};
