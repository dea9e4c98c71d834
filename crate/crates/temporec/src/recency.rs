//! Item recency weighting.
//!
//! An item's age is normalized against the catalog's release-time span and
//! mapped to a weight in (0, 1]: items in the newest 20% of the span get
//! weight 1, older items decay exponentially toward 0 but never reach it.

use crate::corpus::ItemCatalog;
use crate::error::{Error, Result};

/// Fraction of the normalized time span treated as "new".
pub const NEW_FRACTION: f64 = 0.8;
/// Decay base applied below the new-item region.
pub const DECAY_BASE: f64 = 0.3;

/// Piecewise recency weight over normalized time spans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecencyFunction {
    t_min: i64,
    t_max: i64,
}

impl RecencyFunction {
    /// `t_min`/`t_max` bound the release timestamps the function accepts.
    pub fn new(t_min: i64, t_max: i64) -> Result<Self> {
        if t_min > t_max {
            return Err(Error::ContractViolation(format!(
                "recency span has t_min {t_min} > t_max {t_max}"
            )));
        }
        Ok(RecencyFunction { t_min, t_max })
    }

    pub fn from_catalog(catalog: &ItemCatalog) -> Self {
        RecencyFunction {
            t_min: catalog.t_min(),
            t_max: catalog.t_max(),
        }
    }

    /// Weight for a release timestamp. Out-of-span timestamps are rejected.
    ///
    /// A degenerate span (`t_min == t_max`) weighs every item 1.
    pub fn weight(&self, t: i64) -> Result<f64> {
        if t < self.t_min || t > self.t_max {
            return Err(Error::ContractViolation(format!(
                "timestamp {t} outside recency span [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.t_min == self.t_max {
            return Ok(1.0);
        }
        let s = (t - self.t_min) as f64 / (self.t_max - self.t_min) as f64;
        Ok(weight_normalized(s))
    }

    /// Weights for every catalog item, indexed by dense item index.
    pub fn weights_for(&self, catalog: &ItemCatalog) -> Result<Vec<f64>> {
        catalog
            .first_seen()
            .iter()
            .map(|&t| self.weight(t))
            .collect()
    }
}

/// Weight for an already-normalized position `s` in [0, 1].
pub fn weight_normalized(s: f64) -> f64 {
    if s >= NEW_FRACTION {
        1.0
    } else {
        DECAY_BASE.powf((NEW_FRACTION - s) * 10.0 / 3.0)
    }
}
