//! Popularity baseline: every user gets the same interaction-count score
//! vector; personalization comes only from input masking at evaluation.

use crate::corpus::SparseUserItemMatrix;
use crate::error::{Error, Result};
use crate::metrics::ScoreProvider;

#[derive(Debug, Clone, PartialEq)]
pub struct PopularityModel {
    scores: Vec<f64>,
}

pub fn fit_popularity(train: &SparseUserItemMatrix) -> Result<PopularityModel> {
    if train.rows() == 0 || train.cols() == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(PopularityModel {
        scores: train.col_counts().iter().map(|&c| c as f64).collect(),
    })
}

impl ScoreProvider for PopularityModel {
    fn n_items(&self) -> usize {
        self.scores.len()
    }

    fn score(&self, _input_items: &[usize]) -> Result<Vec<f64>> {
        Ok(self.scores.clone())
    }
}
