//! Stochastic multi-subgradient descent with gradient normalization.
//!
//! Each step runs one shared forward pass per batch row, backpropagates
//! every objective, scales each gradient by that objective's empirical
//! loss (captured once before training on a fixed sample), combines them
//! through the min-norm simplex weights, and applies one optimizer update.
//! After every epoch the model is evaluated on the validation split and
//! the (recall, recency) point is offered to the Pareto set together with
//! a parameter checkpoint.

pub mod adam;
pub mod minnorm;
pub mod pareto;

use serde::{Deserialize, Serialize};

pub use adam::{Optimizer, OptimizerKind};
pub use minnorm::{combine, frank_wolfe_weights, min_norm_weights};
pub use pareto::{dominates, non_dominated_filter, ParetoEntry, ParetoSet};

use crate::corpus::SparseUserItemMatrix;
use crate::error::{Error, Result};
use crate::metrics::evaluate_split;
use crate::models::linalg::norm2;
use crate::models::vae::{
    vae_batch_gradients, vae_batch_losses, Objective, RowNoise, VaeArch, VaeParams,
};
use crate::seeds;
use crate::split::EvalSplit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub objectives: Vec<Objective>,
    pub seed: u64,
    pub eval_k: usize,
    /// KL coefficient after annealing.
    pub beta_max: f64,
    /// Fraction of all steps spent annealing beta linearly from 0.
    pub beta_anneal_frac: f64,
    pub optimizer: OptimizerKind,
    pub include_kl_in_recency: bool,
    /// Batches in the fixed sample used to capture empirical losses.
    pub empirical_batches: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 128,
            lr: 1e-3,
            objectives: vec![Objective::Relevance],
            seed: 0,
            eval_k: 20,
            beta_max: 0.2,
            beta_anneal_frac: 0.4,
            optimizer: OptimizerKind::Adam,
            include_kl_in_recency: false,
            empirical_batches: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.objectives.is_empty() {
            return Err(Error::InvalidConfig("objective list is empty".into()));
        }
        if self.eval_k == 0 {
            return Err(Error::InvalidConfig("evaluation depth must be >= 1".into()));
        }
        if self.beta_max < 0.0 || !(0.0..=1.0).contains(&self.beta_anneal_frac) {
            return Err(Error::InvalidConfig(
                "beta schedule outside valid range".into(),
            ));
        }
        if self.empirical_batches == 0 {
            return Err(Error::InvalidConfig(
                "empirical-loss sample needs at least one batch".into(),
            ));
        }
        Ok(())
    }
}

/// One optimizer step's log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub batch: usize,
    pub losses: Vec<f64>,
    pub alpha: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub combined_norm: f64,
    pub beta: f64,
}

/// Validation metrics after one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochEval {
    pub epoch: usize,
    pub recall: f64,
    pub precision: f64,
    pub recency: f64,
    pub recency_normalized: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub pareto: ParetoSet<VaeParams>,
    pub steps: Vec<StepRecord>,
    pub evals: Vec<EpochEval>,
    pub empirical_losses: Vec<f64>,
    pub params: VaeParams,
}

fn beta_at(step: usize, anneal_steps: usize, beta_max: f64) -> f64 {
    if anneal_steps == 0 {
        beta_max
    } else {
        beta_max * ((step as f64 / anneal_steps as f64).min(1.0))
    }
}

/// Mean per-objective losses on a fixed sample of training rows, captured
/// before the first update and used as normalization constants throughout.
#[allow(clippy::too_many_arguments)]
pub fn capture_empirical_losses(
    params: &VaeParams,
    matrix: &SparseUserItemMatrix,
    sample_rows: &[usize],
    weights: &[f64],
    beta: f64,
    include_kl_in_recency: bool,
    objectives: &[Objective],
    seed: u64,
) -> Result<Vec<f64>> {
    let rows: Vec<&[usize]> = sample_rows.iter().map(|&u| matrix.row(u)).collect();
    let arch = params.arch();
    let mut rng = seeds::rng(seed, "empirical-noise", 0);
    let noise: Vec<RowNoise> = rows
        .iter()
        .map(|r| RowNoise::draw(&mut rng, r.len(), arch.latent, arch.dropout))
        .collect();
    let pair = vae_batch_losses(params, &rows, &noise, weights, beta, include_kl_in_recency)?;
    objectives
        .iter()
        .map(|objective| {
            let loss = match objective {
                Objective::Relevance => pair.relevance,
                Objective::Recency => pair.recency,
            };
            if !loss.is_finite() || loss <= 0.0 {
                return Err(Error::ContractViolation(format!(
                    "empirical {} loss {loss} cannot normalize gradients",
                    objective.name()
                )));
            }
            Ok(loss)
        })
        .collect()
}

/// Run the full training loop on the given matrix and validation split.
/// `weights` are the per-item recency weights over the full catalog.
pub fn train(
    config: &TrainConfig,
    arch: VaeArch,
    matrix: &SparseUserItemMatrix,
    validation: &EvalSplit,
    weights: &[f64],
) -> Result<TrainOutput> {
    config.validate()?;
    if arch.n_items != matrix.cols() {
        return Err(Error::DimensionMismatch {
            expected: matrix.cols(),
            got: arch.n_items,
        });
    }
    if weights.len() != matrix.cols() {
        return Err(Error::DimensionMismatch {
            expected: matrix.cols(),
            got: weights.len(),
        });
    }
    if validation.users.is_empty() {
        return Err(Error::EmptySplit("validation split has no users".into()));
    }

    let train_rows: Vec<usize> = (0..matrix.rows())
        .filter(|&u| !matrix.row(u).is_empty())
        .collect();
    if train_rows.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut params = VaeParams::init(arch, config.seed)?;
    let n_batches = train_rows.len().div_ceil(config.batch_size);
    let total_steps = config.epochs * n_batches;
    let anneal_steps = (total_steps as f64 * config.beta_anneal_frac).floor() as usize;

    // Empirical losses on a fixed sample, at the first step's beta.
    let sample_rows: Vec<usize> = {
        use rand::seq::SliceRandom;
        let mut shuffled = train_rows.clone();
        shuffled.shuffle(&mut seeds::rng(config.seed, "empirical-sample", 0));
        let take = (config.empirical_batches * config.batch_size).min(shuffled.len());
        shuffled.truncate(take);
        shuffled
    };
    let empirical_losses = capture_empirical_losses(
        &params,
        matrix,
        &sample_rows,
        weights,
        beta_at(0, anneal_steps, config.beta_max),
        config.include_kl_in_recency,
        &config.objectives,
        config.seed,
    )?;

    let mut optimizer = Optimizer::new(config.optimizer, params.theta().len());
    let mut steps = Vec::with_capacity(total_steps);
    let mut evals = Vec::with_capacity(config.epochs);
    let mut front: ParetoSet<VaeParams> = ParetoSet::new();
    let mut global_step = 0usize;

    for epoch in 1..=config.epochs {
        let order: Vec<usize> = {
            use rand::seq::SliceRandom;
            let mut o = train_rows.clone();
            o.shuffle(&mut seeds::rng(config.seed, "epoch-order", epoch as u64));
            o
        };
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let beta = beta_at(global_step, anneal_steps, config.beta_max);
            let rows: Vec<&[usize]> = chunk.iter().map(|&u| matrix.row(u)).collect();
            // one noise stream per step, independent of the objective count
            let mut noise_rng = seeds::rng(config.seed, "batch-noise", global_step as u64);
            let noise: Vec<RowNoise> = rows
                .iter()
                .map(|r| RowNoise::draw(&mut noise_rng, r.len(), arch.latent, arch.dropout))
                .collect();

            let (losses, mut grads) = vae_batch_gradients(
                &params,
                &rows,
                &noise,
                weights,
                beta,
                config.include_kl_in_recency,
                &config.objectives,
            )?;
            if let Some(bad) = losses.iter().position(|l| !l.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "{} loss at epoch {epoch}, batch {batch_idx}",
                    config.objectives[bad].name()
                )));
            }

            for (grad, &empirical) in grads.iter_mut().zip(&empirical_losses) {
                for g in grad.iter_mut() {
                    *g /= empirical;
                }
            }
            let grad_refs: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
            let alpha = min_norm_weights(&grad_refs)?;
            let combined = combine(&grad_refs, &alpha)?;
            let grad_norms: Vec<f64> = grads.iter().map(|g| norm2(g)).collect();
            let combined_norm = norm2(&combined);

            optimizer.step(params.theta_mut(), &combined, config.lr)?;
            steps.push(StepRecord {
                epoch,
                batch: batch_idx,
                losses,
                alpha,
                grad_norms,
                combined_norm,
                beta,
            });
            global_step += 1;
        }

        let report = evaluate_split(&params, validation, &[config.eval_k], weights)?
            .pop()
            .expect("one depth requested");
        let s = report.summary;
        evals.push(EpochEval {
            epoch,
            recall: s.recall,
            precision: s.precision,
            recency: s.recency,
            recency_normalized: s.recency_normalized,
        });
        front.insert(ParetoEntry {
            metrics: vec![s.recall, s.recency],
            epoch,
            payload: params.clone(),
        })?;
    }

    Ok(TrainOutput {
        pareto: front,
        steps,
        evals,
        empirical_losses,
        params,
    })
}
