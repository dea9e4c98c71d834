//! Trains the variational autoencoder on relevance and recency jointly.
//! Per step, each objective's gradient is normalized by its empirical
//! initial loss, a min-norm solve picks the convex combination whose
//! resultant shrinks no objective, and the Pareto set tracks every
//! non-dominated epoch checkpoint.

use temporec::corpus::build_catalog_and_matrix;
use temporec::models::vae::{Objective, VaeArch};
use temporec::recency::RecencyFunction;
use temporec::split::{assemble_phase_sets, Phase, Protocol, SplitParams};
use temporec::synth::{generate_drift_corpus, DriftCorpusSpec};
use temporec::trainer::{train, TrainConfig};

fn main() -> temporec::Result<()> {
    let spec = DriftCorpusSpec {
        n_users: 240,
        n_items: 80,
        events_per_user: 30,
        seed: 21,
        ..DriftCorpusSpec::default()
    };
    let log = generate_drift_corpus(&spec)?;
    let (catalog, _, users) = build_catalog_and_matrix(&log)?;
    let sets = assemble_phase_sets(
        &log,
        &catalog,
        &users,
        Protocol::Proportional,
        Phase::Development,
        &SplitParams {
            val_user_frac: 0.3,
            ..SplitParams::default()
        },
        3,
    )?;
    let weights = RecencyFunction::from_catalog(&catalog).weights_for(&catalog)?;

    let config = TrainConfig {
        epochs: 5,
        batch_size: 64,
        objectives: vec![Objective::Relevance, Objective::Recency],
        seed: 3,
        ..TrainConfig::default()
    };
    let arch = VaeArch {
        n_items: catalog.len(),
        hidden: 48,
        latent: 16,
        dropout: 0.5,
    };
    let output = train(&config, arch, &sets.train, &sets.validation, &weights)?;

    println!(
        "empirical losses: relevance {:.3}, recency {:.3}",
        output.empirical_losses[0], output.empirical_losses[1]
    );
    println!("\nfirst step of each epoch:");
    for step in output.steps.iter().filter(|s| s.batch == 0) {
        println!(
            "  epoch {}: losses [{:.3}, {:.3}], alpha [{:.3}, {:.3}], combined norm {:.4}",
            step.epoch,
            step.losses[0],
            step.losses[1],
            step.alpha[0],
            step.alpha[1],
            step.combined_norm
        );
    }

    println!("\nvalidation trajectory:");
    for eval in &output.evals {
        println!(
            "  epoch {}: recall@{} {:.4}, recency@{} {:.4}",
            eval.epoch, config.eval_k, eval.recall, config.eval_k, eval.recency
        );
    }

    println!("\nPareto front ({} checkpoints):", output.pareto.len());
    for entry in output.pareto.entries() {
        println!(
            "  epoch {}: recall {:.4}, recency {:.4}",
            entry.epoch, entry.metrics[0], entry.metrics[1]
        );
    }
    Ok(())
}
