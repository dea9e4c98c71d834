//! Fits the two non-neural baselines on a synthetic drift corpus and
//! evaluates both on the same validation split: item popularity, and a
//! randomized truncated factorization of the binarized matrix.

use temporec::corpus::build_catalog_and_matrix;
use temporec::metrics::evaluate_split;
use temporec::models::{fit_popularity, fit_truncated_svd};
use temporec::recency::RecencyFunction;
use temporec::split::{assemble_phase_sets, Phase, Protocol, SplitParams};
use temporec::synth::{generate_drift_corpus, DriftCorpusSpec};

fn main() -> temporec::Result<()> {
    let spec = DriftCorpusSpec {
        n_users: 300,
        n_items: 120,
        events_per_user: 40,
        seed: 9,
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
        &SplitParams::default(),
        7,
    )?;
    let weights = RecencyFunction::from_catalog(&catalog).weights_for(&catalog)?;
    println!(
        "train matrix {} x {}, validation users {}",
        sets.train.rows(),
        sets.train.cols(),
        sets.validation.users.len()
    );

    let popularity = fit_popularity(&sets.train)?;
    let svd = fit_truncated_svd(&sets.train, 32, 4, 7)?;
    println!(
        "factorization rank {}, orthonormality defect {:.2e}, top singular values {:?}",
        svd.factors(),
        svd.orthonormality_defect(),
        svd.singular_values()[..4]
            .iter()
            .map(|v| (v * 100.0).round() / 100.0)
            .collect::<Vec<_>>()
    );

    println!(
        "\n{:<12} {:>4} {:>9} {:>9} {:>9}",
        "model", "K", "recall", "precision", "recency"
    );
    for k in [10, 20, 50] {
        let pop = &evaluate_split(&popularity, &sets.validation, &[k], &weights)?[0];
        let fac = &evaluate_split(&svd, &sets.validation, &[k], &weights)?[0];
        println!(
            "{:<12} {:>4} {:>9.4} {:>9.4} {:>9.4}",
            "popularity", k, pop.summary.recall, pop.summary.precision, pop.summary.recency
        );
        println!(
            "{:<12} {:>4} {:>9.4} {:>9.4} {:>9.4}",
            "svd", k, fac.summary.recall, fac.summary.precision, fac.summary.recency
        );
    }
    Ok(())
}
