//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line with its elapsed time. Run with
//! `cargo test --test acceptance -- --nocapture` to watch the lines land.
//! The drift-corpus experiments are computed once and shared.

// negated comparisons inside ensure! also fail on NaN, which a gate wants
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use temporec::config::ExperimentConfig;
use temporec::corpus::{
    build_catalog_and_matrix, preprocess, Interaction, InteractionLog, PreprocessOpts,
};
use temporec::metrics::{rank_top_k, user_metrics, MetricAccumulator};
use temporec::models::vae::{
    vae_batch_gradients, vae_batch_losses, LossPair, Objective, RowNoise, VaeArch, VaeParams,
};
use temporec::pipeline::{metrics_json, pareto_csv, run_experiment, RunBundle};
use temporec::recency::{weight_normalized, RecencyFunction};
use temporec::seeds;
use temporec::split::{
    assemble_phase_sets, group_by_user, verify_conservation, verify_leakage, verify_temporal_order,
    Phase, Protocol, SplitParams, UserItems,
};
use temporec::trainer::{
    combine, frank_wolfe_weights, min_norm_weights, non_dominated_filter, ParetoEntry, ParetoSet,
};

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn criterion(number: u32, name: &str, body: impl FnOnce() -> Result<(), String>) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed().as_secs_f64();
    match outcome {
        Ok(()) => println!("criterion {number:02} {name}: PASS ({elapsed:.1}s)"),
        Err(msg) => {
            println!("criterion {number:02} {name}: FAIL ({elapsed:.1}s) {msg}");
            panic!("criterion {number:02} ({name}) failed: {msg}");
        }
    }
}

fn err_str<T>(r: temporec::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

#[test]
fn accept_01_recency_function_exactness() {
    criterion(1, "recency function exactness", || {
        let floor = 0.3f64.powf(8.0 / 3.0);
        for (s, want) in [(0.0, floor), (0.5, 0.3), (0.8, 1.0), (1.0, 1.0)] {
            let got = weight_normalized(s);
            ensure!(
                (got - want).abs() <= 1e-12,
                "weight at position {s} is {got:.17}, want {want:.17}"
            );
        }
        let f = err_str(RecencyFunction::new(0, 1000))?;
        for (t, want) in [(0, floor), (500, 0.3), (800, 1.0), (1000, 1.0)] {
            let got = err_str(f.weight(t))?;
            ensure!(
                (got - want).abs() <= 1e-12,
                "weight at t={t} over [0, 1000] is {got:.17}, want {want:.17}"
            );
        }
        Ok(())
    });
}

#[test]
fn accept_02_metric_oracle_equivalence() {
    criterion(2, "metric oracle equivalence", || {
        let mut rng = seeds::rng(2, "accept-metric-oracle", 0);
        for instance in 0..1000 {
            let n_items = rng.gen_range(2..=200usize);
            let k = *[1usize, 5, 20].choose(&mut rng).expect("nonempty");
            let quantize = rng.gen_bool(0.5);
            let scores: Vec<f64> = (0..n_items)
                .map(|_| {
                    let v: f64 = rng.gen();
                    if quantize {
                        (v * 8.0).round() / 8.0
                    } else {
                        v
                    }
                })
                .collect();
            let weights: Vec<f64> = (0..n_items).map(|_| rng.gen_range(0.01..=1.0)).collect();
            let mut perm: Vec<usize> = (0..n_items).collect();
            perm.shuffle(&mut rng);
            let n_inputs = rng.gen_range(0..n_items);
            let n_targets = rng.gen_range(1..=(n_items - n_inputs).min(30));
            let mut inputs = perm[..n_inputs].to_vec();
            let mut targets = perm[n_inputs..n_inputs + n_targets].to_vec();
            inputs.sort_unstable();
            targets.sort_unstable();

            // oracle: full stable sort by (score desc, index asc), inputs
            // removed, truncated to K
            let mut oracle: Vec<usize> = (0..n_items)
                .filter(|i| inputs.binary_search(i).is_err())
                .collect();
            oracle.sort_by(|&a, &b| {
                scores[b]
                    .partial_cmp(&scores[a])
                    .expect("finite scores")
                    .then(a.cmp(&b))
            });
            oracle.truncate(k);

            let ranked = err_str(rank_top_k(&scores, k, &inputs))?;
            ensure!(
                ranked == oracle,
                "instance {instance}: ranking diverges from the full-sort oracle"
            );

            let got = err_str(user_metrics(&ranked, &targets, &weights, k))?;
            let mut hits = 0usize;
            let mut recency = 0.0;
            for &i in &oracle {
                if targets.binary_search(&i).is_ok() {
                    hits += 1;
                    recency += weights[i];
                }
            }
            let denom = k.min(targets.len()) as f64;
            ensure!(
                got.hits == hits
                    && got.recall == hits as f64 / denom
                    && got.precision == hits as f64 / k as f64
                    && got.recency == recency
                    && got.recency_normalized == recency / denom,
                "instance {instance}: metrics diverge from the oracle \
                 (got recall {}, precision {}, recency {})",
                got.recall,
                got.precision,
                got.recency
            );
        }

        // aggregation over user populations matches a naive mean taken in
        // the same visit order
        let mut rng = seeds::rng(2, "accept-metric-aggregate", 0);
        for _ in 0..1000 {
            let n_users = rng.gen_range(1..=100usize);
            let mut acc = MetricAccumulator::new();
            let mut sums = [0.0f64; 4];
            for _ in 0..n_users {
                let n_items = rng.gen_range(4..=60usize);
                let k = *[1usize, 5, 20].choose(&mut rng).expect("nonempty");
                let scores: Vec<f64> = (0..n_items).map(|_| rng.gen()).collect();
                let weights: Vec<f64> = (0..n_items).map(|_| rng.gen_range(0.01..=1.0)).collect();
                let n_targets = rng.gen_range(1..=n_items.min(10));
                let mut targets: Vec<usize> =
                    rand::seq::index::sample(&mut rng, n_items, n_targets).into_vec();
                targets.sort_unstable();
                let ranked = err_str(rank_top_k(&scores, k, &[]))?;
                let m = err_str(user_metrics(&ranked, &targets, &weights, k))?;
                acc.add(&m);
                sums[0] += m.recall;
                sums[1] += m.precision;
                sums[2] += m.recency;
                sums[3] += m.recency_normalized;
            }
            let summary = err_str(acc.finish())?;
            let n = n_users as f64;
            ensure!(
                summary.recall == sums[0] / n
                    && summary.precision == sums[1] / n
                    && summary.recency == sums[2] / n
                    && summary.recency_normalized == sums[3] / n,
                "population mean diverges from the naive mean over {n_users} users"
            );
        }
        Ok(())
    });
}

fn loss_of(pair: &LossPair, objective: Objective) -> f64 {
    match objective {
        Objective::Relevance => pair.relevance,
        Objective::Recency => pair.recency,
    }
}

#[test]
fn accept_03_gradient_correctness() {
    criterion(3, "gradient correctness", || {
        let objectives = [Objective::Relevance, Objective::Recency];
        let mut worst = 0.0f64;
        let mut worst_at = String::new();
        for seed in 0..24u64 {
            let mut rng = seeds::rng(seed, "accept-gradcheck", 0);
            let arch = VaeArch {
                n_items: rng.gen_range(4..=16),
                hidden: rng.gen_range(2..=8),
                latent: rng.gen_range(2..=4),
                dropout: rng.gen_range(0.0..0.6),
            };
            let params = err_str(VaeParams::init(arch, seed + 1000))?;
            let weights: Vec<f64> = (0..arch.n_items)
                .map(|_| rng.gen_range(0.05..=1.0))
                .collect();
            let beta = rng.gen_range(0.0..0.5);
            let include_kl = rng.gen_bool(0.5);

            let rows_owned: Vec<Vec<usize>> = (0..rng.gen_range(1..=3usize))
                .map(|_| {
                    let mut row: Vec<usize> =
                        (0..arch.n_items).filter(|_| rng.gen_bool(0.4)).collect();
                    if row.is_empty() {
                        row.push(rng.gen_range(0..arch.n_items));
                    }
                    row
                })
                .collect();
            let rows: Vec<&[usize]> = rows_owned.iter().map(|r| r.as_slice()).collect();
            let noise: Vec<RowNoise> = rows
                .iter()
                .map(|r| RowNoise::draw(&mut rng, r.len(), arch.latent, arch.dropout))
                .collect();

            let (_, grads) = err_str(vae_batch_gradients(
                &params,
                &rows,
                &noise,
                &weights,
                beta,
                include_kl,
                &objectives,
            ))?;

            let h = 1e-4;
            for p in 0..params.theta().len() {
                let mut plus = params.clone();
                plus.theta_mut()[p] += h;
                let mut minus = params.clone();
                minus.theta_mut()[p] -= h;
                let lp = err_str(vae_batch_losses(
                    &plus, &rows, &noise, &weights, beta, include_kl,
                ))?;
                let lm = err_str(vae_batch_losses(
                    &minus, &rows, &noise, &weights, beta, include_kl,
                ))?;
                for (gi, objective) in objectives.into_iter().enumerate() {
                    let numeric = (loss_of(&lp, objective) - loss_of(&lm, objective)) / (2.0 * h);
                    let analytic = grads[gi][p];
                    let rel =
                        (analytic - numeric).abs() / f64::max(analytic.abs() + numeric.abs(), 1e-6);
                    if rel > worst {
                        worst = rel;
                        worst_at = format!(
                            "config {seed}, {} loss, coordinate {p}",
                            match objective {
                                Objective::Relevance => "relevance",
                                Objective::Recency => "recency",
                            }
                        );
                    }
                }
            }
        }
        ensure!(
            worst <= 1e-4,
            "max relative error {worst:.3e} at {worst_at} exceeds 1e-4"
        );
        Ok(())
    });
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn accept_04_min_norm_solver() {
    criterion(4, "min-norm solver properties", || {
        let mut rng = seeds::rng(4, "accept-minnorm", 0);
        for case in 0..1000 {
            let n = if case % 2 == 0 { 2 } else { 3 };
            let dim = rng.gen_range(3..=40usize);
            let mut grads: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| seeds::gaussian(&mut rng)).collect())
                .collect();
            // near-parallel and near-opposed pairs stress the boundary
            // solutions
            if rng.gen_bool(0.3) {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let scale: f64 = rng.gen_range(0.5..2.0);
                grads[1] = grads[0]
                    .iter()
                    .map(|&x| sign * scale * x + 0.01 * seeds::gaussian(&mut rng))
                    .collect();
            }

            let refs: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
            let alpha = err_str(min_norm_weights(&refs))?;
            let v = err_str(combine(&refs, &alpha))?;
            let vn = norm(&v);
            let vn2 = vn * vn;
            let min_gn = grads.iter().map(|g| norm(g)).fold(f64::INFINITY, f64::min);
            ensure!(
                vn <= min_gn + 1e-9,
                "case {case}: combined norm {vn} exceeds smallest gradient norm {min_gn}"
            );
            for (j, g) in grads.iter().enumerate() {
                let d = dot(&v, g);
                ensure!(
                    d >= vn2 - 1e-9,
                    "case {case}: direction regresses objective {j} (v.g = {d}, |v|^2 = {vn2})"
                );
            }

            if n == 2 {
                let fw = err_str(frank_wolfe_weights(&refs))?;
                for j in 0..2 {
                    ensure!(
                        (fw[j] - alpha[j]).abs() <= 1e-6,
                        "case {case}: iterative weight {} vs closed form {} at index {j}",
                        fw[j],
                        alpha[j]
                    );
                }
            }
        }
        Ok(())
    });
}

#[test]
fn accept_05_pareto_bookkeeping() {
    criterion(5, "pareto bookkeeping", || {
        let mut rng = seeds::rng(5, "accept-pareto", 0);
        for stream in 0..10_000 {
            let n = if stream % 2 == 0 { 2 } else { 3 };
            let len = rng.gen_range(1..=20usize);
            let history: Vec<Vec<f64>> = (0..len)
                .map(|_| (0..n).map(|_| rng.gen_range(0..6) as f64 / 5.0).collect())
                .collect();

            let mut set: ParetoSet<()> = ParetoSet::new();
            for (i, metrics) in history.iter().enumerate() {
                err_str(set.insert(ParetoEntry {
                    metrics: metrics.clone(),
                    epoch: i + 1,
                    payload: (),
                }))?;
            }
            let mut incremental: Vec<Vec<f64>> =
                set.entries().iter().map(|e| e.metrics.clone()).collect();
            let mut brute = err_str(non_dominated_filter(&history))?;
            incremental.sort_by(|a, b| a.partial_cmp(b).expect("finite metrics"));
            brute.sort_by(|a, b| a.partial_cmp(b).expect("finite metrics"));
            ensure!(
                incremental == brute,
                "stream {stream}: incremental front {incremental:?} vs brute force {brute:?}"
            );
        }
        Ok(())
    });
}

// Shared drift-corpus experiments for the direction-of-effect criteria.
// One corpus, six runs: the two baseline-protocol comparisons per model
// plus the single- and two-objective training runs.

const DRIFT_BASE: &str = r#"
seed = 42

[synthetic]
n_users = 2000
n_items = 500
events_per_user = 30
affinity = 8.0

[split]
holdout_frac = 0.2
val_user_frac = 0.2

[model]
kind = "vae"
hidden = 200
latent = 64

[train]
epochs = 12
batch_size = 256

[evaluate]
ks = [20]
"#;

struct DriftRuns {
    svd_trad: RunBundle,
    svd_cutoff: RunBundle,
    vae_trad: RunBundle,
    vae_cutoff: RunBundle,
    vae_single: RunBundle,
    vae_multi: RunBundle,
}

fn drift_config(model: &str, protocol: &str, objectives: Vec<Objective>) -> ExperimentConfig {
    let mut config = ExperimentConfig::parse(DRIFT_BASE).expect("base drift config parses");
    config.model.kind = model.into();
    config.split.protocol = protocol.into();
    config.train.objectives = objectives;
    config.validate().expect("drift config is valid");
    config
}

fn compute_drift_runs() -> DriftRuns {
    let run = |model: &str, protocol: &str, objectives: Vec<Objective>| {
        run_experiment(&drift_config(model, protocol, objectives)).expect("drift run succeeds")
    };
    DriftRuns {
        svd_trad: run("svd", "traditional", vec![Objective::Relevance]),
        svd_cutoff: run("svd", "cutoff", vec![Objective::Relevance]),
        vae_trad: run("vae", "traditional", vec![Objective::Relevance]),
        vae_cutoff: run("vae", "cutoff", vec![Objective::Relevance]),
        vae_single: run("vae", "proportional", vec![Objective::Relevance]),
        vae_multi: run(
            "vae",
            "proportional",
            vec![Objective::Relevance, Objective::Recency],
        ),
    }
}

static DRIFT: OnceLock<DriftRuns> = OnceLock::new();

fn drift_runs() -> &'static DriftRuns {
    DRIFT.get_or_init(compute_drift_runs)
}

fn recall_at_20(bundle: &RunBundle, label: &str) -> Result<f64, String> {
    bundle
        .reports
        .iter()
        .find(|r| r.protocol == label && r.k == 20)
        .map(|r| r.recall)
        .ok_or_else(|| format!("bundle has no report labeled {label}"))
}

#[test]
fn accept_06_traditional_evaluation_overconfidence() {
    criterion(6, "traditional evaluation overconfidence", || {
        let runs = drift_runs();
        for (model, trad, cutoff) in [
            ("svd", &runs.svd_trad, &runs.svd_cutoff),
            ("vae", &runs.vae_trad, &runs.vae_cutoff),
        ] {
            let val_trad = recall_at_20(trad, "val_traditional")?;
            let test_trad = recall_at_20(trad, "test_strict_cutoff")?;
            let val_cut = recall_at_20(cutoff, "val_strict_cutoff")?;
            let test_cut = recall_at_20(cutoff, "test_strict_cutoff")?;
            ensure!(
                val_trad > test_trad,
                "{model}: non-temporal validation recall {val_trad:.4} does not exceed \
                 temporal test recall {test_trad:.4}"
            );
            let drop = (val_trad - test_trad) / val_trad;
            ensure!(
                drop >= 0.20,
                "{model}: relative drop {:.1}% below 20% (val {val_trad:.4}, test {test_trad:.4})",
                drop * 100.0
            );
            let gap_cut = (val_cut - test_cut).abs();
            let gap_trad = (val_trad - test_trad).abs();
            ensure!(
                gap_cut < gap_trad,
                "{model}: cutoff validation gap {gap_cut:.4} not tighter than \
                 non-temporal gap {gap_trad:.4} (val_cut {val_cut:.4}, test {test_cut:.4})"
            );
        }
        Ok(())
    });
}

#[test]
fn accept_07_multi_objective_dominance() {
    criterion(7, "multi-objective dominance", || {
        let runs = drift_runs();
        let single = runs
            .vae_single
            .pareto
            .iter()
            .max_by(|a, b| a.recall.partial_cmp(&b.recall).expect("finite"))
            .ok_or("single-objective run produced no checkpoints")?;
        ensure!(
            !runs.vae_multi.pareto.is_empty(),
            "two-objective run produced no checkpoints"
        );
        let found = runs
            .vae_multi
            .pareto
            .iter()
            .find(|p| p.recency >= 1.10 * single.recency && p.recall >= 0.99 * single.recall);
        ensure!(
            found.is_some(),
            "no front point beats the single-objective best by >= 10% freshness at \
             >= 99% accuracy (single: recall {:.4}, recency {:.4}; front: {:?})",
            single.recall,
            single.recency,
            runs.vae_multi
                .pareto
                .iter()
                .map(|p| (
                    p.epoch,
                    (p.recall * 1e4).round() / 1e4,
                    (p.recency * 1e4).round() / 1e4
                ))
                .collect::<Vec<_>>()
        );
        Ok(())
    });
}

#[test]
fn accept_08_determinism() {
    criterion(8, "determinism", || {
        let first = drift_runs();
        let second = compute_drift_runs();
        for (name, a, b) in [
            ("svd_trad", &first.svd_trad, &second.svd_trad),
            ("svd_cutoff", &first.svd_cutoff, &second.svd_cutoff),
            ("vae_trad", &first.vae_trad, &second.vae_trad),
            ("vae_cutoff", &first.vae_cutoff, &second.vae_cutoff),
            ("vae_single", &first.vae_single, &second.vae_single),
            ("vae_multi", &first.vae_multi, &second.vae_multi),
        ] {
            ensure!(
                metrics_json(&a.reports) == metrics_json(&b.reports),
                "{name}: metric reports differ between identical runs"
            );
            ensure!(
                pareto_csv(&a.pareto) == pareto_csv(&b.pareto),
                "{name}: front files differ between identical runs"
            );
            ensure!(
                a.manifest == b.manifest,
                "{name}: manifests differ between identical runs"
            );
        }
        Ok(())
    });
}

#[test]
fn accept_09_split_safety() {
    criterion(9, "split safety", || {
        let mut rng = seeds::rng(9, "accept-splits", 0);
        for corpus_idx in 0..100u64 {
            let n_users = rng.gen_range(8..=30usize);
            let n_items = rng.gen_range(6..=20usize);
            let t_max = *[500i64, 5_000, 50_000].choose(&mut rng).expect("nonempty");
            let mut records = Vec::new();
            for u in 0..n_users {
                for _ in 0..rng.gen_range(6..=24) {
                    records.push(Interaction {
                        user: format!("u{u}"),
                        item: format!("i{}", rng.gen_range(0..n_items)),
                        timestamp: rng.gen_range(0..=t_max),
                        rating: None,
                    });
                }
            }
            let opts = PreprocessOpts {
                binarize_threshold: None,
                min_user_deg: 1,
                min_item_deg: 1,
                window: None,
            };
            let log = err_str(preprocess(&InteractionLog::new(records, None), &opts))?;
            let (catalog, _, users) = err_str(build_catalog_and_matrix(&log))?;
            let universe = err_str(group_by_user(&log, &catalog, &users))?;

            let params = SplitParams {
                holdout_frac: rng.gen_range(0.15..0.4),
                val_user_frac: rng.gen_range(0.2..0.6),
                cutoff_quantile: rng.gen_range(0.6..0.9),
                cutoff_time: None,
            };
            let phase = if corpus_idx % 4 == 0 {
                Phase::DeploymentReady
            } else {
                Phase::Development
            };
            for protocol in [
                Protocol::Traditional,
                Protocol::Proportional,
                Protocol::StrictCutoff,
            ] {
                let sets = err_str(assemble_phase_sets(
                    &log, &catalog, &users, protocol, phase, &params, corpus_idx,
                ))?;
                let val = &sets.validation;
                err_str(verify_leakage(val, &sets.train))?;
                err_str(verify_temporal_order(val))?;

                // the validation universe is each involved user's
                // interactions inside the phase's time bound
                let mut val_universe: UserItems = BTreeMap::new();
                for u in val
                    .users
                    .iter()
                    .map(|h| h.user)
                    .chain(val.exclusions.all_users())
                {
                    let full = &universe[&u];
                    let list = match sets.test_cutoff {
                        Some(c) => full.iter().copied().filter(|&(t, _)| t <= c).collect(),
                        None => full.clone(),
                    };
                    val_universe.insert(u, list);
                }
                err_str(verify_conservation(val, &val_universe))?;

                if let Some(test) = &sets.test {
                    err_str(verify_leakage(test, &sets.train))?;
                    err_str(verify_temporal_order(test))?;
                    err_str(verify_conservation(test, &universe))?;
                }
            }
        }
        Ok(())
    });
}
