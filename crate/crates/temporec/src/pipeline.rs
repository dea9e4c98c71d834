//! One experiment end to end: corpus in, metric reports out. Stages run
//! sequentially (corpus, preprocess, split, train, evaluate) and a failure
//! anywhere is tagged with its stage name. The manifest ties every output
//! back to its exact inputs: config hash, corpus hash, root seed.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ModelKind};
use crate::corpus::{
    build_catalog_and_matrix, parse_interactions, preprocess, InteractionLog, ParseStats,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_split, MetricReport, ScoreProvider};
use crate::models::popularity::fit_popularity;
use crate::models::svd::fit_truncated_svd;
use crate::recency::RecencyFunction;
use crate::seeds;
use crate::split::{assemble_phase_sets, Phase, PhaseSets, Protocol};
use crate::synth::generate_drift_corpus;
use crate::trainer::{self, EpochEval};

pub const RUN_MANIFEST_FORMAT: &str = "temporec-run v1";

/// Provenance record for one run. Anything downstream of the bundle can be
/// regenerated from the config, the corpus it hashes, and the root seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub config_hash: String,
    pub corpus_hash: String,
    pub seed: u64,
    pub protocol: Protocol,
    pub phase: Phase,
    pub model: String,
    pub n_users: usize,
    pub n_items: usize,
    pub n_interactions: usize,
    pub cutoff_time: Option<i64>,
}

/// One Pareto-front checkpoint, metrics taken on the validation split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub epoch: usize,
    pub recall: f64,
    pub recency: f64,
}

/// Everything a run produces, in memory. `reports` carries one entry per
/// (split, depth) pair; `pareto` and `train_log` are empty for models that
/// do not train iteratively.
#[derive(Debug, Clone, PartialEq)]
pub struct RunBundle {
    pub manifest: RunManifest,
    pub reports: Vec<MetricReport>,
    pub pareto: Vec<ParetoPoint>,
    pub train_log: Vec<EpochEval>,
}

fn stage<T>(name: &'static str, result: Result<T>) -> Result<T> {
    result.map_err(|e| e.in_stage(name))
}

fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_digest(hasher)
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hash_bytes(&bytes))
}

/// Hash over the canonical record stream, independent of source formatting.
pub fn hash_log(log: &InteractionLog) -> String {
    let mut hasher = Sha256::new();
    for r in log.records() {
        let rating = match r.rating {
            Some(v) => format!("{v}"),
            None => String::new(),
        };
        hasher.update(format!(
            "{}\x1f{}\x1f{}\x1f{}\n",
            r.user, r.item, r.timestamp, rating
        ));
    }
    hex_digest(hasher)
}

/// Hash of the effective configuration (defaults and overrides applied).
pub fn config_hash(config: &ExperimentConfig) -> String {
    let text = toml::to_string(config).expect("config serializes");
    hash_bytes(text.as_bytes())
}

/// Load the declared corpus file, or synthesize one when no corpus section
/// is present. Returns the log, its hash, and parse statistics (zero for
/// synthetic corpora).
pub fn load_corpus(config: &ExperimentConfig) -> Result<(InteractionLog, String, ParseStats)> {
    match &config.corpus {
        Some(corpus) => {
            let hash = hash_file(&corpus.path)?;
            let (log, stats) = parse_interactions(
                &corpus.path,
                &corpus.column_spec()?,
                corpus.parse_mode()?,
                corpus.rating_scale()?,
            )?;
            Ok((log, hash, stats))
        }
        None => {
            let spec = config.synthetic.to_spec(config.seed)?;
            let log = generate_drift_corpus(&spec)?;
            let hash = hash_log(&log);
            Ok((log, hash, ParseStats::default()))
        }
    }
}

fn evaluate_into(
    reports: &mut Vec<MetricReport>,
    label: &str,
    provider: &dyn ScoreProvider,
    split: &crate::split::EvalSplit,
    ks: &[usize],
    weights: &[f64],
) -> Result<()> {
    for kreport in evaluate_split(provider, split, ks, weights)? {
        reports.push(MetricReport::new(label, &kreport));
    }
    Ok(())
}

/// Run the configured experiment. The validation split follows the
/// configured protocol; in the development phase a strict-cutoff test split
/// is evaluated alongside it, labeled `test_strict_cutoff`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunBundle> {
    stage("config", config.validate())?;
    let protocol = config.split.protocol()?;
    let phase = config.split.phase()?;
    let params = config.split.to_params()?;
    let kind = config.model.kind()?;
    let ks = config.evaluate.ks.clone();

    let (raw, corpus_hash, _) = stage("corpus", load_corpus(config))?;
    let clean = stage(
        "preprocess",
        preprocess(&raw, &config.preprocess.to_opts()?),
    )?;

    let sets: PhaseSets;
    let catalog;
    let users;
    {
        let built = stage("split", build_catalog_and_matrix(&clean))?;
        catalog = built.0;
        users = built.2;
        sets = stage(
            "split",
            assemble_phase_sets(
                &clean,
                &catalog,
                &users,
                protocol,
                phase,
                &params,
                seeds::derive(config.seed, "split", 0),
            ),
        )?;
    }

    let weights = stage(
        "split",
        RecencyFunction::from_catalog(&catalog).weights_for(&catalog),
    )?;

    let mut reports = Vec::new();
    let mut pareto = Vec::new();
    let mut train_log = Vec::new();
    let val_label = format!("val_{}", protocol.name());

    match kind {
        ModelKind::Popularity => {
            let model = stage("train", fit_popularity(&sets.train))?;
            stage(
                "evaluate",
                evaluate_into(
                    &mut reports,
                    &val_label,
                    &model,
                    &sets.validation,
                    &ks,
                    &weights,
                ),
            )?;
            if let Some(test) = &sets.test {
                stage(
                    "evaluate",
                    evaluate_into(
                        &mut reports,
                        "test_strict_cutoff",
                        &model,
                        test,
                        &ks,
                        &weights,
                    ),
                )?;
            }
        }
        ModelKind::Svd => {
            let model = stage(
                "train",
                fit_truncated_svd(
                    &sets.train,
                    config.model.rank,
                    config.model.power_iterations,
                    seeds::derive(config.seed, "train", 0),
                ),
            )?;
            stage(
                "evaluate",
                evaluate_into(
                    &mut reports,
                    &val_label,
                    &model,
                    &sets.validation,
                    &ks,
                    &weights,
                ),
            )?;
            if let Some(test) = &sets.test {
                stage(
                    "evaluate",
                    evaluate_into(
                        &mut reports,
                        "test_strict_cutoff",
                        &model,
                        test,
                        &ks,
                        &weights,
                    ),
                )?;
            }
        }
        ModelKind::Vae => {
            let eval_k = ks.iter().copied().max().expect("validated nonempty");
            let train_config = config
                .train
                .to_train_config(seeds::derive(config.seed, "train", 0), eval_k)?;
            let arch = config.model.vae_arch(catalog.len());
            let output = stage(
                "train",
                trainer::train(&train_config, arch, &sets.train, &sets.validation, &weights),
            )?;
            for entry in output.pareto.entries() {
                pareto.push(ParetoPoint {
                    epoch: entry.epoch,
                    recall: entry.metrics[0],
                    recency: entry.metrics[1],
                });
            }
            pareto.sort_by_key(|p| p.epoch);
            train_log = output.evals;
            stage(
                "evaluate",
                evaluate_into(
                    &mut reports,
                    &val_label,
                    &output.params,
                    &sets.validation,
                    &ks,
                    &weights,
                ),
            )?;
            if let Some(test) = &sets.test {
                stage(
                    "evaluate",
                    evaluate_into(
                        &mut reports,
                        "test_strict_cutoff",
                        &output.params,
                        test,
                        &ks,
                        &weights,
                    ),
                )?;
            }
        }
    }

    let manifest = RunManifest {
        format: RUN_MANIFEST_FORMAT.into(),
        config_hash: config_hash(config),
        corpus_hash,
        seed: config.seed,
        protocol,
        phase,
        model: config.model.kind.clone(),
        n_users: users.len(),
        n_items: catalog.len(),
        n_interactions: clean.len(),
        cutoff_time: sets.test_cutoff,
    };

    Ok(RunBundle {
        manifest,
        reports,
        pareto,
        train_log,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Serialize metric reports with a stable layout, so identical runs produce
/// byte-identical files.
pub fn metrics_json(reports: &[MetricReport]) -> String {
    let mut out = serde_json::to_string_pretty(reports).expect("reports serialize");
    out.push('\n');
    out
}

pub fn pareto_csv(points: &[ParetoPoint]) -> String {
    let mut out = String::from("epoch,recall,recency\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.epoch, p.recall, p.recency));
    }
    out
}

pub fn train_log_csv(evals: &[EpochEval]) -> String {
    let mut out = String::from("epoch,recall,precision,recency,recency_normalized\n");
    for e in evals {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.epoch, e.recall, e.precision, e.recency, e.recency_normalized
        ));
    }
    out
}

/// Write the bundle under `dir`: manifest.json, metrics.json, pareto.csv,
/// train_log.csv. The CSVs are emitted even when empty, so consumers can
/// rely on the file set.
pub fn write_bundle(dir: &Path, bundle: &RunBundle) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut manifest = serde_json::to_string_pretty(&bundle.manifest).expect("manifest serializes");
    manifest.push('\n');
    write_text(&dir.join("manifest.json"), &manifest)?;
    write_text(&dir.join("metrics.json"), &metrics_json(&bundle.reports))?;
    write_text(&dir.join("pareto.csv"), &pareto_csv(&bundle.pareto))?;
    write_text(
        &dir.join("train_log.csv"),
        &train_log_csv(&bundle.train_log),
    )?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricReport>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("cannot parse {}: {e}", path.display())))
}

pub fn read_pareto_csv(path: &Path) -> Result<Vec<ParetoPoint>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    match lines.next() {
        Some("epoch,recall,recency") => {}
        other => {
            return Err(Error::BadFormatTag(format!(
                "pareto header {:?}",
                other.unwrap_or("")
            )));
        }
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let parse_err = || Error::MalformedRow {
            line: i as u64 + 2,
            message: format!("bad pareto row `{line}`"),
        };
        let epoch = fields
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(parse_err)?;
        let recall = fields
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(parse_err)?;
        let recency = fields
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(parse_err)?;
        if fields.next().is_some() {
            return Err(parse_err());
        }
        points.push(ParetoPoint {
            epoch,
            recall,
            recency,
        });
    }
    Ok(points)
}
