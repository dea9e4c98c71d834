//! Experiment configuration: one TOML file covering corpus parsing,
//! preprocessing, the split protocol, model choice, training, and
//! evaluation depths. Parsing is schema-strict (unknown keys are errors)
//! and `validate` checks cross-field consistency before any pipeline
//! stage runs. Command-line overrides mutate the parsed value, so
//! validation runs after overrides, not during parsing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{ColumnSpec, ParseMode, PreprocessOpts, RatingScale};
use crate::error::{Error, Result};
use crate::models::vae::{Objective, VaeArch};
use crate::split::{Phase, Protocol, SplitParams};
use crate::synth::DriftCorpusSpec;
use crate::trainer::{OptimizerKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Popularity,
    Svd,
    Vae,
}

pub fn parse_protocol(name: &str) -> Result<Protocol> {
    match name {
        "traditional" => Ok(Protocol::Traditional),
        "proportional" => Ok(Protocol::Proportional),
        "cutoff" | "strict_cutoff" => Ok(Protocol::StrictCutoff),
        other => Err(Error::InvalidConfig(format!(
            "unknown protocol '{other}' (expected traditional, proportional, or cutoff)"
        ))),
    }
}

pub fn parse_phase(name: &str) -> Result<Phase> {
    match name {
        "development" => Ok(Phase::Development),
        "deployment_ready" => Ok(Phase::DeploymentReady),
        other => Err(Error::InvalidConfig(format!(
            "unknown phase '{other}' (expected development or deployment_ready)"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    #[serde(default = "default_user_column")]
    pub user_column: String,
    #[serde(default = "default_item_column")]
    pub item_column: String,
    /// Empty string declares a log without timestamps.
    #[serde(default = "default_time_column")]
    pub time_column: String,
    /// Empty string declares a log without ratings.
    #[serde(default = "default_rating_column")]
    pub rating_column: String,
    #[serde(default = "default_parse_mode")]
    pub parse_mode: String,
    pub rating_min: Option<f64>,
    pub rating_max: Option<f64>,
}

fn default_user_column() -> String {
    "user_id".into()
}
fn default_item_column() -> String {
    "item_id".into()
}
fn default_time_column() -> String {
    "timestamp".into()
}
fn default_rating_column() -> String {
    "rating".into()
}
fn default_parse_mode() -> String {
    "strict".into()
}

impl CorpusSection {
    pub fn has_timestamps(&self) -> bool {
        !self.time_column.is_empty()
    }

    pub fn column_spec(&self) -> Result<ColumnSpec> {
        if self.user_column.is_empty() || self.item_column.is_empty() {
            return Err(Error::InvalidConfig(
                "user and item columns cannot be empty".into(),
            ));
        }
        let none_if_empty = |s: &str| {
            if s.is_empty() {
                None
            } else {
                Some(s.to_string())
            }
        };
        Ok(ColumnSpec {
            user: self.user_column.clone(),
            item: self.item_column.clone(),
            timestamp: none_if_empty(&self.time_column),
            rating: none_if_empty(&self.rating_column),
        })
    }

    pub fn parse_mode(&self) -> Result<ParseMode> {
        match self.parse_mode.as_str() {
            "strict" => Ok(ParseMode::Strict),
            "lenient" => Ok(ParseMode::Lenient),
            other => Err(Error::InvalidConfig(format!(
                "unknown parse mode '{other}' (expected strict or lenient)"
            ))),
        }
    }

    pub fn rating_scale(&self) -> Result<Option<RatingScale>> {
        match (self.rating_min, self.rating_max) {
            (None, None) => Ok(None),
            (Some(min), Some(max)) if min < max => Ok(Some(RatingScale { min, max })),
            (Some(min), Some(max)) => Err(Error::InvalidConfig(format!(
                "rating scale [{min}, {max}] is not increasing"
            ))),
            _ => Err(Error::InvalidConfig(
                "rating_min and rating_max must be declared together".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessSection {
    pub binarize_threshold: Option<f64>,
    pub min_user_interactions: usize,
    pub min_item_interactions: usize,
    pub window_start: Option<i64>,
    pub window_end: Option<i64>,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            binarize_threshold: None,
            min_user_interactions: 5,
            min_item_interactions: 5,
            window_start: None,
            window_end: None,
        }
    }
}

impl PreprocessSection {
    pub fn to_opts(&self) -> Result<PreprocessOpts> {
        let window = match (self.window_start, self.window_end) {
            (None, None) => None,
            (Some(start), Some(end)) if start <= end => Some((start, end)),
            (Some(start), Some(end)) => {
                return Err(Error::InvalidConfig(format!(
                    "time window [{start}, {end}] is not increasing"
                )));
            }
            _ => {
                return Err(Error::InvalidConfig(
                    "window_start and window_end must be declared together".into(),
                ));
            }
        };
        Ok(PreprocessOpts {
            binarize_threshold: self.binarize_threshold,
            min_user_deg: self.min_user_interactions,
            min_item_deg: self.min_item_interactions,
            window,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub protocol: String,
    pub phase: String,
    pub holdout_frac: f64,
    pub val_user_frac: f64,
    pub cutoff_quantile: Option<f64>,
    pub cutoff_time: Option<i64>,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            protocol: "proportional".into(),
            phase: "development".into(),
            holdout_frac: 0.2,
            val_user_frac: 0.05,
            cutoff_quantile: None,
            cutoff_time: None,
        }
    }
}

impl SplitSection {
    pub fn protocol(&self) -> Result<Protocol> {
        parse_protocol(&self.protocol)
    }

    pub fn phase(&self) -> Result<Phase> {
        parse_phase(&self.phase)
    }

    pub fn to_params(&self) -> Result<SplitParams> {
        if self.cutoff_quantile.is_some() && self.cutoff_time.is_some() {
            return Err(Error::InvalidConfig(
                "cutoff_quantile and cutoff_time are mutually exclusive".into(),
            ));
        }
        let quantile = self.cutoff_quantile.unwrap_or(0.9);
        if !(quantile > 0.0 && quantile < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cutoff quantile {quantile} outside (0, 1)"
            )));
        }
        if !(self.holdout_frac > 0.0 && self.holdout_frac < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "holdout fraction {} outside (0, 1)",
                self.holdout_frac
            )));
        }
        if !(self.val_user_frac > 0.0 && self.val_user_frac < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "validation user fraction {} outside (0, 1)",
                self.val_user_frac
            )));
        }
        Ok(SplitParams {
            holdout_frac: self.holdout_frac,
            val_user_frac: self.val_user_frac,
            cutoff_quantile: quantile,
            cutoff_time: self.cutoff_time,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: String,
    /// Factor count for the truncated factorization model.
    pub rank: usize,
    pub power_iterations: usize,
    /// Encoder/decoder hidden width for the neural model.
    pub hidden: usize,
    pub latent: usize,
    pub dropout: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: "popularity".into(),
            rank: 64,
            power_iterations: 4,
            hidden: 200,
            latent: 64,
            dropout: 0.5,
        }
    }
}

impl ModelSection {
    pub fn kind(&self) -> Result<ModelKind> {
        match self.kind.as_str() {
            "popularity" => Ok(ModelKind::Popularity),
            "svd" => Ok(ModelKind::Svd),
            "vae" => Ok(ModelKind::Vae),
            other => Err(Error::InvalidConfig(format!(
                "unknown model kind '{other}' (expected popularity, svd, or vae)"
            ))),
        }
    }

    pub fn vae_arch(&self, n_items: usize) -> VaeArch {
        VaeArch {
            n_items,
            hidden: self.hidden,
            latent: self.latent,
            dropout: self.dropout,
        }
    }

    fn check(&self) -> Result<()> {
        match self.kind()? {
            ModelKind::Popularity => Ok(()),
            ModelKind::Svd => {
                if self.rank == 0 {
                    Err(Error::InvalidConfig("factor rank must be >= 1".into()))
                } else {
                    Ok(())
                }
            }
            ModelKind::Vae => {
                if self.hidden == 0 || self.latent == 0 {
                    return Err(Error::InvalidConfig(
                        "hidden and latent widths must be >= 1".into(),
                    ));
                }
                if !(0.0..1.0).contains(&self.dropout) {
                    return Err(Error::InvalidConfig(format!(
                        "dropout {} outside [0, 1)",
                        self.dropout
                    )));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub objectives: Vec<Objective>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta_max: f64,
    pub beta_anneal_frac: f64,
    pub optimizer: String,
    pub include_kl_in_recency: bool,
    pub empirical_batches: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let base = TrainConfig::default();
        TrainSection {
            objectives: base.objectives,
            epochs: base.epochs,
            batch_size: base.batch_size,
            learning_rate: base.lr,
            beta_max: base.beta_max,
            beta_anneal_frac: base.beta_anneal_frac,
            optimizer: "adam".into(),
            include_kl_in_recency: base.include_kl_in_recency,
            empirical_batches: base.empirical_batches,
        }
    }
}

impl TrainSection {
    pub fn optimizer(&self) -> Result<OptimizerKind> {
        match self.optimizer.as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::InvalidConfig(format!(
                "unknown optimizer '{other}' (expected adam or sgd)"
            ))),
        }
    }

    pub fn to_train_config(&self, seed: u64, eval_k: usize) -> Result<TrainConfig> {
        let config = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.learning_rate,
            objectives: self.objectives.clone(),
            seed,
            eval_k,
            beta_max: self.beta_max,
            beta_anneal_frac: self.beta_anneal_frac,
            optimizer: self.optimizer()?,
            include_kl_in_recency: self.include_kl_in_recency,
            empirical_batches: self.empirical_batches,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSection {
    pub ks: Vec<usize>,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection { ks: vec![20] }
    }
}

impl EvaluateSection {
    fn check(&self) -> Result<()> {
        if self.ks.is_empty() {
            return Err(Error::InvalidConfig("metric depth list is empty".into()));
        }
        if self.ks.contains(&0) {
            return Err(Error::InvalidConfig("metric depths must be >= 1".into()));
        }
        let mut sorted = self.ks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.ks.len() {
            return Err(Error::InvalidConfig("metric depths repeat".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    pub n_users: usize,
    pub n_items: usize,
    pub horizon: i64,
    pub initial_frac: f64,
    pub decay: f64,
    pub affinity: f64,
    pub fresh_window: f64,
    pub events_per_user: usize,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let base = DriftCorpusSpec::default();
        SyntheticSection {
            n_users: base.n_users,
            n_items: base.n_items,
            horizon: base.horizon,
            initial_frac: base.initial_frac,
            decay: base.decay,
            affinity: base.affinity,
            fresh_window: base.fresh_window,
            events_per_user: base.events_per_user,
        }
    }
}

impl SyntheticSection {
    pub fn to_spec(&self, seed: u64) -> Result<DriftCorpusSpec> {
        let spec = DriftCorpusSpec {
            n_users: self.n_users,
            n_items: self.n_items,
            horizon: self.horizon,
            initial_frac: self.initial_frac,
            decay: self.decay,
            affinity: self.affinity,
            fresh_window: self.fresh_window,
            events_per_user: self.events_per_user,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub corpus: Option<CorpusSection>,
    #[serde(default)]
    pub preprocess: PreprocessSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub synthetic: SyntheticSection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("run-out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out_dir: default_out_dir(),
            corpus: None,
            preprocess: PreprocessSection::default(),
            split: SplitSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            evaluate: EvaluateSection::default(),
            synthetic: SyntheticSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parse without validating, so callers can apply overrides first.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Cross-field consistency on top of the per-section checks.
    pub fn validate(&self) -> Result<()> {
        if let Some(corpus) = &self.corpus {
            corpus.column_spec()?;
            corpus.parse_mode()?;
            corpus.rating_scale()?;
            if self.preprocess.binarize_threshold.is_some() && corpus.rating_column.is_empty() {
                return Err(Error::InvalidConfig(
                    "binarization threshold requires a rating column".into(),
                ));
            }
        }
        self.preprocess.to_opts()?;
        self.split.to_params()?;
        let protocol = self.split.protocol()?;
        self.split.phase()?;
        let kind = self.model.kind()?;
        self.model.check()?;
        self.evaluate.check()?;
        self.train.to_train_config(self.seed, self.evaluate.ks[0])?;
        self.synthetic.to_spec(self.seed)?;

        let has_timestamps = self
            .corpus
            .as_ref()
            .is_none_or(CorpusSection::has_timestamps);
        if !has_timestamps {
            if self.train.objectives.contains(&Objective::Recency) {
                return Err(Error::InvalidConfig(
                    "recency objective requires a timestamp column".into(),
                ));
            }
            if protocol != Protocol::Traditional {
                return Err(Error::InvalidConfig(format!(
                    "{} protocol requires a timestamp column",
                    protocol.name()
                )));
            }
            if self.split.phase()? == Phase::Development {
                return Err(Error::InvalidConfig(
                    "development phase requires a timestamp column for the test cutoff".into(),
                ));
            }
        }
        if kind != ModelKind::Vae && self.train.objectives != vec![Objective::Relevance] {
            return Err(Error::InvalidConfig(
                "objective selection applies to the vae model only".into(),
            ));
        }
        Ok(())
    }
}
