//! Command-line front end. Every subcommand reads one TOML config (plus
//! flag overrides), writes its artifacts under one output directory, and
//! reports failures on stderr tagged with the stage that produced them.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use temporec::config::ExperimentConfig;
use temporec::corpus::{build_catalog_and_matrix, preprocess, write_snapshot};
use temporec::pipeline::{
    hash_log, load_corpus, read_metrics, read_pareto_csv, run_experiment, write_bundle,
    ParetoPoint, RunBundle,
};
use temporec::report::{
    combined_pareto_csv, dominance_verdict, metric_table_csv, metric_table_text, NamedReports,
};
use temporec::seeds;
use temporec::split::{assemble_phase_sets, SplitManifest};
use temporec::synth::generate_drift_corpus;
use temporec::{Error, Result};

#[derive(Parser)]
#[command(
    name = "temporec",
    version,
    about = "Temporally faithful offline evaluation and multi-objective training for implicit-feedback recommenders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus the overrides shared by the experiment subcommands.
#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Split protocol override: traditional, proportional, or cutoff.
    #[arg(long)]
    protocol: Option<String>,
    /// Phase override: development or deployment_ready.
    #[arg(long)]
    phase: Option<String>,
    /// Per-user holdout fraction override.
    #[arg(long)]
    holdout_frac: Option<f64>,
    /// Validation-user fraction override.
    #[arg(long)]
    val_user_frac: Option<f64>,
    /// Test-cutoff quantile override.
    #[arg(long, conflicts_with = "cutoff_time")]
    cutoff_quantile: Option<f64>,
    /// Explicit test-cutoff timestamp override.
    #[arg(long)]
    cutoff_time: Option<i64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn effective_config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(protocol) = &self.protocol {
            config.split.protocol = protocol.clone();
        }
        if let Some(phase) = &self.phase {
            config.split.phase = phase.clone();
        }
        if let Some(frac) = self.holdout_frac {
            config.split.holdout_frac = frac;
        }
        if let Some(frac) = self.val_user_frac {
            config.split.val_user_frac = frac;
        }
        if let Some(q) = self.cutoff_quantile {
            config.split.cutoff_quantile = Some(q);
            config.split.cutoff_time = None;
        }
        if let Some(t) = self.cutoff_time {
            config.split.cutoff_time = Some(t);
            config.split.cutoff_quantile = None;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        config.validate().map_err(|e| e.in_stage("config"))?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and clean a corpus; write the canonical log and index snapshot.
    Preprocess(RunArgs),
    /// Build the train matrix and evaluation splits; write split manifests.
    Split(RunArgs),
    /// Run the experiment and write its bundle, with training diagnostics.
    Train(RunArgs),
    /// Run the experiment, write its bundle, and print the metric table.
    Evaluate(RunArgs),
    /// Merge Pareto-front files and, given exactly two, print a verdict.
    Pareto(ParetoArgs),
    /// Summarize finished bundles side by side.
    Report(ReportArgs),
    /// Generate a synthetic drift corpus.
    GenSynthetic(RunArgs),
}

#[derive(Args)]
struct ParetoArgs {
    /// Pareto-front CSV (repeat per front).
    #[arg(long, required = true)]
    front: Vec<PathBuf>,
    /// Display name per front, in --front order. Defaults to file stems.
    #[arg(long)]
    name: Vec<String>,
    /// Directory for the merged front file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Bundle directory written by train or evaluate (repeat per run).
    #[arg(long, required = true)]
    bundle: Vec<PathBuf>,
    /// Display name per bundle, in --bundle order. Defaults to dir names.
    #[arg(long)]
    name: Vec<String>,
    /// Directory for report files. Tables also print to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Preprocess(args) => cmd_preprocess(&args),
        Command::Split(args) => cmd_split(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Pareto(args) => cmd_pareto(&args),
        Command::Report(args) => cmd_report(&args),
        Command::GenSynthetic(args) => cmd_gen_synthetic(&args),
    }
}

fn ensure_dir(dir: &PathBuf) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })
}

fn write_text(path: PathBuf, text: &str) -> Result<()> {
    std::fs::write(&path, text).map_err(|source| Error::Io { path, source })
}

fn cmd_gen_synthetic(args: &RunArgs) -> Result<()> {
    let config = args.effective_config()?;
    let spec = config.synthetic.to_spec(config.seed)?;
    let log = generate_drift_corpus(&spec).map_err(|e| e.in_stage("corpus"))?;
    let out = &config.out_dir;
    ensure_dir(out)?;
    let path = out.join("corpus.csv");
    log.write_canonical_csv(&path)?;
    let manifest = serde_json::json!({
        "format": "temporec-synthetic v1",
        "spec": config.synthetic,
        "seed": config.seed,
        "corpus_hash": hash_log(&log),
        "n_interactions": log.len(),
    });
    write_text(
        out.join("synthetic.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&manifest).expect("manifest serializes")
        ),
    )?;
    eprintln!(
        "[gen-synthetic] wrote {} interactions to {}",
        log.len(),
        path.display()
    );
    Ok(())
}

fn load_clean(config: &ExperimentConfig) -> Result<temporec::corpus::InteractionLog> {
    let (raw, _, stats) = load_corpus(config).map_err(|e| e.in_stage("corpus"))?;
    if stats.rows_read > 0 {
        eprintln!(
            "[corpus] read {} rows, loaded {}, skipped {}",
            stats.rows_read, stats.loaded, stats.skipped
        );
    } else {
        eprintln!("[corpus] synthesized {} interactions", raw.len());
    }
    let clean =
        preprocess(&raw, &config.preprocess.to_opts()?).map_err(|e| e.in_stage("preprocess"))?;
    eprintln!(
        "[preprocess] kept {} of {} interactions",
        clean.len(),
        raw.len()
    );
    Ok(clean)
}

fn cmd_preprocess(args: &RunArgs) -> Result<()> {
    let config = args.effective_config()?;
    let clean = load_clean(&config)?;
    let (catalog, matrix, users) =
        build_catalog_and_matrix(&clean).map_err(|e| e.in_stage("preprocess"))?;
    let out = &config.out_dir;
    ensure_dir(out)?;
    clean.write_canonical_csv(&out.join("corpus.csv"))?;
    write_snapshot(out, &catalog, &matrix, &users)?;
    eprintln!(
        "[preprocess] snapshot: {} users, {} items, {} interactions in {}",
        users.len(),
        catalog.len(),
        matrix.nnz(),
        out.display()
    );
    Ok(())
}

fn cmd_split(args: &RunArgs) -> Result<()> {
    let config = args.effective_config()?;
    let clean = load_clean(&config)?;
    let (catalog, _, users) = build_catalog_and_matrix(&clean).map_err(|e| e.in_stage("split"))?;
    let params = config.split.to_params()?;
    let sets = assemble_phase_sets(
        &clean,
        &catalog,
        &users,
        config.split.protocol()?,
        config.split.phase()?,
        &params,
        seeds::derive(config.seed, "split", 0),
    )
    .map_err(|e| e.in_stage("split"))?;
    let out = &config.out_dir;
    ensure_dir(out)?;
    let seed = seeds::derive(config.seed, "split", 0);
    SplitManifest::new(sets.validation.clone(), &params, seed)
        .write(&out.join("validation.json"))?;
    eprintln!(
        "[split] validation: {} users under {} protocol",
        sets.validation.users.len(),
        sets.validation.protocol.name()
    );
    if let Some(test) = &sets.test {
        SplitManifest::new(test.clone(), &params, seed).write(&out.join("test.json"))?;
        eprintln!(
            "[split] test: {} users, cutoff {}",
            test.users.len(),
            sets.test_cutoff
                .expect("development test split has a cutoff")
        );
    }
    Ok(())
}

fn run_and_write(config: &ExperimentConfig) -> Result<RunBundle> {
    let bundle = run_experiment(config)?;
    write_bundle(&config.out_dir, &bundle)?;
    eprintln!(
        "[evaluate] wrote bundle ({} reports, {} front points) to {}",
        bundle.reports.len(),
        bundle.pareto.len(),
        config.out_dir.display()
    );
    Ok(bundle)
}

fn cmd_train(args: &RunArgs) -> Result<()> {
    let config = args.effective_config()?;
    let bundle = run_and_write(&config)?;
    if bundle.train_log.is_empty() {
        eprintln!(
            "[train] model `{}` fits in one pass; no training trajectory",
            bundle.manifest.model
        );
    }
    for eval in &bundle.train_log {
        eprintln!(
            "[train] epoch {}: recall {:.4}, recency {:.4}",
            eval.epoch, eval.recall, eval.recency
        );
    }
    Ok(())
}

fn cmd_evaluate(args: &RunArgs) -> Result<()> {
    let config = args.effective_config()?;
    let bundle = run_and_write(&config)?;
    let named: Vec<NamedReports> = vec![("run", &bundle.reports)];
    print!(
        "{}",
        metric_table_text(&named).map_err(|e| e.in_stage("report"))?
    );
    Ok(())
}

fn stems(paths: &[PathBuf], names: &[String], flag: &str) -> Result<Vec<String>> {
    if !names.is_empty() && names.len() != paths.len() {
        return Err(Error::InvalidConfig(format!(
            "{} --name flags for {} {flag} flags",
            names.len(),
            paths.len()
        )));
    }
    Ok(paths
        .iter()
        .enumerate()
        .map(|(i, path)| {
            names.get(i).cloned().unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("front{i}"))
            })
        })
        .collect())
}

fn cmd_pareto(args: &ParetoArgs) -> Result<()> {
    let names = stems(&args.front, &args.name, "--front")?;
    let mut fronts: Vec<Vec<ParetoPoint>> = Vec::new();
    for path in &args.front {
        fronts.push(read_pareto_csv(path).map_err(|e| e.in_stage("report"))?);
    }
    let named: Vec<(&str, &[ParetoPoint])> = names
        .iter()
        .map(|n| n.as_str())
        .zip(fronts.iter().map(|f| f.as_slice()))
        .collect();
    if let Some(out) = &args.out {
        ensure_dir(out)?;
        write_text(
            out.join("pareto_combined.csv"),
            &combined_pareto_csv(&named),
        )?;
    }
    for (name, front) in &named {
        eprintln!("[report] front `{name}`: {} points", front.len());
    }
    if let [(name_a, front_a), (name_b, front_b)] = named.as_slice() {
        let verdict = dominance_verdict(name_a, front_a, name_b, front_b)
            .map_err(|e| e.in_stage("report"))?;
        println!("{verdict}");
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let names = stems(&args.bundle, &args.name, "--bundle")?;
    let mut all_reports = Vec::new();
    let mut all_fronts = Vec::new();
    for dir in &args.bundle {
        all_reports
            .push(read_metrics(&dir.join("metrics.json")).map_err(|e| e.in_stage("report"))?);
        let pareto_path = dir.join("pareto.csv");
        let front = if pareto_path.exists() {
            read_pareto_csv(&pareto_path).map_err(|e| e.in_stage("report"))?
        } else {
            Vec::new()
        };
        all_fronts.push(front);
    }
    let named: Vec<NamedReports> = names
        .iter()
        .map(|n| n.as_str())
        .zip(all_reports.iter().map(|r| r.as_slice()))
        .collect();
    let text = metric_table_text(&named).map_err(|e| e.in_stage("report"))?;
    let csv = metric_table_csv(&named).map_err(|e| e.in_stage("report"))?;
    print!("{text}");

    let named_fronts: Vec<(&str, &[ParetoPoint])> = names
        .iter()
        .map(|n| n.as_str())
        .zip(all_fronts.iter().map(|f| f.as_slice()))
        .collect();
    let with_points: Vec<&(&str, &[ParetoPoint])> =
        named_fronts.iter().filter(|(_, f)| !f.is_empty()).collect();
    let verdict = if let [a, b] = with_points.as_slice() {
        let line = dominance_verdict(a.0, a.1, b.0, b.1).map_err(|e| e.in_stage("report"))?;
        println!("front verdict: {line}");
        Some(line)
    } else {
        None
    };

    if let Some(out) = &args.out {
        ensure_dir(out)?;
        write_text(out.join("report.txt"), &text)?;
        write_text(out.join("report.csv"), &csv)?;
        write_text(
            out.join("pareto_combined.csv"),
            &combined_pareto_csv(&named_fronts),
        )?;
        if let Some(line) = verdict {
            write_text(out.join("verdict.txt"), &format!("{line}\n"))?;
        }
    }
    Ok(())
}
