use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use debias::harness::{read_runs, run_experiment, write_reports, write_runs, DatasetSpec, ExperimentConfig, Format};
use debias::ingest::{generate_synthetic, load_yahoo_with_ids, write_canonical, write_id_map};
use debias::metrics::evaluate;
use debias::models::{train_model, Checkpoint, ModelKind};

#[derive(Parser)]
#[command(name = "debias", version, about = "Debiased matrix factorization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, convert or generate a dataset into canonical CSV files.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model for one seed and write a checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: ModelKind,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test part of a dataset.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "csv")]
        format: Format,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full experiment config and write reports.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        repeats: Option<usize>,
        /// Overrides the base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report formats; both when omitted.
        #[arg(long)]
        format: Option<Format>,
    },
    /// Re-aggregate stored run results.
    Report {
        /// Directory holding runs.csv.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<Format>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Experiment config; supplies the dataset, split ratios and hyperparameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset kind: coat, yahoo, synthetic or canonical.
    #[arg(long)]
    dataset: Option<String>,
    /// Dataset directory (coat, yahoo) or biased CSV (canonical).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Randomized CSV for canonical datasets.
    #[arg(long)]
    randomized: Option<PathBuf>,
    /// Synthetic preset: set-a, set-b or set-c.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl DataArgs {
    fn config(&self, models: Vec<ModelKind>) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.dataset) {
            (Some(path), None) => {
                ExperimentConfig::from_file(path).with_context(|| format!("loading config {}", path.display()))?
            }
            (None, Some(kind)) => {
                let mut spec = DatasetSpec::from_parts(kind, self.input.as_deref(), self.preset.as_deref())?;
                if let DatasetSpec::Canonical { randomized, .. } = &mut spec {
                    randomized.clone_from(&self.randomized);
                }
                ExperimentConfig::new(spec, models.clone())
            }
            (Some(_), Some(_)) => bail!("--config and --dataset are mutually exclusive"),
            (None, None) => bail!("a dataset is required: pass --config or --dataset"),
        };
        if !models.is_empty() {
            cfg.models = models;
        }
        Ok(cfg)
    }
}

fn ingest(data: &DataArgs, out: &Path) -> Result<()> {
    let cfg = data.config(Vec::new())?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let write = |name: &str, ds: &debias::data::Dataset| -> Result<()> {
        let path = out.join(name);
        write_canonical(ds, &path)?;
        println!("wrote {} ({} rows)", path.display(), ds.interactions.len());
        Ok(())
    };
    match &cfg.dataset {
        DatasetSpec::Yahoo { train, test } => {
            let (b, r, ids) = load_yahoo_with_ids(train, test)?;
            write("biased.csv", &b)?;
            write("randomized.csv", &r)?;
            write_id_map(out.join("user_ids.csv"), &ids.users)?;
            write_id_map(out.join("item_ids.csv"), &ids.items)?;
        }
        DatasetSpec::Synthetic(s) => {
            let mut s = s.clone();
            if let Some(seed) = data.seed {
                s.seed = seed;
            }
            let gen = generate_synthetic(&s)?;
            write("biased.csv", &gen.biased)?;
            if let Some(r) = &gen.randomized {
                write("randomized.csv", r)?;
            }
            gen.ground_truth.write_csv(out.join("ground_truth.csv"))?;
        }
        spec => {
            let loaded = spec.load()?;
            write("biased.csv", &loaded.biased)?;
            if let Some(r) = &loaded.randomized {
                write("randomized.csv", r)?;
            }
        }
    }
    Ok(())
}

fn train(data: &DataArgs, model: ModelKind, out: &Path) -> Result<()> {
    let cfg = data.config(vec![model])?;
    let seed = data.seed.unwrap_or(cfg.base_seed);
    let loaded = cfg.dataset.load()?;
    let split = loaded.split(cfg.ratios, cfg.holdout, seed)?;
    let hp = cfg.hyper_params(model);
    let (trained, report) = train_model(model, &split, &hp, seed, cfg.propensity)?;
    Checkpoint {
        kind: model,
        seed,
        dataset: loaded.name().to_string(),
        hp,
        model: trained,
    }
    .save(out)?;
    println!(
        "{model} on {}: {} epochs (best {}), validation AUC {}, {:.2}s -> {}",
        loaded.name(),
        report.epochs_run,
        report.best_epoch,
        report
            .best_validation_auc
            .map_or("undefined".to_string(), |a| format!("{a:.4}")),
        report.wall_time_seconds,
        out.display()
    );
    Ok(())
}

fn evaluate_checkpoint(data: &DataArgs, checkpoint: &Path, format: Format, out: Option<&Path>) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let cfg = data.config(vec![ck.kind])?;
    let seed = data.seed.unwrap_or(ck.seed);
    let loaded = cfg.dataset.load()?;
    let split = loaded.split(cfg.ratios, cfg.holdout, seed)?;
    let m = &ck.model;
    if (m.num_users, m.num_items) != (split.meta.num_users, split.meta.num_items) {
        bail!(
            "checkpoint shape {}x{} does not match dataset {}x{}",
            m.num_users,
            m.num_items,
            split.meta.num_users,
            split.meta.num_items
        );
    }
    let v = evaluate(m, &split.d_te, &split.meta, cfg.k)?;
    let rows = [
        ("rmse", v.rmse),
        ("auc", v.auc),
        (&*format!("ndcg@{}", cfg.k), v.ndcg),
        ("gini", v.gini),
        ("entropy", v.entropy),
    ];
    let mut body = String::new();
    match format {
        Format::Csv => {
            body.push_str("model,metric,value\n");
            for (k, x) in rows {
                body.push_str(&format!("{},{k},{x}\n", ck.kind));
            }
        }
        Format::Markdown => {
            body.push_str("| Model | Metric | Value |\n|---|---|---|\n");
            for (k, x) in rows {
                body.push_str(&format!("| {} | {k} | {x:.4} |\n", ck.kind.label()));
            }
        }
    }
    match out {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{body}"),
    }
    Ok(())
}

fn formats(f: Option<Format>) -> Vec<Format> {
    f.map_or_else(|| vec![Format::Csv, Format::Markdown], |f| vec![f])
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { data, out } => ingest(&data, &out),
        Command::Train { data, model, out } => train(&data, model, &out),
        Command::Evaluate {
            data,
            checkpoint,
            format,
            out,
        } => evaluate_checkpoint(&data, &checkpoint, format, out.as_deref()),
        Command::Bench {
            config,
            repeats,
            seed,
            out,
            format,
        } => {
            let mut cfg =
                ExperimentConfig::from_file(&config).with_context(|| format!("loading config {}", config.display()))?;
            if let Some(r) = repeats {
                cfg.repeats = r;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            let outcome = run_experiment(&cfg)?;
            write_runs(&outcome, &cfg.out)?;
            write_reports(&outcome, &cfg.out, &formats(format))?;
            println!(
                "{} runs, {} skipped -> {}",
                outcome.results.len(),
                outcome.skipped.len(),
                cfg.out.display()
            );
            Ok(())
        }
        Command::Report { input, out, format } => {
            let outcome = read_runs(&input)?;
            let out = out.unwrap_or(input);
            write_reports(&outcome, &out, &formats(format))?;
            println!("report -> {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
