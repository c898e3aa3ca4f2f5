//! Command-line front end: dataset generation, training, evaluation,
//! run comparison, and SVG figures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sigma2r_core::checkpoint::{load_checkpoint, save_checkpoint};
use sigma2r_core::config::{load_config, render_config, RunSpec};
use sigma2r_core::data::{fuzzy::generate_fuzzy_rgb, idx, Dataset, Split};
use sigma2r_core::error::{Error, Result};
use sigma2r_core::train::{evaluate, train_with_observer, MetricsRecord};
use sigma2r_core::{metrics, plot, report};

#[derive(Parser)]
#[command(name = "sigma2r", version, about = "Training laboratory for variance-weighted center losses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic Fuzzy-RGB dataset as an IDX pair.
    GenFuzzy {
        #[arg(long, default_value_t = 3000)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for fuzzy-images.idx and fuzzy-labels.idx.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a training job described by a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Directory for artifacts whose paths the config leaves unset.
        #[arg(long, default_value = "runs/latest")]
        out_dir: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Compare a baseline run (A) against another run (B); repeats are
    /// extra metrics files.
    Compare {
        #[arg(long = "run-a", required = true, num_args = 1..)]
        run_a: Vec<PathBuf>,
        #[arg(long = "run-b", required = true, num_args = 1..)]
        run_b: Vec<PathBuf>,
        /// Optional CSV destination; the table always goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an SVG figure.
    #[command(subcommand)]
    Plot(PlotKind),
}

#[derive(Subcommand)]
enum PlotKind {
    /// Scatter the 2-D feature tap of a checkpoint over a dataset.
    Features2d {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-class growth-weight trajectories from a metrics file.
    WkTrajectory {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    /// One of fuzzy, idx, cifar10.
    #[arg(long)]
    dataset: String,
    /// Fuzzy: samples per class.
    #[arg(long, default_value_t = 300)]
    per_class: usize,
    /// Fuzzy: generation seed.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// IDX: image file.
    #[arg(long)]
    images: Option<PathBuf>,
    /// IDX: label file.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// CIFAR-10: archive directory.
    #[arg(long)]
    cifar_dir: Option<PathBuf>,
    /// CIFAR-10: which split to evaluate.
    #[arg(long, default_value = "train")]
    split: String,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        match self.dataset.as_str() {
            "fuzzy" => generate_fuzzy_rgb(self.per_class, self.data_seed),
            "idx" => {
                let images = self.images.as_ref().ok_or_else(|| {
                    Error::Config("--images is required for --dataset idx".into())
                })?;
                let labels = self.labels.as_ref().ok_or_else(|| {
                    Error::Config("--labels is required for --dataset idx".into())
                })?;
                idx::load_idx(images, labels, Split::Train)
            }
            "cifar10" => {
                let dir = self.cifar_dir.as_ref().ok_or_else(|| {
                    Error::Config("--cifar-dir is required for --dataset cifar10".into())
                })?;
                let (train, test) = sigma2r_core::data::cifar::load_cifar10_binary(dir)?;
                match self.split.as_str() {
                    "train" => Ok(train),
                    "test" => Ok(test),
                    other => Err(Error::Config(format!(
                        "--split must be train or test, got {other:?}"
                    ))),
                }
            }
            other => Err(Error::Config(format!(
                "unknown dataset {other:?}, expected one of {{fuzzy, idx, cifar10}}"
            ))),
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenFuzzy { per_class, seed, out } => gen_fuzzy(per_class, seed, &out),
        Command::Train { config, out_dir } => train_cmd(&config, &out_dir),
        Command::Eval { checkpoint, data } => eval_cmd(&checkpoint, &data),
        Command::Compare { run_a, run_b, out } => compare_cmd(&run_a, &run_b, out.as_deref()),
        Command::Plot(kind) => plot_cmd(kind),
    }
}

fn gen_fuzzy(per_class: usize, seed: u64, out: &Path) -> Result<()> {
    if per_class == 0 {
        return Err(Error::Config("--per-class must be at least 1".into()));
    }
    std::fs::create_dir_all(out)?;
    let dataset = generate_fuzzy_rgb(per_class, seed)?;
    let images = out.join("fuzzy-images.idx");
    let labels = out.join("fuzzy-labels.idx");
    idx::save_idx(&dataset, &images, &labels)?;
    println!("{}", images.display());
    println!("{}", labels.display());
    Ok(())
}

fn train_cmd(config_path: &Path, out_dir: &Path) -> Result<()> {
    let spec = load_config(config_path)?;
    for notice in &spec.notices {
        eprintln!("notice: {notice}");
    }
    let (train_ds, test_ds) = spec.dataset.load()?;

    std::fs::create_dir_all(out_dir)?;
    let metrics_path = spec
        .metrics_path
        .clone()
        .unwrap_or_else(|| out_dir.join("metrics.csv"));
    let checkpoint_path = spec
        .checkpoint_path
        .clone()
        .unwrap_or_else(|| out_dir.join("checkpoint.json"));
    let manifest_path = out_dir.join("manifest.json");

    let class_count = train_ds.class_count;
    metrics::write_empty(&metrics_path, class_count)?;
    let out = train_with_observer(
        &spec.train,
        &train_ds,
        test_ds.as_ref(),
        |record: &MetricsRecord| {
            eprintln!(
                "epoch {}: loss={:.6} train_acc={:.4}",
                record.epoch, record.total_loss, record.train_accuracy
            );
            metrics::append_record(&metrics_path, class_count, record)
        },
    )?;
    save_checkpoint(&checkpoint_path, &out.model, &out.loss_state)?;
    write_manifest(&manifest_path, &spec, &metrics_path, &checkpoint_path)?;

    println!("{}", metrics_path.display());
    println!("{}", checkpoint_path.display());
    println!("{}", manifest_path.display());
    Ok(())
}

fn write_manifest(
    path: &Path,
    spec: &RunSpec,
    metrics_path: &Path,
    checkpoint_path: &Path,
) -> Result<()> {
    let manifest = serde_json::json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "seed": spec.train.seed,
        "config": render_config(spec),
        "artifacts": {
            "metrics": metrics_path.display().to_string(),
            "checkpoint": checkpoint_path.display().to_string(),
            "manifest": path.display().to_string(),
        },
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    std::fs::write(path, text)?;
    Ok(())
}

fn eval_cmd(checkpoint: &Path, data: &DataArgs) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let dataset = data.load()?;
    let eval = evaluate(&ckpt.model, &dataset)?;
    println!("accuracy,{}", eval.accuracy);
    for (j, v) in eval.icj.iter().enumerate() {
        println!("icj_{j},{v}");
    }
    Ok(())
}

fn read_side(paths: &[PathBuf]) -> Result<Vec<Vec<MetricsRecord>>> {
    paths
        .iter()
        .map(|p| metrics::read_metrics(p).map(|(_, records)| records))
        .collect()
}

fn compare_cmd(run_a: &[PathBuf], run_b: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let a = read_side(run_a)?;
    let b = read_side(run_b)?;
    let report = report::compare(&a, &b)?;
    print!("{}", report.to_table());
    if let Some(path) = out {
        std::fs::write(path, report.to_csv())?;
    }
    Ok(())
}

fn plot_cmd(kind: PlotKind) -> Result<()> {
    match kind {
        PlotKind::Features2d { checkpoint, data, out } => {
            let ckpt = load_checkpoint(&checkpoint)?;
            let dataset = data.load()?;
            let eval = evaluate(&ckpt.model, &dataset)?;
            let svg =
                plot::features_scatter_svg(&eval.features, &eval.labels, &ckpt.loss_state.centers)?;
            std::fs::write(&out, svg)?;
            println!("{}", out.display());
        }
        PlotKind::WkTrajectory { metrics: metrics_path, out } => {
            let (_, records) = metrics::read_metrics(&metrics_path)?;
            let svg = plot::wk_trajectory_svg(&records)?;
            std::fs::write(&out, svg)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}
