//! Command-line front end: eval, fit, export-dot, inspect.

use clap::{Args, Parser, Subcommand, ValueEnum};
use cobweb_core::cli::{self, CliError, DotTarget};
use cobweb_core::config::{PartialConfig, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cobweb",
    about = "Incremental concept formation over 2D images: Cobweb/3 and Convolutional Cobweb",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the incremental evaluation and write overall.csv, curve.csv,
    /// and summary.json.
    Eval(ConfigArgs),
    /// Train one model on a single generated sequence and save it.
    Fit(FitArgs),
    /// Render a saved model's hierarchy as Graphviz DOT.
    ExportDot(ExportDotArgs),
    /// Print the shape and configuration of a saved model.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// IDX image file (gzip accepted).
    #[arg(long)]
    images: Option<PathBuf>,
    /// IDX label file (gzip accepted).
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Images sampled per digit class in every run.
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    num_runs: Option<usize>,
    /// Comma-separated list: cobweb3, convcobweb.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Standard-deviation floor for continuous attributes.
    #[arg(long)]
    acuity: Option<f64>,
    #[arg(long)]
    filter_size: Option<usize>,
    #[arg(long)]
    bootstrap_resamples: Option<usize>,
    #[arg(long)]
    lowess_frac: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel runs.
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let flags = PartialConfig {
            images: self.images,
            labels: self.labels,
            seed: self.seed,
            per_class: self.per_class,
            num_runs: self.num_runs,
            models: self.models,
            acuity: self.acuity,
            filter_size: self.filter_size,
            bootstrap_resamples: self.bootstrap_resamples,
            lowess_frac: self.lowess_frac,
            out_dir: self.out_dir,
            workers: self.workers,
        };
        let base = match &self.config {
            Some(path) => PartialConfig::from_toml_file(path)?,
            None => PartialConfig::default(),
        };
        Ok(base.overlay(flags).resolve()?)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Where to write the serialized model JSON.
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum WhichTree {
    Filters,
    Classifier,
}

#[derive(Args)]
struct ExportDotArgs {
    /// Saved model JSON.
    #[arg(long)]
    model_in: PathBuf,
    /// Output DOT path.
    #[arg(long)]
    out: PathBuf,
    /// Which hierarchy to render.
    #[arg(long, value_enum)]
    which: WhichTree,
}

#[derive(Args)]
struct InspectArgs {
    /// Saved model JSON.
    #[arg(long)]
    model_in: PathBuf,
}

fn run() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Eval(args) => cli::cmd_eval(&args.resolve()?),
        Command::Fit(args) => {
            let config = args.config.resolve()?;
            cli::cmd_fit(&config, &args.model_out)
        }
        Command::ExportDot(args) => {
            let which = match args.which {
                WhichTree::Filters => DotTarget::Filters,
                WhichTree::Classifier => DotTarget::Classifier,
            };
            cli::cmd_export_dot(&args.model_in, &args.out, which)
        }
        Command::Inspect(args) => cli::cmd_inspect(&args.model_in),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cobweb: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
