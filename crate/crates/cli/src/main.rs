use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use predmult_cli::audit::{export_model, profile_csv, write_generated, MpsTarget};
use predmult_cli::{run, CliError, RunConfig, Verb};

#[derive(Parser)]
#[command(name = "predmult", version, about = "Exact predictive multiplicity audits for linear classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Baseline, discrepancy and ambiguity paths, invariant checks and group burden.
    Audit(RunArgs),
    /// Fit the 0-1 loss baseline only.
    Baseline(RunArgs),
    /// Baseline plus the discrepancy path.
    Discrepancy(RunArgs),
    /// Baseline plus the ambiguity path.
    Ambiguity(RunArgs),
    /// Penalized logistic regression pool and its multiplicity estimates.
    Adhoc(RunArgs),
    /// Write a synthetic dataset as CSV.
    Generate {
        name: String,
        #[arg(long, default_value_t = 1)]
        scale: u64,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Write a baseline, discrepancy or flip model in fixed MPS format.
    ExportMps {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = ModelKind::Baseline)]
        model: ModelKind,
        /// Level set of a discrepancy model.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Example forced to flip in a flip model.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Baseline,
    Disc,
    Flip,
}

/// Every flag overrides the same key of the config file.
#[derive(Args)]
struct RunArgs {
    /// `key = value` config file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `desk` or `paper` time limits.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    scale: Option<u64>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    group_column: Option<String>,
    /// Comma-separated feature column names.
    #[arg(long)]
    feature_columns: Option<String>,
    #[arg(long)]
    split_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    oversample: Option<bool>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    big_m: Option<f64>,
    #[arg(long)]
    per_example_big_m: Option<bool>,
    /// `default`, `multiples:K` or a comma-separated list.
    #[arg(long)]
    epsilons: Option<String>,
    /// Seconds.
    #[arg(long)]
    baseline_time_limit: Option<f64>,
    /// Seconds.
    #[arg(long)]
    disc_time_limit: Option<f64>,
    /// Seconds.
    #[arg(long)]
    flip_time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output_dir: Option<String>,
    #[arg(long)]
    adhoc: Option<bool>,
    #[arg(long)]
    adhoc_alphas: Option<usize>,
    #[arg(long)]
    adhoc_lambdas: Option<usize>,
    #[arg(long)]
    adhoc_seed: Option<u64>,
    #[arg(long)]
    node_log: Option<bool>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.preset {
            config.apply_preset(p)?;
        }
        let pairs: [(&str, Option<String>); 24] = [
            ("dataset", self.dataset),
            ("generator", self.generator),
            ("scale", self.scale.map(|v| v.to_string())),
            ("label_column", self.label_column),
            ("group_column", self.group_column),
            ("feature_columns", self.feature_columns),
            ("split_fraction", self.split_fraction.map(|v| v.to_string())),
            ("split_seed", self.split_seed.map(|v| v.to_string())),
            ("oversample", self.oversample.map(|v| v.to_string())),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("big_m", self.big_m.map(|v| v.to_string())),
            ("per_example_big_m", self.per_example_big_m.map(|v| v.to_string())),
            ("epsilons", self.epsilons),
            ("baseline_time_limit", self.baseline_time_limit.map(|v| v.to_string())),
            ("disc_time_limit", self.disc_time_limit.map(|v| v.to_string())),
            ("flip_time_limit", self.flip_time_limit.map(|v| v.to_string())),
            ("node_limit", self.node_limit.map(|v| v.to_string())),
            ("workers", self.workers.map(|v| v.to_string())),
            ("output_dir", self.output_dir),
            ("adhoc", self.adhoc.map(|v| v.to_string())),
            ("adhoc_alphas", self.adhoc_alphas.map(|v| v.to_string())),
            ("adhoc_lambdas", self.adhoc_lambdas.map(|v| v.to_string())),
            ("adhoc_seed", self.adhoc_seed.map(|v| v.to_string())),
            ("node_log", self.node_log.map(|v| v.to_string())),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                config.set(key, &v)?;
            }
        }
        Ok(config)
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    let (args, verb) = match command {
        Command::Generate { name, scale, output } => {
            write_generated(&name, scale, &output)?;
            println!("wrote {}", output.display());
            return Ok(());
        }
        Command::ExportMps {
            run,
            model,
            epsilon,
            index,
        } => {
            let target = match model {
                ModelKind::Baseline => MpsTarget::Baseline,
                ModelKind::Disc => MpsTarget::Disc { epsilon },
                ModelKind::Flip => MpsTarget::Flip { index },
            };
            let path = export_model(&run.into_config()?, target)?;
            println!("wrote {}", path.display());
            return Ok(());
        }
        Command::Audit(a) => (a, Verb::Audit),
        Command::Baseline(a) => (a, Verb::Baseline),
        Command::Discrepancy(a) => (a, Verb::Discrepancy),
        Command::Ambiguity(a) => (a, Verb::Ambiguity),
        Command::Adhoc(a) => (a, Verb::Adhoc),
    };
    let config = args.into_config()?;
    let summary = run(&config, verb)?;
    if let Some(b) = &summary.baseline {
        println!(
            "baseline: {}/{} mistakes ({})",
            b.mistakes,
            b.n,
            if b.certified { "certified" } else { "not certified" }
        );
    }
    if let Some(p) = &summary.profile {
        print!("{}", profile_csv(p));
    }
    if let Some(a) = &summary.adhoc {
        print!("{}", profile_csv(&a.profile));
    }
    println!("outputs in {}", summary.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
