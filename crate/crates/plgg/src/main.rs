use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use plgg::commands;
use plgg::{Error, Rayon, Result, RunConfig};
use plgg_core::eval::ImageBranchConfig;
use plgg_core::image::TrainConfig;
use serde::Serialize;

/// Chemotherapy-response prediction for pediatric low-grade glioma from MRI
/// radiomics, clinical variables and an image branch.
#[derive(Debug, Parser)]
#[command(name = "plgg", version)]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Image branch.
    #[arg(long, global = true, value_enum)]
    branch: Option<Branch>,
    /// `case_id,prob` CSV for the external image branch.
    #[arg(long, global = true)]
    external_probs: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Branch {
    Baseline,
    External,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort (NIfTI images, masks, clinical CSV).
    Synth,
    /// Extract radiomic features and image embeddings.
    Extract,
    /// Plan folds, run the hyperparameter searches and fit all branches.
    Train,
    /// Score the trained folds and write the report.
    Evaluate,
    /// Held-out prediction for one case.
    Predict {
        #[arg(long = "case")]
        case_id: String,
    },
    /// Outcome-rule counts for the cohort CSV.
    LabelAudit,
    /// Print the effective configuration.
    Config,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(path) = &cli.external_probs {
        cfg.external_probs = Some(path.clone());
    }
    match cli.branch {
        Some(Branch::External) => cfg.cv.image = ImageBranchConfig::External,
        Some(Branch::Baseline) if matches!(cfg.cv.image, ImageBranchConfig::External) => {
            cfg.cv.image = ImageBranchConfig::Baseline(TrainConfig::default())
        }
        _ => {}
    }
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("summary serializes"));
}

#[derive(Serialize)]
struct EvaluateSummary<'a> {
    n_cases: usize,
    auc: f64,
    confusion: [[usize; 2]; 2],
    top_features: Vec<&'a str>,
    leakage_violations: &'a [String],
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let exec = Rayon::new(cfg.workers);
    match &cli.command {
        Command::Synth => print(&commands::synth(&cfg, &exec)?),
        Command::Extract => print(&commands::extract(&cfg, &exec)?),
        Command::Train => print(&commands::train(&cfg, &exec)?),
        Command::Evaluate => {
            let report = commands::evaluate(&cfg)?;
            print(&EvaluateSummary {
                n_cases: report.n_cases,
                auc: report.auc,
                confusion: report.confusion,
                top_features: report.shap_ranking.entries.iter().take(5).map(|e| e.feature.as_str()).collect(),
                leakage_violations: &report.leakage_violations,
            });
        }
        Command::Predict { case_id } => print(&commands::predict(&cfg, case_id)?),
        Command::LabelAudit => print(&commands::label_audit(&cfg)?),
        Command::Config => println!("{}", cfg.to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Error::exit_code(&e) as u8)
        }
    }
}
