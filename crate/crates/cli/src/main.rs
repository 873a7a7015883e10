//! `clickcascade`: headline feature extraction, decision-model fitting, and
//! A/B-testing-led cascade simulation on synthetic social networks.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use clickcascade_core::lasso::LambdaRule;

#[derive(Parser)]
#[command(
    name = "clickcascade",
    version,
    about = "Fit a headline click decision model and compare pure social spreading \
             against A/B-testing-led selection on synthetic networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleArg {
    /// Penalty with the lowest CV error (ties go to the sparser model).
    Min,
    /// Largest penalty within one standard error of the minimum.
    OneSe,
}

impl From<RuleArg> for LambdaRule {
    fn from(value: RuleArg) -> Self {
        match value {
            RuleArg::Min => LambdaRule::Min,
            RuleArg::OneSe => LambdaRule::OneSe,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Bayes,
    Ztest,
}

#[derive(Subcommand)]
enum Command {
    /// Extract headline features into a feature-matrix CSV.
    Extract {
        /// Packages CSV: test_id,headline,lede,impressions,clicks
        #[arg(long)]
        input: PathBuf,
        /// Directory of lexicon CSVs (term,weight)
        #[arg(long)]
        lexicons: PathBuf,
        /// Optional fitted topic model to append topic columns
        #[arg(long)]
        topic_model: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Fit an LDA topic model on story documents.
    Topics {
        #[arg(long)]
        input: PathBuf,
        /// Number of topics
        #[arg(long, short)]
        k: usize,
        /// Document-topic prior (default 50/k)
        #[arg(long)]
        alpha: Option<f64>,
        /// Topic-word prior
        #[arg(long, default_value_t = clickcascade_core::topics::DEFAULT_BETA)]
        beta: f64,
        #[arg(long, default_value_t = clickcascade_core::topics::DEFAULT_ITERATIONS)]
        iterations: usize,
        #[arg(long)]
        seed: u64,
        /// Drop terms appearing in fewer stories than this
        #[arg(long, default_value_t = clickcascade_core::topics::DEFAULT_MIN_DOC_FREQ)]
        min_doc_freq: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Fit decision-model weights by cross-validated LASSO.
    Fit {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = clickcascade_core::lasso::DEFAULT_K_FOLDS)]
        k_folds: usize,
        #[arg(long, default_value_t = clickcascade_core::lasso::DEFAULT_GRID_SIZE)]
        grid_size: usize,
        #[arg(long, default_value_t = clickcascade_core::lasso::DEFAULT_GRID_RATIO)]
        grid_ratio: f64,
        #[arg(long, value_enum, default_value_t = RuleArg::Min)]
        rule: RuleArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the agent-based experiment described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Summarize one or more simulation runs into a report.
    Analyze {
        /// Simulation output directories (each holding results.json)
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = clickcascade_core::analysis::DEFAULT_BOOTSTRAP_RESAMPLES)]
        bootstrap_resamples: usize,
        #[arg(long, default_value_t = 17)]
        bootstrap_seed: u64,
        /// Polynomial trend degrees to fit on the first-ranked series
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 3])]
        degrees: Vec<usize>,
    },
    /// One-shot A/B decision from click counts; prints a JSON object.
    Abtest {
        #[arg(long)]
        clicks_a: u64,
        #[arg(long)]
        impressions_a: u64,
        #[arg(long)]
        clicks_b: u64,
        #[arg(long)]
        impressions_b: u64,
        #[arg(long, default_value_t = clickcascade_core::cascade::DEFAULT_AB_THRESHOLD)]
        threshold: f64,
        /// Significance level for the ztest method
        #[arg(long, default_value_t = 0.05)]
        significance: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Bayes)]
        method: MethodArg,
    },
    /// Re-execute the command recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

/// Caps replica parallelism when CLICKCASCADE_THREADS is set. Results never
/// depend on the cap; only wall time does.
fn apply_thread_cap() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("CLICKCASCADE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .map_err(|_| anyhow::anyhow!("CLICKCASCADE_THREADS={raw:?} is not a thread count"))?;
    if threads == 0 {
        anyhow::bail!("CLICKCASCADE_THREADS must be at least 1");
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| anyhow::anyhow!("cannot configure thread pool: {e}"))?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Extract { input, lexicons, topic_model, output } => {
            commands::run_extract(&input, &lexicons, topic_model.as_deref(), &output)?;
            println!("wrote {}", output.display());
        }
        Command::Topics { input, k, alpha, beta, iterations, seed, min_doc_freq, output } => {
            commands::run_topics(&input, k, alpha, beta, iterations, seed, min_doc_freq, &output)?;
            println!("wrote {}", output.display());
        }
        Command::Fit { features, k_folds, grid_size, grid_ratio, rule, seed, output } => {
            commands::run_fit(
                &features,
                k_folds,
                grid_size,
                grid_ratio,
                rule.into(),
                seed,
                &output,
            )?;
            println!("wrote {}", output.display());
        }
        Command::Simulate { config, output_dir } => {
            commands::run_simulate(&config, &output_dir)?;
            println!("wrote {}", output_dir.join("results.json").display());
        }
        Command::Analyze { inputs, output, bootstrap_resamples, bootstrap_seed, degrees } => {
            commands::run_analyze(&inputs, &output, bootstrap_resamples, bootstrap_seed, &degrees)?;
            println!("wrote {}", output.display());
        }
        Command::Abtest {
            clicks_a,
            impressions_a,
            clicks_b,
            impressions_b,
            threshold,
            significance,
            method,
        } => {
            let method = match method {
                MethodArg::Bayes => commands::AbMethod::Bayes,
                MethodArg::Ztest => commands::AbMethod::ZTest { significance },
            };
            let value = commands::run_abtest(
                clicks_a,
                impressions_a,
                clicks_b,
                impressions_b,
                threshold,
                method,
            )?;
            println!("{}", serde_json::to_string(&value)?);
        }
        Command::Rerun { manifest } => {
            let reran = commands::run_rerun(&manifest)?;
            for output in &reran.outputs {
                println!("reproduced {} ({})", output.path.display(), &output.sha256[..12]);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Err(e) = apply_thread_cap().and_then(|()| run(cli)) {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
