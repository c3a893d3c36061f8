use std::path::PathBuf;
use std::process::ExitCode;

use aes_cli::{run_experiment, CliError, ExperimentConfig, Settings};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aes", version, about = "Feasible-domain discovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy on one problem over a list of seeds.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// File of `key = value` lines using the flag names as keys; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// aes or straddle.
    #[arg(long)]
    strategy: Option<String>,
    /// branin, hosaki, double_sphere or nowacki.
    #[arg(long)]
    problem: Option<String>,
    /// Dimension of double_sphere.
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    /// Kernel length scale; defaults to the problem's reference value.
    #[arg(long)]
    length_scale: Option<String>,
    /// Queries after the initial point.
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    pool_size: Option<String>,
    /// A seed, an inclusive range `0..9`, or a list `1,4,7`.
    #[arg(long)]
    seeds: Option<String>,
    /// tight, loose or insufficient (straddle only).
    #[arg(long)]
    bounds: Option<String>,
    /// bernoulli:P, gaussian:S or none.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    noise_seed: Option<String>,
    /// Comma-separated coordinates; defaults to the problem's reference point.
    #[arg(long)]
    initial_point: Option<String>,
    /// Pool redraws before recentering when no candidate qualifies.
    #[arg(long)]
    fallback_cap: Option<String>,
    /// Seed of random test sets.
    #[arg(long)]
    test_seed: Option<String>,
    /// Evaluate F1 every this many iterations.
    #[arg(long)]
    f1_stride: Option<String>,
    /// Write an N x N grid of final predictions per run (2-d problems).
    #[arg(long)]
    prediction_grid: Option<String>,
    /// Worker threads; defaults to all hardware threads.
    #[arg(long)]
    threads: Option<String>,
    /// Output directory; defaults to $AES_OUTPUT_DIR, then ./aes-output.
    #[arg(long)]
    output: Option<String>,
}

impl RunArgs {
    fn settings(&self) -> Result<Settings, CliError> {
        let mut s = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::new(),
        };
        let mut flags = Settings::new();
        let pairs = [
            ("strategy", &self.strategy),
            ("problem", &self.problem),
            ("dim", &self.dim),
            ("epsilon", &self.epsilon),
            ("eta", &self.eta),
            ("length-scale", &self.length_scale),
            ("budget", &self.budget),
            ("pool-size", &self.pool_size),
            ("seeds", &self.seeds),
            ("bounds", &self.bounds),
            ("noise", &self.noise),
            ("noise-seed", &self.noise_seed),
            ("initial-point", &self.initial_point),
            ("fallback-cap", &self.fallback_cap),
            ("test-seed", &self.test_seed),
            ("f1-stride", &self.f1_stride),
            ("prediction-grid", &self.prediction_grid),
            ("threads", &self.threads),
            ("output", &self.output),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                flags.set(key, v.as_str())?;
            }
        }
        s.overlay(&flags);
        Ok(s)
    }
}

fn run(args: &RunArgs) -> Result<(), CliError> {
    let config = ExperimentConfig::from_settings(&args.settings()?)?;
    let report = run_experiment(&config)?;
    let summary = config.output.join(aes_cli::output::SUMMARY_FILE);
    print!("{}", std::fs::read_to_string(&summary)?);
    log::info!("wrote {} files to {}", report.files.len(), config.output.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e @ CliError::Config(_)) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
