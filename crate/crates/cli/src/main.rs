use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slerev::experiments::ExperimentKind;
use slerev_cli::{run, RunConfig, EXIT_ERROR, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "slerev", version, about = "Monte Carlo experiments for two-point SLE with fixed capacity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write <name>.report.json (and <name>.samples.csv).
    Run(Box<RunArgs>),
    /// List the experiments.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// sample, reversibility, mu-r, coupling, tails, commutation or density-check.
    experiment: ExperimentKind,
    /// Key-value file (`key = value` per line); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Samples per batch.
    #[arg(long = "N", short = 'N')]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    permutations: Option<usize>,
    /// Comma-separated r values (mu-r).
    #[arg(long)]
    rs: Option<String>,
    /// Comma-separated epsilon values (coupling, tails).
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    r1: Option<f64>,
    #[arg(long)]
    r2: Option<f64>,
    /// Threshold override, e.g. `--threshold alpha=0.05`; repeatable.
    #[arg(long = "threshold", value_name = "NAME=VALUE")]
    thresholds: Vec<String>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; the SLEREV_OUTPUT_DIR environment variable overrides it.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Skip the sample CSV.
    #[arg(long)]
    no_samples: bool,
    /// Also rerun at dt/2 and write <name>.robustness.report.json.
    #[arg(long)]
    robustness: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, slerev_cli::CliError> {
        let mut rc = RunConfig::new(self.experiment);
        if let Some(path) = &self.config {
            rc.apply_file(path)?;
            rc.experiment = self.experiment;
        }
        let flags: [(&str, Option<String>); 12] = [
            ("kappa", self.kappa.map(|v| v.to_string())),
            ("x", self.x.map(|v| v.to_string())),
            ("t0", self.t0.map(|v| v.to_string())),
            ("dt", self.dt.map(|v| v.to_string())),
            ("N", self.n.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("repetitions", self.repetitions.map(|v| v.to_string())),
            ("permutations", self.permutations.map(|v| v.to_string())),
            ("rs", self.rs.clone()),
            ("eps", self.eps.clone()),
            ("r1", self.r1.map(|v| v.to_string())),
            ("r2", self.r2.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                rc.set(key, &v)?;
            }
        }
        for t in &self.thresholds {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| slerev_cli::CliError::Invalid(format!("threshold `{t}` is not NAME=VALUE")))?;
            rc.set(k.trim(), v.trim())?;
        }
        if let Some(n) = self.threads {
            rc.threads = Some(n);
        }
        if let Some(dir) = &self.output_dir {
            rc.output_dir = dir.clone();
        }
        rc.write_samples &= !self.no_samples;
        rc.robustness |= self.robustness;
        rc.apply_env(std::env::var(OUTPUT_DIR_ENV).ok());
        Ok(rc)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for k in ExperimentKind::ALL {
                println!("{k}");
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match args.config().and_then(|rc| run(&rc)) {
            Ok(out) => {
                for c in &out.report.verdict.checks {
                    let mark = if c.passed { "pass" } else { "FAIL" };
                    println!("{mark} {} = {} ({} {})", c.name, c.value, c.comparison, c.threshold);
                }
                for f in &out.files {
                    println!("wrote {}", f.display());
                }
                println!("verdict: {}", if out.passed { "pass" } else { "fail" });
                ExitCode::from(out.exit_code())
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_ERROR)
            }
        },
    }
}
