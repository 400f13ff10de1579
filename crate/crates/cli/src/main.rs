use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clot_cli::commands::{self, calibration_csv, exit, TestFileConfig};
use clot_cli::config::{BandwidthKeyword, BandwidthSetting, TestSection};
use clot_cli::report::to_json;
use clot_cli::Result;
use clot_core::{BuiltinKernel, SensitivityLevel, TestMode};

/// Exit status: 0 fair / fail to reject, 1 reject, 2 error.
#[derive(Parser)]
#[command(name = "clot", version, about = "Counterfactual fairness audits via kernel closeness tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct TestFlags {
    /// Tolerated N-TE; 0 selects the two-sample permutation test.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// asymptotic, bootstrap, or permutation
    #[arg(long)]
    mode: Option<TestMode>,
    /// strong, neutral, or weak
    #[arg(long)]
    preset: Option<SensitivityLevel>,
    /// Resampling replicates B
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl TestFlags {
    fn section(&self) -> TestSection {
        TestSection {
            preset: self.preset,
            epsilon: self.epsilon,
            alpha: self.alpha,
            mode: self.mode,
            replicates: self.replicates,
            seed: self.seed,
            centering: None,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Test two pre-computed outcome samples (CSV, one row per sample).
    Test {
        factual: PathBuf,
        counterfactual: PathBuf,
        /// TOML with optional [kernel] and [test] sections
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: TestFlags,
        /// gaussian or laplacian
        #[arg(long)]
        kernel: Option<String>,
        /// `median` or a positive number
        #[arg(long)]
        bandwidth: Option<String>,
        /// Write test_report.json here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a model on a dataset described by a TOML config.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: TestFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rejection rates of a registered scenario as CSV.
    Calibrate {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Write calibration.csv here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write scenario samples, or the biased-logistic example dataset.
    Simulate {
        #[arg(long)]
        scenario: String,
        /// Samples per group, or dataset rows
        #[arg(long, default_value_t = 500)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Coefficient on the planted attribute (biased-logistic only)
        #[arg(long, default_value_t = 2.0)]
        coef: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_kernel(kernel: Option<&str>, bandwidth: Option<&str>, base: &mut TestFileConfig) -> Result<()> {
    use clot_cli::CliError;
    if let Some(k) = kernel {
        base.kernel.family = match k {
            "gaussian" => BuiltinKernel::Gaussian,
            "laplacian" => BuiltinKernel::Laplacian,
            other => return Err(CliError::Usage(format!("unknown kernel `{other}`"))),
        };
    }
    if let Some(b) = bandwidth {
        base.kernel.bandwidth = if b == "median" {
            BandwidthSetting::Keyword(BandwidthKeyword::Median)
        } else {
            BandwidthSetting::Fixed(b.parse().map_err(|_| CliError::Usage(format!("bad bandwidth `{b}`")))?)
        };
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Test {
            factual,
            counterfactual,
            config,
            flags,
            kernel,
            bandwidth,
            out,
        } => {
            let mut file = match &config {
                Some(p) => TestFileConfig::load(p)?,
                None => TestFileConfig::default(),
            };
            parse_kernel(kernel.as_deref(), bandwidth.as_deref(), &mut file)?;
            let run = commands::cmd_test(&factual, &counterfactual, &file, &flags.section(), out.as_deref())?;
            if run.report_path.is_none() {
                print!("{}", to_json(&run.report)?);
            }
            Ok(run.exit_code())
        }
        Command::Audit { config, flags, out } => {
            let run = commands::cmd_audit(&config, &flags.section(), out.as_deref())?;
            match &run.report_path {
                Some(p) => eprintln!("verdict: {:?}; report: {}", run.report.verdict, p.display()),
                None => print!("{}", to_json(&run.report)?),
            }
            Ok(run.exit_code())
        }
        Command::Calibrate {
            scenario,
            trials,
            seed,
            epsilon,
            alpha,
            replicates,
            out,
        } => {
            let rows = commands::cmd_calibrate(&scenario, trials, seed, epsilon, alpha, replicates)?;
            let csv = calibration_csv(&rows);
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| clot_cli::CliError::Io { path: dir.clone(), source: e })?;
                    let p = dir.join("calibration.csv");
                    std::fs::write(&p, csv).map_err(|e| clot_cli::CliError::Io { path: p.clone(), source: e })?;
                }
                None => print!("{csv}"),
            }
            Ok(exit::OK)
        }
        Command::Simulate {
            scenario,
            size,
            seed,
            coef,
            out,
        } => {
            for p in commands::cmd_simulate(&scenario, size, seed, coef, &out)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(exit::OK)
        }
    }
}

fn configure_threads() {
    let Ok(raw) = std::env::var("CLOT_THREADS") else {
        return;
    };
    match raw.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("CLOT_THREADS ignored: {e}");
            }
        }
        _ => log::warn!("CLOT_THREADS must be a positive integer, got `{raw}`"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::ERROR as u8)
        }
    }
}
