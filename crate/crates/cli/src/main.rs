use std::path::PathBuf;
use std::process::ExitCode;

use bqdetect::experiments::{self, with_run_record, ExperimentConfig};
use bqdetect::Error;
use clap::{Args, Parser, Subcommand};

/// Train and evaluate one-bit probabilistic quantizers for distributed detection.
#[derive(Parser)]
#[command(name = "bqdetect", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one training dataset per SNR.
    GenData,
    /// Train the controller, then one detector per K.
    Train,
    /// Find the Chernoff-optimal threshold per SNR.
    Baseline,
    /// Monte Carlo and closed-form error for every (K, SNR).
    Sweep,
    /// Run the analytic self-checks; exits 1 if any fails.
    Verify,
    /// Summarize the artifacts in the output directory.
    Report,
}

/// Flags override values from `--config`, which override the defaults.
#[derive(Args)]
struct Overrides {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Monte Carlo trials per sweep point.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Comma-separated sensor counts, e.g. 5,10,15,20.
    #[arg(long, global = true, value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
    /// Comma-separated SNRs in dB, e.g. -5,0.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    snr_list: Option<Vec<f64>>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
}

impl Overrides {
    fn resolve(self) -> bqdetect::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            c.training.seed = v;
        }
        if let Some(v) = self.out_dir {
            c.out_dir = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.k_list {
            c.k_list = v;
        }
        if let Some(v) = self.snr_list {
            c.snr_db = v;
        }
        if let Some(v) = self.epochs {
            c.training.epochs = v;
        }
        if let Some(v) = self.batch_size {
            c.training.batch_size = v;
        }
        if let Some(v) = self.lr {
            c.training.lr = v;
        }
        c.validate()?;
        Ok(c)
    }
}

const USAGE: u8 = 2;
const FAILURE: u8 = 1;

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(command: Command, config: &ExperimentConfig) -> bqdetect::Result<bool> {
    match command {
        Command::GenData => with_run_record("gen-data", config, |c| {
            let out = experiments::gen_data(c)?;
            print_paths(&out);
            Ok((true, out))
        }),
        Command::Train => with_run_record("train", config, |c| {
            let out = experiments::train(c)?;
            print_paths(&out);
            Ok((true, out))
        }),
        Command::Baseline => with_run_record("baseline", config, |c| {
            let (all, out) = experiments::baseline(c)?;
            for b in &all {
                println!(
                    "snr {} dB: tau* = {:.3e}, gammas = ({:.6}, {:.6}), Chernoff = {:.6}",
                    b.snr_db, b.tau_star, b.gammas.gamma0, b.gammas.gamma1, b.chernoff
                );
            }
            Ok((true, out))
        }),
        Command::Sweep => with_run_record("sweep", config, |c| {
            let (rows, out) = experiments::sweep(c)?;
            for r in &rows {
                println!(
                    "K={:<3} snr={:<5} {:<11} {:<9} error={:.4e} +- {:.1e}",
                    r.k, r.snr_db, r.detector, r.controller, r.error_rate, r.ci
                );
            }
            print_paths(&out);
            Ok((true, out))
        }),
        Command::Verify => with_run_record("verify", config, |c| {
            let report = experiments::verify(c.training.seed);
            print!("{report}");
            let path = c.out_dir.join("verify.json");
            report.save(&path)?;
            Ok((report.passed(), vec![path]))
        }),
        Command::Report => with_run_record("report", config, |c| {
            let (text, out) = experiments::report(c)?;
            print!("{text}");
            Ok((true, out))
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.overrides.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    match run(cli.command, &config) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(FAILURE)
        }
        Err(e @ Error::InvalidArgument(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(FAILURE)
        }
    }
}
