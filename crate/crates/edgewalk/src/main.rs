use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edgewalk::commands::{cmd_bench, cmd_quantpred, cmd_trace2d, cmd_train, Invocation};
use edgewalk::Error;

/// Boundary-projection adversarial attacks: training, benchmarks, the
/// rounding-distortion predictor and 2D attack paths.
#[derive(Debug, Parser)]
#[command(name = "edgewalk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an MLP classifier.
    Train(Common),
    /// Benchmark an attack on a trained model.
    Bench(Common),
    /// Predicted distortion after rounding, as a function of the update norm.
    Quantpred(Common),
    /// Trace an attack path on the 2D toy classifier.
    Trace2d(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for per-image parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

impl From<Common> for Invocation {
    fn from(c: Common) -> Self {
        Invocation {
            config: c.config,
            out: c.out,
            seed: c.seed,
            jobs: c.jobs,
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x:.4}"))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train(c) => {
            let log = cmd_train(&c.into())?;
            eprintln!(
                "train accuracy {:.4}, test accuracy {}",
                log.train_accuracy,
                fmt_opt(log.test_accuracy)
            );
        }
        Command::Bench(c) => {
            let r = cmd_bench(&c.into())?;
            eprintln!(
                "{}: N={} P_suc={:.4} D_bar={} P_upp({})={:.4}",
                r.attack,
                r.n,
                r.p_suc,
                fmt_opt(r.d_bar),
                r.d_upp,
                r.p_upp
            );
        }
        Command::Quantpred(c) => {
            let rows = cmd_quantpred(&c.into())?;
            eprintln!("wrote {} rows", rows.len());
        }
        Command::Trace2d(c) => {
            let s = cmd_trace2d(&c.into())?;
            println!(
                "crossings={} adversarial_fraction={} success={} distortion={:.4}",
                s.crossings,
                fmt_opt(s.adversarial_fraction),
                s.success,
                s.distortion_l2
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
