//! `qsmc`: training, leakage bounds, sweeps and self-verification.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod exit;
mod verify;

use config::CommonArgs;

#[derive(Parser)]
#[command(
    name = "qsmc",
    version,
    about = "Secure optical inner-product simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the digital MLP and write the model file plus its JSON sidecar.
    Train(TrainArgs),
    /// Weight and data leakage at one operating point.
    Leakage(LeakageArgs),
    /// Parameter sweeps written as CSV with a JSON summary.
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
    /// Run the Monte Carlo oracles and invariant checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Train on the first N training images only.
    #[arg(long)]
    pub train_limit: Option<usize>,
    /// Where to write the model; the sidecar goes next to it.
    #[arg(long, default_value = "model.bin")]
    pub model_out: PathBuf,
}

#[derive(Args)]
pub struct LeakageArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Subcommand)]
pub enum SweepKind {
    /// Leakage and fitted accuracy over a (mu, G) grid.
    Tradeoff(TradeoffArgs),
    /// Round-trip loss at constant F.
    Loss(LossArgs),
    /// Layer width with uniform data.
    Width(WidthArgs),
    /// Secure accuracy against F, with a logistic fit.
    F(FSweepArgs),
}

#[derive(Args)]
pub struct TradeoffArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.5,1,2,3,4,6,8,12,16,32"
    )]
    pub mus: Vec<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1,1.1,1.2,1.5,2,3,5,10,100,inf"
    )]
    pub gains: Vec<qsmc_core::Gain>,
    #[arg(long, value_delimiter = ',')]
    pub fs: Option<Vec<f64>>,
    /// Test images used for the F sweep; 0 means the full set.
    #[arg(long, default_value_t = 2000)]
    pub subset: usize,
    /// Accuracy level of the reported contour.
    #[arg(long, default_value_t = 0.96)]
    pub target: f64,
}

#[derive(Args)]
pub struct LossArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20"
    )]
    pub losses: Vec<f64>,
    /// Cap on mu when the constant-F target needs more photons.
    #[arg(long, default_value_t = 1e6)]
    pub mu_max: f64,
}

#[derive(Args)]
pub struct WidthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024,4096")]
    pub widths: Vec<usize>,
}

#[derive(Args)]
pub struct FSweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    pub fs: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2000)]
    pub subset: usize,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Monte Carlo samples per covariance check.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Test hook: scales the analytic excess noise so the oracle must fail.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Leakage(a) => commands::leakage(a),
        Command::Sweep { kind } => match kind {
            SweepKind::Tradeoff(a) => commands::sweep_tradeoff(a),
            SweepKind::Loss(a) => commands::sweep_loss(a),
            SweepKind::Width(a) => commands::sweep_width(a),
            SweepKind::F(a) => commands::sweep_f(a),
        },
        Command::Verify(a) => verify::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::USAGE as u8
            } else {
                exit::SUCCESS as u8
            });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = exit::classify(&err);
            let report = exit::ErrorReport {
                schema_version: config::SCHEMA_VERSION,
                error: exit::ErrorBody {
                    kind,
                    exit_code: code,
                    message: format!("{err:#}"),
                },
            };
            let mut stderr = std::io::stderr().lock();
            let _ = serde_json::to_writer_pretty(&mut stderr, &report);
            let _ = writeln!(stderr);
            ExitCode::from(code as u8)
        }
    }
}
