use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gnc_lab::{cli, LabError};

#[derive(Debug, Parser)]
#[command(name = "gnc", version, about = "Graduated non-convexity experiments with diffusion-smoothed priors")]
struct Args {
    /// TOML config file; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for all random draws.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convergence-basin sweep over initial points and t_max.
    Basin,
    /// Tomographic reconstruction batch with PSNR/SSIM.
    Recon,
    /// Per-iteration diagnostics of a single run.
    TraceDemo,
    /// Finite-difference check of the objective gradient.
    Gradcheck,
    /// Stationary points of the 2-D target.
    Census,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = (|| -> Result<(), LabError> {
        let ctx = cli::Context::new(args.config.as_deref(), args.out, args.seed, args.threads)?;
        match args.command {
            Command::Basin => cli::basin(&ctx),
            Command::Recon => cli::recon(&ctx),
            Command::TraceDemo => cli::trace_demo(&ctx),
            Command::Gradcheck => cli::gradcheck(&ctx),
            Command::Census => cli::census(&ctx),
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
