use std::path::PathBuf;
use std::process::ExitCode;

use chemoflow::cli_io::{execute, Command, RunOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chemoflow", version, about = "Mild-solution experiments for a chemotaxis-fluid system")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Scenario file (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides [output].dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for random-field scenarios
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Number of quadrature nodes (overrides [solver].quad_nodes)
    #[arg(long, global = true)]
    quad_nodes: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Picard solve with trace, norms and decay fits
    Solve,
    /// Data norm and weighted norms of the free evolution
    Norms,
    /// Scaling-relation residuals (requires gamma = 0)
    SelfSimilar,
    /// Long-time comparison of two nearby solutions
    Stability,
    /// Constants table and smallness threshold
    Constants,
    /// Exponent admissibility only
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(2);
    };
    let command = match cli.command {
        Cmd::Solve => Command::Solve,
        Cmd::Norms => Command::Norms,
        Cmd::SelfSimilar => Command::SelfSimilar,
        Cmd::Stability => Command::Stability,
        Cmd::Constants => Command::Constants,
        Cmd::Check => Command::Check,
    };
    let opts = RunOptions {
        out: cli.out,
        seed: cli.seed,
        quad_nodes: cli.quad_nodes,
    };
    ExitCode::from(execute(&config, command, &opts) as u8)
}
