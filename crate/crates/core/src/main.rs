use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use theta_amoeba::harness::{error_json, run, Command, ExperimentConfig, Overrides};
use theta_amoeba::Error;

#[derive(Parser)]
#[command(
    name = "theta-amoeba",
    version,
    about = "Theta-function sections, Bergman kernels and amoeba convergence on abelian varieties"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// experiment config (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory (overrides the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// level(s), comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<u64>>,
    /// period matrix file {"n", "re", "im"}
    #[arg(long, global = true)]
    omega_file: Option<PathBuf>,
    /// quadrature nodes per dimension
    #[arg(long, global = true)]
    grid: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// evaluate the theta basis at seeded points
    ThetaEval(Common),
    /// Gram and balanced matrices
    Gram(Common),
    /// Bohr–Sommerfeld counts
    BsCount {
        #[command(flatten)]
        common: Common,
        /// the CP¹ example instead of the abelian fibration
        #[arg(long)]
        cp1: bool,
    },
    /// export the sampled image B_k
    Amoeba(Common),
    /// the level sweep of metric and fibration convergence
    Converge(Common),
    /// peak sections and the model-kernel comparison
    Peak(Common),
    /// the elliptic-curve mirror example
    Mirror(Common),
}

fn execute(cli: Cli) -> Result<Vec<String>, Error> {
    let (cmd, common) = match cli.cmd {
        Cmd::ThetaEval(c) => (Command::ThetaEval, c),
        Cmd::Gram(c) => (Command::Gram, c),
        Cmd::BsCount { common, cp1 } => (Command::BsCount { cp1 }, common),
        Cmd::Amoeba(c) => (Command::Amoeba, c),
        Cmd::Converge(c) => (Command::Converge, c),
        Cmd::Peak(c) => (Command::Peak, c),
        Cmd::Mirror(c) => (Command::Mirror, c),
    };
    let (mut cfg, from_file) = match &common.config {
        Some(p) => (ExperimentConfig::load(p)?, true),
        None => (ExperimentConfig::default(), false),
    };
    let ov = Overrides {
        out: common.out,
        seed: common.seed,
        k: common.k,
        omega_file: common.omega_file,
        grid: common.grid,
    };
    cfg.apply(&ov, from_file);
    let out = run(cmd, &cfg)?;
    let mut lines = out.stdout;
    lines.push(serde_json::to_string(&out.summary["results"])?);
    Ok(lines)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("THETA_AMOEBA_THREADS") {
        let pool = v
            .parse::<usize>()
            .map_err(|e| e.to_string())
            .and_then(theta_amoeba::par::init_threads);
        if let Err(e) = pool {
            eprintln!(
                "{}",
                error_json(&Error::InvalidConfig(format!(
                    "THETA_AMOEBA_THREADS={v}: {e}"
                )))
            );
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(1)
        }
    }
}
