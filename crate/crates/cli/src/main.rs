use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use caputo::verify::default_fixtures_dir;
use caputo_cli::{cmd_bounds, cmd_solve, cmd_verify, CliError, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "caputo",
    version,
    about = "Caputo fractional ODE solvers and blow-up analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate D^γ u = A u^p and write the trajectory as CSV.
    Solve(RunArgs),
    /// Tabulate analytical and numerical blow-up times.
    Bounds(RunArgs),
    /// Run the self-check suite.
    Verify {
        /// Run only this check (`fixtures` selects all fixture checks).
        #[arg(long)]
        filter: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long = "A")]
    a: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    u0: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long = "n-max")]
    n_max: Option<String>,
    /// int-prod, int-rect, diff-ex or diff-im.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<String>,
    /// NAME=v1,v2,... (repeatable; the grid is the cartesian product).
    #[arg(long)]
    sweep: Vec<String>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("gamma", self.gamma),
            ("A", self.a),
            ("p", self.p),
            ("u0", self.u0),
            ("k", self.k),
            ("n-max", self.n_max),
            ("scheme", self.scheme),
            ("horizon", self.horizon),
            ("out", self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for s in &self.sweep {
            cfg.set("sweep", s)?;
        }
        Ok(cfg)
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "stdout".into(),
                source,
            }),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.into_config()?;
            emit(&cfg, &cmd_solve(&cfg)?)
        }
        Command::Bounds(args) => {
            let cfg = args.into_config()?;
            emit(&cfg, &cmd_bounds(&cfg)?)
        }
        Command::Verify { filter } => {
            let (table, results) = cmd_verify(filter.as_deref(), &default_fixtures_dir())?;
            print!("{table}");
            let failed: Vec<&str> = results
                .iter()
                .filter(|r| !r.passed)
                .map(|r| r.name.as_str())
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Verification(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("caputo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
