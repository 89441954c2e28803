use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use abreu_core::io::{run_command, Artifacts, Command, RunOptions};
use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CommandArg {
    Validate,
    Curvature,
    Functional,
    Stability,
    Solve,
    ExportPlot,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Validate => Command::Validate,
            CommandArg::Curvature => Command::Curvature,
            CommandArg::Functional => Command::Functional,
            CommandArg::Stability => Command::Stability,
            CommandArg::Solve => Command::Solve,
            CommandArg::ExportPlot => Command::ExportPlot,
        }
    }
}

/// Generalized Abreu equation toolkit for 2D Delzant polytopes.
///
/// Exit codes: 0 success, 1 I/O, 2 configuration or usage, 3 polytope,
/// 4 bundle admissibility, 5 operator, 6 functional, 7 stability LP, 8 solver.
#[derive(Debug, Parser)]
#[command(name = "abreu", version)]
struct Cli {
    command: CommandArg,
    #[arg(long)]
    config: PathBuf,
    /// Directory for output files; created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the grid spacing of the config.
    #[arg(long)]
    grid_h: Option<f64>,
    /// Seed for the random direction of the Jacobian check in `solve`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn write_artifacts(out: &PathBuf, artifacts: &Artifacts) -> std::io::Result<()> {
    if artifacts.files.is_empty() {
        return Ok(());
    }
    fs::create_dir_all(out)?;
    for (name, contents) in &artifacts.files {
        fs::write(out.join(name), contents)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = std::env::var("ABREU_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // fails only if a pool was already built, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let text = match fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    let opts = RunOptions {
        grid_h: cli.grid_h,
        seed: cli.seed,
    };
    let (artifacts, code) = match run_command(cli.command.into(), &text, &opts) {
        Ok(a) => (a, 0),
        Err(f) => {
            eprintln!("error: {}", f.error);
            (f.partial, f.error.exit_code())
        }
    };
    print!("{}", artifacts.stdout);
    if let Err(e) = write_artifacts(&cli.out, &artifacts) {
        eprintln!("error: cannot write to {}: {e}", cli.out.display());
        return ExitCode::from(1);
    }
    ExitCode::from(code as u8)
}
