use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mpiga::app::{self, Config};

/// Adaptive multi-patch isogeometric Poisson solver.
///
/// The output directory from the config can be overridden with the
/// MPIGA_OUTPUT_DIR environment variable.
#[derive(Parser)]
#[command(name = "mpiga", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured convergence study.
    Run { config: PathBuf },
    /// Check basis, coupling, patch-test and mesh invariants on levels 0 to 2.
    Verify { config: PathBuf },
    /// Write the mesh of one refinement level (max_dof is ignored).
    ExportMesh { config: PathBuf, level: usize },
}

fn fail(e: mpiga::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(app::exit_code(&e) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let path = match &cli.command {
        Command::Run { config } | Command::Verify { config } | Command::ExportMesh { config, .. } => config,
    };
    let config = match Config::from_file(path) {
        Ok(c) => c,
        Err(e @ mpiga::Error::Io { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(app::EXIT_CONFIG as u8);
        }
        Err(e) => return fail(e),
    };
    let mut stdout = std::io::stdout();
    match cli.command {
        Command::Run { .. } => match app::run(&config, &mut stdout) {
            Ok(s) => {
                println!("wrote {} levels to {}", s.levels, s.output_dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Verify { .. } => match app::verify(&config, &mut stdout) {
            Ok(outcomes) => {
                let failed = outcomes.iter().filter(|c| !c.passed).count();
                println!("{} checks, {} failed", outcomes.len(), failed);
                if failed == 0 {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(app::EXIT_FAILURE as u8)
                }
            }
            Err(e) => fail(e),
        },
        Command::ExportMesh { level, .. } => match app::export_mesh_level(&config, level) {
            Ok([csv, vtk]) => {
                println!("wrote {} and {}", csv.display(), vtk.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
