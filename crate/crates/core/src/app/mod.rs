//! Configured runs: convergence study, invariant verification and mesh export.

pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use crate::adapt::{adaptive_loop_with, AdaptiveState};
use crate::checks::{interface_mismatch, patch_test};
use crate::error::{Error, Result};

pub use config::{Config, OUTPUT_DIR_ENV};
pub use output::{export_mesh, mesh_stem, CONVERGENCE_HEADER};

/// Exit status for invalid configurations.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for stage failures and failed checks.
pub const EXIT_FAILURE: i32 = 1;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub levels: usize,
    pub output_dir: PathBuf,
    pub convergence_csv: PathBuf,
    pub report: PathBuf,
}

fn io_at(path: &std::path::Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn report_level(s: &AdaptiveState) -> String {
    let mut r = format!(
        "level {}: n_dof {} n_global {} n_patchwise {} n_patches {} max_level_jump {} solver_iters {} \
         relative_residual {:.3e} estimator {:.6e} time {:.3}s\n",
        s.level,
        s.n_dof,
        s.n_global,
        s.mp.num_patchwise_dofs(),
        s.mp.num_patches(),
        s.mp.max_level_jump(),
        s.solve.iterations,
        s.solve.relative_residual,
        s.eta.total,
        s.seconds
    );
    if let Some(e) = &s.errors {
        r += &format!("  errors: h1 {:.6e} l2 {:.6e}\n", e.h1_semi, e.l2);
    }
    match &s.basis_report {
        Some(b) => {
            r += &format!(
                "  basis: {} ({b}, max row nnz {})\n",
                if b.passes() { "ok" } else { "FAILED" },
                b.max_row_nnz
            );
        }
        None => r += "  basis: not verified\n",
    }
    if s.assumptions.is_empty() {
        r += "  assumptions: ok\n";
    } else {
        r += &format!("  assumptions: {}\n", s.assumptions);
    }
    r
}

/// Runs the configured study, writing `convergence.csv`, one mesh per level
/// and `run_report.txt`. Progress lines go to `log`.
pub fn run(config: &Config, log: &mut dyn Write) -> Result<RunSummary> {
    let problem = config.problem_def()?;
    let dir = config.resolved_output_dir();
    std::fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    let csv_path = dir.join("convergence.csv");
    let report_path = dir.join("run_report.txt");
    let mut csv = output::create(&csv_path)?;
    let mut report = output::create(&report_path)?;
    writeln!(csv, "{CONVERGENCE_HEADER}").and_then(|_| csv.flush()).map_err(io_at(&csv_path))?;
    writeln!(report, "# configuration\n{config}\n# levels").map_err(io_at(&report_path))?;

    let run = adaptive_loop_with(&problem, &config.settings(), |s| {
        writeln!(csv, "{}", output::convergence_row(s)).and_then(|_| csv.flush()).map_err(io_at(&csv_path))?;
        export_mesh(&s.mp, &dir, &mesh_stem(s.level))?;
        write!(report, "{}", report_level(s)).and_then(|_| report.flush()).map_err(io_at(&report_path))?;
        // progress output is best effort
        let _ = writeln!(
            log,
            "level {:>3}  n_dof {:>7}  patches {:>5}  estimator {:.4e}  ({:.2}s)",
            s.level,
            s.n_dof,
            s.mp.num_patches(),
            s.eta.total,
            s.seconds
        );
        Ok(())
    });
    let status = match &run.failure {
        None => "status: completed".to_string(),
        Some(e) => format!("status: failed after {} levels: {e}", run.history.len()),
    };
    writeln!(report, "\n{status}").and_then(|_| report.flush()).map_err(io_at(&report_path))?;
    if let Some(e) = run.failure {
        return Err(e);
    }
    Ok(RunSummary { levels: run.history.len(), output_dir: dir, convergence_csv: csv_path, report: report_path })
}

/// Result of one invariant on one level.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub level: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn print_outcome(log: &mut dyn Write, c: &CheckOutcome) {
    let verdict = if c.passed { "PASS" } else { "FAIL" };
    let _ = writeln!(log, "{verdict} level {} {}: {}", c.level, c.name, c.detail);
}

/// Levels covered by [`verify`].
pub const VERIFY_LEVELS: usize = 2;

/// Runs the invariant suite on levels `0..=2` of the configured problem and
/// prints one line per check.
pub fn verify(config: &Config, log: &mut dyn Write) -> Result<Vec<CheckOutcome>> {
    let problem = config.problem_def()?;
    let mut settings = config.settings();
    settings.max_levels = VERIFY_LEVELS;
    settings.max_dof = usize::MAX;
    settings.verify_basis = true;
    let mut outcomes = Vec::new();
    let run = adaptive_loop_with(&problem, &settings, |s| {
        let b = s.basis_report.as_ref().expect("basis verification was requested");
        let mut found = vec![
            CheckOutcome { level: s.level, name: "basis", passed: b.passes(), detail: b.to_string() },
            CheckOutcome {
                level: s.level,
                name: "assumptions",
                passed: s.assumptions.is_empty(),
                detail: if s.assumptions.is_empty() { "none violated".into() } else { s.assumptions.to_string() },
            },
        ];
        let mismatch = interface_mismatch(&s.mp, &s.basis, 50, 20, s.level as u64)?;
        found.push(CheckOutcome {
            level: s.level,
            name: "coupling",
            passed: mismatch <= 1e-10,
            detail: format!("interface mismatch {mismatch:.3e}"),
        });
        let pt = patch_test(&s.mp)?;
        found.push(CheckOutcome {
            level: s.level,
            name: "patch_test",
            passed: pt.h1_semi <= 1e-10,
            detail: format!("H1 error {:.3e}", pt.h1_semi),
        });
        for c in &found {
            print_outcome(log, c);
        }
        outcomes.extend(found);
        Ok(())
    });
    match run.failure {
        // the loop refuses to continue past a broken basis
        Some(Error::BasisCheck { level, detail }) => {
            let c = CheckOutcome { level, name: "basis", passed: false, detail };
            print_outcome(log, &c);
            outcomes.push(c);
            Ok(outcomes)
        }
        Some(e) => Err(e),
        None => Ok(outcomes),
    }
}

/// Runs up to `level` (ignoring `max_dof`) and writes that level's mesh.
pub fn export_mesh_level(config: &Config, level: usize) -> Result<[PathBuf; 2]> {
    let problem = config.problem_def()?;
    let mut settings = config.settings();
    settings.max_levels = level;
    settings.max_dof = usize::MAX;
    settings.verify_basis = false;
    let mut written = None;
    let run = adaptive_loop_with(&problem, &settings, |s| {
        if s.level == level {
            written = Some(export_mesh(&s.mp, &config.resolved_output_dir(), &mesh_stem(level))?);
        }
        Ok(())
    });
    if let Some(e) = run.failure {
        return Err(e);
    }
    written.ok_or_else(|| Error::Precondition(format!("level {level} was not reached")))
}
