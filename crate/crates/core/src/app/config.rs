//! Flat `key = value` run configuration.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::adapt::{initial_spans, Fault, LoopSettings, RefinementMode};
use crate::error::{Error, Result};
use crate::problems::{builtin_problem, Problem, BUILTIN_PROBLEMS};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "MPIGA_OUTPUT_DIR";

pub const MAX_DEGREE: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub problem: String,
    pub degree: usize,
    pub theta: f64,
    pub mode: RefinementMode,
    pub max_dof: usize,
    pub max_levels: usize,
    /// Interior knots per direction of the initial root discretization.
    pub initial_knots_per_direction: usize,
    pub solver_tol: f64,
    pub output_dir: PathBuf,
    pub quad_bump: usize,
    pub verify_basis: bool,
    /// Test hook: corrupt the basis on purpose.
    pub fault: Option<Fault>,
}

const KEYS: [&str; 12] = [
    "problem",
    "degree",
    "theta",
    "mode",
    "max_dof",
    "max_levels",
    "initial_knots_per_direction",
    "solver_tol",
    "output_dir",
    "quad_bump",
    "verify_basis",
    "fault",
];

fn invalid(field: &str, msg: impl fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

fn number<T: std::str::FromStr>(field: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| invalid(field, format!("cannot parse '{v}'")))
}

impl Config {
    /// Defaults for everything except the problem name.
    pub fn new(problem: &str, degree: usize) -> Self {
        Self {
            problem: problem.into(),
            degree,
            theta: 0.5,
            mode: RefinementMode::Adaptive,
            max_dof: 40_000,
            max_levels: 50,
            initial_knots_per_direction: degree + 1,
            solver_tol: crate::solver::DEFAULT_TOLERANCE,
            output_dir: PathBuf::from("output"),
            quad_bump: 3,
            verify_basis: true,
            fault: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let location = format!("line {}", n + 1);
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                location: location.clone(),
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Parse { location, message: format!("unknown key '{k}'") });
            }
            if !seen.insert(k) {
                return Err(Error::Parse { location, message: format!("duplicate key '{k}'") });
            }
            pairs.push((k, v));
        }
        let problem = pairs
            .iter()
            .find(|(k, _)| *k == "problem")
            .map(|(_, v)| v.to_string())
            .ok_or_else(|| invalid("problem", "missing"))?;
        let degree = match pairs.iter().find(|(k, _)| *k == "degree") {
            Some((_, v)) => number("degree", v)?,
            None => 2,
        };
        let mut c = Self::new(&problem, degree);
        for (k, v) in pairs {
            match k {
                "theta" => c.theta = number(k, v)?,
                "mode" => {
                    c.mode = match v {
                        "adaptive" => RefinementMode::Adaptive,
                        "uniform" => RefinementMode::Uniform,
                        _ => return Err(invalid(k, format!("expected 'adaptive' or 'uniform', got '{v}'"))),
                    }
                }
                "max_dof" => c.max_dof = number(k, v)?,
                "max_levels" => c.max_levels = number(k, v)?,
                "initial_knots_per_direction" => c.initial_knots_per_direction = number(k, v)?,
                "solver_tol" => c.solver_tol = number(k, v)?,
                "output_dir" => c.output_dir = PathBuf::from(v),
                "quad_bump" => c.quad_bump = number(k, v)?,
                "verify_basis" => c.verify_basis = number(k, v)?,
                "fault" => {
                    c.fault = match v {
                        "none" => None,
                        "negate_basis_entry" => Some(Fault::NegateBasisEntry),
                        _ => return Err(invalid(k, format!("expected 'none' or 'negate_basis_entry', got '{v}'"))),
                    }
                }
                _ => {}
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !BUILTIN_PROBLEMS.contains(&self.problem.as_str()) {
            return Err(invalid(
                "problem",
                format!("unknown '{}', expected one of {}", self.problem, BUILTIN_PROBLEMS.join(", ")),
            ));
        }
        if !(1..=MAX_DEGREE).contains(&self.degree) {
            return Err(invalid("degree", format!("must be in 1..={MAX_DEGREE}, got {}", self.degree)));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(invalid("theta", format!("must be in (0, 1], got {}", self.theta)));
        }
        if self.max_dof == 0 {
            return Err(invalid("max_dof", "must be positive"));
        }
        if self.initial_knots_per_direction > 1023 {
            return Err(invalid("initial_knots_per_direction", "must be at most 1023"));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return Err(invalid("solver_tol", format!("must be in (0, 1), got {}", self.solver_tol)));
        }
        if self.quad_bump > 20 {
            return Err(invalid("quad_bump", format!("must be at most 20, got {}", self.quad_bump)));
        }
        Ok(())
    }

    pub fn problem_def(&self) -> Result<Problem> {
        builtin_problem(&self.problem)
    }

    pub fn settings(&self) -> LoopSettings {
        LoopSettings {
            degree: self.degree,
            initial_spans: initial_spans(self.degree, self.initial_knots_per_direction),
            theta: self.theta,
            mode: self.mode,
            max_dof: self.max_dof,
            max_levels: self.max_levels,
            solver_tol: self.solver_tol,
            quad_bump: self.quad_bump,
            verify_basis: self.verify_basis,
            fault: self.fault,
        }
    }

    /// `output_dir`, unless the environment overrides it.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "problem = {}", self.problem)?;
        writeln!(f, "degree = {}", self.degree)?;
        writeln!(f, "theta = {}", self.theta)?;
        writeln!(f, "mode = {}", self.mode.name())?;
        writeln!(f, "max_dof = {}", self.max_dof)?;
        writeln!(f, "max_levels = {}", self.max_levels)?;
        writeln!(f, "initial_knots_per_direction = {}", self.initial_knots_per_direction)?;
        writeln!(f, "solver_tol = {:e}", self.solver_tol)?;
        writeln!(f, "output_dir = {}", self.output_dir.display())?;
        writeln!(f, "quad_bump = {}", self.quad_bump)?;
        writeln!(f, "verify_basis = {}", self.verify_basis)?;
        match self.fault {
            None => writeln!(f, "fault = none"),
            Some(Fault::NegateBasisEntry) => writeln!(f, "fault = negate_basis_entry"),
        }
    }
}
