//! Running an off-the-shelf solver on a DIMACS file.

use std::io::Write as _;
use std::process::Command;

use super::dimacs::{self, SolverOutput};
use super::Cnf;
use crate::error::{Error, Result};

/// Environment variable holding the external solver command line.
pub const SOLVER_ENV_VAR: &str = "WHYPROV_SAT_SOLVER";

/// A solver invoked as `<program> <args…> <file.cnf>`, reporting through the
/// exit code (10 satisfiable, 20 unsatisfiable) and `v` lines.
#[derive(Clone, Debug)]
pub struct ExternalSolver {
    program: String,
    args: Vec<String>,
}

impl ExternalSolver {
    /// Splits `command` on whitespace into program and arguments.
    pub fn new(command: &str) -> Result<Self> {
        let mut parts = command.split_whitespace().map(str::to_owned);
        let program = parts
            .next()
            .ok_or_else(|| Error::ExternalSolver("empty solver command".into()))?;
        Ok(ExternalSolver {
            program,
            args: parts.collect(),
        })
    }

    /// The solver named by [`SOLVER_ENV_VAR`], if set and non-empty.
    pub fn from_env() -> Option<Result<Self>> {
        let cmd = std::env::var(SOLVER_ENV_VAR).ok()?;
        if cmd.trim().is_empty() {
            return None;
        }
        Some(Self::new(&cmd))
    }

    /// `Some(model)` if satisfiable, `None` if unsatisfiable.
    pub fn solve(&self, cnf: &Cnf) -> Result<Option<Vec<bool>>> {
        let mut file = tempfile::Builder::new().suffix(".cnf").tempfile()?;
        file.write_all(dimacs::write(cnf).as_bytes())?;
        file.flush()?;
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(file.path())
            .output()
            .map_err(|e| Error::ExternalSolver(format!("cannot run `{}`: {e}", self.program)))?;
        let stdout = String::from_utf8_lossy(&output.stdout);
        match output.status.code() {
            Some(10) => {
                // A missing status line is tolerated; the exit code decides.
                let text = format!("s SATISFIABLE\n{stdout}");
                match dimacs::parse_solver_output(&stdout, cnf.num_vars)? {
                    SolverOutput::Unsat => Err(Error::ExternalSolver(
                        "exit code 10 but output says UNSATISFIABLE".into(),
                    )),
                    SolverOutput::Sat(model) => Ok(Some(model)),
                    SolverOutput::Unknown => match dimacs::parse_solver_output(&text, cnf.num_vars)? {
                        SolverOutput::Sat(model) => Ok(Some(model)),
                        _ => Err(Error::ExternalSolver("unreadable solver output".into())),
                    },
                }
            }
            Some(20) => Ok(None),
            code => Err(Error::ExternalSolver(format!(
                "`{}` exited with {:?}: {}",
                self.program,
                code,
                String::from_utf8_lossy(&output.stderr).trim()
            ))),
        }
    }
}
