//! Adapter that shells out to an external MILP solver.
//!
//! Contract: the configured command is invoked as
//! `<command> [fixed args…] <model.lp> <solution.out>` inside a scratch
//! directory. The model file uses the dialect in [`super::interchange`]; the
//! solver must write a solution file in the paired format and exit 0. Any
//! nonzero exit, missing output, or unparseable content surfaces as
//! [`CcspError::Adapter`] with captured stdout/stderr for diagnosis.
//!
//! Solver parameters (gap, limits) are not forwarded through the file
//! contract; the adapter is intended for exact desk-scale solves where the
//! external tool runs to optimality.

use std::process::Command;
use std::time::Instant;

use crate::{CcspError, Result};

use super::{interchange, LinearModel, SolveOutcome};

/// How to invoke the external solver. `command[0]` is the executable; the
/// rest are fixed arguments placed before the model/solution paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSolverConfig {
    pub command: Vec<String>,
}

impl ExternalSolverConfig {
    /// Splits a shell-ish spec like `"my-solver --fast"` on whitespace.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let command: Vec<String> = spec.split_whitespace().map(str::to_string).collect();
        if command.is_empty() {
            return Err(CcspError::Parameter(
                "external solver command must be non-empty".into(),
            ));
        }
        Ok(Self { command })
    }
}

/// Solves `model` by round-tripping through the external command.
pub fn external_solve(model: &LinearModel, config: &ExternalSolverConfig) -> Result<SolveOutcome> {
    model.validate()?;
    let start = Instant::now();
    let dir = tempfile::tempdir()?;
    let model_path = dir.path().join("model.lp");
    let solution_path = dir.path().join("solution.out");
    std::fs::write(&model_path, interchange::write_lp(model)?)?;

    let output = Command::new(&config.command[0])
        .args(&config.command[1..])
        .arg(&model_path)
        .arg(&solution_path)
        .output()
        .map_err(|e| CcspError::Adapter {
            message: format!("failed to launch `{}`: {e}", config.command[0]),
            stdout: String::new(),
            stderr: String::new(),
        })?;
    let stdout = String::from_utf8_lossy(&output.stdout).into_owned();
    let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
    if !output.status.success() {
        return Err(CcspError::Adapter {
            message: format!(
                "external solver exited with {}",
                output
                    .status
                    .code()
                    .map_or_else(|| "signal".to_string(), |c| c.to_string())
            ),
            stdout,
            stderr,
        });
    }
    let text = std::fs::read_to_string(&solution_path).map_err(|e| CcspError::Adapter {
        message: format!("external solver wrote no solution file: {e}"),
        stdout,
        stderr,
    })?;
    let mut outcome = interchange::parse_solution(&text, model)?;
    outcome.elapsed_s = start.elapsed().as_secs_f64();
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_spec() {
        assert!(ExternalSolverConfig::from_spec("   ").is_err());
        let cfg = ExternalSolverConfig::from_spec("solver --flag").unwrap();
        assert_eq!(cfg.command, vec!["solver", "--flag"]);
    }

    #[test]
    fn missing_executable_reports_adapter_error() {
        let mut model = LinearModel::new();
        model.add_var(0.0, 1.0, false, 1.0);
        let cfg = ExternalSolverConfig::from_spec("/nonexistent/ccsp-solver-binary").unwrap();
        let err = external_solve(&model, &cfg).unwrap_err();
        assert!(matches!(err, CcspError::Adapter { .. }));
    }
}
