//! `ccsp-lp-solve`: minimal file-based MILP solver speaking the same LP
//! dialect the external-solver adapter emits. Usage:
//!
//! ```text
//! ccsp-lp-solve <model.lp> <solution.out>
//! ```
//!
//! Exists so the `external:<command>` backend has a reference implementation
//! to integrate against (and so tests can exercise the adapter end to end).

use std::fs;
use std::process::ExitCode;

use ccsp::milp::interchange::{parse_lp, write_solution};
use ccsp::milp::{solve_model, SolverParams};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 3 {
        eprintln!("usage: ccsp-lp-solve <model.lp> <solution.out>");
        return ExitCode::from(1);
    }
    match run(&args[1], &args[2]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ccsp-lp-solve: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(input: &str, output: &str) -> ccsp::Result<()> {
    let text = fs::read_to_string(input)?;
    let model = parse_lp(&text)?;
    let outcome = solve_model(&model, &SolverParams::exact())?;
    fs::write(output, write_solution(&outcome))?;
    Ok(())
}
