//! `verify`: solve an instance with the brute-force oracle and a list of
//! methods, compare objectives, and replay recorded per-iteration data
//! against the method's structural invariants.

use ccsp::apm::{ApmDiagnostics, IterationRecord};
use ccsp::instance::{CcspInstance, DEFAULT_FEAS_TOL};
use ccsp::oracle::{brute_force_optimal, OracleResult};
use ccsp::partition::Partition;
use ccsp::Result;

use crate::methods::{run_method, Method, MethodOpts, MethodOutcome};

pub struct MethodReport {
    pub method: Method,
    pub outcome: MethodOutcome,
    /// |objective − oracle| when the method proved optimality.
    pub delta: Option<f64>,
    pub violations: Vec<String>,
}

pub struct VerifyReport {
    pub oracle: OracleResult,
    pub methods: Vec<MethodReport>,
}

impl VerifyReport {
    pub fn pass(&self, tol: f64) -> bool {
        self.methods.iter().all(|m| {
            m.violations.is_empty() && m.outcome.optimal && m.delta.is_some_and(|d| d <= tol)
        })
    }
}

pub fn run_verify(
    instance: &CcspInstance,
    methods: &[Method],
    opts: &MethodOpts,
    oracle_cap: usize,
    tol: f64,
) -> Result<VerifyReport> {
    let oracle = brute_force_optimal(instance, oracle_cap, &opts.ctx())?;
    let mut reports = Vec::new();
    for &method in methods {
        let opts = MethodOpts {
            collect_diagnostics: true,
            ..opts.clone()
        };
        let outcome = run_method(instance, method, &opts)?;
        let mut violations = check_bounds(&outcome, &oracle, tol);
        violations.extend(check_trace(&outcome.trace, tol));
        if let Some(diag) = &outcome.diagnostics {
            violations.extend(check_iteration_structure(instance, diag, tol));
        }
        let delta = outcome
            .optimal
            .then(|| (outcome.objective - oracle.value).abs());
        reports.push(MethodReport {
            method,
            outcome,
            delta,
            violations,
        });
    }
    Ok(VerifyReport {
        oracle,
        methods: reports,
    })
}

/// Bound validity against the oracle: the lower bound must never exceed the
/// optimum, a feasible objective must never beat it.
fn check_bounds(outcome: &MethodOutcome, oracle: &OracleResult, tol: f64) -> Vec<String> {
    let mut v = Vec::new();
    if outcome.lower_bound > oracle.value + tol {
        v.push(format!(
            "lower bound {} exceeds oracle optimum {}",
            outcome.lower_bound, oracle.value
        ));
    }
    if outcome.objective < oracle.value - tol {
        v.push(format!(
            "feasible objective {} beats oracle optimum {}",
            outcome.objective, oracle.value
        ));
    }
    v
}

/// Per-row sandwich and lower-bound monotonicity.
fn check_trace(trace: &[IterationRecord], tol: f64) -> Vec<String> {
    let mut v = Vec::new();
    for row in trace {
        if row.lower_bound > row.upper_bound + tol {
            v.push(format!(
                "iteration {}: lower bound {} above upper bound {}",
                row.iteration, row.lower_bound, row.upper_bound
            ));
        }
    }
    for pair in trace.windows(2) {
        if pair[1].lower_bound < pair[0].lower_bound - tol {
            v.push(format!(
                "iteration {}: lower bound decreased from {} to {}",
                pair[1].iteration, pair[0].lower_bound, pair[1].lower_bound
            ));
        }
    }
    v
}

/// Replays diagnostics: witness exclusion after every modification, split
/// size accounting, and merge size accounting.
fn check_iteration_structure(
    instance: &CcspInstance,
    diag: &ApmDiagnostics,
    tol: f64,
) -> Vec<String> {
    let mut v = Vec::new();
    let allowed = instance.allowed_violations();
    for (i, it) in diag.iterations.iter().enumerate() {
        let Some(after) = &it.partition_after else {
            continue; // terminal iteration: no modification to replay
        };
        let before_len = it.partition_before.len();
        if let Some(refined) = it.refined_size {
            if refined != before_len + it.splits {
                v.push(format!(
                    "iteration {i}: refinement size {refined} ≠ {before_len} + {} splits",
                    it.splits
                ));
            }
        }
        let expected_after = if it.merged {
            before_len + it.splits - it.mu.unwrap_or(0)
        } else {
            before_len + it.splits
        };
        if after.len() != expected_after {
            v.push(format!(
                "iteration {i}: partition size {} after modification, expected {expected_after}",
                after.len()
            ));
        }
        let partition = Partition::from_groups(after.clone());
        match partition.classify(instance, &it.lower_witness, tol.max(DEFAULT_FEAS_TOL)) {
            Ok(cls) => {
                if cls.num_feasible() + allowed >= partition.len() {
                    v.push(format!(
                        "iteration {i}: witness not excluded by the modified partition"
                    ));
                }
            }
            Err(e) => v.push(format!("iteration {i}: classify failed: {e}")),
        }
    }
    v
}

/// Renders the report; returns whether verification passed.
pub fn print_report(report: &VerifyReport, tol: f64) -> bool {
    println!(
        "oracle: value {}, unique {}, selection {:?}",
        ccsp::apm::format_float(report.oracle.value),
        report.oracle.unique_selection,
        report.oracle.selection
    );
    for m in &report.methods {
        let delta = match m.delta {
            Some(d) => ccsp::apm::format_float(d),
            None => "n/a".to_string(),
        };
        let checks = if m.violations.is_empty() { "ok" } else { "FAILED" };
        println!(
            "{}: status {}, objective {}, lower {}, delta {}, checks {}",
            m.method,
            m.outcome.status,
            ccsp::apm::format_float(m.outcome.objective),
            ccsp::apm::format_float(m.outcome.lower_bound),
            delta,
            checks
        );
        for violation in &m.violations {
            println!("  - {violation}");
        }
    }
    let pass = report.pass(tol);
    println!(
        "verification: {} ({} methods)",
        if pass { "PASS" } else { "FAIL" },
        report.methods.len()
    );
    pass
}
