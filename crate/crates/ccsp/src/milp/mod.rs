//! Backend-neutral mixed-integer linear models and their solvers.
//!
//! [`LinearModel`] hosts every mathematical program the library builds
//! (reduced bound models, big-M tightening problems, split-optimization
//! models, restricted scenario problems). Solving goes through the built-in
//! branch-and-bound over a bounded-variable simplex, or through an external
//! process speaking the LP-format dialect in [`interchange`].

pub mod branch_bound;
pub mod external;
pub mod interchange;
pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::{CcspError, Result};

/// Row sense of a linear constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// A decision variable with box bounds and an integrality flag.
#[derive(Clone, Debug)]
pub struct Variable {
    pub lower: f64,
    pub upper: f64,
    pub integral: bool,
}

/// A linear row `Σ coeffs · x  (sense)  rhs`. Lazy rows are withheld from LP
/// relaxations until an integral candidate violates them.
#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub lazy: bool,
}

/// A minimization MILP.
#[derive(Clone, Debug, Default)]
pub struct LinearModel {
    pub variables: Vec<Variable>,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    /// Adds a variable and its objective coefficient, returning its index.
    pub fn add_var(&mut self, lower: f64, upper: f64, integral: bool, objective: f64) -> usize {
        self.variables.push(Variable {
            lower,
            upper,
            integral,
        });
        self.objective.push(objective);
        self.variables.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.push_row(coeffs, sense, rhs, false)
    }

    pub fn add_lazy_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.push_row(coeffs, sense, rhs, true)
    }

    fn push_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64, lazy: bool) -> usize {
        self.rows.push(Row {
            coeffs,
            sense,
            rhs,
            lazy,
        });
        self.rows.len() - 1
    }

    /// Marks every row eager, so the full model is solved in one shot.
    pub fn clear_lazy_flags(&mut self) {
        for row in &mut self.rows {
            row.lazy = false;
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Signed violation of a row at `x` (positive = violated).
    pub fn row_violation(&self, row: &Row, x: &[f64]) -> f64 {
        let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
        match row.sense {
            Sense::Le => lhs - row.rhs,
            Sense::Ge => row.rhs - lhs,
            Sense::Eq => (lhs - row.rhs).abs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.variables.len() {
            return Err(CcspError::Contract(
                "objective length must equal variable count".into(),
            ));
        }
        for (j, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(CcspError::Contract(format!(
                    "variable {j} has invalid bounds [{}, {}]",
                    v.lower, v.upper
                )));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(CcspError::Contract("objective must be finite".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(CcspError::Contract(format!("row {i} has non-finite rhs")));
            }
            for &(j, a) in &row.coeffs {
                if j >= self.variables.len() || !a.is_finite() {
                    return Err(CcspError::Contract(format!(
                        "row {i} references variable {j} with coefficient {a}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Outcome status of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    NodeLimit,
    GapLimit,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::NodeLimit => "node_limit",
            SolveStatus::GapLimit => "gap_limit",
        };
        write!(f, "{name}")
    }
}

/// Result of a solve: status, best point, objective, and the proven bound.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub point: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Best proven lower bound on the optimum (minimization).
    pub dual_bound: Option<f64>,
    pub elapsed_s: f64,
    pub nodes: u64,
}

/// Solver configuration shared by the built-in and external backends.
#[derive(Clone, Debug)]
pub struct SolverParams {
    pub relative_gap: f64,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub time_limit_s: Option<f64>,
    pub node_limit: Option<u64>,
    /// Known objective value to beat: subtrees whose bound cannot go below
    /// it are pruned even before any incumbent exists. With a cutoff set,
    /// `Infeasible` means "no feasible point strictly better than the
    /// cutoff", and a returned incumbent at or above the cutoff need not be
    /// the model optimum (the true optimum then lies at or above the
    /// cutoff). Callers that need the exact optimum must leave this unset.
    pub cutoff: Option<f64>,
    /// Reserved for deterministic tie-breaking; the built-in solver is
    /// deterministic by construction and ignores it today.
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            relative_gap: 1e-6,
            feasibility_tol: 1e-6,
            integrality_tol: 1e-6,
            time_limit_s: None,
            node_limit: None,
            cutoff: None,
            seed: 0,
        }
    }
}

impl SolverParams {
    /// Params with the gap tightened so results are exact at 1e-6 comparison
    /// tolerance; used by every solve the partitioning driver issues.
    pub fn exact() -> Self {
        Self {
            relative_gap: 1e-9,
            ..Self::default()
        }
    }
}

/// Solves a MILP with the built-in branch-and-bound.
pub fn solve_model(model: &LinearModel, params: &SolverParams) -> Result<SolveOutcome> {
    branch_bound::solve(model, params)
}

/// Solves the LP relaxation (integrality dropped, lazy rows still enforced).
pub fn solve_lp_relaxation(model: &LinearModel, params: &SolverParams) -> Result<SolveOutcome> {
    let mut relaxed = model.clone();
    for v in &mut relaxed.variables {
        v.integral = false;
    }
    branch_bound::solve(&relaxed, params)
}

/// Which backend executes solves.
#[derive(Clone, Debug)]
pub enum SolverBackend {
    Builtin,
    External(external::ExternalSolverConfig),
}

/// A backend plus default parameters, threaded through every operation that
/// needs to solve models.
#[derive(Clone, Debug)]
pub struct SolverCtx {
    pub backend: SolverBackend,
    pub params: SolverParams,
}

impl SolverCtx {
    pub fn builtin(params: SolverParams) -> Self {
        Self {
            backend: SolverBackend::Builtin,
            params,
        }
    }

    pub fn solve(&self, model: &LinearModel) -> Result<SolveOutcome> {
        match &self.backend {
            SolverBackend::Builtin => solve_model(model, &self.params),
            SolverBackend::External(config) => external::external_solve(model, config),
        }
    }

    /// Solve with integrality dropped (always on the built-in backend: the
    /// relaxation is an internal bound computation, not a user-facing solve).
    pub fn solve_relaxation(&self, model: &LinearModel) -> Result<SolveOutcome> {
        solve_lp_relaxation(model, &self.params)
    }
}
