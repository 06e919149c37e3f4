//! Problem data for chance-constrained programs with finite scenario support,
//! plus the seeded multidimensional-knapsack generator and point evaluation.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CcspError, Result};

/// Default absolute tolerance on row violations when classifying feasibility.
pub const DEFAULT_FEAS_TOL: f64 = 1e-6;

/// Current instance-file schema version.
pub const INSTANCE_FORMAT_VERSION: u32 = 1;

/// Variable domain, applied uniformly to all variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarDomain {
    Continuous,
    Binary,
}

impl VarDomain {
    pub fn is_integral(self) -> bool {
        matches!(self, VarDomain::Binary)
    }
}

impl std::fmt::Display for VarDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VarDomain::Continuous => write!(f, "continuous"),
            VarDomain::Binary => write!(f, "binary"),
        }
    }
}

/// One scenario's constraint block `A^s x ≤ b^s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// `m × n` coefficient matrix, row major.
    pub lhs: Vec<Vec<f64>>,
    /// Right-hand sides, length `m`.
    pub rhs: Vec<f64>,
}

/// Deterministic constraint rows `A^𝒳 x ≤ b^𝒳` beyond the variable bounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeterministicRows {
    pub lhs: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

/// Provenance of a generated instance, kept so files are self-describing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMeta {
    pub seed: u64,
    pub delta: f64,
    pub zeta: f64,
}

/// A chance-constrained problem over equiprobable scenarios:
/// `min cᵀx` over `x ∈ 𝒳` such that at least `|S| − ⌊τ|S|⌋` scenarios are
/// satisfied, where `𝒳` is the variable box intersected with the
/// deterministic rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcspInstance {
    pub version: u32,
    pub num_vars: usize,
    pub var_domain: VarDomain,
    /// Per-variable `[lower, upper]` bounds; binary instances use `[0, 1]`.
    pub var_bounds: Vec<(f64, f64)>,
    /// Objective vector `c`, sense minimize.
    pub objective: Vec<f64>,
    pub deterministic_rows: DeterministicRows,
    pub scenarios: Vec<Scenario>,
    /// Risk tolerance `τ ∈ [0, 1)`.
    pub tau: f64,
    pub generator: Option<GeneratorMeta>,
}

/// Feasibility summary of a point against every scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityReport {
    pub satisfied_count: usize,
    /// `max_i (A^s_i x − b^s_i)` per scenario, clipped below at 0.
    pub per_scenario_max_violation: Vec<f64>,
    /// Whether `satisfied_count ≥ |S| − ⌊τ|S|⌋`.
    pub chance_feasible: bool,
}

impl FeasibilityReport {
    /// Whether scenario `s` was satisfied at the tolerance used to build the
    /// report (violations are clipped at 0, so any positive entry above `tol`
    /// is a genuine violation).
    pub fn is_satisfied(&self, s: usize, tol: f64) -> bool {
        self.per_scenario_max_violation[s] <= tol
    }
}

impl CcspInstance {
    pub fn num_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    /// Rows per scenario block (`m`).
    pub fn rows_per_scenario(&self) -> usize {
        self.scenarios.first().map_or(0, |s| s.rhs.len())
    }

    /// `⌊τ|S|⌋`, the number of scenarios allowed to be violated. A small
    /// guard absorbs downward floating-point error in `τ·|S|` (e.g.
    /// `0.3 · 10 = 2.999…96` must floor to 3, not 2).
    pub fn allowed_violations(&self) -> usize {
        (self.tau * self.num_scenarios() as f64 + 1e-9).floor() as usize
    }

    /// Minimum number of scenarios a chance-feasible point must satisfy.
    pub fn required_satisfied(&self) -> usize {
        self.num_scenarios() - self.allowed_violations()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Evaluates `x` against every scenario block.
    pub fn evaluate_point(&self, x: &[f64], tol: f64) -> Result<FeasibilityReport> {
        if x.len() != self.num_vars {
            return Err(CcspError::Parameter(format!(
                "point has {} entries, instance has {} variables",
                x.len(),
                self.num_vars
            )));
        }
        if tol <= 0.0 {
            return Err(CcspError::Parameter("tolerance must be positive".into()));
        }
        let mut violations = Vec::with_capacity(self.num_scenarios());
        let mut satisfied = 0usize;
        for scenario in &self.scenarios {
            let mut worst = f64::NEG_INFINITY;
            for (row, rhs) in scenario.lhs.iter().zip(&scenario.rhs) {
                let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
                worst = worst.max(lhs - rhs);
            }
            if worst <= tol {
                satisfied += 1;
            }
            violations.push(worst.max(0.0));
        }
        Ok(FeasibilityReport {
            satisfied_count: satisfied,
            chance_feasible: satisfied >= self.required_satisfied(),
            per_scenario_max_violation: violations,
        })
    }

    /// Structural validation: dimensions, finiteness, bound ordering, τ range.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CcspError::Parameter(msg));
        if self.num_vars == 0 {
            return fail("instance must have at least one variable".into());
        }
        if self.var_bounds.len() != self.num_vars || self.objective.len() != self.num_vars {
            return fail("bounds/objective length must equal num_vars".into());
        }
        for (j, &(lo, hi)) in self.var_bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return fail(format!("variable {j} has invalid bounds [{lo}, {hi}]"));
            }
            if self.var_domain == VarDomain::Binary && (lo != 0.0 || hi != 1.0) {
                return fail(format!("binary variable {j} must have bounds [0, 1]"));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return fail("objective entries must be finite".into());
        }
        if !(0.0..1.0).contains(&self.tau) {
            return fail(format!("tau must lie in [0, 1), got {}", self.tau));
        }
        if self.scenarios.is_empty() {
            return fail("instance must have at least one scenario".into());
        }
        let det = &self.deterministic_rows;
        if det.lhs.len() != det.rhs.len() {
            return fail("deterministic rows: lhs/rhs length mismatch".into());
        }
        for row in &det.lhs {
            if row.len() != self.num_vars || row.iter().any(|a| !a.is_finite()) {
                return fail("deterministic rows must be finite with num_vars columns".into());
            }
        }
        if det.rhs.iter().any(|b| !b.is_finite()) {
            return fail("deterministic rhs must be finite".into());
        }
        let m = self.rows_per_scenario();
        if m == 0 {
            return fail("scenarios must have at least one row".into());
        }
        for (s, scenario) in self.scenarios.iter().enumerate() {
            if scenario.lhs.len() != m || scenario.rhs.len() != m {
                return fail(format!("scenario {s} must have exactly {m} rows"));
            }
            for row in &scenario.lhs {
                if row.len() != self.num_vars || row.iter().any(|a| !a.is_finite()) {
                    return fail(format!(
                        "scenario {s} rows must be finite with num_vars columns"
                    ));
                }
            }
            if scenario.rhs.iter().any(|b| !b.is_finite()) {
                return fail(format!("scenario {s} rhs must be finite"));
            }
        }
        Ok(())
    }

    /// Canonical JSON used for both files and hashing.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let instance: CcspInstance = serde_json::from_str(text)?;
        if instance.version != INSTANCE_FORMAT_VERSION {
            return Err(CcspError::Parameter(format!(
                "unsupported instance format version {}",
                instance.version
            )));
        }
        instance.validate()?;
        Ok(instance)
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// SHA-256 of the canonical JSON, hex-encoded; keys big-M cache files.
    pub fn hash_hex(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(self)?.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }
}

/// Generates a packing-style instance with `num_scenarios` multiplicative
/// perturbations of a shared base matrix, using defaults `δ = 0.1`,
/// `ζ = 0.5`.
pub fn generate_knapsack_instance(
    base_rows: usize,
    base_vars: usize,
    num_scenarios: usize,
    tau: f64,
    domain: VarDomain,
    seed: u64,
) -> Result<CcspInstance> {
    generate_knapsack_instance_with(base_rows, base_vars, num_scenarios, tau, domain, seed, 0.1, 0.5)
}

/// Full-parameter generator.
///
/// Draw order (fixed so identical seeds give bit-identical instances):
/// profits `c_j ~ U[1,100]`, then base weights `Â_ij = round(U[1,100])` row
/// major, then per scenario the factors `U[1−δ, 1+δ]` row major. Capacities
/// are `b_i = ζ·Σ_j Â_ij` and each scenario uses `A^s_ij = Â_ij · factor`
/// with `b^s = b`. Profit maximization is encoded as minimizing `−cᵀx` over
/// the unit box (binary: with integrality).
#[allow(clippy::too_many_arguments)]
pub fn generate_knapsack_instance_with(
    base_rows: usize,
    base_vars: usize,
    num_scenarios: usize,
    tau: f64,
    domain: VarDomain,
    seed: u64,
    delta: f64,
    zeta: f64,
) -> Result<CcspInstance> {
    if base_rows == 0 || base_vars == 0 || num_scenarios == 0 {
        return Err(CcspError::Parameter(
            "rows, variables, and scenario count must all be at least 1".into(),
        ));
    }
    if !(0.0..1.0).contains(&tau) {
        return Err(CcspError::Parameter(format!(
            "tau must lie in [0, 1), got {tau}"
        )));
    }
    if !(0.0..1.0).contains(&delta) || !(zeta > 0.0 && zeta.is_finite()) {
        return Err(CcspError::Parameter(
            "delta must lie in [0, 1) and zeta must be positive".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objective: Vec<f64> = (0..base_vars)
        .map(|_| -rng.gen_range(1.0..=100.0))
        .collect();
    let base: Vec<Vec<f64>> = (0..base_rows)
        .map(|_| {
            (0..base_vars)
                .map(|_| rng.gen_range(1.0f64..=100.0).round())
                .collect()
        })
        .collect();
    let rhs: Vec<f64> = base
        .iter()
        .map(|row| zeta * row.iter().sum::<f64>())
        .collect();
    let scenarios: Vec<Scenario> = (0..num_scenarios)
        .map(|_| {
            let lhs = base
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&a| a * rng.gen_range(1.0 - delta..=1.0 + delta))
                        .collect()
                })
                .collect();
            Scenario {
                lhs,
                rhs: rhs.clone(),
            }
        })
        .collect();

    let instance = CcspInstance {
        version: INSTANCE_FORMAT_VERSION,
        num_vars: base_vars,
        var_domain: domain,
        var_bounds: vec![(0.0, 1.0); base_vars],
        objective,
        deterministic_rows: DeterministicRows::default(),
        scenarios,
        tau,
        generator: Some(GeneratorMeta { seed, delta, zeta }),
    };
    instance.validate()?;
    Ok(instance)
}
