//! Shared fixtures and instruments for the integration tests: the solved
//! instance suite (grid of seeded knapsack instances, each solved by the
//! partitioning driver and the enumeration oracle) plus certification
//! helpers used by the structural checks.

use std::sync::OnceLock;

use ccsp::apm::{run_apm, ApmConfig, ApmResult, Variant};
use ccsp::bounds::{restricted_model, subset_cost};
use ccsp::instance::{generate_knapsack_instance, CcspInstance, VarDomain};
use ccsp::milp::{Sense, SolveStatus, SolverCtx, SolverParams};
use ccsp::oracle::{brute_force_optimal, OracleResult, DEFAULT_ORACLE_CAP};
use ccsp::partition::Partition;
use ccsp::Result;
use itertools::Itertools;

pub const GRID_SEEDS: u64 = 20;
pub const GRID_ROWS: usize = 5;
pub const GRID_VARS: usize = 10;
pub const GRID_SCENARIOS: usize = 10;
pub const GRID_TAU: f64 = 0.2;

pub struct SolvedInstance {
    pub seed: u64,
    pub instance: CcspInstance,
    pub oracle: OracleResult,
    /// `p_final` run with diagnostics enabled.
    pub apm: ApmResult,
}

pub struct Suite {
    pub continuous: Vec<SolvedInstance>,
    pub binary: Vec<SolvedInstance>,
    /// Sum of driver wall times per domain (oracle time excluded).
    pub continuous_apm_secs: f64,
    pub binary_apm_secs: f64,
}

pub fn exact_ctx() -> SolverCtx {
    SolverCtx::builtin(SolverParams::exact())
}

pub fn grid_instance(domain: VarDomain, seed: u64) -> CcspInstance {
    generate_knapsack_instance(GRID_ROWS, GRID_VARS, GRID_SCENARIOS, GRID_TAU, domain, seed)
        .expect("grid instance generates")
}

pub fn final_config() -> ApmConfig {
    ApmConfig {
        variant: Variant::Final,
        epsilon: 1e-6,
        collect_diagnostics: true,
        ..ApmConfig::default()
    }
}

fn solve_domain(domain: VarDomain) -> (Vec<SolvedInstance>, f64) {
    let ctx = exact_ctx();
    let mut solved = Vec::new();
    let mut apm_secs = 0.0;
    for seed in 0..GRID_SEEDS {
        let instance = grid_instance(domain, seed);
        let apm = run_apm(&instance, &final_config()).expect("driver runs");
        apm_secs += apm.elapsed_s;
        let oracle =
            brute_force_optimal(&instance, DEFAULT_ORACLE_CAP, &ctx).expect("oracle runs");
        solved.push(SolvedInstance {
            seed,
            instance,
            oracle,
            apm,
        });
    }
    (solved, apm_secs)
}

/// The 20+20 instance suite, built once and shared by every criterion test.
pub fn suite() -> &'static Suite {
    static SUITE: OnceLock<Suite> = OnceLock::new();
    SUITE.get_or_init(|| {
        let (continuous, continuous_apm_secs) = solve_domain(VarDomain::Continuous);
        let (binary, binary_apm_secs) = solve_domain(VarDomain::Binary);
        Suite {
            continuous,
            binary,
            continuous_apm_secs,
            binary_apm_secs,
        }
    })
}

/// Canonical signature of a witness point for recurrence detection: each
/// coordinate rounded at 1e-9.
pub fn witness_signature(point: &[f64]) -> Vec<i64> {
    point.iter().map(|v| (v * 1e9).round() as i64).collect()
}

/// Whether the lower model built on `groups` excludes `x` (too few subsets
/// fully satisfied for any valid indicator assignment).
pub fn excluded_by(instance: &CcspInstance, groups: &[Vec<usize>], x: &[f64]) -> bool {
    let partition = Partition::from_groups(groups.to_vec());
    let cls = partition
        .classify(instance, x, 1e-6)
        .expect("classification");
    cls.num_feasible() + instance.allowed_violations() < partition.len()
}

/// Certifies that the lower model on `groups` has a *unique* optimum: a
/// unique optimal subset selection (by exhaustive enumeration) whose
/// restricted problem has a zero-diameter optimal face (checked by
/// minimizing and maximizing every coordinate under an objective cut).
/// Returns `false` whenever uniqueness cannot be established.
pub fn lower_model_optimum_unique(
    instance: &CcspInstance,
    groups: &[Vec<usize>],
    ctx: &SolverCtx,
) -> Result<bool> {
    let allowed = instance.allowed_violations();
    assert!(groups.len() > allowed, "partition too small for the model");
    let keep = groups.len() - allowed;
    let mut best = f64::INFINITY;
    let mut best_count = 0usize;
    let mut best_members: Option<Vec<usize>> = None;
    for selection in (0..groups.len()).combinations(keep) {
        let mut members: Vec<usize> = selection
            .iter()
            .flat_map(|&g| groups[g].iter().copied())
            .collect();
        members.sort_unstable();
        let (value, _) = subset_cost(instance, &members, false, ctx, None)?;
        if value < best - 1e-9 {
            best = value;
            best_count = 1;
            best_members = Some(members);
        } else if (value - best).abs() <= 1e-9 {
            best_count += 1;
        }
    }
    if best_count != 1 || !best.is_finite() {
        return Ok(false);
    }
    let members = best_members.expect("winner recorded");
    let mut model = restricted_model(instance, &members, false);
    let cut: Vec<(usize, f64)> = instance
        .objective
        .iter()
        .enumerate()
        .map(|(j, &c)| (j, c))
        .collect();
    model.add_row(cut, Sense::Le, best + 1e-9);
    for j in 0..instance.num_vars {
        // Minimizing x_j gives the low end of the optimal face; minimizing
        // -x_j gives (negated) the high end. A spread means alternate optima.
        let mut low = 0.0f64;
        let mut high = 0.0f64;
        for dir in [1.0f64, -1.0] {
            let mut probe = model.clone();
            probe.objective = vec![0.0; probe.num_vars()];
            probe.objective[j] = dir;
            let out = ctx.solve(&probe)?;
            if out.status != SolveStatus::Optimal {
                return Ok(false);
            }
            let value = out.objective.expect("optimal objective");
            if dir > 0.0 {
                low = value;
            } else {
                high = -value;
            }
        }
        if high - low > 1e-7 {
            return Ok(false);
        }
    }
    Ok(true)
}
