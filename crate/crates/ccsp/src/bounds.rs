//! Bounding machinery: scenario/subset costs, the quantile bound, big-M
//! tables, and the partition-indexed lower/upper MILP models.
//!
//! For a partition 𝒫 the *lower* model relaxes the chance constraint to
//! subset granularity: binary z_P activates all rows of subset P, and at
//! least |𝒫| − ⌊τ|S|⌋ subsets must activate. Every chance-feasible point can
//! switch on that many subsets (it violates at most ⌊τ|S|⌋ scenarios, hence
//! at most ⌊τ|S|⌋ subsets), so the model is a relaxation and its optimum is
//! a lower bound. The *upper* model instead requires the activated subsets
//! to cover probability 1 − τ, i.e. Σ (|P|/|S|) z_P ≥ 1 − τ; any solution
//! satisfies the original chance constraint outright, so its value is an
//! upper bound and its point a feasible incumbent.
//!
//! Scenario rows are stored and used in ≤ form throughout (`A^s x ≤ b^s`);
//! dual-based reasoning elsewhere in the crate fixes signs against this
//! orientation.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::instance::CcspInstance;
use crate::milp::{LinearModel, Sense, SolveOutcome, SolveStatus, SolverCtx};
use crate::partition::{descending_cost_order, Partition};
use crate::{CcspError, Result};

/// Receiver for feasible candidate points discovered as by-products of cost
/// computations. Implementations decide whether an offer improves their
/// incumbent; offers may arrive concurrently.
pub trait IncumbentSink: Sync {
    fn offer(&self, point: &[f64], value: f64);
}

/// Big-M construction flavors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BigMScheme {
    /// One LP per (scenario, row) maximizing the violation over 𝒳.
    Box,
    /// Box LPs tightened by an objective cut `cᵀx ≤ v_UB`.
    ObjectiveCut,
    /// Per-(scenario, row) MILP over the current partition's indicator
    /// structure; valid for that partition and its refinements.
    Partitioned,
}

impl std::fmt::Display for BigMScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            BigMScheme::Box => "box",
            BigMScheme::ObjectiveCut => "objcut",
            BigMScheme::Partitioned => "partitioned",
        };
        f.write_str(name)
    }
}

/// Where a big-M table remains valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BigMScope {
    /// Valid for any partition of the instance.
    Global,
    /// Valid only for the recorded partition and partitions refining it.
    PartitionScoped {
        generation: u64,
        groups: Vec<Vec<usize>>,
    },
}

/// Per-(scenario, row) big-M coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigMTable {
    pub scheme: BigMScheme,
    pub scope: BigMScope,
    /// `values[s][i]` bounds the violation `A^s_i x − b^s_i` over the
    /// relevant feasible region; all entries are finite and ≥ 0.
    pub values: Vec<Vec<f64>>,
    /// The incumbent value behind an objective-cut table.
    pub objective_cut_value: Option<f64>,
}

impl BigMTable {
    /// Whether this table may be used to build models over `partition`.
    pub fn covers(&self, partition: &Partition) -> bool {
        match &self.scope {
            BigMScope::Global => true,
            BigMScope::PartitionScoped { groups, .. } => {
                partition.is_refinement_of_groups(groups)
            }
        }
    }

    fn check_shape(&self, instance: &CcspInstance) -> Result<()> {
        let ok = self.values.len() == instance.num_scenarios()
            && self
                .values
                .iter()
                .all(|row| row.len() == instance.rows_per_scenario())
            && self
                .values
                .iter()
                .flatten()
                .all(|m| m.is_finite() && *m >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(CcspError::Contract(
                "big-M table shape/values inconsistent with instance".into(),
            ))
        }
    }
}

/// Which bounding model to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Lower,
    Upper,
}

/// Outcome of one bounding solve.
#[derive(Debug, Clone)]
pub struct BoundResult {
    pub kind: BoundKind,
    /// Bound value. Lower kind: a valid lower bound (the model optimum, or
    /// its dual bound if the solve hit a limit). Upper kind: incumbent value
    /// or +∞ when no feasible point was found.
    pub value: f64,
    /// The x-part of the solver point, when one exists.
    pub witness: Option<Vec<f64>>,
    /// Raw solver metadata.
    pub outcome: SolveOutcome,
}

/// The restricted problem min cᵀx over 𝒳 ∩ (∩_{s∈members} X^s).
/// With `relax` the integrality of x is dropped.
pub fn restricted_model(instance: &CcspInstance, members: &[usize], relax: bool) -> LinearModel {
    let mut model = LinearModel::new();
    let integral = !relax && instance.var_domain.is_integral();
    for (j, &(lo, hi)) in instance.var_bounds.iter().enumerate() {
        model.add_var(lo, hi, integral, instance.objective[j]);
    }
    let det = &instance.deterministic_rows;
    for (row, &rhs) in det.lhs.iter().zip(det.rhs.iter()) {
        model.add_row(dense_coeffs(row), Sense::Le, rhs);
    }
    for &s in members {
        let scen = &instance.scenarios[s];
        for (row, &rhs) in scen.lhs.iter().zip(scen.rhs.iter()) {
            model.add_row(dense_coeffs(row), Sense::Le, rhs);
        }
    }
    model
}

fn dense_coeffs(row: &[f64]) -> Vec<(usize, f64)> {
    row.iter()
        .enumerate()
        .filter(|(_, &a)| a != 0.0)
        .map(|(j, &a)| (j, a))
        .collect()
}

/// Cost ρ_P of a subset: the minimum objective over points satisfying every
/// member scenario. Infeasible subsets cost +∞ (they can never be selected).
/// Feasible witnesses are offered to `sink` so the driver can harvest
/// incumbents from every cost computation.
pub fn subset_cost(
    instance: &CcspInstance,
    members: &[usize],
    relax: bool,
    ctx: &SolverCtx,
    sink: Option<&dyn IncumbentSink>,
) -> Result<(f64, Option<Vec<f64>>)> {
    let model = restricted_model(instance, members, relax);
    let outcome = if relax {
        ctx.solve_relaxation(&model)?
    } else {
        ctx.solve(&model)?
    };
    match outcome.status {
        SolveStatus::Optimal => {
            let point = outcome.point.ok_or_else(|| {
                CcspError::Solver("optimal status without a point".into())
            })?;
            let value = instance.objective_value(&point);
            if let Some(sink) = sink {
                sink.offer(&point, value);
            }
            Ok((value, Some(point)))
        }
        SolveStatus::Infeasible => Ok((f64::INFINITY, None)),
        SolveStatus::Unbounded => Err(unbounded_error()),
        other => Err(CcspError::Solver(format!(
            "subset cost solve stopped early with status {other}"
        ))),
    }
}

/// Cost ρ_s of a single scenario.
pub fn scenario_cost(
    instance: &CcspInstance,
    scenario: usize,
    relax: bool,
    ctx: &SolverCtx,
    sink: Option<&dyn IncumbentSink>,
) -> Result<(f64, Option<Vec<f64>>)> {
    subset_cost(instance, &[scenario], relax, ctx, sink)
}

/// All scenario costs, computed in parallel.
pub fn all_scenario_costs(
    instance: &CcspInstance,
    relax: bool,
    ctx: &SolverCtx,
    sink: Option<&dyn IncumbentSink>,
) -> Result<Vec<f64>> {
    (0..instance.num_scenarios())
        .into_par_iter()
        .map(|s| scenario_cost(instance, s, relax, ctx, sink).map(|(v, _)| v))
        .collect()
}

/// Quantile lower bound: the q-th largest scenario cost with
/// q = ⌊τ|S|⌋ + 1. Any chance-feasible point satisfies some scenario among
/// the q most expensive ones, so its objective is at least that scenario's
/// cost.
pub fn quantile_bound(instance: &CcspInstance, scenario_costs: &[f64]) -> Result<f64> {
    let n = instance.num_scenarios();
    if scenario_costs.len() != n {
        return Err(CcspError::Parameter(format!(
            "need {n} scenario costs, got {}",
            scenario_costs.len()
        )));
    }
    let q = instance.allowed_violations() + 1;
    let order = descending_cost_order(scenario_costs);
    Ok(scenario_costs[order[q - 1]])
}

/// How to compute a big-M table.
#[derive(Debug, Clone, Copy)]
pub enum BigMRequest<'a> {
    Box,
    ObjectiveCut { incumbent_value: f64 },
    Partitioned {
        partition: &'a Partition,
        base: &'a BigMTable,
    },
}

/// Computes a big-M table under the requested scheme. All per-(scenario,
/// row) subproblems maximize the row violation over a relaxation of the
/// relevant feasible region (x-integrality dropped), so every entry is a
/// valid upper bound; entries are clipped below at 0.
pub fn big_m_coefficients(
    instance: &CcspInstance,
    request: BigMRequest<'_>,
    ctx: &SolverCtx,
) -> Result<BigMTable> {
    instance.validate()?;
    match request {
        BigMRequest::Box => {
            let values = box_like_table(instance, None, ctx)?;
            Ok(BigMTable {
                scheme: BigMScheme::Box,
                scope: BigMScope::Global,
                values,
                objective_cut_value: None,
            })
        }
        BigMRequest::ObjectiveCut { incumbent_value } => {
            if !incumbent_value.is_finite() {
                return Err(CcspError::Parameter(
                    "objective-cut big-M needs a finite incumbent value".into(),
                ));
            }
            let values = box_like_table(instance, Some(incumbent_value), ctx)?;
            Ok(BigMTable {
                scheme: BigMScheme::ObjectiveCut,
                scope: BigMScope::Global,
                values,
                objective_cut_value: Some(incumbent_value),
            })
        }
        BigMRequest::Partitioned { partition, base } => {
            partition.ensure_valid(instance)?;
            base.check_shape(instance)?;
            if !base.covers(partition) {
                return Err(CcspError::Contract(
                    "base big-M table does not cover the partition".into(),
                ));
            }
            let values = partitioned_table(instance, partition, base, ctx)?;
            Ok(BigMTable {
                scheme: BigMScheme::Partitioned,
                scope: BigMScope::PartitionScoped {
                    generation: partition.generation,
                    groups: partition.canonical(),
                },
                values,
                objective_cut_value: base.objective_cut_value,
            })
        }
    }
}

/// Box/objective-cut entries: maximize A^s_i x − b^s_i over the LP
/// relaxation of 𝒳 (+ optional cut).
fn box_like_table(
    instance: &CcspInstance,
    cut: Option<f64>,
    ctx: &SolverCtx,
) -> Result<Vec<Vec<f64>>> {
    let pairs: Vec<(usize, usize)> = (0..instance.num_scenarios())
        .flat_map(|s| (0..instance.rows_per_scenario()).map(move |i| (s, i)))
        .collect();
    let entries: Vec<f64> = pairs
        .par_iter()
        .map(|&(s, i)| -> Result<f64> {
            let mut model = restricted_model(instance, &[], true);
            if let Some(v) = cut {
                model.add_row(dense_coeffs(&instance.objective), Sense::Le, v);
            }
            // Maximize the violation = minimize its negation.
            for (j, c) in model.objective.iter_mut().enumerate() {
                *c = -instance.scenarios[s].lhs[i][j];
            }
            let outcome = ctx.solve_relaxation(&model)?;
            match outcome.status {
                SolveStatus::Optimal => {
                    let max_lhs = -outcome.objective.unwrap_or(f64::NEG_INFINITY);
                    Ok((max_lhs - instance.scenarios[s].rhs[i]).max(0.0))
                }
                SolveStatus::Unbounded => Err(unbounded_error()),
                SolveStatus::Infeasible => Err(CcspError::Infeasible(
                    "deterministic feasible set is empty".into(),
                )),
                other => Err(CcspError::Solver(format!(
                    "big-M subproblem stopped with status {other}"
                ))),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut values = vec![vec![0.0; instance.rows_per_scenario()]; instance.num_scenarios()];
    for (&(s, i), m) in pairs.iter().zip(entries) {
        values[s][i] = m;
    }
    Ok(values)
}

/// Partition-tightened entries: maximize A^s_i x − b^s_i subject to the
/// partition's own indicator structure (base big-Ms) and its cardinality
/// row. Points excluded by the partition's lower model cannot realize the
/// violation, so these entries are no larger than the base entries and stay
/// valid for every refinement of the partition.
fn partitioned_table(
    instance: &CcspInstance,
    partition: &Partition,
    base: &BigMTable,
    ctx: &SolverCtx,
) -> Result<Vec<Vec<f64>>> {
    let pairs: Vec<(usize, usize)> = (0..instance.num_scenarios())
        .flat_map(|s| (0..instance.rows_per_scenario()).map(move |i| (s, i)))
        .collect();
    let entries: Vec<f64> = pairs
        .par_iter()
        .map(|&(s, i)| -> Result<f64> {
            let mut model = indicator_model(instance, partition, base, true);
            if let Some(v) = base.objective_cut_value {
                model.add_row(dense_coeffs(&instance.objective), Sense::Le, v);
            }
            let n = instance.num_vars;
            for (j, c) in model.objective.iter_mut().take(n).enumerate() {
                *c = -instance.scenarios[s].lhs[i][j];
            }
            // Cardinality of the lower model: at least |𝒫| − ⌊τ|S|⌋ subsets
            // active.
            let card: Vec<(usize, f64)> = (0..partition.len()).map(|p| (n + p, 1.0)).collect();
            let need = partition.len() as f64 - instance.allowed_violations() as f64;
            model.add_row(card, Sense::Ge, need);
            let outcome = ctx.solve(&model)?;
            match outcome.status {
                SolveStatus::Optimal => {
                    let max_lhs = -outcome.objective.unwrap_or(f64::NEG_INFINITY);
                    Ok((max_lhs - instance.scenarios[s].rhs[i]).max(0.0))
                }
                SolveStatus::Unbounded => Err(unbounded_error()),
                // The indicator model can only be infeasible if the lower
                // model itself is; surface that directly.
                SolveStatus::Infeasible => Err(CcspError::Infeasible(
                    "partition lower model admits no point".into(),
                )),
                other => Err(CcspError::Solver(format!(
                    "big-M subproblem stopped with status {other}"
                ))),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut values = vec![vec![0.0; instance.rows_per_scenario()]; instance.num_scenarios()];
    for (&(s, i), m) in pairs.iter().zip(entries) {
        // Partition information can only tighten the base entry.
        values[s][i] = m.min(base.values[s][i]);
    }
    Ok(values)
}

/// Shared skeleton: x variables (+z_P binaries), deterministic rows, and the
/// lazy indicator rows `A^s_i x + M^s_i z_P ≤ b^s_i + M^s_i` for every
/// subset P, member s, row i. Cardinality rows are added by the caller.
fn indicator_model(
    instance: &CcspInstance,
    partition: &Partition,
    bigm: &BigMTable,
    relax_x: bool,
) -> LinearModel {
    let mut model = restricted_model(instance, &[], relax_x);
    let n = instance.num_vars;
    for _ in 0..partition.len() {
        model.add_var(0.0, 1.0, true, 0.0);
    }
    for (p, subset) in partition.subsets.iter().enumerate() {
        let z = n + p;
        for &s in &subset.members {
            let scen = &instance.scenarios[s];
            for (i, (row, &rhs)) in scen.lhs.iter().zip(scen.rhs.iter()).enumerate() {
                let m = bigm.values[s][i];
                let mut coeffs = dense_coeffs(row);
                coeffs.push((z, m));
                model.add_lazy_row(coeffs, Sense::Le, rhs + m);
            }
        }
    }
    model
}

/// Builds the lower (relaxation) or upper (restriction) bounding MILP for a
/// partition. The big-M table must cover the partition.
pub fn build_reduced_model(
    instance: &CcspInstance,
    partition: &Partition,
    bigm: &BigMTable,
    kind: BoundKind,
) -> Result<LinearModel> {
    partition.ensure_valid(instance)?;
    bigm.check_shape(instance)?;
    if !bigm.covers(partition) {
        return Err(CcspError::Contract(format!(
            "big-M table (scheme {}) does not cover this partition",
            bigm.scheme
        )));
    }
    let mut model = indicator_model(instance, partition, bigm, false);
    let n = instance.num_vars;
    match kind {
        BoundKind::Lower => {
            let coeffs: Vec<(usize, f64)> = (0..partition.len()).map(|p| (n + p, 1.0)).collect();
            let need = partition.len() as f64 - instance.allowed_violations() as f64;
            model.add_row(coeffs, Sense::Ge, need);
        }
        BoundKind::Upper => {
            let total = instance.num_scenarios() as f64;
            let coeffs: Vec<(usize, f64)> = partition
                .subsets
                .iter()
                .enumerate()
                .map(|(p, subset)| (n + p, subset.len() as f64 / total))
                .collect();
            model.add_row(coeffs, Sense::Ge, 1.0 - instance.tau);
        }
    }
    Ok(model)
}

/// Builds and solves a bounding model, translating solver outcomes into
/// bound semantics (see [`BoundResult::value`]).
pub fn solve_bound(
    instance: &CcspInstance,
    partition: &Partition,
    bigm: &BigMTable,
    kind: BoundKind,
    ctx: &SolverCtx,
) -> Result<BoundResult> {
    let model = build_reduced_model(instance, partition, bigm, kind)?;
    let outcome = ctx.solve(&model)?;
    let n = instance.num_vars;
    let witness = outcome.point.as_ref().map(|p| p[..n].to_vec());
    let value = match (kind, outcome.status) {
        (_, SolveStatus::Optimal) => outcome.objective.ok_or_else(|| {
            CcspError::Solver("optimal status without objective".into())
        })?,
        (BoundKind::Lower, SolveStatus::Infeasible) => {
            // The lower model is a relaxation; its infeasibility certifies
            // the original problem infeasible.
            return Err(CcspError::Infeasible(
                "chance-constrained problem is infeasible: no point satisfies \
                 enough scenarios"
                    .into(),
            ));
        }
        (BoundKind::Upper, SolveStatus::Infeasible) => f64::INFINITY,
        (_, SolveStatus::Unbounded) => return Err(unbounded_error()),
        // Early stop: a lower solve still carries a valid dual bound; an
        // upper solve carries its incumbent (chance-feasible) if any.
        (BoundKind::Lower, _) => outcome.dual_bound.unwrap_or(f64::NEG_INFINITY),
        (BoundKind::Upper, _) => outcome.objective.unwrap_or(f64::INFINITY),
    };
    Ok(BoundResult {
        kind,
        value,
        witness,
        outcome,
    })
}

/// Baseline: the exact big-M reformulation over singleton subsets, solved as
/// a single MILP. With `use_lazy` false every indicator row is eager.
pub fn solve_model4(
    instance: &CcspInstance,
    bigm: &BigMTable,
    ctx: &SolverCtx,
    use_lazy: bool,
) -> Result<BoundResult> {
    let singletons = Partition::singletons(instance.num_scenarios());
    let mut model = build_reduced_model(instance, &singletons, bigm, BoundKind::Lower)?;
    if !use_lazy {
        model.clear_lazy_flags();
    }
    let outcome = ctx.solve(&model)?;
    let n = instance.num_vars;
    let witness = outcome.point.as_ref().map(|p| p[..n].to_vec());
    let value = match outcome.status {
        SolveStatus::Optimal => outcome
            .objective
            .ok_or_else(|| CcspError::Solver("optimal status without objective".into()))?,
        SolveStatus::Infeasible => {
            return Err(CcspError::Infeasible(
                "chance-constrained problem is infeasible: no point satisfies \
                 enough scenarios"
                    .into(),
            ));
        }
        SolveStatus::Unbounded => return Err(unbounded_error()),
        _ => outcome.dual_bound.unwrap_or(f64::NEG_INFINITY),
    };
    Ok(BoundResult {
        kind: BoundKind::Lower,
        value,
        witness,
        outcome,
    })
}

fn unbounded_error() -> CcspError {
    CcspError::Solver(
        "subproblem is unbounded; supply finite bounds for every variable so \
         the deterministic feasible set is a box-bounded polytope"
            .into(),
    )
}

/// Cache path for a big-M table: `bigm-<instance-hash>-<scheme>.json`.
pub fn bigm_cache_path(dir: &Path, instance: &CcspInstance, scheme: BigMScheme) -> Result<PathBuf> {
    let hash = instance.hash_hex()?;
    Ok(dir.join(format!("bigm-{}-{scheme}.json", &hash[..16])))
}

/// Loads a cached global-scope table if present and shape-valid. Tables that
/// fail validation are ignored (recomputed), never trusted.
pub fn bigm_cache_load(
    dir: &Path,
    instance: &CcspInstance,
    scheme: BigMScheme,
) -> Option<BigMTable> {
    let path = bigm_cache_path(dir, instance, scheme).ok()?;
    let text = std::fs::read_to_string(path).ok()?;
    let table: BigMTable = serde_json::from_str(&text).ok()?;
    if table.scheme == scheme
        && table.scope == BigMScope::Global
        && table.check_shape(instance).is_ok()
    {
        Some(table)
    } else {
        None
    }
}

/// Persists a global-scope table under the cache key. Partition-scoped
/// tables are run-local and refused.
pub fn bigm_cache_store(dir: &Path, instance: &CcspInstance, table: &BigMTable) -> Result<PathBuf> {
    if table.scope != BigMScope::Global {
        return Err(CcspError::Parameter(
            "only globally valid big-M tables are cacheable".into(),
        ));
    }
    std::fs::create_dir_all(dir)?;
    let path = bigm_cache_path(dir, instance, table.scheme)?;
    std::fs::write(&path, serde_json::to_string(table)?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::milp::SolverParams;
    use approx::assert_abs_diff_eq;

    fn ctx() -> SolverCtx {
        SolverCtx::builtin(SolverParams::exact())
    }

    fn quantile_partition_t2() -> Partition {
        Partition::from_groups(vec![vec![2, 0], vec![3, 1]])
    }

    #[test]
    fn scenario_and_subset_costs_match_hand_lp() {
        let inst = fixtures::mixed_limits();
        let c = ctx();
        // Scenario 0 restricts x1 ≤ 2, so min −x1−x2 = −12 at (2,10).
        let (rho0, w0) = scenario_cost(&inst, 0, false, &c, None).unwrap();
        assert_abs_diff_eq!(rho0, -12.0, epsilon = 1e-8);
        let w0 = w0.unwrap();
        assert_abs_diff_eq!(w0[0], 2.0, epsilon = 1e-7);
        assert_abs_diff_eq!(w0[1], 10.0, epsilon = 1e-7);
        // Scenario 2: x1 + x2 ≤ 6.
        let (rho2, _) = scenario_cost(&inst, 2, false, &c, None).unwrap();
        assert_abs_diff_eq!(rho2, -6.0, epsilon = 1e-8);
        // Subsets {0,2} and {1,3}.
        let (rho02, _) = subset_cost(&inst, &[0, 2], false, &c, None).unwrap();
        assert_abs_diff_eq!(rho02, -6.0, epsilon = 1e-8);
        let (rho13, w13) = subset_cost(&inst, &[1, 3], false, &c, None).unwrap();
        assert_abs_diff_eq!(rho13, -8.0, epsilon = 1e-8);
        // Optimal face is x1+x2 = 8, x2 ≤ 2; the witness must lie on it.
        let w13 = w13.unwrap();
        assert_abs_diff_eq!(w13[0] + w13[1], 8.0, epsilon = 1e-7);
        assert!(w13[1] <= 2.0 + 1e-7);
    }

    #[test]
    fn infeasible_subset_costs_infinity() {
        let mut inst = fixtures::mixed_limits();
        // An impossible extra scenario: x1 + x2 ≤ −1 with x ≥ 0.
        inst.scenarios.push(crate::instance::Scenario {
            lhs: vec![vec![1.0, 1.0]],
            rhs: vec![-1.0],
        });
        let (rho, w) = scenario_cost(&inst, 4, false, &ctx(), None).unwrap();
        assert_eq!(rho, f64::INFINITY);
        assert!(w.is_none());
    }

    #[test]
    fn quantile_bound_matches_hand_values() {
        let t1 = fixtures::nested_budgets();
        let costs1 = all_scenario_costs(&t1, false, &ctx(), None).unwrap();
        let expect1 = [-4.0, -5.0, -6.0, -7.0];
        for (got, want) in costs1.iter().zip(expect1) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(quantile_bound(&t1, &costs1).unwrap(), -5.0, epsilon = 1e-8);

        let t2 = fixtures::mixed_limits();
        let costs2 = all_scenario_costs(&t2, false, &ctx(), None).unwrap();
        assert_abs_diff_eq!(quantile_bound(&t2, &costs2).unwrap(), -8.0, epsilon = 1e-8);

        // τ=0 degenerates to the largest scenario cost.
        let mut t0 = fixtures::nested_budgets();
        t0.tau = 0.0;
        assert_abs_diff_eq!(
            quantile_bound(&t0, &costs1).unwrap(),
            -4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn box_big_m_values_by_hand() {
        let inst = fixtures::mixed_limits();
        let table = big_m_coefficients(&inst, BigMRequest::Box, &ctx()).unwrap();
        // Scenario 0 row 0: max x1 − 2 over [0,10]² = 8; scenario 2:
        // max x1 + x2 − 6 = 14; scenario 3: max x1 + x2 − 8 = 12.
        assert_abs_diff_eq!(table.values[0][0], 8.0, epsilon = 1e-7);
        assert_abs_diff_eq!(table.values[1][0], 8.0, epsilon = 1e-7);
        assert_abs_diff_eq!(table.values[2][0], 14.0, epsilon = 1e-7);
        assert_abs_diff_eq!(table.values[3][0], 12.0, epsilon = 1e-7);
        assert_eq!(table.scope, BigMScope::Global);
    }

    #[test]
    fn objective_cut_tightens_box() {
        let inst = fixtures::mixed_limits();
        let c = ctx();
        let boxed = big_m_coefficients(&inst, BigMRequest::Box, &c).unwrap();
        // Cut cᵀx = −x1−x2 ≤ −6 restricts to x1+x2 ≥ 6.
        let cut = big_m_coefficients(
            &inst,
            BigMRequest::ObjectiveCut {
                incumbent_value: -6.0,
            },
            &c,
        )
        .unwrap();
        for s in 0..4 {
            assert!(cut.values[s][0] <= boxed.values[s][0] + 1e-9);
        }
        assert_eq!(cut.objective_cut_value, Some(-6.0));
        // Scenario 2's violation x1+x2−6 is now forced ≥ 0 everywhere but
        // its max (14) is unchanged; scenario 0's max x1−2 stays 8. The cut
        // only matters on instances where the objective fights the
        // violation; equality here is expected.
        assert_abs_diff_eq!(cut.values[0][0], 8.0, epsilon = 1e-7);
    }

    #[test]
    fn partitioned_big_m_tightens_and_scopes() {
        let inst = fixtures::mixed_limits();
        let c = ctx();
        let base = big_m_coefficients(&inst, BigMRequest::Box, &c).unwrap();
        let part = quantile_partition_t2();
        let tight = big_m_coefficients(
            &inst,
            BigMRequest::Partitioned {
                partition: &part,
                base: &base,
            },
            &c,
        )
        .unwrap();
        for s in 0..4 {
            assert!(tight.values[s][0] <= base.values[s][0] + 1e-9);
        }
        // Scoped to the partition: covers itself and refinements, not a
        // crossing partition.
        assert!(tight.covers(&part));
        let refined = Partition::from_groups(vec![vec![0], vec![2], vec![1, 3]]);
        assert!(tight.covers(&refined));
        let crossed = Partition::from_groups(vec![vec![0, 1], vec![2, 3]]);
        assert!(!tight.covers(&crossed));
        // And the reduced-model builder enforces the scope.
        let err = build_reduced_model(&inst, &crossed, &tight, BoundKind::Lower);
        assert!(matches!(err, Err(CcspError::Contract(_))));
    }

    #[test]
    fn lower_bound_on_quantile_partition() {
        let inst = fixtures::mixed_limits();
        let c = ctx();
        let bigm = big_m_coefficients(&inst, BigMRequest::Box, &c).unwrap();
        let part = quantile_partition_t2();
        let res = solve_bound(&inst, &part, &bigm, BoundKind::Lower, &c).unwrap();
        assert_abs_diff_eq!(res.value, -8.0, epsilon = 1e-7);
        // The witness satisfies subset {1,3} but is not chance-feasible.
        let cls = part
            .classify(&inst, res.witness.as_ref().unwrap(), 1e-6)
            .unwrap();
        assert_eq!(cls.infeasible_scenarios, vec![0, 2]);
        assert!(!cls.chance_feasible(&inst));
    }

    #[test]
    fn upper_bound_forces_full_cover_on_small_partition() {
        let inst = fixtures::mixed_limits();
        let c = ctx();
        let bigm = big_m_coefficients(&inst, BigMRequest::Box, &c).unwrap();
        let part = quantile_partition_t2();
        // Σ (1/2) z_P ≥ 0.75 forces both z = 1: every scenario active, so
        // x ≤ (2,2) and the bound is −4 with a chance-feasible witness.
        let res = solve_bound(&inst, &part, &bigm, BoundKind::Upper, &c).unwrap();
        assert_abs_diff_eq!(res.value, -4.0, epsilon = 1e-7);
        let report = inst
            .evaluate_point(res.witness.as_ref().unwrap(), 1e-6)
            .unwrap();
        assert!(report.chance_feasible);
    }

    #[test]
    fn singleton_lower_model_solves_original_problem() {
        let inst = fixtures::mixed_limits();
        let c = ctx();
        let bigm = big_m_coefficients(&inst, BigMRequest::Box, &c).unwrap();
        let part = Partition::singletons(4);
        let res = solve_bound(&inst, &part, &bigm, BoundKind::Lower, &c).unwrap();
        assert_abs_diff_eq!(res.value, -6.0, epsilon = 1e-7);
        // With singletons the relaxation is exact: witness is feasible.
        let report = inst
            .evaluate_point(res.witness.as_ref().unwrap(), 1e-6)
            .unwrap();
        assert!(report.chance_feasible);
    }

    #[test]
    fn refined_partition_lower_bound_reaches_optimum() {
        let inst = fixtures::mixed_limits();
        let c = ctx();
        let bigm = big_m_coefficients(&inst, BigMRequest::Box, &c).unwrap();
        let part = Partition::from_groups(vec![vec![0], vec![2], vec![1, 3]]);
        let res = solve_bound(&inst, &part, &bigm, BoundKind::Lower, &c).unwrap();
        assert_abs_diff_eq!(res.value, -6.0, epsilon = 1e-7);
    }

    #[test]
    fn infeasible_problem_detected_via_lower_model() {
        // Two contradictory scenarios, τ = 0: nothing satisfies both.
        let mut inst = fixtures::mixed_limits();
        inst.tau = 0.0;
        inst.scenarios = vec![
            crate::instance::Scenario {
                lhs: vec![vec![1.0, 0.0]],
                rhs: vec![2.0],
            },
            crate::instance::Scenario {
                lhs: vec![vec![-1.0, 0.0]],
                rhs: vec![-5.0], // x1 ≥ 5
            },
        ];
        let c = ctx();
        let bigm = big_m_coefficients(&inst, BigMRequest::Box, &c).unwrap();
        let part = Partition::singletons(2);
        let err = solve_bound(&inst, &part, &bigm, BoundKind::Lower, &c);
        assert!(matches!(err, Err(CcspError::Infeasible(_))));
    }

    #[test]
    fn bigm_cache_round_trip() {
        let inst = fixtures::mixed_limits();
        let c = ctx();
        let table = big_m_coefficients(&inst, BigMRequest::Box, &c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        bigm_cache_store(dir.path(), &inst, &table).unwrap();
        let loaded = bigm_cache_load(dir.path(), &inst, BigMScheme::Box).unwrap();
        assert_eq!(loaded, table);
        // Different scheme key: miss.
        assert!(bigm_cache_load(dir.path(), &inst, BigMScheme::ObjectiveCut).is_none());
        // Partition-scoped tables are refused.
        let scoped = BigMTable {
            scope: BigMScope::PartitionScoped {
                generation: 0,
                groups: vec![],
            },
            ..table
        };
        assert!(bigm_cache_store(dir.path(), &inst, &scoped).is_err());
    }
}
