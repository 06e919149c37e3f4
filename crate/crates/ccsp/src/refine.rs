//! Partition modification: minimal refinements, the optimized-split model,
//! subset selection, and maximal mergers.
//!
//! After a lower-bound solve returns a witness x̲ that is not chance-feasible,
//! the partition is refined so that x̲ becomes infeasible for the next lower
//! model. Exactly μ = ⌊τ|S|⌋ + 1 − |𝒫_I(x̲)| extra infeasible subsets are
//! needed; each 2-way split of a subset holding ≥ 2 violated scenarios adds
//! one. Conversely, when every subset created by the refinement has cost
//! above the current lower bound, a merger can shrink the partition back to
//! its previous size without re-admitting x̲ — this keeps models small while
//! the bound still climbs.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bounds::{subset_cost, IncumbentSink};
use crate::instance::CcspInstance;
use crate::milp::{LinearModel, Sense, SolveStatus, SolverCtx};
use crate::partition::{Classification, Partition, Subset};
use crate::{CcspError, Result};

/// Default member cap for brute-force split enumeration.
pub const DEFAULT_BRUTEFORCE_CAP: usize = 12;

/// Default number of split-candidate subsets scored per refinement step.
pub const DEFAULT_CANDIDATE_CAP: usize = 10;

/// Minimal number of additional subsets a refinement must create to exclude
/// the witness behind `cls` from the lower model.
pub fn compute_mu(instance: &CcspInstance, cls: &Classification) -> Result<usize> {
    if cls.chance_feasible(instance) {
        return Err(CcspError::Contract(
            "witness is chance-feasible; no refinement is needed".into(),
        ));
    }
    let target = instance.allowed_violations() + 1;
    let infeasible = cls.num_infeasible();
    if infeasible >= target {
        return Err(CcspError::Contract(format!(
            "witness is already infeasible for the lower model \
             ({infeasible} infeasible subsets ≥ {target})"
        )));
    }
    Ok(target - infeasible)
}

/// Number of 2-way splits available against the witness behind `cls`:
/// Σ_P max(0, |P ∩ S_I| − 1). Each split of a subset with k ≥ 2 violated
/// members leaves children with k₁, k₂ ≥ 1 violated members
/// (k₁ + k₂ = k), so the quantity drops by exactly one per split.
pub fn split_capacity(partition: &Partition, cls: &Classification) -> usize {
    let infeasible: HashSet<usize> = cls.infeasible_scenarios.iter().copied().collect();
    partition
        .subsets
        .iter()
        .map(|p| {
            p.members
                .iter()
                .filter(|s| infeasible.contains(s))
                .count()
                .saturating_sub(1)
        })
        .sum()
}

/// One executed split.
#[derive(Debug, Clone)]
pub struct RefinementPlan {
    /// Id of the subset that was split.
    pub target_id: u64,
    pub target_members: Vec<usize>,
    /// Violated seed scenarios placed in the left/right child.
    pub seeds: (usize, usize),
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    /// Optimized-split value when the split came from the optimizer.
    pub rho_div: Option<f64>,
    /// Exact child costs (left, right) when the optimizer computed them.
    pub child_costs: Option<(f64, f64)>,
    pub strategy: &'static str,
}

/// Result of the single-level split model (or its brute-force oracle).
#[derive(Debug, Clone)]
pub struct SplitSolution {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    /// Maximized minimum child cost. Exact for continuous instances; a lower
    /// bound on the exact value for binary instances (the model works with
    /// LP duals).
    pub rho_div: f64,
    /// Exact child costs at the returned assignment.
    pub rho_left: f64,
    pub rho_right: f64,
    /// Dual bound that produced the solution (after any retries).
    pub dual_bound_used: f64,
}

/// Parameters for optimizer-driven splitting.
pub struct OptimizedSplit<'a> {
    /// Dual variable bound U for the split model.
    pub dual_bound: f64,
    /// Current lower bound v^L(𝒫), used by the selection rule.
    pub current_lower: f64,
    /// Evaluate at most this many candidate subsets per split.
    pub candidate_cap: usize,
    pub ctx: &'a SolverCtx,
    pub sink: Option<&'a dyn IncumbentSink>,
}

/// How a refinement step picks its target subset and allocates members.
pub enum SplitStrategy<'a> {
    /// Uniform random target among splittable subsets; members dispatched by
    /// coin flip.
    Random(&'a mut ChaCha8Rng),
    /// Target the subset holding the most-violated scenario; members
    /// allocated in decreasing violation order, alternating left/right
    /// starting left.
    ViolationAlternating,
    /// Targets scored by the split model; assignment taken from it.
    Optimized(OptimizedSplit<'a>),
}

impl SplitStrategy<'_> {
    fn tag(&self) -> &'static str {
        match self {
            SplitStrategy::Random(_) => "random",
            SplitStrategy::ViolationAlternating => "violation_alternating",
            SplitStrategy::Optimized(_) => "optimized",
        }
    }
}

/// A refinement together with its bookkeeping.
#[derive(Debug)]
pub struct RefineOutcome {
    pub partition: Partition,
    pub plans: Vec<RefinementPlan>,
    pub mu: usize,
    /// Splits actually performed: min(requested, capacity).
    pub splits: usize,
    /// Split capacity at entry (see [`split_capacity`]).
    pub capacity: usize,
}

/// Performs up to `split_count` (but at least μ) 2-way splits against x̲,
/// returning the refined partition. Every child receives at least one
/// violated scenario, so each split grows |𝒫_I(x̲)| by one and `split_count
/// = μ` makes x̲ infeasible for the refined lower model.
pub fn refine_minimal(
    instance: &CcspInstance,
    partition: &Partition,
    x_low: &[f64],
    strategy: &mut SplitStrategy<'_>,
    split_count: usize,
    tol: f64,
) -> Result<RefineOutcome> {
    partition.ensure_valid(instance)?;
    let cls = partition.classify(instance, x_low, tol)?;
    let mu = compute_mu(instance, &cls)?;
    if split_count < mu {
        return Err(CcspError::Parameter(format!(
            "split_count {split_count} is below μ = {mu}"
        )));
    }
    let capacity = split_capacity(partition, &cls);
    let infeasible: HashSet<usize> = cls.infeasible_scenarios.iter().copied().collect();
    let violation = &cls.per_scenario_violation;

    let mut work = partition.clone();
    let mut plans: Vec<RefinementPlan> = Vec::new();

    while plans.len() < split_count {
        // Splittable subsets: ≥ 2 violated members.
        let candidates: Vec<usize> = work
            .subsets
            .iter()
            .enumerate()
            .filter(|(_, p)| p.members.iter().filter(|s| infeasible.contains(s)).count() >= 2)
            .map(|(pos, _)| pos)
            .collect();
        if candidates.is_empty() {
            break;
        }
        let (pos, solution) = match strategy {
            SplitStrategy::Random(rng) => (candidates[rng.gen_range(0..candidates.len())], None),
            SplitStrategy::ViolationAlternating => {
                // Scenario with the largest violation whose subset is still
                // splittable; ties by scenario index.
                let mut order: Vec<usize> = cls.infeasible_scenarios.clone();
                order.sort_by(|&a, &b| violation[b].total_cmp(&violation[a]).then(a.cmp(&b)));
                let pos = order
                    .iter()
                    .filter_map(|&s| work.subset_of_scenario(s))
                    .find(|p| candidates.contains(p))
                    .ok_or_else(|| {
                        CcspError::Contract("no splittable subset holds a violated scenario".into())
                    })?;
                (pos, None)
            }
            SplitStrategy::Optimized(opt) => {
                let (pos, sol) = pick_optimized_target(
                    instance,
                    &work,
                    &candidates,
                    &infeasible,
                    violation,
                    opt,
                )?;
                (pos, Some(sol))
            }
        };

        let target = work.subsets[pos].clone();
        let infeas_members: Vec<usize> = target
            .members
            .iter()
            .copied()
            .filter(|s| infeasible.contains(s))
            .collect();
        let plan = match solution {
            Some(sol) => plan_from_solution(&target, &infeas_members, violation, sol, strategy.tag()),
            None => {
                let (left, right, seeds) =
                    allocate_members(&target.members, &infeas_members, violation, strategy);
                RefinementPlan {
                    target_id: target.id,
                    target_members: target.members.clone(),
                    seeds,
                    left,
                    right,
                    rho_div: None,
                    child_costs: None,
                    strategy: strategy.tag(),
                }
            }
        };

        work.remove_subset(pos);
        let left_pos = work.push_subset(plan.left.clone());
        work.subsets[left_pos].cached_cost = plan.child_costs.map(|(l, _)| l);
        let right_pos = work.push_subset(plan.right.clone());
        work.subsets[right_pos].cached_cost = plan.child_costs.map(|(_, r)| r);
        plans.push(plan);
    }

    if plans.len() < mu {
        return Err(CcspError::Contract(format!(
            "ran out of splittable subsets after {} of μ = {mu} splits",
            plans.len()
        )));
    }
    let splits = plans.len();
    work.ensure_valid(instance)?;
    Ok(RefineOutcome {
        partition: work,
        plans,
        mu,
        splits,
        capacity,
    })
}

/// Two violated members with the largest violations (ties by index): the
/// children's seeds.
fn pick_seeds(infeas_members: &[usize], violation: &[f64]) -> (usize, usize) {
    let mut order: Vec<usize> = infeas_members.to_vec();
    order.sort_by(|&a, &b| violation[b].total_cmp(&violation[a]).then(a.cmp(&b)));
    (order[0], order[1])
}

/// Seeds plus strategy-specific dispatch of the remaining members.
fn allocate_members(
    members: &[usize],
    infeas_members: &[usize],
    violation: &[f64],
    strategy: &mut SplitStrategy<'_>,
) -> (Vec<usize>, Vec<usize>, (usize, usize)) {
    let seeds = pick_seeds(infeas_members, violation);
    let mut left = vec![seeds.0];
    let mut right = vec![seeds.1];
    let mut rest: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&s| s != seeds.0 && s != seeds.1)
        .collect();
    match strategy {
        SplitStrategy::Random(rng) => {
            for s in rest {
                if rng.gen_bool(0.5) {
                    left.push(s);
                } else {
                    right.push(s);
                }
            }
        }
        _ => {
            // Decreasing violation, ties by index, alternating starting left.
            rest.sort_by(|&a, &b| violation[b].total_cmp(&violation[a]).then(a.cmp(&b)));
            for (i, s) in rest.into_iter().enumerate() {
                if i % 2 == 0 {
                    left.push(s);
                } else {
                    right.push(s);
                }
            }
        }
    }
    (left, right, seeds)
}

fn plan_from_solution(
    target: &Subset,
    infeas_members: &[usize],
    violation: &[f64],
    sol: SplitSolution,
    tag: &'static str,
) -> RefinementPlan {
    // Report per-child seeds as each child's most-violated member.
    let seed_of = |side: &[usize]| -> usize {
        side.iter()
            .copied()
            .filter(|s| infeas_members.contains(s))
            .min_by(|&a, &b| violation[b].total_cmp(&violation[a]).then(a.cmp(&b)))
            .unwrap_or(side[0])
    };
    RefinementPlan {
        target_id: target.id,
        target_members: target.members.clone(),
        seeds: (seed_of(&sol.left), seed_of(&sol.right)),
        child_costs: Some((sol.rho_left, sol.rho_right)),
        left: sol.left,
        right: sol.right,
        rho_div: Some(sol.rho_div),
        strategy: tag,
    }
}

/// Scores up to `candidate_cap` splittable subsets with the split model and
/// applies the selection rule: among candidates whose ρ_div exceeds the
/// current lower bound pick the smallest such value (the cheapest way to
/// push the bound up); if none exceeds it, pick the largest. Ties by subset
/// id.
fn pick_optimized_target(
    instance: &CcspInstance,
    work: &Partition,
    candidates: &[usize],
    infeasible: &HashSet<usize>,
    violation: &[f64],
    opt: &OptimizedSplit<'_>,
) -> Result<(usize, SplitSolution)> {
    // Order candidates by total member violation descending (ties by id) and
    // keep the first `candidate_cap`.
    let mut scored: Vec<(usize, f64)> = candidates
        .iter()
        .map(|&pos| {
            let total: f64 = work.subsets[pos]
                .members
                .iter()
                .map(|&s| violation[s])
                .sum();
            (pos, total)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(work.subsets[a.0].id.cmp(&work.subsets[b.0].id))
    });
    scored.truncate(opt.candidate_cap.max(1));

    let mut evaluated: Vec<(u64, f64)> = Vec::new();
    let mut solutions: HashMap<u64, (usize, SplitSolution)> = HashMap::new();
    for (pos, _) in scored {
        let subset = &work.subsets[pos];
        let infeas: Vec<usize> = subset
            .members
            .iter()
            .copied()
            .filter(|s| infeasible.contains(s))
            .collect();
        let sol = split_subset_optimal(
            instance,
            &subset.members,
            &infeas,
            opt.dual_bound,
            opt.ctx,
            opt.sink,
        )?;
        evaluated.push((subset.id, sol.rho_div));
        solutions.insert(subset.id, (pos, sol));
    }
    let chosen = select_refinement_subset(&evaluated, opt.current_lower)?;
    let (pos, sol) = solutions.remove(&chosen).expect("chosen id was evaluated");
    Ok((pos, sol))
}

/// Selection rule over evaluated `(subset id, ρ_div)` pairs: smallest ρ_div
/// strictly above `v_l` when one exists, otherwise the largest ρ_div; ties
/// broken by subset id ascending.
pub fn select_refinement_subset(candidates: &[(u64, f64)], v_l: f64) -> Result<u64> {
    if candidates.is_empty() {
        return Err(CcspError::Parameter("no candidates to select from".into()));
    }
    let above = candidates.iter().filter(|(_, rho)| *rho > v_l);
    if let Some(&(id, _)) = above.min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))) {
        return Ok(id);
    }
    let &(id, _) = candidates
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .expect("nonempty");
    Ok(id)
}

/// Single-level split model: choose a 2-way assignment π of the subset's
/// members and per-child LP dual multipliers η ≤ 0 maximizing α, where α is
/// a lower bound on each child's cost via weak duality. Scenario duals are
/// switched off (η = 0) for members not assigned to the child by the bound
/// η ≥ −U·π. At the optimum with U large enough, α equals the maximized
/// minimum child cost (continuous case; with integral x the child costs are
/// underestimated by their LP relaxations, so α is a valid lower bound).
///
/// Variable bounds of x are folded into the 𝒳 rows so the dualized primal
/// has free variables. The member with the lowest index among the violated
/// ones is pinned to the left child to halve the assignment symmetry.
///
/// Infeasibility or near-active dual bounds trigger up to two retries with
/// 10× the dual bound; persisting failure is a solver error suggesting a
/// larger bound.
pub fn split_subset_optimal(
    instance: &CcspInstance,
    members: &[usize],
    infeasible_ids: &[usize],
    dual_bound: f64,
    ctx: &SolverCtx,
    sink: Option<&dyn IncumbentSink>,
) -> Result<SplitSolution> {
    check_split_inputs(instance, members, infeasible_ids)?;
    if !(dual_bound > 0.0 && dual_bound.is_finite()) {
        return Err(CcspError::Parameter(format!(
            "dual bound must be positive and finite, got {dual_bound}"
        )));
    }
    let mut u = dual_bound;
    for attempt in 0..3 {
        match try_split_model(instance, members, infeasible_ids, u, ctx)? {
            SplitModelOutcome::Solved { left, right, alpha } => {
                let (rho_left, _) = subset_cost(instance, &left, false, ctx, sink)?;
                let (rho_right, _) = subset_cost(instance, &right, false, ctx, sink)?;
                return Ok(SplitSolution {
                    left,
                    right,
                    rho_div: alpha,
                    rho_left,
                    rho_right,
                    dual_bound_used: u,
                });
            }
            SplitModelOutcome::NeedLargerBound => {
                if attempt == 2 {
                    break;
                }
                u *= 10.0;
            }
        }
    }
    Err(CcspError::Solver(format!(
        "split model hit its dual bound even at U = {u}; rerun with a larger \
         dual bound (unbounded duals indicate an infeasible child on every \
         admissible assignment)"
    )))
}

enum SplitModelOutcome {
    Solved {
        left: Vec<usize>,
        right: Vec<usize>,
        alpha: f64,
    },
    NeedLargerBound,
}

fn try_split_model(
    instance: &CcspInstance,
    members: &[usize],
    infeasible_ids: &[usize],
    u: f64,
    ctx: &SolverCtx,
) -> Result<SplitModelOutcome> {
    let n = instance.num_vars;
    // 𝒳 rows in ≤ form: deterministic rows, then x_j ≤ u_j and −x_j ≤ −l_j.
    let mut x_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let det = &instance.deterministic_rows;
    for (row, &rhs) in det.lhs.iter().zip(det.rhs.iter()) {
        let coeffs: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(j, &a)| (j, a))
            .collect();
        x_rows.push((coeffs, rhs));
    }
    for (j, &(lo, hi)) in instance.var_bounds.iter().enumerate() {
        x_rows.push((vec![(j, 1.0)], hi));
        x_rows.push((vec![(j, -1.0)], -lo));
    }

    let mut model = LinearModel::new();
    let abs_b_sum: f64 = x_rows.iter().map(|(_, b)| b.abs()).sum::<f64>()
        + members
            .iter()
            .map(|&s| instance.scenarios[s].rhs.iter().map(|b| b.abs()).sum::<f64>())
            .sum::<f64>();
    let alpha_box = u * abs_b_sum + 1e3;
    let alpha = model.add_var(-alpha_box, alpha_box, false, -1.0); // maximize α

    let m = instance.rows_per_scenario();
    let num_children = 2;
    // Dual variables: per child, η^𝒳 per 𝒳-row and η^s per member row.
    let eta_x = |k: usize, r: usize| 1 + k * x_rows.len() + r;
    for _ in 0..num_children * x_rows.len() {
        model.add_var(-u, 0.0, false, 0.0);
    }
    let eta_s_base = 1 + num_children * x_rows.len();
    let eta_s = |k: usize, mi: usize, i: usize| eta_s_base + (k * members.len() + mi) * m + i;
    for _ in 0..num_children * members.len() * m {
        model.add_var(-u, 0.0, false, 0.0);
    }
    // Assignment binaries π_{s,k}.
    let pi_base = eta_s_base + num_children * members.len() * m;
    let pi = |k: usize, mi: usize| pi_base + k * members.len() + mi;
    for _ in 0..num_children * members.len() {
        model.add_var(0.0, 1.0, true, 0.0);
    }
    // Pin the lowest-indexed violated member to the left child.
    let pinned = *infeasible_ids.iter().min().expect("≥2 violated members");
    let pinned_mi = members.iter().position(|&s| s == pinned).unwrap();
    model.variables[pi(0, pinned_mi)].lower = 1.0;

    for k in 0..num_children {
        // α ≤ bᵀη for child k.
        let mut obj_row: Vec<(usize, f64)> = vec![(alpha, 1.0)];
        for (r, (_, rhs)) in x_rows.iter().enumerate() {
            obj_row.push((eta_x(k, r), -rhs));
        }
        for (mi, &s) in members.iter().enumerate() {
            for (i, &rhs) in instance.scenarios[s].rhs.iter().enumerate() {
                obj_row.push((eta_s(k, mi, i), -rhs));
            }
        }
        model.add_row(obj_row, Sense::Le, 0.0);
        // Dual feasibility: Aᵀη = c per variable.
        for j in 0..n {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for (r, (coeffs, _)) in x_rows.iter().enumerate() {
                if let Some(&(_, a)) = coeffs.iter().find(|(jj, _)| *jj == j) {
                    row.push((eta_x(k, r), a));
                }
            }
            for (mi, &s) in members.iter().enumerate() {
                for i in 0..m {
                    let a = instance.scenarios[s].lhs[i][j];
                    if a != 0.0 {
                        row.push((eta_s(k, mi, i), a));
                    }
                }
            }
            model.add_row(row, Sense::Eq, instance.objective[j]);
        }
        // η^{s,k} ≥ −U π_{s,k}: members not assigned to k contribute nothing.
        for (mi, _) in members.iter().enumerate() {
            for i in 0..m {
                model.add_row(
                    vec![(eta_s(k, mi, i), 1.0), (pi(k, mi), u)],
                    Sense::Ge,
                    0.0,
                );
            }
        }
        // Each child receives at least one violated member.
        let cover: Vec<(usize, f64)> = members
            .iter()
            .enumerate()
            .filter(|(_, s)| infeasible_ids.contains(s))
            .map(|(mi, _)| (pi(k, mi), 1.0))
            .collect();
        model.add_row(cover, Sense::Ge, 1.0);
    }
    // Every member goes to exactly one child.
    for (mi, _) in members.iter().enumerate() {
        model.add_row(vec![(pi(0, mi), 1.0), (pi(1, mi), 1.0)], Sense::Eq, 1.0);
    }

    let outcome = ctx.solve(&model)?;
    match outcome.status {
        SolveStatus::Infeasible => Ok(SplitModelOutcome::NeedLargerBound),
        SolveStatus::Optimal => {
            let point = outcome
                .point
                .ok_or_else(|| CcspError::Solver("optimal status without a point".into()))?;
            let alpha_val = point[alpha];
            // Retry when α sits on its artificial box or any dual is within
            // 1e−6·U of the bound −U: the bound truncated the solution.
            let near_bound = point[1..pi_base]
                .iter()
                .any(|&v| v <= -u * (1.0 - 1e-6))
                || alpha_val.abs() >= alpha_box - 1e-6 * alpha_box.max(1.0);
            if near_bound {
                return Ok(SplitModelOutcome::NeedLargerBound);
            }
            let mut left = Vec::new();
            let mut right = Vec::new();
            for (mi, &s) in members.iter().enumerate() {
                if point[pi(0, mi)] >= 0.5 {
                    left.push(s);
                } else {
                    right.push(s);
                }
            }
            Ok(SplitModelOutcome::Solved { left, right, alpha: alpha_val })
        }
        SolveStatus::Unbounded => Err(CcspError::Solver(
            "split model unbounded; the instance admits unbounded duals".into(),
        )),
        other => Err(CcspError::Solver(format!(
            "split model stopped early with status {other}"
        ))),
    }
}

fn check_split_inputs(
    instance: &CcspInstance,
    members: &[usize],
    infeasible_ids: &[usize],
) -> Result<()> {
    let n = instance.num_scenarios();
    if members.iter().any(|&s| s >= n) {
        return Err(CcspError::Parameter("member index out of range".into()));
    }
    if infeasible_ids.len() < 2 {
        return Err(CcspError::Parameter(
            "need at least two violated members to split".into(),
        ));
    }
    if !infeasible_ids.iter().all(|s| members.contains(s)) {
        return Err(CcspError::Parameter(
            "violated ids must be members of the subset".into(),
        ));
    }
    Ok(())
}

/// Reference implementation of the optimal split: enumerate every admissible
/// 2-way assignment (lowest violated member pinned left, each child with ≥1
/// violated member), score children by exact subset cost, return the
/// max-min. Exponential in |subset|, hence the cap.
pub fn split_subset_bruteforce(
    instance: &CcspInstance,
    members: &[usize],
    infeasible_ids: &[usize],
    relax: bool,
    ctx: &SolverCtx,
    cap: usize,
) -> Result<SplitSolution> {
    check_split_inputs(instance, members, infeasible_ids)?;
    if members.len() > cap {
        return Err(CcspError::Parameter(format!(
            "subset has {} members, above the brute-force cap {cap}",
            members.len()
        )));
    }
    let pinned = *infeasible_ids.iter().min().unwrap();
    let rest: Vec<usize> = members.iter().copied().filter(|&s| s != pinned).collect();
    let mut memo: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut cost = |side: &[usize]| -> Result<f64> {
        if let Some(&v) = memo.get(side) {
            return Ok(v);
        }
        let (v, _) = subset_cost(instance, side, relax, ctx, None)?;
        memo.insert(side.to_vec(), v);
        Ok(v)
    };

    let mut best: Option<SplitSolution> = None;
    for mask in 0u32..(1 << rest.len()) {
        let mut left = vec![pinned];
        let mut right = Vec::new();
        for (i, &s) in rest.iter().enumerate() {
            if mask & (1 << i) != 0 {
                left.push(s);
            } else {
                right.push(s);
            }
        }
        if right.is_empty() || !right.iter().any(|s| infeasible_ids.contains(s)) {
            continue;
        }
        left.sort_unstable();
        right.sort_unstable();
        let rho_left = cost(&left)?;
        let rho_right = cost(&right)?;
        let value = rho_left.min(rho_right);
        if best.as_ref().is_none_or(|b| value > b.rho_div) {
            best = Some(SplitSolution {
                left,
                right,
                rho_div: value,
                rho_left,
                rho_right,
                dual_bound_used: 0.0,
            });
        }
    }
    best.ok_or_else(|| {
        CcspError::Contract("no admissible assignment (needs ≥2 violated members)".into())
    })
}

/// Whether a merger is allowed: every subset the refinement created must
/// cost strictly more than the pre-refinement lower bound.
pub fn merge_trigger_holds(new_subset_costs: &[f64], v_l: f64) -> bool {
    !new_subset_costs.is_empty() && new_subset_costs.iter().all(|&rho| rho > v_l)
}

/// Merges μ+1 subsets of the refinement back into one, shrinking the
/// partition to |𝒫| + (splits − μ) subsets while keeping x̲ excluded.
///
/// When the previous partition was already at the minimum size ⌊τ|S|⌋ + 1,
/// all μ feasible subsets plus one refinement-created infeasible subset are
/// merged (the merged subset is infeasible at x̲, so no feasible subset
/// remains and x̲ stays excluded). Otherwise μ+1 feasible subsets with the
/// largest costs merge; feasible-count bookkeeping again leaves too few
/// active subsets for x̲.
///
/// `cost_of` supplies exact subset costs (callers typically memoize by
/// subset id; every call may trigger a solve).
pub fn merge_max(
    instance: &CcspInstance,
    previous: &Partition,
    refinement: &Partition,
    cls: &Classification,
    cost_of: &mut dyn FnMut(&Subset) -> Result<f64>,
) -> Result<Partition> {
    refinement.ensure_valid(instance)?;
    if refinement.len() <= previous.len() {
        return Err(CcspError::Contract(
            "refinement is not larger than the previous partition".into(),
        ));
    }
    let nu = refinement.len() - previous.len();
    let target = instance.allowed_violations() + 1;
    // |ℛ_I| = |𝒫_I| + ν, so μ computed on the previous partition equals
    // target − (|ℛ_I| − ν).
    let prev_infeasible = cls
        .num_infeasible()
        .checked_sub(nu)
        .ok_or_else(|| CcspError::Contract("classification inconsistent with split count".into()))?;
    if prev_infeasible >= target {
        return Err(CcspError::Contract(
            "witness was already infeasible before refinement; merging would readmit it".into(),
        ));
    }
    let mu = target - prev_infeasible;

    let previous_ids: HashSet<u64> = previous.subsets.iter().map(|p| p.id).collect();
    let case_minimum = previous.len() == target;
    let feasible_needed = if case_minimum { mu } else { mu + 1 };
    if cls.num_feasible() < feasible_needed {
        return Err(CcspError::Contract(format!(
            "merge needs {feasible_needed} feasible subsets, classification has {}",
            cls.num_feasible()
        )));
    }

    // Feasible picks: largest cost first, ties by id.
    let mut feasible: Vec<(usize, u64, f64)> = Vec::new();
    for &pos in &cls.feasible_subsets {
        let subset = &refinement.subsets[pos];
        feasible.push((pos, subset.id, cost_of(subset)?));
    }
    feasible.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)));
    let mut merge_positions: Vec<usize> =
        feasible[..feasible_needed].iter().map(|f| f.0).collect();

    if case_minimum {
        // Plus one infeasible subset created by the refinement: prefer the
        // singleton with the largest scenario cost; fall back to the largest-
        // cost new subset if no new singleton exists.
        let mut new_infeasible: Vec<(usize, u64, f64, bool)> = Vec::new();
        for &pos in &cls.infeasible_subsets {
            let subset = &refinement.subsets[pos];
            if !previous_ids.contains(&subset.id) {
                new_infeasible.push((pos, subset.id, cost_of(subset)?, subset.len() == 1));
            }
        }
        if new_infeasible.is_empty() {
            return Err(CcspError::Contract(
                "no refinement-created infeasible subset to merge".into(),
            ));
        }
        let singletons: Vec<&(usize, u64, f64, bool)> =
            new_infeasible.iter().filter(|e| e.3).collect();
        let pool: Vec<&(usize, u64, f64, bool)> = if singletons.is_empty() {
            new_infeasible.iter().collect()
        } else {
            singletons
        };
        let pick = pool
            .into_iter()
            .max_by(|a, b| a.2.total_cmp(&b.2).then(b.1.cmp(&a.1)))
            .unwrap();
        merge_positions.push(pick.0);
    }

    let mut merged_members: Vec<usize> = Vec::new();
    for &pos in &merge_positions {
        merged_members.extend_from_slice(&refinement.subsets[pos].members);
    }
    let mut result = refinement.clone();
    merge_positions.sort_unstable();
    for &pos in merge_positions.iter().rev() {
        result.remove_subset(pos);
    }
    result.push_subset(merged_members);
    result.ensure_valid(instance)?;

    // The construction guarantees exclusion; fail loudly if it ever breaks.
    let remaining_feasible = cls.num_feasible() - feasible_needed;
    if remaining_feasible + instance.allowed_violations() >= result.len() {
        return Err(CcspError::Contract(
            "merger failed to exclude the witness".into(),
        ));
    }
    Ok(result)
}
