//! The adaptive partitioning driver.
//!
//! Loop shape: solve the partition's lower model; harvest upper bounds
//! (projection heuristic each iteration, the upper model periodically, and
//! feasible by-products of every cost computation); stop when the relative
//! gap closes, time runs out, or the iteration cap is hit; otherwise refine
//! the partition so the lower-model witness is excluded, and — for the
//! merging variants — shrink the partition back when every newly created
//! subset costs more than the current lower bound.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    all_scenario_costs, big_m_coefficients, bigm_cache_load, bigm_cache_store, solve_bound,
    subset_cost, BigMRequest, BigMScheme, BoundKind, IncumbentSink,
};
use crate::instance::{CcspInstance, DEFAULT_FEAS_TOL};
use crate::milp::{SolveStatus, SolverBackend, SolverCtx, SolverParams};
use crate::partition::{
    initial_partition_quantile, initial_partition_random, Partition, Subset,
};
use crate::refine::{
    compute_mu, merge_max, merge_trigger_holds, refine_minimal, OptimizedSplit, SplitStrategy,
    DEFAULT_CANDIDATE_CAP,
};
use crate::{CcspError, Result};

/// Method variants. They differ in the initial partition, how a refinement
/// step picks and splits subsets, and whether mergers are attempted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Random balanced initial partition; random split target and dispatch;
    /// never merges.
    Random,
    /// Quantile initial partition; random split target and dispatch; never
    /// merges.
    Init,
    /// Quantile start; splits the subset holding the most-violated scenario,
    /// dispatching members by decreasing violation; merges.
    Infeas,
    /// Quantile start; optimizer-driven splits and selection; merges.
    Final,
    /// `Final` with ⌈μ·(1+β/100)⌉ splits per iteration (β in percent).
    Beta(u32),
}

impl Variant {
    pub fn merges(self) -> bool {
        matches!(self, Variant::Infeas | Variant::Final | Variant::Beta(_))
    }

    /// Requested split count for one iteration given μ.
    pub fn split_request(self, mu: usize) -> usize {
        match self {
            Variant::Beta(beta) => mu_beta(mu, beta),
            _ => mu,
        }
    }
}

/// ⌈μ·(1 + β/100)⌉ in exact integer arithmetic.
pub fn mu_beta(mu: usize, beta_percent: u32) -> usize {
    let b = beta_percent as usize;
    (mu * (100 + b)).div_ceil(100)
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Random => write!(f, "p_random"),
            Variant::Init => write!(f, "p_init"),
            Variant::Infeas => write!(f, "p_infeas"),
            Variant::Final => write!(f, "p_final"),
            Variant::Beta(b) => write!(f, "p_beta{b}"),
        }
    }
}

/// When upper bounds are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperStrategy {
    /// Upper model only, every `every` iterations.
    Model6 { every: usize },
    /// Projection heuristic only, every iteration.
    Projection,
    /// Projection every iteration plus the upper model every `every`
    /// iterations (the upper model is exact but much more expensive).
    Both { every: usize },
}

impl UpperStrategy {
    fn projection_on(self) -> bool {
        !matches!(self, UpperStrategy::Model6 { .. })
    }

    fn model6_due(self, iteration: usize) -> bool {
        match self {
            UpperStrategy::Projection => false,
            UpperStrategy::Model6 { every } | UpperStrategy::Both { every } => {
                every > 0 && iteration % every == 0
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ApmConfig {
    pub variant: Variant,
    /// Relative-gap stopping threshold, in (0, 1).
    pub epsilon: f64,
    /// Wall-clock limit in seconds.
    pub time_limit_s: Option<f64>,
    pub seed: u64,
    pub bigm_scheme: BigMScheme,
    pub upper_strategy: UpperStrategy,
    pub solver: SolverBackend,
    /// Parameters for every subproblem solve. Defaults to near-exact gaps so
    /// bound semantics are trustworthy.
    pub solver_params: SolverParams,
    /// Max split candidates scored per refinement step.
    pub candidate_cap: usize,
    /// Dual bound U for the split model; `None` derives one from the data.
    pub dual_bound: Option<f64>,
    /// Hard iteration cap; `None` uses an internal safety cap.
    pub max_iterations: Option<usize>,
    /// Disable mergers even for merging variants (used to check the
    /// refinement-only termination bound).
    pub force_disable_merge: bool,
    /// Record per-iteration partitions/witnesses for invariant checking.
    pub collect_diagnostics: bool,
    /// Directory for cached big-M tables.
    pub bigm_cache_dir: Option<PathBuf>,
    pub feasibility_tol: f64,
}

impl Default for ApmConfig {
    fn default() -> Self {
        ApmConfig {
            variant: Variant::Final,
            epsilon: 1e-6,
            time_limit_s: None,
            seed: 0,
            bigm_scheme: BigMScheme::ObjectiveCut,
            upper_strategy: UpperStrategy::Both { every: 5 },
            solver: SolverBackend::Builtin,
            solver_params: SolverParams::exact(),
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            dual_bound: None,
            max_iterations: None,
            force_disable_merge: false,
            collect_diagnostics: false,
            bigm_cache_dir: None,
            feasibility_tol: DEFAULT_FEAS_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApmStatus {
    /// Stopped with relative gap below ε.
    Optimal,
    /// Stopped early for a non-time reason (iteration cap, solver failure).
    GapLimit,
    TimeLimit,
}

impl std::fmt::Display for ApmStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ApmStatus::Optimal => write!(f, "optimal"),
            ApmStatus::GapLimit => write!(f, "gap_limit"),
            ApmStatus::TimeLimit => write!(f, "time_limit"),
        }
    }
}

/// One trace row. `mu`/`splits`/`merged` describe the partition modification
/// performed at the end of this iteration (zeros on the terminal row).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub elapsed_s: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub rel_gap: f64,
    pub partition_size: usize,
    pub mu: usize,
    pub splits: usize,
    pub merged: bool,
    pub incumbent_source: String,
}

/// Invariant-checking detail retained when `collect_diagnostics` is set.
#[derive(Debug, Clone)]
pub struct IterationDiagnostics {
    pub lower_value: f64,
    pub lower_witness: Vec<f64>,
    /// Canonical partition the lower model was solved on.
    pub partition_before: Vec<Vec<usize>>,
    /// Canonical partition after this iteration's modification (`None` on
    /// the terminal iteration).
    pub partition_after: Option<Vec<Vec<usize>>>,
    pub mu: Option<usize>,
    pub splits: usize,
    pub split_capacity: Option<usize>,
    pub requested_splits: Option<usize>,
    /// Exact costs of the subsets created by this iteration's refinement.
    pub new_subset_costs: Vec<f64>,
    pub merge_trigger_evaluated: bool,
    pub merge_trigger_held: bool,
    pub merged: bool,
    /// Partition size after refinement, before any merge.
    pub refined_size: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct ApmDiagnostics {
    pub iterations: Vec<IterationDiagnostics>,
    /// Scenario costs used for the quantile construction (empty for the
    /// random variant).
    pub scenario_costs: Vec<f64>,
    pub initial_partition: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct ApmResult {
    pub status: ApmStatus,
    pub lower_bound: f64,
    /// +∞ when no chance-feasible point was found.
    pub upper_bound: f64,
    pub gap: f64,
    pub best_point: Option<Vec<f64>>,
    /// Partition modifications performed.
    pub iterations: usize,
    pub initial_partition_size: usize,
    pub final_partition_size: usize,
    pub elapsed_s: f64,
    pub trace: Vec<IterationRecord>,
    pub diagnostics: Option<ApmDiagnostics>,
    /// Populated when a solver failure aborted the loop early (the partial
    /// trace and bounds remain valid).
    pub failure: Option<String>,
}

/// Thread-safe best-incumbent store. Offers are checked for chance
/// feasibility against the instance; only strictly better values replace
/// the incumbent.
pub struct IncumbentStore<'a> {
    instance: &'a CcspInstance,
    tol: f64,
    best: Mutex<Option<(Vec<f64>, f64, &'static str)>>,
}

impl<'a> IncumbentStore<'a> {
    pub fn new(instance: &'a CcspInstance, tol: f64) -> Self {
        IncumbentStore {
            instance,
            tol,
            best: Mutex::new(None),
        }
    }

    /// Returns true when the offer became the incumbent.
    pub fn offer_tagged(&self, point: &[f64], source: &'static str) -> bool {
        let Ok(report) = self.instance.evaluate_point(point, self.tol) else {
            return false;
        };
        if !report.chance_feasible {
            return false;
        }
        let value = self.instance.objective_value(point);
        let mut slot = self.best.lock().unwrap();
        if slot.as_ref().is_none_or(|(_, v, _)| value < *v) {
            *slot = Some((point.to_vec(), value, source));
            true
        } else {
            false
        }
    }

    pub fn best(&self) -> Option<(Vec<f64>, f64, &'static str)> {
        self.best.lock().unwrap().clone()
    }
}

/// Adapter attaching a source tag to sink offers.
struct TaggedSink<'a, 'b> {
    store: &'a IncumbentStore<'b>,
    source: &'static str,
}

impl IncumbentSink for TaggedSink<'_, '_> {
    fn offer(&self, point: &[f64], _value: f64) {
        self.store.offer_tagged(point, self.source);
    }
}

/// Default dual bound for the split model: 10·max(‖c‖∞, 1)·n.
pub fn default_dual_bound(instance: &CcspInstance) -> f64 {
    let c_inf = instance
        .objective
        .iter()
        .fold(0.0f64, |acc, c| acc.max(c.abs()));
    10.0 * c_inf.max(1.0) * instance.num_vars as f64
}

/// Greedy feasibility restoration: keep the scenarios x̲ satisfies, add the
/// least-violated ones until enough are kept, then re-solve restricted to
/// that set. The result, when the restricted problem is feasible, is a
/// chance-feasible point.
pub fn project_to_feasible(
    instance: &CcspInstance,
    x_low: &[f64],
    tol: f64,
    ctx: &SolverCtx,
) -> Result<Option<(Vec<f64>, f64)>> {
    let report = instance.evaluate_point(x_low, tol)?;
    let mut keep: Vec<usize> = (0..instance.num_scenarios())
        .filter(|&s| report.is_satisfied(s, tol))
        .collect();
    let required = instance.required_satisfied();
    if keep.len() < required {
        let mut violated: Vec<usize> = (0..instance.num_scenarios())
            .filter(|&s| !report.is_satisfied(s, tol))
            .collect();
        violated.sort_by(|&a, &b| {
            report.per_scenario_max_violation[a]
                .total_cmp(&report.per_scenario_max_violation[b])
                .then(a.cmp(&b))
        });
        keep.extend(violated.into_iter().take(required - keep.len()));
        keep.sort_unstable();
    }
    match subset_cost(instance, &keep, false, ctx, None) {
        Ok((value, Some(point))) => Ok(Some((point, value))),
        Ok((_, None)) => Ok(None),
        Err(CcspError::Solver(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Writes a trace as CSV (columns fixed; non-finite bounds rendered as
/// `inf`/`-inf`).
pub fn write_trace_csv(path: &Path, trace: &[IterationRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record([
        "iteration",
        "elapsed_s",
        "lower_bound",
        "upper_bound",
        "rel_gap",
        "partition_size",
        "mu",
        "splits",
        "merged",
        "incumbent_source",
    ])?;
    for row in trace {
        wtr.write_record([
            row.iteration.to_string(),
            format_float(row.elapsed_s),
            format_float(row.lower_bound),
            format_float(row.upper_bound),
            format_float(row.rel_gap),
            row.partition_size.to_string(),
            row.mu.to_string(),
            row.splits.to_string(),
            row.merged.to_string(),
            row.incumbent_source.clone(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Shortest-round-trip float rendering with explicit `inf`/`-inf` tokens,
/// used by every CSV this crate and its CLI emit.
pub fn format_float(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn relative_gap(lower: f64, upper: f64) -> f64 {
    if !upper.is_finite() || !lower.is_finite() {
        return f64::INFINITY;
    }
    (upper - lower) / upper.abs().max(1e-10)
}

/// Runs the adaptive partitioning method.
pub fn run_apm(instance: &CcspInstance, config: &ApmConfig) -> Result<ApmResult> {
    instance.validate()?;
    if !(config.epsilon > 0.0 && config.epsilon < 1.0) {
        return Err(CcspError::Parameter(format!(
            "epsilon must lie in (0, 1), got {}",
            config.epsilon
        )));
    }
    if config.time_limit_s.is_some_and(|t| !(t > 0.0)) {
        return Err(CcspError::Parameter("time limit must be positive".into()));
    }
    if config.candidate_cap == 0 {
        return Err(CcspError::Parameter("candidate cap must be ≥ 1".into()));
    }
    if config.dual_bound.is_some_and(|u| !(u > 0.0 && u.is_finite())) {
        return Err(CcspError::Parameter(
            "dual bound must be positive and finite".into(),
        ));
    }

    let start = Instant::now();
    let tol = config.feasibility_tol;
    let base_ctx = SolverCtx {
        backend: config.solver.clone(),
        params: config.solver_params.clone(),
    };
    let ctx_now = |start: &Instant| -> SolverCtx {
        let mut params = config.solver_params.clone();
        if let Some(t) = config.time_limit_s {
            let remaining = (t - start.elapsed().as_secs_f64()).max(0.05);
            params.time_limit_s = Some(params.time_limit_s.map_or(remaining, |p| p.min(remaining)));
        }
        SolverCtx {
            backend: config.solver.clone(),
            params,
        }
    };
    let time_up = |start: &Instant| -> bool {
        config
            .time_limit_s
            .is_some_and(|t| start.elapsed().as_secs_f64() > t)
    };

    let store = IncumbentStore::new(instance, tol);
    let rho_sink = TaggedSink {
        store: &store,
        source: "rho_witness",
    };

    // Initial partition.
    let mut scenario_costs: Vec<f64> = Vec::new();
    let mut partition = match config.variant {
        Variant::Random => {
            initial_partition_random(instance, instance.allowed_violations() + 1, config.seed)?
        }
        _ => {
            scenario_costs = all_scenario_costs(instance, false, &base_ctx, Some(&rho_sink))?;
            initial_partition_quantile(instance, &scenario_costs)?
        }
    };
    let initial_size = partition.len();

    // Big-M tables: a global box table is always available as base and
    // fallback; the objective-cut scheme upgrades it once an incumbent
    // exists; the partitioned scheme tightens it against the initial
    // partition and falls back to the box table permanently after a merge
    // (mergers are not refinements, so scoped entries lose validity).
    let box_table = match config
        .bigm_cache_dir
        .as_deref()
        .and_then(|dir| bigm_cache_load(dir, instance, BigMScheme::Box))
    {
        Some(table) => table,
        None => {
            let table = big_m_coefficients(instance, BigMRequest::Box, &base_ctx)?;
            if let Some(dir) = config.bigm_cache_dir.as_deref() {
                bigm_cache_store(dir, instance, &table)?;
            }
            table
        }
    };
    let mut active_table = match config.bigm_scheme {
        BigMScheme::Box | BigMScheme::ObjectiveCut => box_table.clone(),
        BigMScheme::Partitioned => big_m_coefficients(
            instance,
            BigMRequest::Partitioned {
                partition: &partition,
                base: &box_table,
            },
            &base_ctx,
        )?,
    };
    let mut objective_cut_installed = false;
    let mut partitioned_disabled = false;

    let mut split_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let dual_bound = config.dual_bound.unwrap_or_else(|| default_dual_bound(instance));
    let safety_cap = config
        .max_iterations
        .unwrap_or(10 * instance.num_scenarios() + 100);

    let mut v_l = f64::NEG_INFINITY;
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut diagnostics = ApmDiagnostics {
        scenario_costs: scenario_costs.clone(),
        initial_partition: partition.canonical(),
        ..Default::default()
    };
    // Exact subset costs memoized by subset id (ids are never reused).
    let mut cost_cache: HashMap<u64, f64> = HashMap::new();
    let mut iterations = 0usize;
    let mut failure: Option<String> = None;

    let status = loop {
        // Upgrade the objective-cut table once an incumbent exists.
        if config.bigm_scheme == BigMScheme::ObjectiveCut && !objective_cut_installed {
            if let Some((_, v_u, _)) = store.best() {
                active_table = big_m_coefficients(
                    instance,
                    BigMRequest::ObjectiveCut { incumbent_value: v_u },
                    &base_ctx,
                )?;
                objective_cut_installed = true;
            }
        }

        // Lower bound.
        let lb = solve_bound(instance, &partition, &active_table, BoundKind::Lower, &ctx_now(&start))?;
        v_l = v_l.max(lb.value);
        if lb.outcome.status != SolveStatus::Optimal {
            let (v_u, source) = match store.best() {
                Some((_, v, s)) => (v, s),
                None => (f64::INFINITY, "none"),
            };
            let gap = relative_gap(v_l, v_u);
            push_row(&mut trace, iterations, &start, v_l, v_u, gap, partition.len(), 0, 0, false, source);
            break ApmStatus::TimeLimit;
        }
        let witness = lb
            .witness
            .clone()
            .ok_or_else(|| CcspError::Solver("lower solve returned no witness".into()))?;
        // A chance-feasible witness closes the gap outright.
        store.offer_tagged(&witness, "lower_witness");

        // Upper bounds.
        if config.upper_strategy.projection_on() {
            if let Some((point, _)) = project_to_feasible(instance, &witness, tol, &ctx_now(&start))? {
                store.offer_tagged(&point, "projection");
            }
        }
        if config.upper_strategy.model6_due(iterations) {
            // The incumbent's value prunes the witness-model search: only a
            // strictly better point is useful, and offers are re-checked for
            // chance feasibility regardless.
            let mut ub_ctx = ctx_now(&start);
            ub_ctx.params.cutoff = store.best().map(|(_, v, _)| v);
            let ub = solve_bound(instance, &partition, &active_table, BoundKind::Upper, &ub_ctx)?;
            if let Some(point) = &ub.witness {
                store.offer_tagged(point, "model6");
            }
        }

        let (v_u, source) = match store.best() {
            Some((_, v, s)) => (v, s),
            None => (f64::INFINITY, "none"),
        };
        let gap = relative_gap(v_l, v_u);

        // Stop checks run before any partition modification.
        if gap < config.epsilon {
            push_row(&mut trace, iterations, &start, v_l, v_u, gap, partition.len(), 0, 0, false, source);
            if config.collect_diagnostics {
                diagnostics.iterations.push(terminal_diagnostics(&partition, lb.value, witness.clone()));
            }
            break ApmStatus::Optimal;
        }
        if time_up(&start) {
            push_row(&mut trace, iterations, &start, v_l, v_u, gap, partition.len(), 0, 0, false, source);
            break ApmStatus::TimeLimit;
        }
        if iterations >= safety_cap {
            push_row(&mut trace, iterations, &start, v_l, v_u, gap, partition.len(), 0, 0, false, source);
            break ApmStatus::GapLimit;
        }

        // Partition modification.
        match modify_partition(
            instance,
            config,
            &partition,
            &witness,
            lb.value,
            dual_bound,
            &mut split_rng,
            &store,
            &mut cost_cache,
            &ctx_now(&start),
            tol,
        ) {
            Ok(step) => {
                push_row(
                    &mut trace,
                    iterations,
                    &start,
                    v_l,
                    v_u,
                    gap,
                    partition.len(),
                    step.mu,
                    step.splits,
                    step.merged,
                    source,
                );
                if config.collect_diagnostics {
                    diagnostics.iterations.push(IterationDiagnostics {
                        lower_value: lb.value,
                        lower_witness: witness.clone(),
                        partition_before: partition.canonical(),
                        partition_after: Some(step.partition.canonical()),
                        mu: Some(step.mu),
                        splits: step.splits,
                        split_capacity: Some(step.capacity),
                        requested_splits: Some(step.requested),
                        new_subset_costs: step.new_subset_costs.clone(),
                        merge_trigger_evaluated: step.trigger_evaluated,
                        merge_trigger_held: step.trigger_held,
                        merged: step.merged,
                        refined_size: Some(step.refined_size),
                    });
                }
                // The witness must be excluded from the next lower model.
                let cls = step.partition.classify(instance, &witness, tol)?;
                if cls.num_feasible() + instance.allowed_violations() >= step.partition.len() {
                    return Err(CcspError::Contract(
                        "partition modification failed to exclude the lower-model witness".into(),
                    ));
                }
                if step.merged && config.bigm_scheme == BigMScheme::Partitioned && !partitioned_disabled
                {
                    active_table = box_table.clone();
                    partitioned_disabled = true;
                }
                partition = step.partition;
                iterations += 1;
            }
            Err(e) => {
                let (v_u, source) = match store.best() {
                    Some((_, v, s)) => (v, s),
                    None => (f64::INFINITY, "none"),
                };
                let gap = relative_gap(v_l, v_u);
                push_row(&mut trace, iterations, &start, v_l, v_u, gap, partition.len(), 0, 0, false, source);
                if time_up(&start) {
                    break ApmStatus::TimeLimit;
                }
                failure = Some(e.to_string());
                break ApmStatus::GapLimit;
            }
        }
    };

    let (best_point, upper_bound, _) = match store.best() {
        Some((p, v, s)) => (Some(p), v, s),
        None => (None, f64::INFINITY, "none"),
    };
    let gap = relative_gap(v_l, upper_bound);
    Ok(ApmResult {
        status,
        lower_bound: v_l,
        upper_bound,
        gap,
        best_point,
        iterations,
        initial_partition_size: initial_size,
        final_partition_size: partition.len(),
        elapsed_s: start.elapsed().as_secs_f64(),
        trace,
        diagnostics: config.collect_diagnostics.then_some(diagnostics),
        failure,
    })
}

struct ModificationStep {
    partition: Partition,
    mu: usize,
    splits: usize,
    capacity: usize,
    requested: usize,
    refined_size: usize,
    new_subset_costs: Vec<f64>,
    trigger_evaluated: bool,
    trigger_held: bool,
    merged: bool,
}

#[allow(clippy::too_many_arguments)]
fn modify_partition(
    instance: &CcspInstance,
    config: &ApmConfig,
    partition: &Partition,
    witness: &[f64],
    lower_value: f64,
    dual_bound: f64,
    split_rng: &mut ChaCha8Rng,
    store: &IncumbentStore<'_>,
    cost_cache: &mut HashMap<u64, f64>,
    ctx: &SolverCtx,
    tol: f64,
) -> Result<ModificationStep> {
    let cls = partition.classify(instance, witness, tol)?;
    let mu = compute_mu(instance, &cls)?;
    let requested = config.variant.split_request(mu);

    let rho_sink = TaggedSink {
        store,
        source: "rho_witness",
    };
    let refine_out = {
        let mut strategy = match config.variant {
            Variant::Random | Variant::Init => SplitStrategy::Random(split_rng),
            Variant::Infeas => SplitStrategy::ViolationAlternating,
            Variant::Final | Variant::Beta(_) => SplitStrategy::Optimized(OptimizedSplit {
                dual_bound,
                current_lower: lower_value,
                candidate_cap: config.candidate_cap,
                ctx,
                sink: Some(&rho_sink),
            }),
        };
        refine_minimal(instance, partition, witness, &mut strategy, requested, tol)?
    };

    let mut step = ModificationStep {
        refined_size: refine_out.partition.len(),
        partition: refine_out.partition,
        mu,
        splits: refine_out.splits,
        capacity: refine_out.capacity,
        requested,
        new_subset_costs: Vec::new(),
        trigger_evaluated: false,
        trigger_held: false,
        merged: false,
    };

    if config.variant.merges() && !config.force_disable_merge {
        step.trigger_evaluated = true;
        let mut cost_of = |subset: &Subset| -> Result<f64> {
            if let Some(v) = cost_cache.get(&subset.id) {
                return Ok(*v);
            }
            let v = match subset.cached_cost {
                Some(v) => v,
                None => subset_cost(instance, &subset.members, false, ctx, Some(&rho_sink))?.0,
            };
            cost_cache.insert(subset.id, v);
            Ok(v)
        };
        let previous_ids: HashSet<u64> = partition.subsets.iter().map(|p| p.id).collect();
        let mut new_costs = Vec::new();
        for subset in &step.partition.subsets {
            if !previous_ids.contains(&subset.id) {
                new_costs.push(cost_of(subset)?);
            }
        }
        step.trigger_held = merge_trigger_holds(&new_costs, lower_value);
        step.new_subset_costs = new_costs;
        if step.trigger_held {
            let refined_cls = step.partition.classify(instance, witness, tol)?;
            step.partition = merge_max(
                instance,
                partition,
                &step.partition,
                &refined_cls,
                &mut cost_of,
            )?;
            step.merged = true;
        }
    }
    Ok(step)
}

fn push_row(
    trace: &mut Vec<IterationRecord>,
    iteration: usize,
    start: &Instant,
    lower: f64,
    upper: f64,
    gap: f64,
    partition_size: usize,
    mu: usize,
    splits: usize,
    merged: bool,
    source: &str,
) {
    trace.push(IterationRecord {
        iteration,
        elapsed_s: start.elapsed().as_secs_f64(),
        lower_bound: lower,
        upper_bound: upper,
        rel_gap: gap,
        partition_size,
        mu,
        splits,
        merged,
        incumbent_source: source.to_string(),
    });
}

fn terminal_diagnostics(
    partition: &Partition,
    lower_value: f64,
    lower_witness: Vec<f64>,
) -> IterationDiagnostics {
    IterationDiagnostics {
        lower_value,
        lower_witness,
        partition_before: partition.canonical(),
        partition_after: None,
        mu: None,
        splits: 0,
        split_capacity: None,
        requested_splits: None,
        new_subset_costs: Vec::new(),
        merge_trigger_evaluated: false,
        merge_trigger_held: false,
        merged: false,
        refined_size: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nested_budgets_terminates_immediately() {
        let inst = fixtures::nested_budgets();
        let config = ApmConfig {
            collect_diagnostics: true,
            ..ApmConfig::default()
        };
        let res = run_apm(&inst, &config).unwrap();
        assert_eq!(res.status, ApmStatus::Optimal);
        assert_eq!(res.iterations, 0);
        assert_abs_diff_eq!(res.lower_bound, -5.0, epsilon = 1e-7);
        assert_abs_diff_eq!(res.upper_bound, -5.0, epsilon = 1e-7);
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.trace[0].partition_size, 2);
        assert_eq!(res.initial_partition_size, 2);
        let report = inst
            .evaluate_point(res.best_point.as_ref().unwrap(), 1e-6)
            .unwrap();
        assert!(report.chance_feasible);
    }

    #[test]
    fn mixed_limits_converges_within_two_iterations() {
        let inst = fixtures::mixed_limits();
        let config = ApmConfig {
            collect_diagnostics: true,
            ..ApmConfig::default()
        };
        let res = run_apm(&inst, &config).unwrap();
        assert_eq!(res.status, ApmStatus::Optimal);
        assert!(res.iterations <= 2, "took {} iterations", res.iterations);
        assert_abs_diff_eq!(res.upper_bound, -6.0, epsilon = 1e-7);
        assert!(res.final_partition_size == 2 || res.final_partition_size == 3);
        // First iteration solved the quantile partition to −8.
        assert_abs_diff_eq!(res.trace[0].lower_bound, -8.0, epsilon = 1e-7);
        // The only refinement-created costs are ρ({0}) = −12 and
        // ρ({2}) = −6; −12 < −8 so the merge trigger must not fire.
        let diag = res.diagnostics.unwrap();
        let first = &diag.iterations[0];
        assert!(first.merge_trigger_evaluated);
        assert!(!first.merge_trigger_held);
        assert!(!first.merged);
    }

    #[test]
    fn all_variants_agree_on_fixtures() {
        for inst in [fixtures::nested_budgets(), fixtures::mixed_limits()] {
            let expected = if inst.scenarios[0].lhs[0][0] == 1.0 && inst.scenarios[0].lhs[0][1] == 1.0
            {
                -5.0 // nested budgets
            } else {
                -6.0 // mixed limits
            };
            for variant in [
                Variant::Random,
                Variant::Init,
                Variant::Infeas,
                Variant::Final,
                Variant::Beta(100),
            ] {
                let config = ApmConfig {
                    variant,
                    seed: 11,
                    ..ApmConfig::default()
                };
                let res = run_apm(&inst, &config).unwrap();
                assert_eq!(res.status, ApmStatus::Optimal, "variant {variant}");
                assert_abs_diff_eq!(res.upper_bound, expected, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn projection_on_fixture_recovers_optimum() {
        let inst = fixtures::mixed_limits();
        let ctx = SolverCtx::builtin(SolverParams::exact());
        // From (6,2): keeps {1,3}, adds scenario 2 (violation 2 < 4).
        let (point, value) = project_to_feasible(&inst, &[6.0, 2.0], 1e-6, &ctx)
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(value, -6.0, epsilon = 1e-7);
        let report = inst.evaluate_point(&point, 1e-6).unwrap();
        assert!(report.chance_feasible);
    }

    #[test]
    fn merge_disabled_bounds_iterations() {
        let inst = fixtures::mixed_limits();
        let config = ApmConfig {
            force_disable_merge: true,
            ..ApmConfig::default()
        };
        let res = run_apm(&inst, &config).unwrap();
        assert_eq!(res.status, ApmStatus::Optimal);
        assert!(res.iterations <= inst.num_scenarios() - res.initial_partition_size);
    }

    #[test]
    fn time_limit_reports_partial_result() {
        let inst = fixtures::mixed_limits();
        let config = ApmConfig {
            time_limit_s: Some(1e-9),
            ..ApmConfig::default()
        };
        let res = run_apm(&inst, &config).unwrap();
        // With an absurdly small budget the run must still return cleanly.
        assert!(matches!(
            res.status,
            ApmStatus::TimeLimit | ApmStatus::Optimal
        ));
    }

    #[test]
    fn config_validation() {
        let inst = fixtures::nested_budgets();
        for config in [
            ApmConfig {
                epsilon: 0.0,
                ..ApmConfig::default()
            },
            ApmConfig {
                epsilon: 1.0,
                ..ApmConfig::default()
            },
            ApmConfig {
                time_limit_s: Some(0.0),
                ..ApmConfig::default()
            },
            ApmConfig {
                candidate_cap: 0,
                ..ApmConfig::default()
            },
            ApmConfig {
                dual_bound: Some(-3.0),
                ..ApmConfig::default()
            },
        ] {
            assert!(run_apm(&inst, &config).is_err());
        }
    }

    #[test]
    fn mu_beta_rounds_up() {
        assert_eq!(mu_beta(1, 50), 2);
        assert_eq!(mu_beta(2, 50), 3);
        assert_eq!(mu_beta(2, 100), 4);
        assert_eq!(mu_beta(3, 200), 9);
        assert_eq!(mu_beta(1, 0), 1);
    }

    #[test]
    fn incumbent_store_keeps_best_feasible() {
        let inst = fixtures::mixed_limits();
        let store = IncumbentStore::new(&inst, 1e-6);
        // Infeasible point rejected.
        assert!(!store.offer_tagged(&[6.0, 2.0], "projection"));
        assert!(store.best().is_none());
        // Feasible point accepted; a worse one later is ignored.
        assert!(store.offer_tagged(&[4.0, 2.0], "projection"));
        assert!(!store.offer_tagged(&[2.0, 2.0], "model6"));
        let (point, value, source) = store.best().unwrap();
        assert_eq!(point, vec![4.0, 2.0]);
        assert_abs_diff_eq!(value, -6.0, epsilon = 1e-12);
        assert_eq!(source, "projection");
    }
}
