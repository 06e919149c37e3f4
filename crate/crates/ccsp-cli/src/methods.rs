//! Shared method parsing and execution for the `solve`, `verify`, and
//! `bench` commands.

use std::path::PathBuf;

use ccsp::apm::{
    project_to_feasible, run_apm, ApmConfig, ApmDiagnostics, ApmStatus, IterationRecord, Variant,
};
use ccsp::bounds::{big_m_coefficients, solve_model4, subset_cost, BigMRequest, BigMScheme};
use ccsp::instance::{CcspInstance, DEFAULT_FEAS_TOL};
use ccsp::milp::{external::ExternalSolverConfig, SolveStatus, SolverBackend, SolverCtx, SolverParams};
use ccsp::partition::Partition;
use ccsp::{CcspError, Result};

/// A method the CLI can run: an adaptive-partitioning variant, or the
/// one-shot big-M MILP baseline with a given coefficient scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Apm(Variant),
    Baseline(BigMScheme),
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Apm(v) => write!(f, "{v}"),
            Method::Baseline(s) => write!(f, "baseline-{s}"),
        }
    }
}

/// Parses a partitioning variant name. `p_beta` requires `--beta`; the other
/// variants reject it so a stray flag never goes silently unused.
pub fn parse_variant(token: &str, beta: Option<u32>) -> Result<Variant> {
    let variant = match token {
        "p_random" => Variant::Random,
        "p_init" => Variant::Init,
        "p_infeas" => Variant::Infeas,
        "p_final" => Variant::Final,
        "p_beta" => {
            return beta.map(Variant::Beta).ok_or_else(|| {
                CcspError::Parameter("p_beta requires --beta <percent>".into())
            });
        }
        other => {
            return Err(CcspError::Parameter(format!(
                "unknown variant '{other}' (expected p_random, p_init, p_infeas, p_final, p_beta)"
            )));
        }
    };
    if beta.is_some() {
        return Err(CcspError::Parameter(format!(
            "--beta only applies to p_beta, not {token}"
        )));
    }
    Ok(variant)
}

/// Parses a method token: a variant name, `baseline` (scheme taken from
/// `--bigm`), or `baseline-box` / `baseline-objcut` / `baseline-partitioned`.
pub fn parse_method(token: &str, beta: Option<u32>, default_bigm: BigMScheme) -> Result<Method> {
    match token {
        "baseline" => Ok(Method::Baseline(default_bigm)),
        "baseline-box" => Ok(Method::Baseline(BigMScheme::Box)),
        "baseline-objcut" => Ok(Method::Baseline(BigMScheme::ObjectiveCut)),
        "baseline-partitioned" => Ok(Method::Baseline(BigMScheme::Partitioned)),
        variant => parse_variant(variant, beta).map(Method::Apm),
    }
}

/// Parses `--solver`: `builtin` or `external:<command and args>`.
pub fn parse_backend(spec: &str) -> Result<SolverBackend> {
    if spec == "builtin" {
        return Ok(SolverBackend::Builtin);
    }
    if let Some(cmd) = spec.strip_prefix("external:") {
        return Ok(SolverBackend::External(ExternalSolverConfig::from_spec(cmd)?));
    }
    Err(CcspError::Parameter(format!(
        "unknown solver '{spec}' (expected 'builtin' or 'external:<command>')"
    )))
}

/// Options shared by every method run.
#[derive(Debug, Clone)]
pub struct MethodOpts {
    pub epsilon: f64,
    pub time_limit_s: Option<f64>,
    pub seed: u64,
    pub bigm: BigMScheme,
    pub solver: SolverBackend,
    pub collect_diagnostics: bool,
    pub bigm_cache_dir: Option<PathBuf>,
}

impl MethodOpts {
    pub fn ctx(&self) -> SolverCtx {
        let mut params = SolverParams::exact();
        params.time_limit_s = self.time_limit_s;
        SolverCtx {
            backend: self.solver.clone(),
            params,
        }
    }
}

/// Uniform result shape across methods.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub status: String,
    /// Whether the run proved optimality within epsilon.
    pub optimal: bool,
    /// Best feasible objective (+∞ if none found).
    pub objective: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub seconds: f64,
    pub iterations: usize,
    pub partition_size: usize,
    pub trace: Vec<IterationRecord>,
    pub diagnostics: Option<ApmDiagnostics>,
    pub failure: Option<String>,
}

pub fn run_method(
    instance: &CcspInstance,
    method: Method,
    opts: &MethodOpts,
) -> Result<MethodOutcome> {
    match method {
        Method::Apm(variant) => {
            let config = ApmConfig {
                variant,
                epsilon: opts.epsilon,
                time_limit_s: opts.time_limit_s,
                seed: opts.seed,
                bigm_scheme: opts.bigm,
                solver: opts.solver.clone(),
                collect_diagnostics: opts.collect_diagnostics,
                bigm_cache_dir: opts.bigm_cache_dir.clone(),
                ..ApmConfig::default()
            };
            let res = run_apm(instance, &config)?;
            Ok(MethodOutcome {
                status: match &res.failure {
                    Some(_) => "error".to_string(),
                    None => res.status.to_string(),
                },
                optimal: res.status == ApmStatus::Optimal && res.failure.is_none(),
                objective: res.upper_bound,
                lower_bound: res.lower_bound,
                gap: res.gap,
                seconds: res.elapsed_s,
                iterations: res.iterations,
                partition_size: res.final_partition_size,
                trace: res.trace,
                diagnostics: res.diagnostics,
                failure: res.failure,
            })
        }
        Method::Baseline(scheme) => run_baseline(instance, scheme, opts),
    }
}

/// One-shot exact big-M MILP over singleton subsets, all rows eager.
fn run_baseline(
    instance: &CcspInstance,
    scheme: BigMScheme,
    opts: &MethodOpts,
) -> Result<MethodOutcome> {
    let started = std::time::Instant::now();
    let ctx = opts.ctx();
    let box_table = big_m_coefficients(instance, BigMRequest::Box, &ctx)?;
    let table = match scheme {
        BigMScheme::Box => box_table,
        BigMScheme::ObjectiveCut => {
            // The cut needs a chance-feasible incumbent: project the optimum
            // of the deterministic-set relaxation. Fall back to the box
            // table when projection finds nothing.
            let incumbent = match subset_cost(instance, &[], false, &ctx, None)? {
                (_, Some(det_point)) => {
                    project_to_feasible(instance, &det_point, DEFAULT_FEAS_TOL, &ctx)?
                }
                _ => None,
            };
            match incumbent {
                Some((_, value)) => big_m_coefficients(
                    instance,
                    BigMRequest::ObjectiveCut { incumbent_value: value },
                    &ctx,
                )?,
                None => box_table,
            }
        }
        BigMScheme::Partitioned => {
            let singletons = Partition::singletons(instance.num_scenarios());
            big_m_coefficients(
                instance,
                BigMRequest::Partitioned {
                    partition: &singletons,
                    base: &box_table,
                },
                &ctx,
            )?
        }
    };
    let result = solve_model4(instance, &table, &ctx, false)?;
    let outcome = &result.outcome;
    let objective = outcome.objective.unwrap_or(f64::INFINITY);
    let lower = outcome.dual_bound.unwrap_or(result.value);
    let gap = if outcome.status == SolveStatus::Optimal {
        0.0
    } else if objective.is_finite() && lower.is_finite() {
        (objective - lower) / objective.abs().max(1e-10)
    } else {
        f64::INFINITY
    };
    Ok(MethodOutcome {
        status: outcome.status.to_string(),
        optimal: outcome.status == SolveStatus::Optimal,
        objective,
        lower_bound: lower,
        gap,
        seconds: started.elapsed().as_secs_f64(),
        iterations: 0,
        partition_size: instance.num_scenarios(),
        trace: Vec::new(),
        diagnostics: None,
        failure: None,
    })
}
