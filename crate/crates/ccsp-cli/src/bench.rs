//! `bench`: run a grid of generated instances × methods, write one trace CSV
//! per partitioning run, a per-run table, and an aggregate table.
//!
//! Grid structure: for each scenario count and replica, one instance is
//! generated (seed = base seed + replica, so every τ value is applied to the
//! same scenario data). Each (instance, τ, method) triple becomes a run.
//! Aggregation per (family, τ, |S|, method) follows the usual benchmarking
//! convention: time averaged over solved runs, gap over unsolved ones with
//! the solved count attached, iterations and final partition size rounded to
//! the nearest integer.

use std::fs;
use std::path::{Path, PathBuf};

use ccsp::apm::{format_float, write_trace_csv};
use ccsp::bounds::BigMScheme;
use ccsp::instance::{generate_knapsack_instance, CcspInstance, VarDomain};
use ccsp::milp::SolverBackend;
use ccsp::{CcspError, Result};
use rayon::prelude::*;

use crate::methods::{run_method, Method, MethodOpts};

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub rows: usize,
    pub vars: usize,
    pub scenario_counts: Vec<usize>,
    pub taus: Vec<f64>,
    pub domain: VarDomain,
    pub replicas: usize,
    pub methods: Vec<Method>,
    pub epsilon: f64,
    pub time_limit_s: Option<f64>,
    pub seed: u64,
    pub bigm: BigMScheme,
    pub solver: SolverBackend,
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(CcspError::Parameter("bench needs at least one method".into()));
        }
        if self.replicas == 0 {
            return Err(CcspError::Parameter("replicas must be ≥ 1".into()));
        }
        if self.scenario_counts.is_empty() || self.taus.is_empty() {
            return Err(CcspError::Parameter(
                "bench needs at least one scenario count and one tau".into(),
            ));
        }
        if self.taus.iter().any(|t| !(0.0..1.0).contains(t)) {
            return Err(CcspError::Parameter("every tau must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn family(&self) -> String {
        format!("mk-{}-{}", self.rows, self.vars)
    }
}

/// One per-run result row.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub instance_id: String,
    pub family: String,
    pub method: String,
    pub tau: f64,
    pub scenarios: usize,
    pub status: String,
    pub optimal: bool,
    pub seconds: f64,
    pub gap: f64,
    pub iterations: usize,
    pub partition_size: usize,
    pub objective: f64,
}

struct RunTask {
    instance_id: String,
    family: String,
    tau: f64,
    scenarios: usize,
    method: Method,
    instance: CcspInstance,
}

pub struct BenchOutput {
    pub rows: Vec<RunRow>,
    pub runs_csv: PathBuf,
    pub aggregate_csv: PathBuf,
}

pub fn run_benchmark(spec: &BenchSpec) -> Result<BenchOutput> {
    spec.validate()?;
    let instances_dir = spec.out_dir.join("instances");
    let traces_dir = spec.out_dir.join("traces");
    fs::create_dir_all(&instances_dir)?;
    fs::create_dir_all(&traces_dir)?;

    // Materialize the grid. Instances are generated once per (|S|, replica)
    // and re-labelled per τ, so the scenario data is shared across τ values.
    let mut tasks: Vec<RunTask> = Vec::new();
    for &s in &spec.scenario_counts {
        for replica in 0..spec.replicas {
            let seed = spec.seed + replica as u64;
            let base =
                generate_knapsack_instance(spec.rows, spec.vars, s, spec.taus[0], spec.domain, seed)?;
            for &tau in &spec.taus {
                let mut instance = base.clone();
                instance.tau = tau;
                let instance_id = format!(
                    "mk{}-{}-s{}-t{}-r{}",
                    spec.rows,
                    spec.vars,
                    s,
                    format_float(tau),
                    replica
                );
                let path = instances_dir.join(format!("{instance_id}.json"));
                write_atomic(&path, instance.to_json()?.as_bytes())?;
                for &method in &spec.methods {
                    tasks.push(RunTask {
                        instance_id: instance_id.clone(),
                        family: spec.family(),
                        tau,
                        scenarios: s,
                        method,
                        instance: instance.clone(),
                    });
                }
            }
        }
    }

    let opts = MethodOpts {
        epsilon: spec.epsilon,
        time_limit_s: spec.time_limit_s,
        seed: spec.seed,
        bigm: spec.bigm,
        solver: spec.solver.clone(),
        collect_diagnostics: false,
        bigm_cache_dir: None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CcspError::Solver(format!("worker pool: {e}")))?;
    let mut rows: Vec<RunRow> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| execute_task(task, &opts, &traces_dir))
            .collect()
    });

    rows.sort_by(|a, b| {
        (a.family.as_str(), a.scenarios, a.method.as_str(), a.instance_id.as_str())
            .cmp(&(b.family.as_str(), b.scenarios, b.method.as_str(), b.instance_id.as_str()))
            .then(a.tau.total_cmp(&b.tau))
    });

    let runs_csv = spec.out_dir.join("runs.csv");
    write_runs_csv(&runs_csv, &rows)?;
    let aggregate_csv = spec.out_dir.join("aggregate.csv");
    write_aggregate_csv(&aggregate_csv, &rows)?;
    Ok(BenchOutput {
        rows,
        runs_csv,
        aggregate_csv,
    })
}

/// A failed run becomes a row with status `error`; the batch continues.
fn execute_task(task: &RunTask, opts: &MethodOpts, traces_dir: &Path) -> RunRow {
    let started = std::time::Instant::now();
    match run_method(&task.instance, task.method, opts) {
        Ok(outcome) => {
            if !outcome.trace.is_empty() {
                let name = format!("{}-{}.csv", task.instance_id, task.method);
                if let Err(e) = write_trace_atomic(&traces_dir.join(name), &outcome.trace) {
                    eprintln!("warning: trace for {} not written: {e}", task.instance_id);
                }
            }
            RunRow {
                instance_id: task.instance_id.clone(),
                family: task.family.clone(),
                method: task.method.to_string(),
                tau: task.tau,
                scenarios: task.scenarios,
                status: outcome.status.clone(),
                optimal: outcome.optimal,
                seconds: outcome.seconds,
                gap: outcome.gap,
                iterations: outcome.iterations,
                partition_size: outcome.partition_size,
                objective: outcome.objective,
            }
        }
        Err(e) => {
            let status = match e {
                CcspError::Infeasible(_) => "infeasible",
                _ => "error",
            };
            eprintln!("run {} / {} failed: {e}", task.instance_id, task.method);
            RunRow {
                instance_id: task.instance_id.clone(),
                family: task.family.clone(),
                method: task.method.to_string(),
                tau: task.tau,
                scenarios: task.scenarios,
                status: status.to_string(),
                optimal: false,
                seconds: started.elapsed().as_secs_f64(),
                gap: f64::INFINITY,
                iterations: 0,
                partition_size: 0,
                objective: f64::INFINITY,
            }
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_trace_atomic(path: &Path, trace: &[ccsp::apm::IterationRecord]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    write_trace_csv(&tmp, trace)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_runs_csv(path: &Path, rows: &[RunRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record([
        "instance",
        "family",
        "method",
        "tau",
        "scenarios",
        "status",
        "seconds",
        "gap",
        "iterations",
        "partition_size",
        "objective",
    ])?;
    for r in rows {
        wtr.write_record([
            r.instance_id.clone(),
            r.family.clone(),
            r.method.clone(),
            format_float(r.tau),
            r.scenarios.to_string(),
            r.status.clone(),
            format_float(r.seconds),
            format_float(r.gap),
            r.iterations.to_string(),
            r.partition_size.to_string(),
            format_float(r.objective),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One aggregate row per (family, τ, |S|, method).
pub struct AggregateRow {
    pub family: String,
    pub tau: f64,
    pub scenarios: usize,
    pub method: String,
    pub runs: usize,
    pub solved: usize,
    /// Mean wall time over solved runs (None when nothing solved).
    pub mean_time_s: Option<f64>,
    /// Mean final gap over unsolved runs (None when everything solved).
    pub mean_gap_unsolved: Option<f64>,
    pub mean_iterations: i64,
    pub mean_partition: i64,
}

impl AggregateRow {
    /// Table-style summary cell: mean time when everything solved, otherwise
    /// the mean residual gap with the solved count in parentheses.
    pub fn summary(&self) -> String {
        if self.solved == self.runs {
            self.mean_time_s.map(format_float).unwrap_or_default()
        } else {
            format!(
                "{} ({})",
                self.mean_gap_unsolved.map(format_float).unwrap_or_default(),
                self.solved
            )
        }
    }
}

pub fn aggregate(rows: &[RunRow]) -> Vec<AggregateRow> {
    // Group keys in deterministic order; rows are already sorted.
    let mut keys: Vec<(String, usize, String, f64)> = Vec::new();
    for r in rows {
        let key = (r.family.clone(), r.scenarios, r.method.clone(), r.tau);
        if !keys
            .iter()
            .any(|k| k.0 == key.0 && k.1 == key.1 && k.2 == key.2 && k.3 == key.3)
        {
            keys.push(key);
        }
    }
    keys.iter()
        .map(|(family, scenarios, method, tau)| {
            let group: Vec<&RunRow> = rows
                .iter()
                .filter(|r| {
                    &r.family == family
                        && r.scenarios == *scenarios
                        && &r.method == method
                        && r.tau == *tau
                })
                .collect();
            let solved: Vec<&&RunRow> = group.iter().filter(|r| r.optimal).collect();
            let unsolved: Vec<&&RunRow> = group.iter().filter(|r| !r.optimal).collect();
            let mean = |it: &[&&RunRow], f: &dyn Fn(&RunRow) -> f64| -> Option<f64> {
                if it.is_empty() {
                    None
                } else {
                    Some(it.iter().map(|r| f(r)).sum::<f64>() / it.len() as f64)
                }
            };
            let mean_iterations = group.iter().map(|r| r.iterations).sum::<usize>() as f64
                / group.len() as f64;
            let mean_partition = group.iter().map(|r| r.partition_size).sum::<usize>() as f64
                / group.len() as f64;
            AggregateRow {
                family: family.clone(),
                tau: *tau,
                scenarios: *scenarios,
                method: method.clone(),
                runs: group.len(),
                solved: solved.len(),
                mean_time_s: mean(&solved, &|r| r.seconds),
                mean_gap_unsolved: mean(&unsolved, &|r| r.gap),
                mean_iterations: mean_iterations.round() as i64,
                mean_partition: mean_partition.round() as i64,
            }
        })
        .collect()
}

fn write_aggregate_csv(path: &Path, rows: &[RunRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record([
        "family",
        "tau",
        "scenarios",
        "method",
        "runs",
        "solved",
        "mean_time_s",
        "mean_gap_unsolved",
        "summary",
        "mean_iterations",
        "mean_partition",
    ])?;
    for a in aggregate(rows) {
        wtr.write_record([
            a.family.clone(),
            format_float(a.tau),
            a.scenarios.to_string(),
            a.method.clone(),
            a.runs.to_string(),
            a.solved.to_string(),
            a.mean_time_s.map(format_float).unwrap_or_default(),
            a.mean_gap_unsolved.map(format_float).unwrap_or_default(),
            a.summary(),
            a.mean_iterations.to_string(),
            a.mean_partition.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
