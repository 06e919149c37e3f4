//! Branch-and-bound over the bounded-variable simplex.
//!
//! Node selection plunges depth-first (floor child first) until the first
//! incumbent, then switches to best-bound. Branching picks the most
//! fractional integral variable, ties broken by lowest index. Lazy rows are
//! withheld from every LP relaxation; when an integral candidate appears, all
//! lazy rows it violates are activated globally and the node is re-solved
//! (bounds computed without a lazy row stay valid, since adding rows can only
//! raise a minimum). Integral candidates are "polished" — integer variables
//! fixed to their rounded values and the LP re-solved — so incumbents satisfy
//! indicator-style rows exactly rather than within `M · integrality_tol`.

use std::collections::BinaryHeap;
use std::time::Instant;

use crate::{CcspError, Result};

use super::simplex::{LpRow, LpStatus, SimplexWorkspace};
use super::{LinearModel, SolveOutcome, SolveStatus, SolverParams};

struct Node {
    id: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Parent LP objective: a valid lower bound for this subtree.
    bound: f64,
}

struct HeapNode(Node);

impl PartialEq for HeapNode {
    fn eq(&self, other: &Self) -> bool {
        self.0.bound == other.0.bound && self.0.id == other.0.id
    }
}
impl Eq for HeapNode {}
impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapNode {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; reverse so the smallest bound pops first,
        // ties by smallest id for determinism.
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

struct Search<'a> {
    model: &'a LinearModel,
    params: &'a SolverParams,
    start: Instant,
    int_vars: Vec<usize>,
    /// Indices of lazy rows in `model.rows`; `activated[k]` tracks state.
    lazy_rows: Vec<usize>,
    activated: Vec<bool>,
    /// Holds the active rows; node solves warm-start from its last basis.
    workspace: SimplexWorkspace,
    incumbent: Option<(Vec<f64>, f64)>,
    /// Weakest bound among nodes pruned by the gap cutoff.
    weakest_pruned: f64,
    nodes: u64,
    next_id: u64,
}

enum NodeOutcome {
    Pruned,
    Unbounded,
    Branched(Node, Node),
}

/// Solves a MILP; see the module docs for the search strategy.
pub fn solve(model: &LinearModel, params: &SolverParams) -> Result<SolveOutcome> {
    model.validate()?;
    let start = Instant::now();

    let int_vars: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.integral)
        .map(|(j, _)| j)
        .collect();
    let lazy_rows: Vec<usize> = model
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.lazy)
        .map(|(i, _)| i)
        .collect();
    let active_rows: Vec<LpRow> = model
        .rows
        .iter()
        .filter(|r| !r.lazy)
        .map(to_lp_row)
        .collect();

    // Integral variables start on the tightest integer-consistent box.
    let mut root_lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let mut root_upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    for &j in &int_vars {
        if root_lower[j].is_finite() {
            root_lower[j] = root_lower[j].ceil();
        }
        if root_upper[j].is_finite() {
            root_upper[j] = root_upper[j].floor();
        }
    }

    let mut search = Search {
        model,
        params,
        start,
        int_vars,
        activated: vec![false; lazy_rows.len()],
        lazy_rows,
        workspace: SimplexWorkspace::new(&model.objective, &active_rows),
        incumbent: None,
        weakest_pruned: f64::INFINITY,
        nodes: 0,
        next_id: 1,
    };

    let root = Node {
        id: 0,
        lower: root_lower,
        upper: root_upper,
        bound: f64::NEG_INFINITY,
    };

    let mut dfs: Vec<Node> = vec![root];
    let mut heap: BinaryHeap<HeapNode> = BinaryHeap::new();
    let mut open_min_bound = f64::NEG_INFINITY;

    let limit_status = loop {
        let node = if search.incumbent.is_none() {
            match dfs.pop() {
                Some(n) => n,
                None => match heap.pop() {
                    Some(HeapNode(n)) => n,
                    None => break None,
                },
            }
        } else {
            if !dfs.is_empty() {
                for n in dfs.drain(..) {
                    heap.push(HeapNode(n));
                }
            }
            match heap.pop() {
                Some(HeapNode(n)) => n,
                None => break None,
            }
        };

        // Bounds of remaining open nodes never go below this pop's bound once
        // running best-first; while plunging, track explicitly below.
        open_min_bound = node.bound;

        if search.over_time() {
            break Some(SolveStatus::TimeLimit);
        }
        if search
            .params
            .node_limit
            .is_some_and(|cap| search.nodes >= cap)
        {
            break Some(SolveStatus::NodeLimit);
        }
        if search.prunable(node.bound) {
            search.weakest_pruned = search.weakest_pruned.min(node.bound);
            continue;
        }

        search.nodes += 1;
        match search.process(node)? {
            NodeOutcome::Pruned => {}
            NodeOutcome::Unbounded => {
                return Ok(SolveOutcome {
                    status: SolveStatus::Unbounded,
                    point: None,
                    objective: None,
                    dual_bound: None,
                    elapsed_s: start.elapsed().as_secs_f64(),
                    nodes: search.nodes,
                });
            }
            NodeOutcome::Branched(floor_child, ceil_child) => {
                if search.incumbent.is_none() {
                    // Plunge: floor child explored first.
                    dfs.push(ceil_child);
                    dfs.push(floor_child);
                } else {
                    heap.push(HeapNode(floor_child));
                    heap.push(HeapNode(ceil_child));
                }
            }
        }
    };

    let elapsed_s = start.elapsed().as_secs_f64();
    let (status, point, objective, dual_bound) = match (limit_status, &search.incumbent) {
        (None, Some((x, obj))) => {
            let dual = search.weakest_pruned.min(*obj);
            (SolveStatus::Optimal, Some(x.clone()), Some(*obj), Some(dual))
        }
        (None, None) => (SolveStatus::Infeasible, None, None, None),
        (Some(status), incumbent) => {
            let open_bound = heap
                .iter()
                .map(|HeapNode(n)| n.bound)
                .chain(dfs.iter().map(|n| n.bound))
                .fold(open_min_bound, f64::min)
                .min(search.weakest_pruned);
            let dual = if open_bound.is_finite() {
                Some(open_bound)
            } else {
                None
            };
            match incumbent {
                Some((x, obj)) => (status, Some(x.clone()), Some(*obj), dual),
                None => (status, None, None, dual),
            }
        }
    };

    Ok(SolveOutcome {
        status,
        point,
        objective,
        dual_bound,
        elapsed_s,
        nodes: search.nodes,
    })
}

fn to_lp_row(row: &super::Row) -> LpRow {
    LpRow {
        coeffs: row.coeffs.clone(),
        sense: row.sense,
        rhs: row.rhs,
    }
}

impl Search<'_> {
    fn over_time(&self) -> bool {
        self.params
            .time_limit_s
            .is_some_and(|cap| self.start.elapsed().as_secs_f64() > cap)
    }

    fn prunable(&self, bound: f64) -> bool {
        if let Some((_, obj)) = &self.incumbent {
            let slack = self.params.relative_gap * obj.abs().max(1.0);
            if bound >= obj - slack {
                return true;
            }
        }
        // A cutoff prunes like an incumbent, but without gap slack: a point
        // exactly at the cutoff is not an improvement, so only strictly
        // better subtrees survive.
        self.params.cutoff.is_some_and(|c| bound >= c)
    }

    fn solve_node_lp(&mut self, lower: &[f64], upper: &[f64]) -> Result<super::simplex::LpSolution> {
        self.workspace.solve(lower, upper)
    }

    /// Processes one node through the solve / lazy-activation / branch loop.
    fn process(&mut self, node: Node) -> Result<NodeOutcome> {
        let max_rounds = self.lazy_rows.len() + 2;
        for _ in 0..max_rounds {
            let sol = self.solve_node_lp(&node.lower, &node.upper)?;
            match sol.status {
                LpStatus::Infeasible => return Ok(NodeOutcome::Pruned),
                LpStatus::Unbounded => return Ok(NodeOutcome::Unbounded),
                LpStatus::Optimal => {}
            }
            if self.prunable(sol.objective) {
                self.weakest_pruned = self.weakest_pruned.min(sol.objective);
                return Ok(NodeOutcome::Pruned);
            }

            match self.most_fractional(&sol.x) {
                Some(j) => {
                    let val = sol.x[j];
                    let mut floor_child = Node {
                        id: self.next_id,
                        lower: node.lower.clone(),
                        upper: node.upper.clone(),
                        bound: sol.objective,
                    };
                    floor_child.upper[j] = val.floor();
                    let mut ceil_child = Node {
                        id: self.next_id + 1,
                        lower: node.lower,
                        upper: node.upper,
                        bound: sol.objective,
                    };
                    ceil_child.lower[j] = val.ceil();
                    self.next_id += 2;
                    return Ok(NodeOutcome::Branched(floor_child, ceil_child));
                }
                None => {
                    // Integral candidate: polish, then enforce lazy rows.
                    let (point, objective) = self.polish(&node, &sol.x, sol.objective)?;
                    let violated = self.violated_lazy(&point);
                    if !violated.is_empty() {
                        let fresh: Vec<LpRow> = violated
                            .iter()
                            .map(|&k| {
                                self.activated[k] = true;
                                to_lp_row(&self.model.rows[self.lazy_rows[k]])
                            })
                            .collect();
                        self.workspace.append_rows(&fresh);
                        continue; // re-solve this node against the new rows
                    }
                    let better = self
                        .incumbent
                        .as_ref()
                        .is_none_or(|(_, best)| objective < *best);
                    if better {
                        self.incumbent = Some((point, objective));
                    }
                    return Ok(NodeOutcome::Pruned);
                }
            }
        }
        Err(CcspError::Solver(
            "lazy-row activation failed to converge".into(),
        ))
    }

    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.int_vars {
            let frac = x[j] - x[j].floor();
            let dist = (frac - 0.5).abs();
            if frac > self.params.integrality_tol && frac < 1.0 - self.params.integrality_tol {
                match best {
                    Some((_, best_dist)) if best_dist <= dist => {}
                    _ => best = Some((j, dist)),
                }
            }
        }
        best.map(|(j, _)| j)
    }

    /// Fixes integral variables at their rounded values and re-solves so the
    /// candidate satisfies all active rows exactly at the integer point.
    fn polish(&mut self, node: &Node, x: &[f64], objective: f64) -> Result<(Vec<f64>, f64)> {
        if self.int_vars.is_empty() {
            return Ok((x.to_vec(), objective));
        }
        let mut lower = node.lower.clone();
        let mut upper = node.upper.clone();
        for &j in &self.int_vars {
            let rounded = x[j].round();
            lower[j] = rounded;
            upper[j] = rounded;
        }
        let polished = self.solve_node_lp(&lower, &upper)?;
        if polished.status == LpStatus::Optimal {
            Ok((polished.x, polished.objective))
        } else {
            // Keep the original candidate; extremely rare numerical corner.
            Ok((x.to_vec(), objective))
        }
    }

    fn violated_lazy(&self, x: &[f64]) -> Vec<usize> {
        self.lazy_rows
            .iter()
            .enumerate()
            .filter(|&(k, &row_idx)| {
                !self.activated[k]
                    && self.model.row_violation(&self.model.rows[row_idx], x)
                        > self.params.feasibility_tol
            })
            .map(|(k, _)| k)
            .collect()
    }
}
