//! Partitions of the scenario index set and point-wise classification.
//!
//! A partition groups scenarios into disjoint nonempty subsets covering all
//! of `S`. Lower/upper bounding models attach one binary indicator per
//! subset, so partition size directly controls model difficulty. Partitions
//! must contain strictly more than `⌊τ|S|⌋` subsets: with fewer, switching
//! off the allowed number of indicators could disable every subset at once
//! and the bounding models would degenerate.
//!
//! Subsets carry stable ids across refine/merge operations so traces can
//! describe structural changes; a generation counter increments on every
//! structural modification.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::instance::CcspInstance;
use crate::{CcspError, Result};

/// One cell of a partition: a sorted set of scenario indices plus an id that
/// survives unrelated partition edits. `cached_cost` memoizes the subset cost
/// ρ_P once a caller computes it; structural edits drop the affected entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    pub id: u64,
    pub members: Vec<usize>,
    pub cached_cost: Option<f64>,
}

impl Subset {
    fn new(id: u64, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        Subset {
            id,
            members,
            cached_cost: None,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, scenario: usize) -> bool {
        self.members.binary_search(&scenario).is_ok()
    }
}

/// A partition of `{0, …, |S|−1}` into disjoint nonempty subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub subsets: Vec<Subset>,
    next_id: u64,
    pub generation: u64,
}

impl Partition {
    /// Builds a partition from raw groups, assigning ids in order.
    pub fn from_groups(groups: Vec<Vec<usize>>) -> Self {
        let mut next_id = 0;
        let subsets = groups
            .into_iter()
            .map(|members| {
                let s = Subset::new(next_id, members);
                next_id += 1;
                s
            })
            .collect();
        Partition {
            subsets,
            next_id,
            generation: 0,
        }
    }

    /// The finest partition: one singleton per scenario.
    pub fn singletons(num_scenarios: usize) -> Self {
        Partition::from_groups((0..num_scenarios).map(|s| vec![s]).collect())
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// Adds a new subset with a fresh id; returns its position.
    pub fn push_subset(&mut self, members: Vec<usize>) -> usize {
        let subset = Subset::new(self.next_id, members);
        self.next_id += 1;
        self.generation += 1;
        self.subsets.push(subset);
        self.subsets.len() - 1
    }

    /// Removes and returns the subset at `pos`.
    pub fn remove_subset(&mut self, pos: usize) -> Subset {
        self.generation += 1;
        self.subsets.remove(pos)
    }

    pub fn position_of_id(&self, id: u64) -> Option<usize> {
        self.subsets.iter().position(|p| p.id == id)
    }

    /// Position of the subset containing `scenario`, if any.
    pub fn subset_of_scenario(&self, scenario: usize) -> Option<usize> {
        self.subsets.iter().position(|p| p.contains(scenario))
    }

    /// Canonical form: member lists sorted, subsets ordered lexicographically.
    /// Two partitions are equal as set families iff their canonical forms
    /// match; used for cycle detection and big-M scope checks.
    pub fn canonical(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = self.subsets.iter().map(|p| p.members.clone()).collect();
        groups.sort();
        groups
    }

    /// True when every subset of `self` is contained in some subset of
    /// `coarser` — i.e. `self` refines `coarser` (equality counts).
    pub fn is_refinement_of_groups(&self, coarser: &[Vec<usize>]) -> bool {
        self.subsets.iter().all(|p| {
            coarser
                .iter()
                .any(|big| p.members.iter().all(|s| big.binary_search(s).is_ok()))
        })
    }

    /// First invariant violation as a human-readable description, or `None`
    /// when the partition is valid for `instance`.
    pub fn validation_error(&self, instance: &CcspInstance) -> Option<String> {
        let n = instance.num_scenarios();
        let mut seen = vec![false; n];
        for subset in &self.subsets {
            if subset.members.is_empty() {
                return Some(format!("subset {} is empty", subset.id));
            }
            for window in subset.members.windows(2) {
                if window[0] >= window[1] {
                    return Some(format!(
                        "subset {} members not strictly sorted",
                        subset.id
                    ));
                }
            }
            for &s in &subset.members {
                if s >= n {
                    return Some(format!("subset {} references scenario {s} ≥ {n}", subset.id));
                }
                if seen[s] {
                    return Some(format!("scenario {s} appears in more than one subset"));
                }
                seen[s] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&v| !v) {
            return Some(format!("scenario {missing} not covered by any subset"));
        }
        let min_size = instance.allowed_violations() + 1;
        if self.len() < min_size {
            return Some(format!(
                "partition has {} subsets; needs at least {min_size}",
                self.len()
            ));
        }
        let mut ids: Vec<u64> = self.subsets.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.subsets.len() {
            return Some("duplicate subset ids".into());
        }
        None
    }

    /// `validation_error` as a hard error for internal call sites.
    pub fn ensure_valid(&self, instance: &CcspInstance) -> Result<()> {
        match self.validation_error(instance) {
            None => Ok(()),
            Some(msg) => Err(CcspError::Contract(format!("invalid partition: {msg}"))),
        }
    }

    /// Classifies every subset against `x`: a subset is feasible iff each of
    /// its member scenarios is satisfied within `tol`.
    pub fn classify(
        &self,
        instance: &CcspInstance,
        x: &[f64],
        tol: f64,
    ) -> Result<Classification> {
        let report = instance.evaluate_point(x, tol)?;
        let scenario_ok: Vec<bool> = (0..instance.num_scenarios())
            .map(|s| report.is_satisfied(s, tol))
            .collect();
        let mut z = Vec::with_capacity(self.len());
        let mut feasible_subsets = Vec::new();
        let mut infeasible_subsets = Vec::new();
        for (pos, subset) in self.subsets.iter().enumerate() {
            let ok = subset.members.iter().all(|&s| scenario_ok[s]);
            z.push(ok);
            if ok {
                feasible_subsets.push(pos);
            } else {
                infeasible_subsets.push(pos);
            }
        }
        let infeasible_scenarios: Vec<usize> = scenario_ok
            .iter()
            .enumerate()
            .filter(|(_, &ok)| !ok)
            .map(|(s, _)| s)
            .collect();
        Ok(Classification {
            z,
            feasible_subsets,
            infeasible_subsets,
            infeasible_scenarios,
            per_scenario_violation: report.per_scenario_max_violation,
        })
    }
}

/// Subset-level feasibility of a partition at a specific point.
#[derive(Debug, Clone)]
pub struct Classification {
    /// `z[pos]` is true iff subset `pos` is feasible at the point.
    pub z: Vec<bool>,
    /// Positions (into `partition.subsets`) of feasible subsets.
    pub feasible_subsets: Vec<usize>,
    /// Positions of infeasible subsets.
    pub infeasible_subsets: Vec<usize>,
    /// Scenario indices violated at the point.
    pub infeasible_scenarios: Vec<usize>,
    /// Max row violation per scenario (0 when satisfied).
    pub per_scenario_violation: Vec<f64>,
}

impl Classification {
    pub fn num_feasible(&self) -> usize {
        self.feasible_subsets.len()
    }

    pub fn num_infeasible(&self) -> usize {
        self.infeasible_subsets.len()
    }

    /// True when the point satisfies enough scenarios for the original
    /// chance constraint.
    pub fn chance_feasible(&self, instance: &CcspInstance) -> bool {
        self.infeasible_scenarios.len() <= instance.allowed_violations()
    }
}

/// Scenario indices ordered by cost descending, ties by index ascending —
/// the permutation φ shared by the quantile bound and quantile partition.
pub fn descending_cost_order(costs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[b].total_cmp(&costs[a]).then(a.cmp(&b)));
    order
}

/// Quantile initial partition: rank scenarios by cost descending and deal
/// them round-robin into `⌊τ|S|⌋ + 1` subsets. Each subset then holds exactly
/// one of the top-(⌊τ|S|⌋+1) scenarios, which is what makes the resulting
/// lower bound dominate the quantile bound.
pub fn initial_partition_quantile(
    instance: &CcspInstance,
    scenario_costs: &[f64],
) -> Result<Partition> {
    let n = instance.num_scenarios();
    if scenario_costs.len() != n {
        return Err(CcspError::Parameter(format!(
            "need {n} scenario costs, got {}",
            scenario_costs.len()
        )));
    }
    if scenario_costs.iter().any(|c| c.is_nan()) {
        return Err(CcspError::Parameter("scenario cost is NaN".into()));
    }
    let size = instance.allowed_violations() + 1;
    let order = descending_cost_order(scenario_costs);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); size];
    for (i, &s) in order.iter().enumerate() {
        groups[i % size].push(s);
    }
    Ok(Partition::from_groups(groups))
}

/// Random balanced initial partition: seeded shuffle, then round-robin into
/// `size` subsets (cardinalities differ by at most one).
pub fn initial_partition_random(
    instance: &CcspInstance,
    size: usize,
    seed: u64,
) -> Result<Partition> {
    let n = instance.num_scenarios();
    let min_size = instance.allowed_violations() + 1;
    if size < min_size || size > n {
        return Err(CcspError::Parameter(format!(
            "partition size {size} outside [{min_size}, {n}]"
        )));
    }
    let mut scenarios: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    scenarios.shuffle(&mut rng);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); size];
    for (i, &s) in scenarios.iter().enumerate() {
        groups[i % size].push(s);
    }
    Ok(Partition::from_groups(groups))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn validation_catches_structural_defects() {
        let inst = fixtures::mixed_limits();
        let ok = Partition::from_groups(vec![vec![0, 2], vec![1, 3]]);
        assert_eq!(ok.validation_error(&inst), None);

        let overlap = Partition::from_groups(vec![vec![0], vec![0, 1, 2, 3]]);
        assert!(overlap
            .validation_error(&inst)
            .unwrap()
            .contains("more than one subset"));

        let gap = Partition::from_groups(vec![vec![0, 1], vec![3]]);
        assert!(gap.validation_error(&inst).unwrap().contains("not covered"));

        let empty = Partition::from_groups(vec![vec![0, 1, 2, 3], vec![]]);
        assert!(empty.validation_error(&inst).unwrap().contains("empty"));

        // ⌊0.25·4⌋ = 1 violation allowed, so a single-subset partition is
        // too small to support the bounding models.
        let small = Partition::from_groups(vec![vec![0, 1, 2, 3]]);
        assert!(small
            .validation_error(&inst)
            .unwrap()
            .contains("at least 2"));
    }

    #[test]
    fn classify_splits_feasible_and_infeasible() {
        let inst = fixtures::mixed_limits();
        let part = Partition::from_groups(vec![vec![0, 2], vec![1, 3]]);
        // x = (6,2): scenario 0 (x1 ≤ 2) violated by 4, scenario 2
        // (x1 + x2 ≤ 6) violated by 2; scenarios 1 and 3 hold.
        let cls = part.classify(&inst, &[6.0, 2.0], 1e-6).unwrap();
        assert_eq!(cls.z, vec![false, true]);
        assert_eq!(cls.infeasible_subsets, vec![0]);
        assert_eq!(cls.feasible_subsets, vec![1]);
        assert_eq!(cls.infeasible_scenarios, vec![0, 2]);
        assert!(!cls.chance_feasible(&inst));
        assert!((cls.per_scenario_violation[0] - 4.0).abs() < 1e-12);
        assert!((cls.per_scenario_violation[2] - 2.0).abs() < 1e-12);

        // A point satisfying everything classifies all subsets feasible.
        let all_ok = part.classify(&inst, &[0.0, 0.0], 1e-6).unwrap();
        assert!(all_ok.infeasible_subsets.is_empty());
        assert!(all_ok.chance_feasible(&inst));
    }

    #[test]
    fn quantile_partition_matches_hand_ranking() {
        // nested_budgets: scenario costs are (−4, −5, −6, −7) so the
        // descending order is 0,1,2,3 and two subsets interleave them.
        let t1 = fixtures::nested_budgets();
        let p1 = initial_partition_quantile(&t1, &[-4.0, -5.0, -6.0, -7.0]).unwrap();
        assert_eq!(p1.canonical(), vec![vec![0, 2], vec![1, 3]]);

        // mixed_limits: costs (−12, −12, −6, −8) rank as 2, 3, 0, 1 with the
        // −12 tie broken by index.
        let t2 = fixtures::mixed_limits();
        let p2 = initial_partition_quantile(&t2, &[-12.0, -12.0, -6.0, -8.0]).unwrap();
        assert_eq!(p2.canonical(), vec![vec![0, 2], vec![1, 3]]);
        // Subset 0 received the top-ranked scenario 2.
        assert!(p2.subsets[0].members.contains(&2));

        assert!(initial_partition_quantile(&t1, &[0.0; 3]).is_err());
    }

    #[test]
    fn quantile_partition_tau_zero_is_single_subset() {
        let mut inst = fixtures::nested_budgets();
        inst.tau = 0.0;
        let p = initial_partition_quantile(&inst, &[-4.0, -5.0, -6.0, -7.0]).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.subsets[0].members, vec![0, 1, 2, 3]);
    }

    #[test]
    fn random_partition_is_balanced_and_deterministic() {
        let inst = fixtures::mixed_limits();
        let a = initial_partition_random(&inst, 2, 3).unwrap();
        let b = initial_partition_random(&inst, 2, 3).unwrap();
        assert_eq!(a.canonical(), b.canonical());
        assert!(a.subsets.iter().all(|p| p.len() == 2));
        assert_eq!(a.validation_error(&inst), None);

        let full = initial_partition_random(&inst, 4, 9).unwrap();
        assert_eq!(full.canonical(), Partition::singletons(4).canonical());

        assert!(initial_partition_random(&inst, 1, 0).is_err());
        assert!(initial_partition_random(&inst, 5, 0).is_err());
    }

    #[test]
    fn ids_stay_stable_across_edits() {
        let mut part = Partition::from_groups(vec![vec![0, 1], vec![2, 3]]);
        let gen0 = part.generation;
        let removed = part.remove_subset(0);
        assert_eq!(removed.id, 0);
        let pos = part.push_subset(vec![1, 0]);
        assert_eq!(part.subsets[pos].id, 2); // fresh id, not a reused one
        assert_eq!(part.subsets[pos].members, vec![0, 1]); // sorted on insert
        assert_eq!(part.subsets[0].id, 1); // untouched subset keeps its id
        assert!(part.generation > gen0);
    }

    #[test]
    fn refinement_relation_on_canonical_groups() {
        let coarse = Partition::from_groups(vec![vec![0, 1, 2], vec![3]]);
        let fine = Partition::from_groups(vec![vec![0, 2], vec![1], vec![3]]);
        assert!(fine.is_refinement_of_groups(&coarse.canonical()));
        assert!(!coarse.is_refinement_of_groups(&fine.canonical()));
        // A partition refines itself.
        assert!(coarse.is_refinement_of_groups(&coarse.canonical()));
        // Crossing groups is not a refinement either way.
        let crossed = Partition::from_groups(vec![vec![0, 3], vec![1, 2]]);
        assert!(!crossed.is_refinement_of_groups(&coarse.canonical()));
    }

    #[test]
    fn descending_order_breaks_ties_by_index() {
        assert_eq!(
            descending_cost_order(&[-12.0, -12.0, -6.0, -8.0]),
            vec![2, 3, 0, 1]
        );
        assert_eq!(
            descending_cost_order(&[1.0, f64::INFINITY, 1.0]),
            vec![1, 0, 2]
        );
    }
}
