//! Frozen hand-derived values for the two fixture instances.
//!
//! Every number asserted here was computed by enumerating the four choices of
//! violated scenario by hand (see the fixture docs); the tests then check
//! that each library layer — scenario costs, quantile bound, big-M tables,
//! bounding models, the one-shot baseline, and the enumeration oracle —
//! reproduces them independently.

use approx::assert_abs_diff_eq;
use ccsp::bounds::{
    all_scenario_costs, big_m_coefficients, quantile_bound, solve_bound, solve_model4,
    subset_cost, BigMRequest, BoundKind,
};
use ccsp::fixtures::{mixed_limits, nested_budgets};
use ccsp::milp::{SolverCtx, SolverParams};
use ccsp::oracle::{brute_force_optimal, DEFAULT_ORACLE_CAP};
use ccsp::partition::initial_partition_quantile;

const TOL: f64 = 1e-9;

fn ctx() -> SolverCtx {
    SolverCtx::builtin(SolverParams::exact())
}

#[test]
fn nested_budgets_scenario_costs_and_quantile_bound() {
    let instance = nested_budgets();
    let costs = all_scenario_costs(&instance, false, &ctx(), None).unwrap();
    // Each scenario alone binds its own budget: cost −b_s.
    let expected = [-4.0, -5.0, -6.0, -7.0];
    for (got, want) in costs.iter().zip(expected) {
        assert_abs_diff_eq!(*got, want, epsilon = TOL);
    }
    // One violation allowed: the bound is the third-smallest scenario cost.
    let vq = quantile_bound(&instance, &costs).unwrap();
    assert_abs_diff_eq!(vq, -5.0, epsilon = TOL);
}

#[test]
fn nested_budgets_oracle_is_tight_and_unique() {
    let instance = nested_budgets();
    let oracle = brute_force_optimal(&instance, DEFAULT_ORACLE_CAP, &ctx()).unwrap();
    // Violating the tightest budget (scenario 0) leaves budget 5 binding;
    // violating anything else leaves budget 4 binding. −5 is the unique best.
    assert_abs_diff_eq!(oracle.value, -5.0, epsilon = TOL);
    assert!(oracle.unique_selection);
    assert_eq!(oracle.selection, vec![1, 2, 3]);
}

#[test]
fn nested_budgets_bounds_on_initial_partition() {
    let instance = nested_budgets();
    let costs = all_scenario_costs(&instance, false, &ctx(), None).unwrap();
    let partition = initial_partition_quantile(&instance, &costs).unwrap();
    // Costs descending deal s0, s2 | s1, s3 round-robin into two subsets.
    assert_eq!(partition.canonical(), vec![vec![0, 2], vec![1, 3]]);

    let bigm = big_m_coefficients(&instance, BigMRequest::Box, &ctx()).unwrap();
    // Enforce {0,2} → budget 4 binds (−4); enforce {1,3} → budget 5 (−5).
    let lower = solve_bound(&instance, &partition, &bigm, BoundKind::Lower, &ctx()).unwrap();
    assert_abs_diff_eq!(lower.value, -5.0, epsilon = TOL);
    // Each subset carries probability 1/2 < 3/4, so the witness model must
    // enforce both subsets — all four budgets — and 4 binds.
    let upper = solve_bound(&instance, &partition, &bigm, BoundKind::Upper, &ctx()).unwrap();
    assert_abs_diff_eq!(upper.value, -4.0, epsilon = TOL);
}

#[test]
fn nested_budgets_one_shot_baseline() {
    let instance = nested_budgets();
    let bigm = big_m_coefficients(&instance, BigMRequest::Box, &ctx()).unwrap();
    for use_lazy in [false, true] {
        let result = solve_model4(&instance, &bigm, &ctx(), use_lazy).unwrap();
        assert_abs_diff_eq!(result.value, -5.0, epsilon = TOL);
    }
}

#[test]
fn mixed_limits_scenario_costs_and_quantile_bound() {
    let instance = mixed_limits();
    let costs = all_scenario_costs(&instance, false, &ctx(), None).unwrap();
    // Axis limits leave the other coordinate free to 10; budgets bind alone.
    let expected = [-12.0, -12.0, -6.0, -8.0];
    for (got, want) in costs.iter().zip(expected) {
        assert_abs_diff_eq!(*got, want, epsilon = TOL);
    }
    let vq = quantile_bound(&instance, &costs).unwrap();
    assert_abs_diff_eq!(vq, -8.0, epsilon = TOL);
}

#[test]
fn mixed_limits_oracle_gap_above_quantile_bound() {
    let instance = mixed_limits();
    let oracle = brute_force_optimal(&instance, DEFAULT_ORACLE_CAP, &ctx()).unwrap();
    // Violating either axis limit leaves the budget 6 binding: −6, attained
    // by two distinct selections (drop scenario 0 or drop scenario 1).
    assert_abs_diff_eq!(oracle.value, -6.0, epsilon = TOL);
    assert!(!oracle.unique_selection);
    assert_eq!(oracle.selection, vec![0, 2, 3]);
    // The optimum sits strictly above the quantile bound −8: this fixture is
    // the one that actually exercises refinement.
    assert!(oracle.value > quantile_bound(&instance, &[-12.0, -12.0, -6.0, -8.0]).unwrap() + 1.0);
}

#[test]
fn mixed_limits_box_big_m_column() {
    let instance = mixed_limits();
    let bigm = big_m_coefficients(&instance, BigMRequest::Box, &ctx()).unwrap();
    // Worst violation of each row over the box [0,10]²:
    // x₁ ≤ 2 → 8, x₂ ≤ 2 → 8, x₁+x₂ ≤ 6 → 14, x₁+x₂ ≤ 8 → 12.
    let expected = [8.0, 8.0, 14.0, 12.0];
    assert_eq!(bigm.values.len(), 4);
    for (row, want) in bigm.values.iter().zip(expected) {
        assert_eq!(row.len(), 1);
        assert_abs_diff_eq!(row[0], want, epsilon = TOL);
    }
}

#[test]
fn mixed_limits_bounds_on_initial_partition() {
    let instance = mixed_limits();
    let costs = all_scenario_costs(&instance, false, &ctx(), None).unwrap();
    let partition = initial_partition_quantile(&instance, &costs).unwrap();
    // Descending costs order as s2 (−6), s3 (−8), s0, s1 (−12 each), dealt
    // round-robin: {s2, s0} and {s3, s1}.
    assert_eq!(partition.canonical(), vec![vec![0, 2], vec![1, 3]]);

    let bigm = big_m_coefficients(&instance, BigMRequest::Box, &ctx()).unwrap();
    // Enforce {0,2}: x₁ ≤ 2 and budget 6 → −6. Enforce {1,3}: x₂ ≤ 2 and
    // budget 8 → −8. The lower model picks the better relaxation: −8.
    let lower = solve_bound(&instance, &partition, &bigm, BoundKind::Lower, &ctx()).unwrap();
    assert_abs_diff_eq!(lower.value, -8.0, epsilon = TOL);
    // Both subsets needed for probability 3/4 → x = (2,2).
    let upper = solve_bound(&instance, &partition, &bigm, BoundKind::Upper, &ctx()).unwrap();
    assert_abs_diff_eq!(upper.value, -4.0, epsilon = TOL);
}

#[test]
fn mixed_limits_one_shot_baseline() {
    let instance = mixed_limits();
    let bigm = big_m_coefficients(&instance, BigMRequest::Box, &ctx()).unwrap();
    for use_lazy in [false, true] {
        let result = solve_model4(&instance, &bigm, &ctx(), use_lazy).unwrap();
        assert_abs_diff_eq!(result.value, -6.0, epsilon = TOL);
    }
}

#[test]
fn mixed_limits_selection_costs_enumerated() {
    let instance = mixed_limits();
    // Cost of every "keep these three scenarios" selection, by hand:
    // keep {1,2,3}: x₂ ≤ 2, budget 6 → −6      (violate the x₁ limit)
    // keep {0,2,3}: x₁ ≤ 2, budget 6 → −6      (violate the x₂ limit)
    // keep {0,1,3}: both axis limits → (2,2) → −4
    // keep {0,1,2}: both axis limits → (2,2) → −4
    let cases: [(&[usize], f64); 4] = [
        (&[1, 2, 3], -6.0),
        (&[0, 2, 3], -6.0),
        (&[0, 1, 3], -4.0),
        (&[0, 1, 2], -4.0),
    ];
    for (members, want) in cases {
        let (value, point) = subset_cost(&instance, members, false, &ctx(), None).unwrap();
        assert_abs_diff_eq!(value, want, epsilon = TOL);
        let point = point.expect("feasible selection returns a point");
        assert_eq!(point.len(), 2);
    }
}
