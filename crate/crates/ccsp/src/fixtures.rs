//! Small hand-checkable instances used across unit tests, integration tests,
//! and documentation examples. Both live on the box `x ∈ [0, 10]²` with
//! objective `−(x₁ + x₂)` and `τ = 0.25` over four scenarios (so exactly one
//! scenario may be violated); every quantity of interest can be verified by
//! enumerating the four choices of violated scenario.

use crate::instance::{
    CcspInstance, DeterministicRows, Scenario, VarDomain, INSTANCE_FORMAT_VERSION,
};

fn base(scenarios: Vec<Scenario>) -> CcspInstance {
    CcspInstance {
        version: INSTANCE_FORMAT_VERSION,
        num_vars: 2,
        var_domain: VarDomain::Continuous,
        var_bounds: vec![(0.0, 10.0), (0.0, 10.0)],
        objective: vec![-1.0, -1.0],
        deterministic_rows: DeterministicRows::default(),
        scenarios,
        tau: 0.25,
        generator: None,
    }
}

fn single_row(coeffs: [f64; 2], rhs: f64) -> Scenario {
    Scenario {
        lhs: vec![coeffs.to_vec()],
        rhs: vec![rhs],
    }
}

/// Four nested budget rows `x₁ + x₂ ≤ 4, 5, 6, 7`.
///
/// Scenario costs are `−4, −5, −6, −7`; dropping the tightest scenario leaves
/// the budget 5 binding, so the optimum is `−5` and the quantile bound is
/// already tight.
pub fn nested_budgets() -> CcspInstance {
    base(vec![
        single_row([1.0, 1.0], 4.0),
        single_row([1.0, 1.0], 5.0),
        single_row([1.0, 1.0], 6.0),
        single_row([1.0, 1.0], 7.0),
    ])
}

/// Two axis limits and two diagonal budgets:
/// `s₀: x₁ ≤ 2`, `s₁: x₂ ≤ 2`, `s₂: x₁ + x₂ ≤ 6`, `s₃: x₁ + x₂ ≤ 8`.
///
/// Scenario costs are `−12, −12, −6, −8`; the optimum is `−6` (violate one of
/// the axis limits, keep both budgets), strictly above the quantile bound
/// `−8`, which makes this the interesting fixture for partition refinement.
pub fn mixed_limits() -> CcspInstance {
    base(vec![
        single_row([1.0, 0.0], 2.0),
        single_row([0.0, 1.0], 2.0),
        single_row([1.0, 1.0], 6.0),
        single_row([1.0, 1.0], 8.0),
    ])
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_are_valid() {
        super::nested_budgets().validate().unwrap();
        super::mixed_limits().validate().unwrap();
    }
}
