//! Solver library for chance-constrained stochastic programs (CCSPs) with
//! finite, equiprobable scenario support.
//!
//! A CCSP asks for `min cᵀx` over a deterministic feasible set `𝒳` subject to
//! `P[x ∈ X(ξ)] ≥ 1 − τ`, where the uncertainty `ξ` ranges over a finite set
//! of scenarios `S`, each contributing a polyhedral block `X^s = {x : A^s x ≤ b^s}`.
//! With equiprobable scenarios the chance constraint allows at most
//! `⌊τ|S|⌋` scenarios to be violated.
//!
//! The solver works on *partitions* of the scenario set: aggregating scenarios
//! into subsets yields a reduced mixed-integer model with one indicator per
//! subset. Coarse partitions give cheap relaxations (lower bounds); the same
//! partition also yields a restriction (upper bounds with chance-feasible
//! witnesses). The adaptive loop refines subsets just enough to cut off the
//! current lower-bound witness, optionally merges subsets back once the
//! refinement certifiably improved the bound, and recovers feasible solutions
//! with a projection heuristic, until the bound gap closes.
//!
//! Module map:
//! - [`instance`]: problem data, feasibility evaluation, the knapsack-style
//!   instance generator, and (de)serialization.
//! - [`milp`]: backend-neutral linear models, a bounded-variable simplex core,
//!   branch-and-bound with lazy rows, an LP-format interchange dialect, and an
//!   external-solver adapter.
//! - [`partition`]: scenario partitions, classification against a point, and
//!   initial-partition constructors.
//! - [`bounds`]: scenario/subset costs, quantile bound, reduced lower/upper
//!   models, and big-M coefficient schemes with a disk cache.
//! - [`refine`]: minimal refinements, the optimal-split model, subset
//!   selection rules, and maximal mergers.
//! - [`apm`]: the adaptive partitioning driver, its variants, the projection
//!   heuristic, and trace output.
//! - [`oracle`]: brute-force enumeration over violated-scenario choices, used
//!   to verify everything else.

pub mod apm;
pub mod bounds;
pub mod error;
pub mod fixtures;
pub mod instance;
pub mod milp;
pub mod oracle;
pub mod partition;
pub mod refine;

pub use error::CcspError;

/// Convenience result alias used across the crate.
pub type Result<T> = std::result::Result<T, CcspError>;
