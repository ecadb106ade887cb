//! Breakpoints heuristic (QKBP) for the quadratic knapsack problem.
//!
//! The pipeline is: build the compact s-excess network for an instance
//! ([`flownet::build_qkp2_network`]), sweep it over a decreasing grid of
//! Lagrange multipliers ([`flownet::parametric_sweep`]) to collect nested
//! optimal solutions, assemble those into a concave envelope
//! ([`envelope::build_envelope`]) and repair budgets falling between
//! breakpoints with greedy moves ([`qkbp::solve`]).
//!
//! [`baselines`] holds the exact enumeration oracle and the reference
//! heuristics, [`generators`] the seeded benchmark families and [`format`]
//! the on-disk instance formats.

pub mod baselines;
pub mod envelope;
pub mod error;
pub mod flownet;
pub mod format;
pub mod generators;
pub mod instance;
pub mod qkbp;

pub use error::{Error, Result};
pub use instance::{Budget, NodeSet, QkpInstance};

/// Exact rational used for Lagrange multipliers and node weights.
pub type Rational = num_rational::Ratio<i128>;
