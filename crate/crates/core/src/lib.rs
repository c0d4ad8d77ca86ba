//! Solvers for finite zero-sum two-player perfect-information stochastic
//! games: nested policy iteration for discounted and mean-payoff criteria,
//! spectral scaling and renewal-state reductions that certify sup-norm
//! contraction, a priori iteration bounds, runtime certificates, and
//! brute-force oracles for desk-scale validation.
//!
//! Enable the default `parallel` feature for rayon-parallel enumeration in
//! the oracle and hull-radius paths; without it every code path is
//! sequential.

pub mod error;
pub mod game;
pub mod generate;
pub mod linalg;
pub mod oracle;
pub mod perron;
pub mod policy_iteration;
pub mod shapley;
pub mod transforms;

pub use error::Error;
pub use game::{GameInstance, MaxPolicy, MinPolicy, PayoffMode, ValueVector};
pub use linalg::EigenPair;
pub use policy_iteration::{solve_discounted, solve_mean, IterationTrace, SolveConfig};
