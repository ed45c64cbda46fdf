//! Numerical toolkit for fixed-budget best-arm identification with two
//! Bernoulli arms.
//!
//! The crate is organised bottom-up:
//!
//! - [`rates`]: Bernoulli KL divergence, the static-allocation rate function
//!   `g(x, mu)` (closed form and by direct minimisation), the inner minimiser
//!   `lambda(x, mu)` and the optimal allocation `x*(mu)`.
//! - [`dual`]: the same objects in natural-parameter coordinates, through the
//!   log-partition potential `phi(xi) = log(1 + e^xi)` and its Bregman
//!   divergence.
//! - [`constructions`]: instance builders that certify, for a target mean `a`
//!   and a non-uniform allocation `x`, an instance on which `x` is strictly
//!   worse than uniform sampling, plus the asymmetry and odds checks those
//!   builders rest on.
//! - [`policies`]: sampling rules over sufficient statistics and the
//!   empirical-mean recommendation.
//! - [`exact`]: exact finite-budget evaluation by forward dynamic programming
//!   and a binomial fast path for static rules.
//! - [`mc`]: reproducible plain and exponentially tilted Monte Carlo.
//!
//! All rates are in nats per round.

pub mod constructions;
pub mod dual;
mod error;
pub mod exact;
pub mod mc;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod policies;
pub mod rates;

pub use error::{Error, Result};
pub use rates::{Allocation, Arm, BanditInstance};
