//! Markov chain Monte Carlo on matrix spaces.
//!
//! Random-walk Metropolis, preconditioned Crank-Nicolson and mixed pCN kernels
//! for targets on `M(p,q)` and on the cone of symmetric positive-definite
//! matrices, together with numerical drift checks, a matrix Ornstein-Uhlenbeck
//! stochastic-volatility model with particle-filter likelihoods, and chain
//! diagnostics.

pub mod diagnostics;
pub mod dists;
pub mod drift;
pub mod error;
pub mod experiment;
pub mod kernels;
pub mod linalg;
pub mod noise;
pub mod rng;
pub mod stats;
pub mod sv;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, SpdMatrix, StiefelPoint};
