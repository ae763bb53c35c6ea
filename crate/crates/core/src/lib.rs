//! Discretization of parametrizable signal manifolds.
//!
//! Sample sets are chosen either to minimize the error of estimating
//! manifold distances by nearest-sample distances ([`remd`]), or jointly
//! across several class manifolds to minimize nearest-sample classification
//! error ([`cmd`], [`budget`]). [`baselines`] provides the random, regular
//! and simulated-annealing references and [`harness`] the experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod budget;
pub mod cmd;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod par;
pub mod remd;
pub mod rng;

pub use error::{Error, Result};
