//! Phase diagrams of Bayesian inference over nonlinear Gaussian generative
//! models, with an exact finite-size simulator to back the analytics.
//!
//! A length-K vector of binary labels is pushed through a Gaussian random
//! field with polynomial covariance and observed through additive Gaussian
//! noise.  In the proportional limit `K/N -> R` the Bayesian posterior is
//! described by a two-parameter replica-symmetric free energy; its minima
//! give the overlap between truth and estimate, the output entropy, the
//! information rate and the cross entropy under noise mismatch.  Pure
//! polynomial orders specialize to a scalar landscape with closed-form
//! thresholds, first- and second-order phase transitions, an
//! all-or-nothing regime at higher orders, and a critical slowing down of
//! the fixed-point iteration at the second-order transition.  The same
//! machinery yields secure-learning limits over wiretapped observations.
//!
//! Modules:
//! - [`quad`]: Gauss-Hermite expectations of scalar functions of a
//!   standard Gaussian.
//! - [`field`]: covariance functions, sampled tensor fields, label
//!   vectors.
//! - [`rs`]: the general replica-symmetric solution, cross entropy and
//!   matched specialization.
//! - [`pure`]: pure order-`lambda` landscapes, thresholds and the
//!   convergence-time probe.
//! - [`decoupled`]: the equivalent scalar channel and its joint moments.
//! - [`sim`]: exhaustive-posterior inference at small K.
//! - [`secrecy`]: wiretap limits, the binned prefix construction, and the
//!   quadratic-codebook secure rate.
//!
//! The default `parallel` feature fans sweeps, multistart solvers and
//! Monte Carlo trials out to rayon; disabling it yields a fully
//! sequential build with identical results.

pub mod decoupled;
pub mod error;
pub mod field;
pub mod par;
pub mod pure;
pub mod quad;
pub mod rs;
pub mod secrecy;
pub mod sim;

pub use error::{Error, Result};
pub use field::{CovarianceFn, LabelVector, TensorField};
pub use pure::PureModel;
pub use quad::QuadratureRule;
pub use rs::{RsOrderParams, RsParams, RsSolution};
