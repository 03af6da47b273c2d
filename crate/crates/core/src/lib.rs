//! Dynamic programming on finite discounted MDPs with non-stationary
//! (periodic) policies.
//!
//! The central routine is [`dp::nsmpi_run`], a modified policy iteration whose
//! evaluation step applies the Bellman operator of the last `ℓ` greedy
//! policies `m` times and then adds an injected error. Around it sit exact
//! policy evaluation ([`eval`]), the adversarial chain on which the error
//! bound is attained ([`adversarial`]), the bounds themselves ([`bounds`]),
//! benchmark problems ([`benchmarks`]) and sweep drivers ([`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversarial;
pub mod benchmarks;
pub mod bounds;
pub mod csvfmt;
pub mod dp;
pub mod error;
pub mod eval;
pub mod harness;
pub mod mdp;

pub use dp::{nsmpi_run, ErrorModel, IterationRecord, MParameter, NsmpiConfig, ZeroErrors};
pub use error::{Error, Result};
pub use mdp::{FiniteMdp, PeriodicPolicy, StationaryPolicy, ValueFunction};
