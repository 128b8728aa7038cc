//! Optimal dynamic mediation in a repeated moral-hazard game.
//!
//! A long-lived worker faces a sequence of short-lived clients. Each client
//! decides whether to accept the worker; an accepted worker chooses effort or
//! shirking, and only the output is publicly observed. A firm may mediate play
//! through private action recommendations. This crate computes
//!
//! * the no-mediation benchmark (perfect public equilibria) and its
//!   grim-trigger automata ([`benchmark`]),
//! * the upper boundary `F` of the mediated payoff set on a promised-utility
//!   grid, cross-checked by a brute-force Bellman oracle ([`bellman`]),
//! * the optimal communication device as a state machine on promised worker
//!   utility ([`device`]),
//! * Monte Carlo trajectories of that device ([`simulate`]),
//! * welfare comparisons: first best, anti-folk gap and the Pareto-improvement
//!   discount cutoff ([`welfare`]).
//!
//! Inner loops (value-iteration sweeps, oracle searches, simulated paths,
//! discount sweeps) run on rayon when the `parallel` feature is enabled and
//! fall back to plain iterators otherwise; see [`exec::Execution`].

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bellman;
pub mod benchmark;
pub mod cli;
pub mod device;
pub mod error;
pub mod exec;
pub mod model;
pub mod numfmt;
pub mod simulate;
pub mod welfare;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{DerivedQuantities, ModelParams, RawParams, Regime};
