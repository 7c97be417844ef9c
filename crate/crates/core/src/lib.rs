//! Pairwise language-identification signal combination.
//!
//! A classifier `f(a, b)` estimates the probability that candidate language
//! `a` is spoken rather than `b`, from six acoustic and recognizer signals per
//! side. Two trainable backends are provided: a lattice-regression ensemble
//! with monotonic calibrators ([`lattice`]) and a twin-tower feedforward
//! network whose scoring head is antisymmetric by construction ([`dnn`]).

pub mod backend;
pub mod dnn;
pub mod error;
pub mod eval;
pub mod hash;
pub mod lattice;
pub mod math;
pub mod optim;
pub mod pipeline;
pub mod signal;
pub mod synthgen;

pub use error::{FusionError, Result};
