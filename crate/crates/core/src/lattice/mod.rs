//! Lattice-regression ensemble: monotone piecewise-linear calibrators feed
//! 20 multilinear lattices, each over 8 randomly chosen calibrated features,
//! whose sigmoid outputs are averaged. Prediction symmetrizes the result so
//! that swapping the two languages complements the probability.

pub mod calibrator;
pub mod model;
pub mod pav;
pub mod submodel;
pub mod train;

pub use calibrator::{Calibrator, Direction};
pub use model::{symmetrize, LatticeEnsembleModel};
pub use pav::pav_project;
pub use submodel::{InterpScratch, LatticeSubmodel};
pub use train::{init_model, mean_log_loss, train, train_with_observer, LatticeConfig, StepInfo};
