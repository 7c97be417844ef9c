//! Twin-tower feedforward network. The same tower embeds the pair in both
//! orders and an antisymmetric head turns the two embeddings into a
//! probability, so `p(a, b) + p(b, a) = 1` holds without post-processing.

pub mod batch;
pub mod config;
pub mod ensemble;
pub mod gradcheck;
pub mod head;
pub mod layers;
pub mod model;
pub mod train;

pub use config::{Activation, Combine, DnnConfig, HeadKind};
pub use ensemble::{combine, DnnEnsemble};
pub use gradcheck::{gradcheck, GradcheckReport};
pub use model::{DnnModel, Mode};
pub use train::{member_seed, train_ensemble, train_model, DnnStepInfo};
