//! 3D graph convolutional networks for molecules.
//!
//! Molecules are read from SDF or JSON ([`molio`]), perceived and featurized
//! into a feature matrix, normalized adjacency and relative-position tensor
//! ([`chemper`]), and passed through scalar/vector interconverting graph
//! convolutions ([`model`]). [`train`] holds the optimizer, schedules,
//! cross-validation and metrics; [`analyze`] the rotation experiments and
//! per-atom contribution maps.

pub mod analyze;
pub mod chemper;
pub mod error;
pub mod model;
pub mod molio;
pub mod numcore;
pub mod train;

pub use error::{Error, Result};
