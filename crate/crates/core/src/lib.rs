//! Cage building and cage-based deformation for Gaussian splat scenes.

pub mod cage;
pub mod deform;
pub mod error;
pub mod geom;
pub mod metrics;
pub mod mvc;
pub mod model;
pub mod par;
pub mod synthetic;

pub use error::{Error, Result};
pub use model::*;
