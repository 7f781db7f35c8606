//! Spline regression with automatic knot selection.
//!
//! A B-spline basis on many equally spaced candidate knots is fitted under a
//! weighted difference penalty whose weights are updated by the adaptive
//! ridge. Knots whose jump survives the penalty are kept, the model is refitted
//! without penalty on them, and an information criterion chooses the penalty.

pub mod basis;
pub mod cli;
pub mod error;
pub mod fit;
pub mod glm;
pub mod linalg;
pub mod penalty;
pub mod selection;
pub mod simulation;
pub mod solver;

pub use error::{Error, Result};
