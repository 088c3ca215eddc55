//! Weighted L²-minimal ∂̄ solves on hyperbolic suspension laminations.

pub mod bergman;
pub mod cauchy;
pub mod correction;
pub mod deck_sum;
pub mod disk;
pub mod error;
pub mod fuchsian;
pub mod grid;
pub mod lemmas;
pub mod local;
pub mod minimal;
pub mod partition;
pub mod perturbation;
pub mod suspension;
pub mod weight;

pub use error::{Error, Result};
