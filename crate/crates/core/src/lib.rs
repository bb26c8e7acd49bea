//! Shape-aware human motion retargeting toolkit.
//!
//! Transfers skeletal motion between characters with different body
//! proportions while honoring hybrid 2D/3D end-effector constraints. The
//! pipeline covers shape-consistent motion regularization, windowed
//! constrained retargeting over a 24-joint parametric skeleton,
//! semantic-guided as-rigid-as-possible mesh deformation, and the paired
//! sequence evaluation protocol (windowed MSE/SSIM, end-effector error).

pub mod arap;
pub mod camera;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod math;
pub mod mesh;
pub mod optim;
pub mod recon;
pub mod retarget;
pub mod skeleton;
pub mod spline;
pub mod synth;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
