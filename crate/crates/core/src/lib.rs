//! FFT-based periodic interpolation method for scalar-potential superposition
//! sums over a non-uniform source distribution in the unit cell of an infinite
//! 1D, 2D or 3D periodic array.

pub mod direct;
pub mod error;
pub mod far;
pub mod fft;
pub mod grid;
pub mod model;
pub mod near;
pub mod pgf;
pub mod solver;
pub mod special;
pub mod study;

pub use error::{PimError, Result};
pub use model::*;
