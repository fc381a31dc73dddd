//! Boundary-integral solver for the time-harmonic Klein-Gordon equation with
//! piecewise-constant masses separated by an asymptotically flat curve.

pub mod cli;
pub mod error;
pub mod flatlab;
pub mod geom;
pub mod krylov;
pub mod ops;
pub mod quad;
pub mod scatter;
pub mod solver;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
