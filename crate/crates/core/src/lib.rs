//! Fractional Brownian motion, Riemann-Liouville operators and the
//! truncated Euler-Maruyama scheme for path-dependent SDEs driven by fBm
//! with Hurst index `H > 1/2`, with Girsanov reweighting for weak-error
//! studies.

pub mod conv;
pub mod convergence;
pub mod error;
pub mod fbm;
pub mod fractional;
pub mod girsanov;
pub mod grid;
pub mod mc;
pub mod model;
pub mod norms;
pub mod quad;
pub mod rng;
pub mod solver;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
