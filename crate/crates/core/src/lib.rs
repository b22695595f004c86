//! Numerical laboratory for the very singular fractional diffusion equation
//! `∂ₜu + (−Δ)^s Φ(u) = 0` on the line, with `Φ(u) = −u^{-n}` (n > 0) or
//! `Φ(u) = log u` (n = 0).

pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod experiments;
pub mod frlap;
pub mod grid;
pub mod io;
pub mod limits;
pub mod loghalf;
pub mod nonlin;
pub mod oracle;
pub mod quad;
pub mod selfsim;
pub mod special;

pub use error::{Error, Result};
pub use frlap::{build_operator, FracOrder, FrLapOperator};
pub use grid::{Field, Grid1D, TailModel};
pub use nonlin::{Nonlinearity, RegularizedNonlinearity};
