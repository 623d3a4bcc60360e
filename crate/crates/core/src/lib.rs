//! Spectral simulation and analysis of stochastically forced fractional and
//! multifractal cascade equations.

pub mod dynamics;
pub mod error;
pub mod forcing;
pub mod grid;
pub mod io;
pub mod operators;
pub mod oracles;
pub mod quadrature;
pub mod statistics;
pub mod synthesis;

pub use error::{Error, Result};
pub use grid::{Field, Fourier, Grid, Space};
pub use operators::{MultiplierKind, PhysParams};
