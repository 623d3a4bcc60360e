//! Periodic lattice, Riemann-sum Fourier transforms and field containers.
//!
//! Both lattices use the asymmetric index set `{-N/2+1, ..., 0, ..., N/2}`:
//! `x_j = j dx` and `k_m = m dk` with `dx = L_tot / N` and `dk = 1 / L_tot`.
//! Transforms carry continuous-transform units:
//!
//! ```text
//! û(k_m) = dx Σ_j u(x_j) exp(-2iπ k_m x_j)
//! u(x_j) = dk Σ_m û(k_m) exp(+2iπ k_m x_j)
//! ```
//!
//! Public containers always hold values in lattice order (index 0 is mode
//! `-N/2+1`). The FFT works in "natural" order (index 0 is mode 0); the
//! two orders differ by a rotation of `N/2 - 1` slots.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Space {
    Physical,
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    l_tot: f64,
}

impl Grid {
    pub fn new(n: usize, l_tot: f64) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("N={n} is not a power of two >= 2")));
        }
        if !(l_tot.is_finite() && l_tot > 0.0) {
            return Err(Error::InvalidGrid(format!("L_tot={l_tot} must be positive")));
        }
        Ok(Self { n, l_tot })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn l_tot(&self) -> f64 {
        self.l_tot
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.l_tot / self.n as f64
    }

    #[inline]
    pub fn dk(&self) -> f64 {
        1.0 / self.l_tot
    }

    /// Signed lattice integer of slot `i` (slot 0 is `-N/2+1`).
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        i as i64 - (self.n / 2) as i64 + 1
    }

    /// Slot holding lattice integer 0.
    #[inline]
    pub fn origin(&self) -> usize {
        self.n / 2 - 1
    }

    /// Slot of a lattice integer in `{-N/2+1, ..., N/2}`.
    pub fn slot(&self, mode: i64) -> Option<usize> {
        let i = mode + (self.n / 2) as i64 - 1;
        (0..self.n as i64).contains(&i).then_some(i as usize)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.mode(i) as f64 * self.dx()
    }

    #[inline]
    pub fn k(&self, i: usize) -> f64 {
        self.mode(i) as f64 * self.dk()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn ks(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.k(i)).collect()
    }

    /// Wavenumbers in FFT natural order (slot 0 is k=0).
    pub fn ks_natural(&self) -> Vec<f64> {
        let mut ks = self.ks();
        to_natural(&mut ks);
        ks
    }

    /// Coordinates in FFT natural order.
    pub fn xs_natural(&self) -> Vec<f64> {
        let mut xs = self.xs();
        to_natural(&mut xs);
        xs
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.n == other.n && self.l_tot == other.l_tot {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.n,
                left_len: self.l_tot,
                right: other.n,
                right_len: other.l_tot,
            })
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} L_tot={}", self.n, self.l_tot)
    }
}

/// Lattice order to FFT natural order, in place.
pub fn to_natural<T>(values: &mut [T]) {
    let n = values.len();
    values.rotate_left(n / 2 - 1);
}

/// FFT natural order to lattice order, in place.
pub fn to_lattice<T>(values: &mut [T]) {
    let n = values.len();
    values.rotate_right(n / 2 - 1);
}

/// A complex field on the lattice, tagged with the space it lives in.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    space: Space,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid, space: Space, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has N={}",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, space, values })
    }

    pub fn zeros(grid: Grid, space: Space) -> Self {
        Self {
            grid,
            space,
            values: vec![Complex64::new(0.0, 0.0); grid.n()],
        }
    }

    pub fn from_fn_physical(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.n()).map(|i| f(grid.x(i))).collect();
        Self {
            grid,
            space: Space::Physical,
            values,
        }
    }

    pub fn from_fn_spectral(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.n()).map(|i| f(grid.k(i))).collect();
        Self {
            grid,
            space: Space::Spectral,
            values,
        }
    }

    /// Builds a field from values stored in FFT natural order.
    pub fn from_natural(grid: Grid, space: Space, mut values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has N={}",
                values.len(),
                grid.n()
            )));
        }
        to_lattice(&mut values);
        Ok(Self { grid, space, values })
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn space(&self) -> Space {
        self.space
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Copy of the values in FFT natural order.
    pub fn to_natural(&self) -> Vec<Complex64> {
        let mut v = self.values.clone();
        to_natural(&mut v);
        v
    }

    pub fn expect_space(&self, expected: Space) -> Result<()> {
        if self.space == expected {
            Ok(())
        } else {
            Err(Error::WrongSpace {
                expected,
                found: self.space,
            })
        }
    }

    /// `Σ|u|² dx` in physical space, `Σ|û|² dk` in spectral space.
    pub fn energy(&self) -> f64 {
        let w = match self.space {
            Space::Physical => self.grid.dx(),
            Space::Spectral => self.grid.dk(),
        };
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * w
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, a: Complex64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    /// `a*self + b*other`, same grid and space required.
    pub fn lin_comb(&self, a: Complex64, other: &Field, b: Complex64) -> Result<Field> {
        self.grid.ensure_same(&other.grid)?;
        other.expect_space(self.space)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| a * u + b * v)
            .collect();
        Ok(Field {
            grid: self.grid,
            space: self.space,
            values,
        })
    }
}

/// FFT plans for one grid size with the Riemann-sum normalizations.
///
/// Slice-level methods work in natural order and are what the time stepper
/// uses; the `Field` methods handle lattice reordering.
#[derive(Clone)]
pub struct Fourier {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl fmt::Debug for Fourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

impl Fourier {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n());
        let inverse = planner.plan_fft_inverse(grid.n());
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            grid,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// In-place forward transform of natural-order samples.
    pub fn forward_natural(&mut self, buf: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
        let dx = self.grid.dx();
        buf.iter_mut().for_each(|v| *v *= dx);
    }

    /// In-place inverse transform of natural-order coefficients.
    pub fn inverse_natural(&mut self, buf: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let dk = self.grid.dk();
        buf.iter_mut().for_each(|v| *v *= dk);
    }

    pub fn forward(&mut self, u: &Field) -> Result<Field> {
        u.expect_space(Space::Physical)?;
        self.grid.ensure_same(&u.grid)?;
        let mut buf = u.to_natural();
        self.forward_natural(&mut buf);
        Field::from_natural(self.grid, Space::Spectral, buf)
    }

    pub fn inverse(&mut self, u_hat: &Field) -> Result<Field> {
        u_hat.expect_space(Space::Spectral)?;
        self.grid.ensure_same(&u_hat.grid)?;
        let mut buf = u_hat.to_natural();
        self.inverse_natural(&mut buf);
        Field::from_natural(self.grid, Space::Physical, buf)
    }
}

/// `û(k) = dx Σ_j u(x_j) exp(-2iπ k x_j)`.
pub fn forward_transform(u: &Field) -> Result<Field> {
    Fourier::new(u.grid()).forward(u)
}

/// `u(x) = dk Σ_m û(k_m) exp(2iπ k_m x)`.
pub fn inverse_transform(u_hat: &Field) -> Result<Field> {
    Fourier::new(u_hat.grid()).inverse(u_hat)
}
