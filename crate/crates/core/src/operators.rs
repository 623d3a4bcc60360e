//! Fourier multipliers, the cascade operator and the de-aliased product.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{to_natural, Field, Fourier, Grid, Space};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Model constants shared by the operators, the forcing and the oracles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysParams {
    /// Regularity parameter `H`.
    pub h: f64,
    /// Intermittency coefficient `γ`.
    pub gamma: f64,
    /// Viscosity `ν`.
    pub nu: f64,
    /// Cascade rate `c`; the sign selects the transport direction in `k`.
    pub c: f64,
    /// Integral length `L` (forcing width and regularization scale).
    pub l: f64,
    /// Domain period.
    pub l_tot: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            h: 1.0 / 3.0,
            gamma: 0.0,
            nu: 1e-5,
            c: 10.0,
            l: 0.1,
            l_tot: 1.0,
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.h, self.gamma, self.nu, self.c, self.l, self.l_tot];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("physical parameters must be finite".into()));
        }
        if !(self.h >= 0.0 && self.h < 1.0) {
            return Err(Error::Config(format!("H={} outside [0,1)", self.h)));
        }
        if self.c == 0.0 {
            return Err(Error::Config("cascade rate c must be nonzero".into()));
        }
        if self.nu < 0.0 {
            return Err(Error::Config(format!("viscosity {} is negative", self.nu)));
        }
        if !(self.l > 0.0 && self.l < self.l_tot) {
            return Err(Error::Config(format!(
                "need 0 < L < L_tot, got L={} L_tot={}",
                self.l, self.l_tot
            )));
        }
        Ok(())
    }

    /// Forcing covariance at the origin, `C_f(0) = sqrt(π) L`.
    pub fn cf0(&self) -> f64 {
        PI.sqrt() * self.l
    }

    /// `γ² C_f(0) / |c|`, the exponent that controls intermittency.
    pub fn intermittency(&self) -> f64 {
        self.gamma * self.gamma * self.cf0() / self.c.abs()
    }

    /// Viscous cutoff wavenumber `(|c|/ν)^{1/3}`; infinite when inviscid.
    pub fn k_nu(&self) -> f64 {
        if self.nu > 0.0 {
            (self.c.abs() / self.nu).cbrt()
        } else {
            f64::INFINITY
        }
    }

    /// Whether the multifractal moments of order `2q` are inside their
    /// stated validity range `γ²C_f(0)/|c| < min(2H/q, 1)`.
    pub fn multifractal_valid(&self, q: f64) -> bool {
        self.intermittency() < (2.0 * self.h / q).min(1.0)
    }

    /// Validity range of the third-order odd statistic, `< min(1, 3H/2)`.
    pub fn third_order_valid(&self) -> bool {
        self.intermittency() < (1.5 * self.h).min(1.0)
    }

    /// Emits a log warning when the second-order multifractal bound fails.
    pub fn warn_if_outside_validity(&self) -> bool {
        let ok = self.multifractal_valid(1.0);
        if !ok {
            log::warn!(
                "γ²C_f(0)/|c| = {:.4} is outside the validity range min(2H,1) = {:.4}",
                self.intermittency(),
                (2.0 * self.h).min(1.0)
            );
        }
        ok
    }
}

/// `|k|_{1/L} = sqrt(k² + 1/L²)`.
#[inline]
pub fn reg_norm(k: f64, l: f64) -> f64 {
    (k * k + 1.0 / (l * l)).sqrt()
}

/// `|k|_{1/L}^a = (k² + 1/L²)^{a/2}`.
#[inline]
pub fn reg_norm_pow(k: f64, l: f64, a: f64) -> f64 {
    (k * k + 1.0 / (l * l)).powf(0.5 * a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MultiplierKind {
    /// `|k|_{1/L}^{-(H+1/2)}`
    PH,
    /// `|k|_{1/L}^{H+1/2}`
    PHInv,
    /// `-i k |k|_{1/L}^{-3/2}`
    P0Tilde,
    /// `-(2π)² k²`
    Laplacian,
}

pub fn multiplier(kind: MultiplierKind, k: f64, params: &PhysParams) -> Complex64 {
    match kind {
        MultiplierKind::PH => Complex64::new(reg_norm_pow(k, params.l, -(params.h + 0.5)), 0.0),
        MultiplierKind::PHInv => Complex64::new(reg_norm_pow(k, params.l, params.h + 0.5), 0.0),
        MultiplierKind::P0Tilde => -I * k * reg_norm_pow(k, params.l, -1.5),
        MultiplierKind::Laplacian => Complex64::new(-(2.0 * PI * k).powi(2), 0.0),
    }
}

/// Symbol of `P_H` for an arbitrary exponent, used for `H = 0` log fields.
pub fn fractional_symbol(k: f64, h: f64, l: f64) -> f64 {
    reg_norm_pow(k, l, -(h + 0.5))
}

/// Multiplier values on the grid in FFT natural order.
pub fn symbol_natural(kind: MultiplierKind, grid: Grid, params: &PhysParams) -> Vec<Complex64> {
    grid.ks_natural()
        .into_iter()
        .map(|k| multiplier(kind, k, params))
        .collect()
}

pub fn apply_multiplier(u: &Field, kind: MultiplierKind, params: &PhysParams) -> Result<Field> {
    u.expect_space(Space::Spectral)?;
    let grid = u.grid();
    let values = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| multiplier(kind, grid.k(i), params) * v)
        .collect();
    Field::new(grid, Space::Spectral, values)
}

/// Cascade operator `𝓛u(x) = 2iπ c x u(x)` on the signed lattice coordinate.
pub fn apply_l(u: &Field, params: &PhysParams) -> Result<Field> {
    u.expect_space(Space::Physical)?;
    let grid = u.grid();
    let values = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| 2.0 * PI * params.c * grid.x(i) * I * v)
        .collect();
    Field::new(grid, Space::Physical, values)
}

/// Smallest even size not below `3N/2`.
pub fn padded_size(n: usize) -> usize {
    let m = (3 * n).div_ceil(2);
    m + (m % 2)
}

/// Quadratic products by the 3/2 rule.
///
/// Spectra are zero-padded to `M >= 3N/2` modes, multiplied on the refined
/// lattice and truncated back to the `N` lattice modes. All slice methods
/// take and return FFT natural order.
#[derive(Clone)]
pub struct Dealiaser {
    grid: Grid,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    pad_a: Vec<Complex64>,
    pad_b: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Dealiaser {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dealiaser")
            .field("grid", &self.grid)
            .field("m", &self.m)
            .finish()
    }
}

impl Dealiaser {
    pub fn new(grid: Grid) -> Self {
        let m = padded_size(grid.n());
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let zero = Complex64::new(0.0, 0.0);
        Self {
            grid,
            m,
            forward,
            inverse,
            pad_a: vec![zero; m],
            pad_b: vec![zero; m],
            scratch: vec![zero; len],
        }
    }

    pub fn padded_len(&self) -> usize {
        self.m
    }

    fn pad(n: usize, m: usize, src: &[Complex64], dst: &mut [Complex64]) {
        dst.fill(Complex64::new(0.0, 0.0));
        // natural slots 0..=N/2 hold modes 0..=N/2, the rest hold negative modes
        let half = n / 2;
        dst[..=half].copy_from_slice(&src[..=half]);
        let neg = n - half - 1;
        dst[m - neg..].copy_from_slice(&src[half + 1..]);
    }

    /// Spectral coefficients of the product of two natural-order spectra.
    pub fn product_natural(&mut self, a_hat: &[Complex64], b_hat: &[Complex64], out: &mut [Complex64]) {
        let n = self.grid.n();
        let m = self.m;
        let dk = self.grid.dk();
        let dx_fine = self.grid.l_tot() / m as f64;

        Self::pad(n, m, a_hat, &mut self.pad_a);
        Self::pad(n, m, b_hat, &mut self.pad_b);
        self.inverse
            .process_with_scratch(&mut self.pad_a, &mut self.scratch);
        self.inverse
            .process_with_scratch(&mut self.pad_b, &mut self.scratch);
        // dk from each inverse, dx_fine from the forward transform
        let scale = dk * dk * dx_fine;
        for (a, b) in self.pad_a.iter_mut().zip(&self.pad_b) {
            *a *= b * scale;
        }
        self.forward
            .process_with_scratch(&mut self.pad_a, &mut self.scratch);

        let half = n / 2;
        out[..=half].copy_from_slice(&self.pad_a[..=half]);
        let neg = n - half - 1;
        out[half + 1..].copy_from_slice(&self.pad_a[m - neg..]);
    }

    /// Product of two fields given in the same space; returns a spectral field.
    pub fn product(&mut self, a: &Field, b: &Field) -> Result<Field> {
        self.grid.ensure_same(&a.grid())?;
        self.grid.ensure_same(&b.grid())?;
        b.expect_space(a.space())?;
        let (a_hat, b_hat) = match a.space() {
            Space::Spectral => (a.to_natural(), b.to_natural()),
            Space::Physical => {
                let mut fourier = Fourier::new(self.grid);
                let mut a_hat = a.to_natural();
                let mut b_hat = b.to_natural();
                fourier.forward_natural(&mut a_hat);
                fourier.forward_natural(&mut b_hat);
                (a_hat, b_hat)
            }
        };
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.n()];
        self.product_natural(&a_hat, &b_hat, &mut out);
        Field::from_natural(self.grid, Space::Spectral, out)
    }
}

/// De-aliased pointwise product `a·b`, returned as a spectral field.
pub fn dealias_product(a: &Field, b: &Field) -> Result<Field> {
    a.grid().ensure_same(&b.grid())?;
    Dealiaser::new(a.grid()).product(a, b)
}

/// Natural-order copy of the lattice coordinates multiplied by `2iπc`.
pub(crate) fn cascade_symbol_natural(grid: Grid, c: f64) -> Vec<Complex64> {
    let mut xs = grid.xs();
    to_natural(&mut xs);
    xs.into_iter().map(|x| 2.0 * PI * c * x * I).collect()
}
