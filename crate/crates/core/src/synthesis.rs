//! Static samplers for the infinite-time fields.
//!
//! The large-time solution of the Hamiltonian dynamics is replaced by a
//! lattice white noise of intensity `C_f(0)/2|c|`; every other field is a
//! deterministic function of that surrogate.

use log::warn;
use num_complex::Complex64;

use crate::error::Result;
use crate::forcing::NoiseStream;
use crate::grid::{to_lattice, Field, Fourier, Grid, Space};
use crate::operators::{fractional_symbol, multiplier, Dealiaser, MultiplierKind, PhysParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SynthKind {
    Fgf { h: f64 },
    LogField,
    LogFieldOdd,
    Gmc { gamma: f64 },
    GmcOdd { gamma: f64 },
    Multifractal { h: f64, gamma: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthField {
    pub kind: SynthKind,
    /// Physical-space values.
    pub values: Field,
}

/// Per-site variance `C_f(0) / (2|c| dx)` of the white surrogate.
pub fn white_variance(grid: Grid, params: &PhysParams) -> f64 {
    params.cf0() / (2.0 * params.c.abs() * grid.dx())
}

/// Sampler holding transform plans and symbols for repeated draws.
#[derive(Debug)]
pub struct Synthesizer {
    grid: Grid,
    params: PhysParams,
    fourier: Fourier,
    dealiaser: Dealiaser,
    p0_tilde: Vec<Complex64>,
}

impl Synthesizer {
    pub fn new(grid: Grid, params: PhysParams) -> Self {
        let p0_tilde = grid
            .ks_natural()
            .iter()
            .map(|&k| multiplier(MultiplierKind::P0Tilde, k, &params))
            .collect();
        Self {
            grid,
            params,
            fourier: Fourier::new(grid),
            dealiaser: Dealiaser::new(grid),
            p0_tilde,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    /// White surrogate in natural physical order.
    fn white_natural(&self, stream: &mut NoiseStream) -> Vec<Complex64> {
        let var = white_variance(self.grid, &self.params);
        stream.complex_normals(self.grid.n(), 0.5 * var)
    }

    fn finish(&self, kind: SynthKind, mut natural: Vec<Complex64>) -> SynthField {
        to_lattice(&mut natural);
        SynthField {
            kind,
            values: Field::new(self.grid, Space::Physical, natural).expect("length matches grid"),
        }
    }

    fn fractional_in_place(&mut self, buf: &mut [Complex64], h: f64) {
        self.fourier.forward_natural(buf);
        let l = self.params.l;
        for (v, k) in buf.iter_mut().zip(self.grid.ks_natural()) {
            *v *= fractional_symbol(k, h, l);
        }
        self.fourier.inverse_natural(buf);
    }

    fn odd_log_in_place(&mut self, buf: &mut [Complex64]) {
        self.fourier.forward_natural(buf);
        for (v, s) in buf.iter_mut().zip(&self.p0_tilde) {
            *v *= s;
        }
        self.fourier.inverse_natural(buf);
    }

    pub fn white(&mut self, stream: &mut NoiseStream) -> Field {
        let mut w = self.white_natural(stream);
        to_lattice(&mut w);
        Field::new(self.grid, Space::Physical, w).expect("length matches grid")
    }

    /// `v_H = P_H w`.
    pub fn fgf(&mut self, h: f64, stream: &mut NoiseStream) -> SynthField {
        let mut w = self.white_natural(stream);
        self.fractional_in_place(&mut w, h);
        self.finish(SynthKind::Fgf { h }, w)
    }

    /// `v₀ = P₀ w`, or `ṽ₀ = P̃₀ w` when `odd`.
    pub fn log_field(&mut self, odd: bool, stream: &mut NoiseStream) -> SynthField {
        let mut w = self.white_natural(stream);
        if odd {
            self.odd_log_in_place(&mut w);
            self.finish(SynthKind::LogFieldOdd, w)
        } else {
            self.fractional_in_place(&mut w, 0.0);
            self.finish(SynthKind::LogField, w)
        }
    }

    /// `M_γ = e^{γ v₀}`, or `e^{γ ṽ₀}` when `odd`.
    pub fn gmc(&mut self, gamma: f64, odd: bool, stream: &mut NoiseStream) -> SynthField {
        let bound = gamma * gamma * self.params.cf0() / self.params.c.abs();
        if bound >= 1.0 {
            warn!("γ²C_f(0)/|c| = {bound:.3} ≥ 1: second moment of the chaos is not finite");
        }
        let mut v = self.log_field(odd, stream).values.into_values();
        for x in v.iter_mut() {
            *x = (gamma * *x).exp();
        }
        let kind = if odd {
            SynthKind::GmcOdd { gamma }
        } else {
            SynthKind::Gmc { gamma }
        };
        SynthField {
            kind,
            values: Field::new(self.grid, Space::Physical, v).expect("length matches grid"),
        }
    }

    /// `v_{H,γ} = P_H(e^{γ P̃₀ w} w)`.
    pub fn multifractal(&mut self, h: f64, gamma: f64, stream: &mut NoiseStream) -> SynthField {
        let bound = gamma * gamma * self.params.cf0() / self.params.c.abs();
        if bound >= (2.0 * h).min(1.0) {
            warn!("γ²C_f(0)/|c| = {bound:.3} ≥ min(2H, 1): outside the stated validity range");
        }
        let mut w = self.white_natural(stream);
        let kind = SynthKind::Multifractal { h, gamma };
        if gamma == 0.0 {
            self.fractional_in_place(&mut w, h);
            return self.finish(kind, w);
        }
        let mut w_hat = w.clone();
        self.fourier.forward_natural(&mut w_hat);
        let mut weight = w_hat.clone();
        for (v, s) in weight.iter_mut().zip(&self.p0_tilde) {
            *v *= s;
        }
        self.fourier.inverse_natural(&mut weight);
        for v in weight.iter_mut() {
            *v = (gamma * *v).exp();
        }
        self.fourier.forward_natural(&mut weight);
        let mut prod = vec![Complex64::new(0.0, 0.0); self.grid.n()];
        self.dealiaser.product_natural(&weight, &w_hat, &mut prod);
        let l = self.params.l;
        for (v, k) in prod.iter_mut().zip(self.grid.ks_natural()) {
            *v *= fractional_symbol(k, h, l);
        }
        self.fourier.inverse_natural(&mut prod);
        self.finish(kind, prod)
    }
}

pub fn sample_white_surrogate(grid: Grid, params: &PhysParams, stream: &mut NoiseStream) -> Field {
    Synthesizer::new(grid, *params).white(stream)
}

pub fn synth_fgf(h: f64, grid: Grid, params: &PhysParams, stream: &mut NoiseStream) -> SynthField {
    Synthesizer::new(grid, *params).fgf(h, stream)
}

pub fn synth_log_field(odd: bool, grid: Grid, params: &PhysParams, stream: &mut NoiseStream) -> SynthField {
    Synthesizer::new(grid, *params).log_field(odd, stream)
}

pub fn synth_gmc(gamma: f64, odd: bool, grid: Grid, params: &PhysParams, stream: &mut NoiseStream) -> SynthField {
    Synthesizer::new(grid, *params).gmc(gamma, odd, stream)
}

pub fn synth_multifractal(
    h: f64,
    gamma: f64,
    grid: Grid,
    params: &PhysParams,
    stream: &mut NoiseStream,
) -> SynthField {
    Synthesizer::new(grid, *params).multifractal(h, gamma, stream)
}

/// Average of `field` against the bump `g_ℓ(x) = g(x/ℓ)/ℓ` centred at
/// `x0`, with `g` the unit-integral smooth bump supported on `[-1, 1]`.
pub fn bump_average(field: &Field, x0: f64, ell: f64) -> Result<Complex64> {
    field.expect_space(Space::Physical)?;
    let grid = field.grid();
    let g = |y: f64| {
        if y.abs() < 1.0 {
            (-1.0 / (1.0 - y * y)).exp()
        } else {
            0.0
        }
    };
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for (i, v) in field.values().iter().enumerate() {
        let w = g((grid.x(i) - x0) / ell);
        if w > 0.0 {
            num += w * v;
            den += w;
        }
    }
    // discrete normalization keeps the average of a constant exact
    Ok(num / den)
}
