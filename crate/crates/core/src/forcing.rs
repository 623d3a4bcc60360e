//! White-in-time, Gaussian-in-space complex forcing.
//!
//! The force is the convolution of the Gaussian kernel `e^{-x²/2L²}` with a
//! complex white increment `dW`, so that `E[f(x) conj f(y)] = C_f(x-y)` with
//! `C_f(x) = √π L e^{-x²/4L²}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{to_lattice, Field, Fourier, Grid, Space};

/// Counter-based source of Gaussian draws.
///
/// Each draw consumes one counter value and reads from its own ChaCha
/// stream, so any draw can be regenerated from `(master_seed, stream_id,
/// counter)` alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseStream {
    pub master_seed: u64,
    pub stream_id: u64,
    pub counter: u64,
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl NoiseStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self::at(master_seed, stream_id, 0)
    }

    pub fn at(master_seed: u64, stream_id: u64, counter: u64) -> Self {
        Self {
            master_seed,
            stream_id,
            counter,
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut salt = self.stream_id;
        let mut state = self.master_seed ^ splitmix(&mut salt);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
        }
        key
    }

    /// Generator for the current counter value; advances the counter.
    pub fn next_rng(&mut self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(self.counter);
        self.counter += 1;
        rng
    }

    /// Fills `out` with independent standard normals as one draw.
    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        let mut rng = self.next_rng();
        for v in out.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }

    /// One draw of i.i.d. complex values with independent real and
    /// imaginary parts, each of variance `var`.
    pub fn complex_normals(&mut self, n: usize, var: f64) -> Vec<Complex64> {
        let mut rng = self.next_rng();
        let sd = var.sqrt();
        (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(sd * re, sd * im)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForceSpec {
    pub l: f64,
    pub l_tot: f64,
    pub truncated: bool,
}

impl ForceSpec {
    pub fn new(l: f64, l_tot: f64, truncated: bool) -> Result<Self> {
        let spec = Self { l, l_tot, truncated };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l_tot > 0.0 && self.l.is_finite() && self.l_tot.is_finite()) {
            return Err(Error::Config(format!(
                "forcing lengths must be positive, got L={} L_tot={}",
                self.l, self.l_tot
            )));
        }
        if self.l >= self.l_tot / 2.0 {
            return Err(Error::Config(format!(
                "forcing kernel width L={} does not fit the period L_tot={}",
                self.l, self.l_tot
            )));
        }
        Ok(())
    }

    pub fn cf0(&self) -> f64 {
        PI.sqrt() * self.l
    }

    pub fn covariance(&self, x: f64) -> f64 {
        covariance(x, self.l)
    }

    pub fn covariance_hat(&self, k: f64) -> f64 {
        covariance_hat(k, self.l)
    }

    /// Transform of the convolution kernel `e^{-x²/2L²}`.
    pub fn kernel_hat(&self, k: f64) -> f64 {
        (2.0 * PI * self.l * self.l).sqrt() * (-2.0 * PI * PI * k * k * self.l * self.l).exp()
    }
}

/// `C_f(x) = √π L e^{-x²/4L²}`.
pub fn covariance(x: f64, l: f64) -> f64 {
    PI.sqrt() * l * (-x * x / (4.0 * l * l)).exp()
}

/// `Ĉ_f(k) = 2πL² e^{-4π²k²L²}`.
pub fn covariance_hat(k: f64, l: f64) -> f64 {
    2.0 * PI * l * l * (-4.0 * PI * PI * k * k * l * l).exp()
}

/// Smooth bump `exp(-x²/(L_tot²/4 - x²))`, zero for `|x| ≥ L_tot/2`.
pub fn truncation_window(x: f64, l_tot: f64) -> f64 {
    let edge = 0.25 * l_tot * l_tot - x * x;
    if edge <= 0.0 {
        0.0
    } else {
        (-x * x / edge).exp()
    }
}

/// White increment with real and imaginary parts each `N(0, dx/2)`.
pub fn sample_white_increment(grid: Grid, stream: &mut NoiseStream) -> Field {
    let values = stream.complex_normals(grid.n(), 0.5 * grid.dx());
    Field::new(grid, Space::Physical, values).expect("length matches grid")
}

/// Reusable force synthesizer holding the kernel and transform plans.
#[derive(Debug)]
pub struct ForceGenerator {
    spec: ForceSpec,
    grid: Grid,
    fourier: Fourier,
    // kernel_hat / dx in natural order
    filter: Vec<f64>,
    // window in natural order
    window: Vec<f64>,
}

impl ForceGenerator {
    pub fn new(grid: Grid, spec: ForceSpec) -> Result<Self> {
        spec.validate()?;
        if (spec.l_tot - grid.l_tot()).abs() > 1e-12 * grid.l_tot() {
            return Err(Error::Config(format!(
                "forcing period {} differs from grid period {}",
                spec.l_tot,
                grid.l_tot()
            )));
        }
        let dx = grid.dx();
        let filter = grid.ks_natural().iter().map(|&k| spec.kernel_hat(k) / dx).collect();
        let window = grid
            .xs_natural()
            .iter()
            .map(|&x| truncation_window(x, spec.l_tot))
            .collect();
        Ok(Self {
            spec,
            grid,
            fourier: Fourier::new(grid),
            filter,
            window,
        })
    }

    pub fn spec(&self) -> ForceSpec {
        self.spec
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// One force draw in natural physical order, windowed if `truncated`.
    pub fn sample_natural(&mut self, stream: &mut NoiseStream) -> Vec<Complex64> {
        self.sample_natural_with(stream, self.spec.truncated)
    }

    pub fn sample_natural_with(&mut self, stream: &mut NoiseStream, truncated: bool) -> Vec<Complex64> {
        // the transform of i.i.d. dW is i.i.d. with variance dx²·L_tot per mode
        let dx = self.grid.dx();
        let mut buf = stream.complex_normals(self.grid.n(), 0.5 * dx * dx * self.grid.l_tot());
        for (v, &g) in buf.iter_mut().zip(&self.filter) {
            *v *= g;
        }
        self.fourier.inverse_natural(&mut buf);
        if truncated {
            for (v, &w) in buf.iter_mut().zip(&self.window) {
                *v *= w;
            }
        }
        buf
    }

    /// One force draw transformed to spectral space, natural order.
    pub fn sample_spectral_natural(&mut self, stream: &mut NoiseStream) -> Vec<Complex64> {
        let mut buf = self.sample_natural(stream);
        self.fourier.forward_natural(&mut buf);
        buf
    }

    pub fn sample(&mut self, stream: &mut NoiseStream) -> Field {
        let mut values = self.sample_natural(stream);
        to_lattice(&mut values);
        Field::new(self.grid, Space::Physical, values).expect("length matches grid")
    }
}

pub fn sample_force(grid: Grid, spec: &ForceSpec, stream: &mut NoiseStream) -> Result<Field> {
    let mut gen = ForceGenerator::new(grid, ForceSpec { truncated: false, ..*spec })?;
    Ok(gen.sample(stream))
}

pub fn sample_truncated_force(grid: Grid, spec: &ForceSpec, stream: &mut NoiseStream) -> Result<Field> {
    let mut gen = ForceGenerator::new(grid, ForceSpec { truncated: true, ..*spec })?;
    Ok(gen.sample(stream))
}
