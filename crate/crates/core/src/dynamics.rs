//! Time integration of the forced cascade equations.
//!
//! The state is stored spectrally. Each step draws one force instance and
//! applies the Heun predictor-corrector with the noise held fixed across
//! both stages.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use log::{debug, warn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forcing::{ForceGenerator, ForceSpec, NoiseStream};
use crate::grid::{to_natural, Field, Fourier, Grid, Space};
use crate::operators::{cascade_symbol_natural, multiplier, Dealiaser, MultiplierKind, PhysParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EvolutionVariant {
    /// `∂ₜu = 𝓛u + f`
    Hamiltonian,
    /// `∂ₜu = 𝓛u + ν∂²ₓu + f`
    HamiltonianViscous,
    /// `∂ₜu = P_H𝓛P_H⁻¹u + ν∂²ₓu + f`
    LinearFractional,
    /// Linear fractional dynamics plus `γP_H[(P̃₀𝓛P_H⁻¹u)(P_H⁻¹u)]`.
    Nonlinear,
}

impl EvolutionVariant {
    pub const ALL: [EvolutionVariant; 4] = [
        EvolutionVariant::Hamiltonian,
        EvolutionVariant::HamiltonianViscous,
        EvolutionVariant::LinearFractional,
        EvolutionVariant::Nonlinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EvolutionVariant::Hamiltonian => "hamiltonian",
            EvolutionVariant::HamiltonianViscous => "hamiltonian_viscous",
            EvolutionVariant::LinearFractional => "linear_fractional",
            EvolutionVariant::Nonlinear => "nonlinear",
        }
    }
}

impl fmt::Display for EvolutionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvolutionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        EvolutionVariant::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Spectral field.
    pub u: Field,
    pub step_index: u64,
    pub stream: NoiseStream,
}

impl SimState {
    pub fn zero(grid: Grid, stream: NoiseStream) -> Self {
        Self {
            t: 0.0,
            u: Field::zeros(grid, Space::Spectral),
            step_index: 0,
            stream,
        }
    }

    pub fn physical(&self) -> Result<Field> {
        Fourier::new(self.u.grid()).inverse(&self.u)
    }
}

/// Right-hand side evaluator with precomputed symbols and transform plans.
#[derive(Debug)]
pub struct RhsEngine {
    grid: Grid,
    variant: EvolutionVariant,
    params: PhysParams,
    fourier: Fourier,
    dealiaser: Option<Dealiaser>,
    cascade: Vec<Complex64>,
    ph: Vec<f64>,
    ph_inv: Vec<f64>,
    p0: Vec<Complex64>,
    visc: Vec<f64>,
    w: Vec<Complex64>,
    lw: Vec<Complex64>,
    prod: Vec<Complex64>,
}

impl RhsEngine {
    pub fn new(grid: Grid, variant: EvolutionVariant, params: PhysParams) -> Self {
        let ks = grid.ks_natural();
        let sym = |kind: MultiplierKind| -> Vec<Complex64> { ks.iter().map(|&k| multiplier(kind, k, &params)).collect() };
        let ph = sym(MultiplierKind::PH).iter().map(|v| v.re).collect();
        let ph_inv = sym(MultiplierKind::PHInv).iter().map(|v| v.re).collect();
        let visc = sym(MultiplierKind::Laplacian).iter().map(|v| params.nu * v.re).collect();
        let nonlinear = variant == EvolutionVariant::Nonlinear && params.gamma != 0.0;
        let zero = Complex64::new(0.0, 0.0);
        Self {
            grid,
            variant,
            params,
            fourier: Fourier::new(grid),
            dealiaser: nonlinear.then(|| Dealiaser::new(grid)),
            cascade: cascade_symbol_natural(grid, params.c),
            ph,
            ph_inv,
            p0: sym(MultiplierKind::P0Tilde),
            visc,
            w: vec![zero; grid.n()],
            lw: vec![zero; grid.n()],
            prod: vec![zero; grid.n()],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn variant(&self) -> EvolutionVariant {
        self.variant
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    /// `out = rhs(u)` for natural-order spectra.
    pub fn eval_natural(&mut self, u: &[Complex64], out: &mut [Complex64]) {
        match self.variant {
            EvolutionVariant::Hamiltonian | EvolutionVariant::HamiltonianViscous => {
                out.copy_from_slice(u);
                self.fourier.inverse_natural(out);
                for (v, s) in out.iter_mut().zip(&self.cascade) {
                    *v *= s;
                }
                self.fourier.forward_natural(out);
                if self.variant == EvolutionVariant::HamiltonianViscous {
                    for ((o, v), d) in out.iter_mut().zip(u).zip(&self.visc) {
                        *o += d * v;
                    }
                }
            }
            EvolutionVariant::LinearFractional | EvolutionVariant::Nonlinear => {
                for ((w, v), s) in self.w.iter_mut().zip(u).zip(&self.ph_inv) {
                    *w = v * s;
                }
                self.lw.copy_from_slice(&self.w);
                self.fourier.inverse_natural(&mut self.lw);
                for (v, s) in self.lw.iter_mut().zip(&self.cascade) {
                    *v *= s;
                }
                self.fourier.forward_natural(&mut self.lw);
                for ((o, v), s) in out.iter_mut().zip(&self.lw).zip(&self.ph) {
                    *o = v * s;
                }
                if let Some(dealiaser) = self.dealiaser.as_mut() {
                    for (v, s) in self.lw.iter_mut().zip(&self.p0) {
                        *v *= s;
                    }
                    dealiaser.product_natural(&self.lw, &self.w, &mut self.prod);
                    let gamma = self.params.gamma;
                    for ((o, v), s) in out.iter_mut().zip(&self.prod).zip(&self.ph) {
                        *o += gamma * s * v;
                    }
                }
                for ((o, v), d) in out.iter_mut().zip(u).zip(&self.visc) {
                    *o += d * v;
                }
            }
        }
    }

    pub fn eval(&mut self, u: &Field) -> Result<Field> {
        u.expect_space(Space::Spectral)?;
        self.grid.ensure_same(&u.grid())?;
        if !u.is_finite() {
            return Err(Error::NonFinite("rhs input"));
        }
        let input = u.to_natural();
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.n()];
        self.eval_natural(&input, &mut out);
        Field::from_natural(self.grid, Space::Spectral, out)
    }
}

/// Deterministic right-hand side of `variant` at a spectral state.
pub fn rhs(u: &Field, variant: EvolutionVariant, params: &PhysParams) -> Result<Field> {
    RhsEngine::new(u.grid(), variant, *params).eval(u)
}

/// Heun predictor-corrector with one force draw per step.
#[derive(Debug)]
pub struct Stepper {
    rhs: RhsEngine,
    forcing: Option<ForceGenerator>,
    u: Vec<Complex64>,
    r0: Vec<Complex64>,
    r1: Vec<Complex64>,
    star: Vec<Complex64>,
}

impl Stepper {
    /// `force = None` runs the unforced dynamics and draws no noise.
    pub fn new(grid: Grid, variant: EvolutionVariant, params: PhysParams, force: Option<ForceSpec>) -> Result<Self> {
        let forcing = force.map(|spec| ForceGenerator::new(grid, spec)).transpose()?;
        let zero = Complex64::new(0.0, 0.0);
        let n = grid.n();
        Ok(Self {
            rhs: RhsEngine::new(grid, variant, params),
            forcing,
            u: vec![zero; n],
            r0: vec![zero; n],
            r1: vec![zero; n],
            star: vec![zero; n],
        })
    }

    pub fn grid(&self) -> Grid {
        self.rhs.grid()
    }

    /// Advances `state` by `dt`. On instability the state is left untouched.
    pub fn step(&mut self, state: &mut SimState, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        state.u.expect_space(Space::Spectral)?;
        self.grid().ensure_same(&state.u.grid())?;
        let mut stream = state.stream;
        let force = self.forcing.as_mut().map(|g| g.sample_spectral_natural(&mut stream));

        self.u.copy_from_slice(state.u.values());
        to_natural(&mut self.u);
        self.rhs.eval_natural(&self.u, &mut self.r0);
        let sqdt = dt.sqrt();
        for i in 0..self.u.len() {
            let mut v = self.u[i] + self.r0[i] * dt;
            if let Some(f) = &force {
                v += f[i] * sqdt;
            }
            self.star[i] = v;
        }
        self.rhs.eval_natural(&self.star, &mut self.r1);
        let half_dt = 0.5 * dt;
        let mut finite = true;
        for i in 0..self.u.len() {
            let mut v = self.u[i] + (self.r0[i] + self.r1[i]) * half_dt;
            if let Some(f) = &force {
                v += f[i] * sqdt;
            }
            finite &= v.re.is_finite() && v.im.is_finite();
            self.star[i] = v;
        }
        let next_index = state.step_index + 1;
        if !finite {
            return Err(Error::Instability {
                t: next_index as f64 * dt,
                step_index: next_index,
            });
        }
        state.u = Field::from_natural(self.grid(), Space::Spectral, self.star.clone())?;
        state.step_index = next_index;
        state.t = next_index as f64 * dt;
        state.stream = stream;
        Ok(())
    }
}

/// One Heun step; `spec = None` disables the force.
pub fn heun_step(
    state: &SimState,
    dt: f64,
    variant: EvolutionVariant,
    params: &PhysParams,
    spec: Option<&ForceSpec>,
) -> Result<SimState> {
    let mut stepper = Stepper::new(state.u.grid(), variant, *params, spec.copied())?;
    let mut next = state.clone();
    stepper.step(&mut next, dt)?;
    Ok(next)
}

/// Full description of a reproducible run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: PhysParams,
    pub n: usize,
    /// Defaults to `dx`.
    pub dt: Option<f64>,
    /// Absolute end time, burn-in included.
    pub t_end: f64,
    pub burn_in: Option<f64>,
    /// Time between snapshots; defaults to `L/|c|`.
    pub snapshot_interval: Option<f64>,
    pub seed: u64,
    pub stream_id: u64,
    pub variant: EvolutionVariant,
    pub truncate_force: bool,
    /// Stride, in steps, of the energy and max|u| records.
    pub diagnostics_every: u64,
    /// Relative tolerance of the post-burn-in energy drift check.
    pub drift_tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: PhysParams::default(),
            n: 4096,
            dt: None,
            t_end: 10.0,
            burn_in: None,
            snapshot_interval: None,
            seed: 0,
            stream_id: 0,
            variant: EvolutionVariant::Nonlinear,
            truncate_force: true,
            diagnostics_every: 1,
            drift_tolerance: 0.05,
        }
    }
}

/// Burn-in long enough for the transport to fill the band up to the
/// viscous cutoff: the front of the forced spectrum moves at speed `|c|`.
pub fn default_burn_in(params: &PhysParams, grid: Grid) -> f64 {
    let k_max = grid.n() as f64 / (2.0 * grid.l_tot());
    let k_top = if params.nu > 0.0 { params.k_nu().min(k_max) } else { k_max };
    let c = params.c.abs();
    2.0 * params.l_tot * (1.0f64).max(1.0 / c) + (0.5 * k_top + 5.0 / params.l) / c
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.params.l_tot)
    }

    pub fn dt(&self) -> Result<f64> {
        Ok(self.dt.unwrap_or(self.grid()?.dx()))
    }

    pub fn burn_in(&self) -> Result<f64> {
        Ok(match self.burn_in {
            Some(b) => b,
            None => default_burn_in(&self.params, self.grid()?),
        })
    }

    pub fn snapshot_interval(&self) -> f64 {
        self.snapshot_interval
            .unwrap_or(self.params.l / self.params.c.abs())
    }

    pub fn force_spec(&self) -> ForceSpec {
        ForceSpec {
            l: self.params.l,
            l_tot: self.params.l_tot,
            truncated: self.truncate_force,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.force_spec().validate()?;
        let dt = self.dt()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        let burn = self.burn_in()?;
        if !(burn >= 0.0 && burn.is_finite()) {
            return Err(Error::Config(format!("burn-in must be non-negative, got {burn}")));
        }
        if !(self.snapshot_interval() > 0.0) {
            return Err(Error::Config("snapshot interval must be positive".into()));
        }
        if self.diagnostics_every == 0 {
            return Err(Error::Config("diagnostics stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> Result<u64> {
        Ok((self.t_end / self.dt()?).round() as u64)
    }

    pub fn burn_in_steps(&self) -> Result<u64> {
        Ok((self.burn_in()? / self.dt()?).ceil() as u64)
    }

    pub fn snapshot_every(&self) -> Result<u64> {
        Ok(((self.snapshot_interval() / self.dt()?).round() as u64).max(1))
    }

    pub fn is_snapshot_step(&self, step_index: u64) -> Result<bool> {
        let burn = self.burn_in_steps()?;
        Ok(step_index >= burn && (step_index - burn) % self.snapshot_every()? == 0)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub step: Vec<u64>,
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    pub max_abs: Vec<f64>,
    /// `|u|` at the lattice site `x = L_tot/2`.
    pub boundary_abs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub diagnostics: Diagnostics,
    pub snapshots: usize,
    /// Relative difference of mean energy between the two halves of the
    /// post-burn-in record.
    pub drift: Option<f64>,
    pub stationary: bool,
}

/// Relative drift of the mean between the first and second half.
pub fn half_window_drift(series: &[f64]) -> Option<f64> {
    if series.len() < 4 {
        return None;
    }
    let mid = series.len() / 2;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (a, b) = (mean(&series[..mid]), mean(&series[mid..]));
    let all = mean(series);
    (all != 0.0).then(|| (b - a).abs() / all.abs())
}

/// A run in progress; owns the stepper and the current state.
#[derive(Debug)]
pub struct Simulation {
    config: RunConfig,
    stepper: Stepper,
    state: SimState,
    physical: Fourier,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        let grid = config.grid()?;
        let state = SimState::zero(grid, NoiseStream::new(config.seed, config.stream_id));
        Self::resume(config, state)
    }

    /// Continues from a saved state on the same schedule as the original run.
    pub fn resume(config: RunConfig, state: SimState) -> Result<Self> {
        config.validate()?;
        config.params.warn_if_outside_validity();
        let grid = config.grid()?;
        grid.ensure_same(&state.u.grid())?;
        state.u.expect_space(Space::Spectral)?;
        let stepper = Stepper::new(grid, config.variant, config.params, Some(config.force_spec()))?;
        Ok(Self {
            config,
            stepper,
            state,
            physical: Fourier::new(grid),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Last finite state; still valid after an instability error.
    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn into_state(self) -> SimState {
        self.state
    }

    /// Runs to `t_end`, handing every snapshot to `on_snapshot`.
    pub fn run(&mut self, mut on_snapshot: impl FnMut(&SimState) -> Result<()>) -> Result<RunReport> {
        let dt = self.config.dt()?;
        let total = self.config.total_steps()?;
        let burn = self.config.burn_in_steps()?;
        let every = self.config.snapshot_every()?;
        let stride = self.config.diagnostics_every;
        let grid = self.stepper.grid();
        let dk = grid.dk();
        let mut diagnostics = Diagnostics::default();
        let mut snapshots = 0;
        let mut buf = vec![Complex64::new(0.0, 0.0); grid.n()];
        debug!(
            "run: {} steps of dt={dt:e}, burn-in {burn} steps, snapshot every {every} steps",
            total.saturating_sub(self.state.step_index)
        );
        while self.state.step_index < total {
            self.stepper.step(&mut self.state, dt)?;
            let s = self.state.step_index;
            if s % stride == 0 {
                let energy = self.state.u.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * dk;
                buf.copy_from_slice(self.state.u.values());
                to_natural(&mut buf);
                self.physical.inverse_natural(&mut buf);
                let max_abs = buf.iter().map(|v| v.norm()).fold(0.0, f64::max);
                diagnostics.step.push(s);
                diagnostics.t.push(self.state.t);
                diagnostics.energy.push(energy);
                diagnostics.max_abs.push(max_abs);
                // natural index N/2 is the lattice site x = L_tot/2
                diagnostics.boundary_abs.push(buf[grid.n() / 2].norm());
            }
            if s >= burn && (s - burn) % every == 0 {
                on_snapshot(&self.state)?;
                snapshots += 1;
            }
        }
        let post: Vec<f64> = diagnostics
            .step
            .iter()
            .zip(&diagnostics.energy)
            .filter(|(s, _)| **s >= burn)
            .map(|(_, e)| *e)
            .collect();
        let drift = half_window_drift(&post);
        let stationary = drift.is_none_or(|d| d <= self.config.drift_tolerance);
        if !stationary {
            warn!(
                "energy drift {:.3} after burn-in exceeds tolerance {}",
                drift.unwrap_or(f64::NAN),
                self.config.drift_tolerance
            );
        }
        Ok(RunReport {
            diagnostics,
            snapshots,
            drift,
            stationary,
        })
    }
}

/// Runs `config` from rest and collects every snapshot.
pub fn run_simulation(config: RunConfig) -> Result<(Vec<SimState>, RunReport)> {
    let mut sim = Simulation::new(config)?;
    let mut snaps = Vec::new();
    let report = sim.run(|s| {
        snaps.push(s.clone());
        Ok(())
    })?;
    Ok((snaps, report))
}

/// Linear fractional evolution solved exactly along characteristics for
/// the deterministic part.
///
/// In `w = P_H⁻¹u` the inviscid dynamics is `∂ₜw = 2iπcx·w + P_H⁻¹f`, which
/// is a pointwise rotation in physical space; on the lattice it shifts
/// modes by `c·dt/dk` per step. Each force instance is injected at the
/// middle of its step, the same weighting `1 + dt𝓛/2` the Heun scheme
/// applies to the noise. `forces` are physical-space draws, one per step.
pub fn exact_linear_evolve(
    grid: Grid,
    params: &PhysParams,
    dt: f64,
    forces: impl IntoIterator<Item = Field>,
) -> Result<Field> {
    if params.nu != 0.0 {
        return Err(Error::Config("exact linear solver requires ν = 0".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let mut xs = grid.xs();
    to_natural(&mut xs);
    let omega: Vec<f64> = xs.iter().map(|x| 2.0 * PI * params.c * x).collect();
    let full: Vec<Complex64> = omega.iter().map(|w| Complex64::from_polar(1.0, w * dt)).collect();
    let half: Vec<Complex64> = omega.iter().map(|w| Complex64::from_polar(1.0, 0.5 * w * dt)).collect();
    let ks = grid.ks_natural();
    let ph_inv: Vec<f64> = ks.iter().map(|&k| multiplier(MultiplierKind::PHInv, k, params).re).collect();
    let ph: Vec<f64> = ks.iter().map(|&k| multiplier(MultiplierKind::PH, k, params).re).collect();
    let mut fourier = Fourier::new(grid);
    let sqdt = dt.sqrt();
    let mut w = vec![Complex64::new(0.0, 0.0); grid.n()];
    for f in forces {
        f.expect_space(Space::Physical)?;
        grid.ensure_same(&f.grid())?;
        let mut g = f.to_natural();
        fourier.forward_natural(&mut g);
        for (v, s) in g.iter_mut().zip(&ph_inv) {
            *v *= s;
        }
        fourier.inverse_natural(&mut g);
        for i in 0..w.len() {
            w[i] = full[i] * w[i] + half[i] * g[i] * sqdt;
        }
    }
    fourier.forward_natural(&mut w);
    for (v, s) in w.iter_mut().zip(&ph) {
        *v *= s;
    }
    Field::from_natural(grid, Space::Spectral, w)
}

/// Replays the force draws a stepper would consume from `stream`.
pub fn recorded_forces(
    grid: Grid,
    spec: ForceSpec,
    mut stream: NoiseStream,
    steps: u64,
) -> Result<impl Iterator<Item = Field>> {
    let mut gen = ForceGenerator::new(grid, spec)?;
    Ok((0..steps).map(move |_| gen.sample(&mut stream)))
}
