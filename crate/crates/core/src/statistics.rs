//! Estimators for spectra, increment moments and gradient statistics.
//!
//! Snapshots are treated as independent samples. Increment statistics are
//! accumulated per snapshot so that standard errors come from the spread
//! between snapshots; ratio estimators (skewness, flatness) use the
//! jackknife over snapshots.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{to_lattice, to_natural, Field, Fourier, Grid, Space};

#[derive(Clone, Debug, PartialEq)]
pub struct StatsTable {
    pub estimator: String,
    /// Name of the abscissa, with units (`k [1/length]`, `ell [length]`, ...).
    pub abscissa_name: String,
    pub abscissa: Vec<f64>,
    pub estimate: Vec<f64>,
    pub std_error: Vec<f64>,
    /// False where the estimate is undefined (e.g. zero variance).
    pub defined: Vec<bool>,
    pub n_samples: usize,
    pub config_hash: Option<String>,
}

impl StatsTable {
    pub fn new(estimator: &str, abscissa_name: &str, n_samples: usize) -> Self {
        Self {
            estimator: estimator.to_string(),
            abscissa_name: abscissa_name.to_string(),
            abscissa: Vec::new(),
            estimate: Vec::new(),
            std_error: Vec::new(),
            defined: Vec::new(),
            n_samples,
            config_hash: None,
        }
    }

    pub fn push(&mut self, x: f64, y: f64, se: f64) {
        let ok = y.is_finite() && se.is_finite();
        self.abscissa.push(x);
        self.estimate.push(if ok { y } else { f64::NAN });
        self.std_error.push(if ok { se.max(0.0) } else { f64::NAN });
        self.defined.push(ok);
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    /// Rows with abscissa in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.len())
            .filter(move |&i| self.defined[i] && self.abscissa[i] >= lo && self.abscissa[i] <= hi)
            .map(move |i| (self.abscissa[i], self.estimate[i], self.std_error[i]))
    }
}

/// Central band `|x| < fraction·L_tot` used for spatial averages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomogeneousRegion {
    pub fraction: f64,
}

impl Default for HomogeneousRegion {
    fn default() -> Self {
        Self { fraction: 0.2 }
    }
}

impl HomogeneousRegion {
    pub fn new(fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 0.5) {
            return Err(Error::Statistics(format!(
                "region fraction must lie in (0, 0.5], got {fraction}"
            )));
        }
        Ok(Self { fraction })
    }

    /// Lattice slots inside the region.
    pub fn slots(&self, grid: Grid) -> Vec<usize> {
        let half = self.fraction * grid.l_tot();
        (0..grid.n())
            .filter(|&i| {
                let x = grid.x(i);
                x > -half && x < half
            })
            .collect()
    }
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Jackknife estimate and standard error of `f(mean of columns)`.
fn jackknife(rows: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let n = rows.len();
    let width = rows[0].len();
    let mut total = vec![0.0; width];
    for r in rows {
        for (t, v) in total.iter_mut().zip(r) {
            *t += v;
        }
    }
    let full: Vec<f64> = total.iter().map(|t| t / n as f64).collect();
    let estimate = f(&full);
    if n < 2 {
        return (estimate, 0.0);
    }
    let mut loo = Vec::with_capacity(n);
    let mut buf = vec![0.0; width];
    for r in rows {
        for ((b, t), v) in buf.iter_mut().zip(&total).zip(r) {
            *b = (t - v) / (n - 1) as f64;
        }
        loo.push(f(&buf));
    }
    let m = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|v| (v - m).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;
    (estimate, var.sqrt())
}

/// Running average of `|û(k)|²/L_tot`.
#[derive(Clone, Debug)]
pub struct PeriodogramAccumulator {
    grid: Grid,
    fourier: Fourier,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    n: usize,
}

impl PeriodogramAccumulator {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n();
        Self {
            grid,
            fourier: Fourier::new(grid),
            sum: vec![0.0; n],
            sum_sq: vec![0.0; n],
            n: 0,
        }
    }

    /// Accepts physical or spectral snapshots.
    pub fn add(&mut self, u: &Field) -> Result<()> {
        self.grid.ensure_same(&u.grid())?;
        let spectral;
        let values = match u.space() {
            Space::Spectral => u.values(),
            Space::Physical => {
                spectral = self.fourier.forward(u)?;
                spectral.values()
            }
        };
        let l_tot = self.grid.l_tot();
        for ((s, q), v) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(values) {
            let p = v.norm_sqr() / l_tot;
            *s += p;
            *q += p * p;
        }
        self.n += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn finish(&self) -> Result<StatsTable> {
        if self.n == 0 {
            return Err(Error::Statistics("periodogram needs at least one snapshot".into()));
        }
        let n = self.n as f64;
        let mut table = StatsTable::new("periodogram", "k [1/length]", self.n);
        for (i, (s, q)) in self.sum.iter().zip(&self.sum_sq).enumerate() {
            let mean = s / n;
            let se = if self.n > 1 {
                ((q / n - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            table.push(self.grid.k(i), mean, se);
        }
        Ok(table)
    }
}

pub fn periodogram_avg(snapshots: &[Field]) -> Result<StatsTable> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::Statistics("periodogram needs at least one snapshot".into()))?;
    let mut acc = PeriodogramAccumulator::new(first.grid());
    for s in snapshots {
        acc.add(s)?;
    }
    acc.finish()
}

/// Log-spaced integer multiples of `dx` between `m_min` and `m_max`.
pub fn log_scales(m_min: usize, m_max: usize, per_decade: usize) -> Vec<usize> {
    let m_min = m_min.max(1);
    if m_max < m_min {
        return Vec::new();
    }
    let decades = (m_max as f64 / m_min as f64).log10();
    let count = (decades * per_decade as f64).ceil() as usize + 1;
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            let t = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
            (m_min as f64 * (m_max as f64 / m_min as f64).powf(t)).round() as usize
        })
        .collect();
    out.dedup();
    out
}

// per-snapshot moment slots
const ABS2: usize = 0;
const ABS4: usize = 1;
const RE2: usize = 2;
const RE3: usize = 3;
const IM2: usize = 4;
const IM3: usize = 5;
const THIRD_RE: usize = 6;
const THIRD_IM: usize = 7;
const FIXED: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Real,
    Imag,
}

impl Part {
    fn of(self, z: Complex64) -> f64 {
        match self {
            Part::Real => z.re,
            Part::Imag => z.im,
        }
    }
}

/// Increment moments `δℓu = u(x+ℓ) − u(x)` with both points inside the
/// region and no wraparound.
#[derive(Clone, Debug)]
pub struct IncrementAccumulator {
    grid: Grid,
    scales: Vec<usize>,
    orders: Vec<f64>,
    base: Vec<Vec<usize>>,
    fourier: Fourier,
    // rows[snapshot][scale * width + moment]
    rows: Vec<Vec<f64>>,
}

impl IncrementAccumulator {
    /// `scales` are lags in lattice sites; `orders` are extra `|δℓu|^p`
    /// moments to track.
    pub fn new(grid: Grid, region: HomogeneousRegion, scales: &[usize], orders: &[f64]) -> Result<Self> {
        let slots = region.slots(grid);
        let width = slots.len();
        let mut base = Vec::with_capacity(scales.len());
        for &m in scales {
            if m == 0 || m >= width {
                return Err(Error::Statistics(format!(
                    "scale {m}·dx does not fit the region of {width} sites"
                )));
            }
            base.push(slots[..width - m].to_vec());
        }
        Ok(Self {
            grid,
            scales: scales.to_vec(),
            orders: orders.to_vec(),
            base,
            fourier: Fourier::new(grid),
            rows: Vec::new(),
        })
    }

    fn width(&self) -> usize {
        FIXED + self.orders.len()
    }

    pub fn count(&self) -> usize {
        self.rows.len()
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn add(&mut self, u: &Field) -> Result<()> {
        self.grid.ensure_same(&u.grid())?;
        let physical;
        let v = match u.space() {
            Space::Physical => u.values(),
            Space::Spectral => {
                physical = self.fourier.inverse(u)?;
                physical.values()
            }
        };
        let width = self.width();
        let mut row = vec![0.0; self.scales.len() * width];
        for (si, (&m, base)) in self.scales.iter().zip(&self.base).enumerate() {
            let acc = &mut row[si * width..(si + 1) * width];
            for &j in base {
                let d = v[j + m] - v[j];
                let a2 = d.norm_sqr();
                acc[ABS2] += a2;
                acc[ABS4] += a2 * a2;
                acc[RE2] += d.re * d.re;
                acc[RE3] += d.re * d.re * d.re;
                acc[IM2] += d.im * d.im;
                acc[IM3] += d.im * d.im * d.im;
                acc[THIRD_RE] += d.re * a2;
                acc[THIRD_IM] += d.im * a2;
                let a = a2.sqrt();
                for (o, p) in self.orders.iter().enumerate() {
                    acc[FIXED + o] += a.powf(*p);
                }
            }
            let count = base.len() as f64;
            acc.iter_mut().for_each(|x| *x /= count);
        }
        self.rows.push(row);
        Ok(())
    }

    fn scale_rows(&self, si: usize) -> Vec<Vec<f64>> {
        let width = self.width();
        self.rows
            .iter()
            .map(|r| r[si * width..(si + 1) * width].to_vec())
            .collect()
    }

    fn ensure_samples(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Statistics("no snapshots accumulated".into()));
        }
        Ok(())
    }

    fn table_from(&self, name: &str, f: impl Fn(&[f64]) -> f64) -> Result<StatsTable> {
        self.ensure_samples()?;
        let dx = self.grid.dx();
        let mut table = StatsTable::new(name, "ell [length]", self.rows.len());
        for (si, &m) in self.scales.iter().enumerate() {
            let (est, se) = jackknife(&self.scale_rows(si), &f);
            table.push(m as f64 * dx, est, se);
        }
        Ok(table)
    }

    fn moment_table(&self, name: &str, slot: usize) -> Result<StatsTable> {
        self.ensure_samples()?;
        let dx = self.grid.dx();
        let mut table = StatsTable::new(name, "ell [length]", self.rows.len());
        for (si, &m) in self.scales.iter().enumerate() {
            let samples: Vec<f64> = self.scale_rows(si).iter().map(|r| r[slot]).collect();
            let (mean, se) = mean_and_se(&samples);
            table.push(m as f64 * dx, mean, se);
        }
        Ok(table)
    }

    /// `E|δℓu|^p` for a tracked order `p` (2 and 4 are always tracked).
    pub fn structure_function(&self, p: f64) -> Result<StatsTable> {
        let name = format!("structure_function_{p}");
        if p == 2.0 {
            return self.moment_table(&name, ABS2);
        }
        if p == 4.0 {
            return self.moment_table(&name, ABS4);
        }
        let o = self
            .orders
            .iter()
            .position(|&q| q == p)
            .ok_or_else(|| Error::Statistics(format!("order {p} was not accumulated")))?;
        self.moment_table(&name, FIXED + o)
    }

    /// `E[δℓu |δℓu|²]`, real or imaginary part.
    pub fn third_order(&self, part: Part) -> Result<StatsTable> {
        match part {
            Part::Real => self.moment_table("third_order_re", THIRD_RE),
            Part::Imag => self.moment_table("third_order_im", THIRD_IM),
        }
    }

    pub fn skewness(&self, part: Part) -> Result<StatsTable> {
        let (s2, s3, name) = match part {
            Part::Real => (RE2, RE3, "skewness_re"),
            Part::Imag => (IM2, IM3, "skewness_im"),
        };
        self.table_from(name, |m| {
            if m[s2] > 0.0 {
                m[s3] / m[s2].powf(1.5)
            } else {
                f64::NAN
            }
        })
    }

    pub fn flatness(&self) -> Result<StatsTable> {
        self.table_from("flatness", |m| {
            if m[ABS2] > 0.0 {
                m[ABS4] / (m[ABS2] * m[ABS2])
            } else {
                f64::NAN
            }
        })
    }
}

fn increments(snapshots: &[Field], region: HomogeneousRegion, scales: &[usize], orders: &[f64]) -> Result<IncrementAccumulator> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::Statistics("no snapshots".into()))?;
    let mut acc = IncrementAccumulator::new(first.grid(), region, scales, orders)?;
    for s in snapshots {
        acc.add(s)?;
    }
    Ok(acc)
}

/// `E|δℓu|^q` over log-spaced scales.
pub fn structure_function(snapshots: &[Field], q: f64, region: HomogeneousRegion, scales: &[usize]) -> Result<StatsTable> {
    increments(snapshots, region, scales, &[q])?.structure_function(q)
}

pub fn skewness_curve(snapshots: &[Field], part: Part, region: HomogeneousRegion, scales: &[usize]) -> Result<StatsTable> {
    increments(snapshots, region, scales, &[])?.skewness(part)
}

pub fn flatness_curve(snapshots: &[Field], region: HomogeneousRegion, scales: &[usize]) -> Result<StatsTable> {
    increments(snapshots, region, scales, &[])?.flatness()
}

/// Standardized histogram of one part of `∂ₓu` inside the region.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientPdf {
    /// Density over standardized bin centres.
    pub table: StatsTable,
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub kurtosis_se: f64,
    pub n_values: usize,
}

#[derive(Clone, Debug)]
pub struct GradientAccumulator {
    grid: Grid,
    part: Part,
    slots: Vec<usize>,
    fourier: Fourier,
    derivative: Vec<Complex64>,
    values: Vec<f64>,
    // per-snapshot raw moments 1..4
    rows: Vec<Vec<f64>>,
}

impl GradientAccumulator {
    pub fn new(grid: Grid, part: Part, region: HomogeneousRegion) -> Result<Self> {
        let slots = region.slots(grid);
        if slots.is_empty() {
            return Err(Error::Statistics("region contains no lattice sites".into()));
        }
        let derivative = grid
            .ks_natural()
            .iter()
            .map(|&k| Complex64::new(0.0, 2.0 * PI * k))
            .collect();
        Ok(Self {
            grid,
            part,
            slots,
            fourier: Fourier::new(grid),
            derivative,
            values: Vec::new(),
            rows: Vec::new(),
        })
    }

    pub fn add(&mut self, u: &Field) -> Result<()> {
        self.grid.ensure_same(&u.grid())?;
        let mut buf = u.to_natural();
        if u.space() == Space::Physical {
            self.fourier.forward_natural(&mut buf);
        }
        for (v, d) in buf.iter_mut().zip(&self.derivative) {
            *v *= d;
        }
        self.fourier.inverse_natural(&mut buf);
        to_lattice(&mut buf);
        let mut row = vec![0.0; 4];
        for &j in &self.slots {
            let x = self.part.of(buf[j]);
            self.values.push(x);
            row[0] += x;
            row[1] += x * x;
            row[2] += x * x * x;
            row[3] += x * x * x * x;
        }
        let n = self.slots.len() as f64;
        row.iter_mut().for_each(|r| *r /= n);
        self.rows.push(row);
        Ok(())
    }

    pub fn finish(&self, n_bins: usize) -> Result<GradientPdf> {
        if self.rows.is_empty() {
            return Err(Error::Statistics("no snapshots accumulated".into()));
        }
        if n_bins == 0 {
            return Err(Error::Statistics("histogram needs at least one bin".into()));
        }
        let central = |m: &[f64]| {
            let mu = m[0];
            let var = m[1] - mu * mu;
            let c3 = m[2] - 3.0 * mu * m[1] + 2.0 * mu.powi(3);
            let c4 = m[3] - 4.0 * mu * m[2] + 6.0 * mu * mu * m[1] - 3.0 * mu.powi(4);
            (mu, var, c3, c4)
        };
        let (_, kurt_se) = jackknife(&self.rows, |m| {
            let (_, var, _, c4) = central(m);
            c4 / (var * var) - 3.0
        });
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let mut m2 = 0.0;
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        for x in &self.values {
            let d = x - mean;
            m2 += d * d;
            m3 += d * d * d;
            m4 += d * d * d * d;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        if !(m2 > 0.0) {
            return Err(Error::Statistics("gradient has zero variance".into()));
        }
        let std = m2.sqrt();
        let width = 20.0 / n_bins as f64;
        let mut counts = vec![0usize; n_bins];
        for x in &self.values {
            let z = (x - mean) / std;
            let b = ((z + 10.0) / width).floor();
            if b >= 0.0 && (b as usize) < n_bins {
                counts[b as usize] += 1;
            }
        }
        let mut table = StatsTable::new("gradient_pdf", "standardized gradient", self.rows.len());
        for (b, &c) in counts.iter().enumerate() {
            let centre = -10.0 + (b as f64 + 0.5) * width;
            let density = c as f64 / (n * width);
            let se = (c as f64).sqrt() / (n * width);
            table.push(centre, density, se);
        }
        Ok(GradientPdf {
            table,
            mean,
            std,
            skewness: m3 / m2.powf(1.5),
            excess_kurtosis: m4 / (m2 * m2) - 3.0,
            kurtosis_se: kurt_se,
            n_values: self.values.len(),
        })
    }
}

pub fn gradient_pdf(snapshots: &[Field], part: Part, region: HomogeneousRegion, n_bins: usize) -> Result<GradientPdf> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::Statistics("no snapshots".into()))?;
    let mut acc = GradientAccumulator::new(first.grid(), part, region)?;
    for s in snapshots {
        acc.add(s)?;
    }
    acc.finish(n_bins)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope from the regression residuals.
    pub slope_se: f64,
    pub n_points: usize,
}

/// Least squares of `ln estimate` on `ln abscissa` over `[lo, hi]`.
pub fn fit_power_law(table: &StatsTable, lo: f64, hi: f64) -> Result<PowerLawFit> {
    let points: Vec<(f64, f64)> = table.window(lo, hi).map(|(x, y, _)| (x, y)).collect();
    if points.len() < 3 {
        return Err(Error::Statistics(format!(
            "power-law fit needs at least 3 points in [{lo}, {hi}], found {}",
            points.len()
        )));
    }
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::Statistics(format!(
            "nonpositive value ({x}, {y}) in power-law window"
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = if points.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(PowerLawFit {
        slope,
        intercept,
        r2,
        slope_se,
        n_points: points.len(),
    })
}

/// Default inertial window `[max(10dx, 3/k_ν), L/3]` in ℓ.
pub fn inertial_window(grid: Grid, l: f64, k_nu: f64) -> (f64, f64) {
    let lo = (10.0 * grid.dx()).max(if k_nu.is_finite() { 3.0 / k_nu } else { 0.0 });
    (lo, l / 3.0)
}

/// Natural-order spectral values, a convenience for the CLI and tests.
pub fn spectral_natural(u: &Field) -> Result<Vec<Complex64>> {
    let spectral = match u.space() {
        Space::Spectral => u.clone(),
        Space::Physical => Fourier::new(u.grid()).forward(u)?,
    };
    let mut v = spectral.into_values();
    to_natural(&mut v);
    Ok(v)
}
