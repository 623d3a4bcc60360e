//! Closed forms and quadratures for the statistical predictions of the
//! model, used as ground truth by the tests and by `cascade oracle`.
//!
//! All linear spectra are written in the variable `u = k - cs` as
//!
//! `Ĉ(t, k) = |k|^{-(2H+1)}_{1/L} / |c| ∫ |u|^{2H+1}_{1/L} V(u) Ĉ_f(u) du`
//!
//! over `u` between `k - ct` and `k`, with the viscous attenuation
//! `V(u) = exp(-2(2π)²ν (k³ - u³) / 3c)`. The Hamiltonian dynamics is the
//! case `H = -1/2`.

use std::f64::consts::PI;

use log::warn;
use statrs::function::erf::erf;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::forcing::{covariance_hat, truncation_window};
use crate::operators::{reg_norm_pow, PhysParams};
use crate::quadrature::{cosine_power_tail, gauss_kronrod, gauss_kronrod_pieces, half_line, two_resolution};

const BASE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Quadrature,
    Characteristics,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Quadrature => "quadrature",
            Method::Characteristics => "characteristics",
        }
    }
}

/// A number with its estimated numerical error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }

    pub fn rel_error(&self) -> f64 {
        if self.value == 0.0 {
            self.error
        } else {
            self.error / self.value.abs()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleValue {
    pub name: String,
    pub value: f64,
    pub units: String,
    pub method: Method,
    /// Two-resolution difference for quadratures, zero for closed forms.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub params: PhysParams,
    pub values: Vec<OracleValue>,
    /// Set when the parameters lie outside the range where the prediction
    /// is established.
    pub outside_validity: bool,
    pub notes: Vec<String>,
}

impl OracleReport {
    fn new(name: &str, params: PhysParams) -> Self {
        Self {
            name: name.to_string(),
            params,
            values: Vec::new(),
            outside_validity: false,
            notes: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, units: &str, method: Method, e: Estimate) {
        self.values.push(OracleValue {
            name: name.to_string(),
            value: e.value,
            units: units.to_string(),
            method,
            error: e.error,
        });
    }

    pub fn get(&self, name: &str) -> Option<&OracleValue> {
        self.values.iter().find(|v| v.name == name)
    }

    pub fn value(&self, name: &str) -> Result<f64> {
        self.get(name)
            .map(|v| v.value)
            .ok_or_else(|| Error::Quadrature(format!("oracle {} has no value {name}", self.name)))
    }
}

fn quad(integrate: impl FnMut(f64) -> Result<f64>) -> Result<Estimate> {
    let (value, error) = two_resolution(integrate, BASE_TOL)?;
    Ok(Estimate { value, error })
}

/// Half-width in `u` beyond which `Ĉ_f` is below `e^{-350}` of its peak.
fn forcing_support(l: f64) -> f64 {
    3.0 / l
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearModel {
    /// `∂ₜu = 𝓛u + f`.
    Hamiltonian,
    /// `∂ₜu = P_H 𝓛 P_H⁻¹ u + f`.
    Fractional,
}

fn linear_spectrum(t: f64, k: f64, h: f64, nu: f64, c: f64, l: f64) -> Result<Estimate> {
    if !(t >= 0.0) {
        return Err(Error::Config(format!("spectrum time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let s = forcing_support(l);
    let (mut lo, mut hi) = if c > 0.0 { (k - c * t, k) } else { (k, k - c * t) };
    lo = lo.max(-s);
    hi = hi.min(s);
    if !(lo < hi) {
        return Ok(Estimate::exact(0.0));
    }
    let a = 2.0 * h + 1.0;
    let k3 = k * k * k;
    let integrand = |u: f64| {
        let damping = if nu > 0.0 {
            (-2.0 * (2.0 * PI).powi(2) * nu * (k3 - u * u * u) / (3.0 * c)).exp()
        } else {
            1.0
        };
        reg_norm_pow(u, l, a) * damping * covariance_hat(u, l)
    };
    let prefactor = reg_norm_pow(k, l, -a) / c.abs();
    let mut breaks = vec![lo];
    if lo < 0.0 && hi > 0.0 {
        breaks.push(0.0);
    }
    breaks.push(hi);
    let e = quad(|tol| Ok(gauss_kronrod_pieces(integrand, &breaks, 1e-300, tol)?.value))?;
    Ok(Estimate {
        value: prefactor * e.value,
        error: prefactor * e.error,
    })
}

fn model_h(model: LinearModel, params: &PhysParams) -> f64 {
    match model {
        LinearModel::Hamiltonian => -0.5,
        LinearModel::Fractional => params.h,
    }
}

/// Infinite-time inviscid spectrum of the fractional dynamics.
pub fn stationary_spectrum(k: f64, params: &PhysParams) -> Result<Estimate> {
    if !(params.h > 0.0) {
        return Err(Error::Config(format!(
            "the stationary spectrum needs H > 0, got H={}",
            params.h
        )));
    }
    linear_spectrum(f64::INFINITY, k, params.h, 0.0, params.c, params.l)
}

/// Inviscid spectrum at time `t` from a zero initial condition.
pub fn finite_time_spectrum(t: f64, k: f64, params: &PhysParams, model: LinearModel) -> Result<Estimate> {
    linear_spectrum(t, k, model_h(model, params), 0.0, params.c, params.l)
}

/// Spectrum at time `t` with viscosity `params.nu`; `t` may be infinite.
pub fn viscous_spectrum(t: f64, k: f64, params: &PhysParams, model: LinearModel) -> Result<Estimate> {
    linear_spectrum(t, k, model_h(model, params), params.nu, params.c, params.l)
}

/// Inviscid Hamiltonian spectrum in closed form,
/// `(√π L / 2c) [erf(2πLk) - erf(2πL(k - ct))]`.
pub fn hamiltonian_spectrum_closed(t: f64, k: f64, params: &PhysParams) -> f64 {
    let l = params.l;
    let c = params.c;
    PI.sqrt() * l / (2.0 * c) * (erf(2.0 * PI * l * k) - erf(2.0 * PI * l * (k - c * t)))
}

/// `∫ |s|^{2H+1}_{1/L} Ĉ_f(s) ds` over the real line.
pub fn forcing_moment(h: f64, l: f64) -> Result<Estimate> {
    let s = forcing_support(l);
    let a = 2.0 * h + 1.0;
    let half = quad(|tol| {
        Ok(gauss_kronrod(|u| reg_norm_pow(u, l, a) * covariance_hat(u, l), 0.0, s, 1e-300, tol)?.value)
    })?;
    Ok(Estimate {
        value: 2.0 * half.value,
        error: 2.0 * half.error,
    })
}

/// `J(α) = ∫₀^∞ (1 - cos 2πk) k^{-α} dk` in closed form, `1 < α < 3`.
pub fn cosine_integral_closed(alpha: f64) -> f64 {
    (2.0 * PI).powf(alpha - 1.0) * PI / (2.0 * gamma(alpha) * (PI * (alpha - 1.0) / 2.0).sin())
}

/// `J(α)` by quadrature: a power series near the origin, adaptive
/// Gauss-Kronrod up to `k = 32` and an asymptotic expansion of the tail.
pub fn cosine_integral(alpha: f64) -> Result<Estimate> {
    if !(alpha > 1.0 && alpha < 3.0) {
        return Err(Error::Config(format!("cosine integral needs 1 < α < 3, got {alpha}")));
    }
    let eps: f64 = 0.25;
    let far: f64 = 32.0;
    let mut head = 0.0;
    let mut term = 1.0;
    for j in 1..40 {
        let n = 2 * j;
        term *= (2.0 * PI).powi(2) / ((n - 1) as f64 * n as f64);
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        head += sign * term * eps.powf(n as f64 + 1.0 - alpha) / (n as f64 + 1.0 - alpha);
    }
    let tail = far.powf(1.0 - alpha) / (alpha - 1.0) - cosine_power_tail(alpha, far, 40);
    let mut breaks = vec![eps, 0.5];
    breaks.extend((1..=far as usize).map(|i| i as f64));
    let body = quad(|tol| {
        Ok(gauss_kronrod_pieces(
            |k| 2.0 * (PI * k).sin().powi(2) * k.powf(-alpha),
            &breaks,
            1e-300,
            tol,
        )?
        .value)
    })?;
    Ok(Estimate {
        value: head + body.value + tail,
        error: body.error,
    })
}

fn check_h_open(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Config(format!("c_H needs 0 < H < 1, got H={h}")));
    }
    Ok(())
}

/// Small-scale prefactor `c_H` through the Γ-function closed form.
pub fn c_h_gamma_form(params: &PhysParams) -> Result<Estimate> {
    let h = params.h;
    check_h_open(h)?;
    let m = forcing_moment(h, params.l)?;
    let f = (2.0 * PI).powf(2.0 * h + 1.0) / (2.0 * params.c.abs() * (PI * h).sin() * gamma(1.0 + 2.0 * h));
    Ok(Estimate {
        value: f * m.value,
        error: f * m.error,
    })
}

/// `c_H` from its definition, `(2/|c|) ∫|s|^{2H+1}Ĉ_f ds · J(2H+1)`.
pub fn c_h_definitional(params: &PhysParams) -> Result<Estimate> {
    let h = params.h;
    check_h_open(h)?;
    let m = forcing_moment(h, params.l)?;
    let j = cosine_integral(2.0 * h + 1.0)?;
    let f = 2.0 / params.c.abs();
    Ok(Estimate {
        value: f * m.value * j.value,
        error: f * (m.error * j.value.abs() + j.error * m.value.abs()),
    })
}

pub fn c_h(params: &PhysParams) -> Result<OracleReport> {
    let mut r = OracleReport::new("c_h", *params);
    r.push("c_h", "length^(-2H) * field^2", Method::Quadrature, c_h_gamma_form(params)?);
    r.push(
        "c_h_definitional",
        "length^(-2H) * field^2",
        Method::Quadrature,
        c_h_definitional(params)?,
    );
    Ok(r)
}

/// `∫₀^∞ e^{-(2/3)(2π)² s³} ds` by quadrature.
pub fn viscous_s_integral() -> Result<Estimate> {
    let a = 2.0 / 3.0 * (2.0 * PI).powi(2);
    quad(|tol| Ok(half_line(|s| (-a * s * s * s).exp(), 0.0, 1e-300, tol)?.value))
}

/// `Γ(4/3) ((2/3)(2π)²)^{-1/3}`.
pub fn viscous_s_integral_closed() -> f64 {
    gamma(4.0 / 3.0) * (2.0 / 3.0 * (2.0 * PI).powi(2)).powf(-1.0 / 3.0)
}

/// `∫ w(x)² dx / L_tot` for the truncation window; independent of `L_tot`.
pub fn truncation_weight(l_tot: f64) -> Result<Estimate> {
    let half = 0.5 * l_tot;
    let e = quad(|tol| {
        Ok(gauss_kronrod(
            |x| truncation_window(x, l_tot).powi(2),
            -half,
            half,
            1e-300,
            tol,
        )?
        .value)
    })?;
    Ok(Estimate {
        value: e.value / l_tot,
        error: e.error / l_tot,
    })
}

/// Truncation weight, viscous cutoff and the small-ν variance of the
/// viscous Hamiltonian dynamics.
pub fn misc_constants(params: &PhysParams) -> Result<OracleReport> {
    let mut r = OracleReport::new("misc_constants", *params);
    r.push("truncation_weight", "1", Method::Quadrature, truncation_weight(params.l_tot)?);
    r.push("k_nu", "1/length", Method::ClosedForm, Estimate::exact(params.k_nu()));
    let s = viscous_s_integral()?;
    r.push("viscous_s_integral", "1", Method::Quadrature, s);
    r.push(
        "viscous_s_integral_closed",
        "1",
        Method::ClosedForm,
        Estimate::exact(viscous_s_integral_closed()),
    );
    let variance = if params.nu > 0.0 {
        params.cf0() * viscous_s_integral_closed() / (params.nu.cbrt() * params.c.abs().powf(2.0 / 3.0))
    } else {
        f64::INFINITY
    };
    r.push("viscous_variance_limit", "field^2", Method::ClosedForm, Estimate::exact(variance));
    Ok(r)
}

/// `∫_ℝ |k|^{-(2H+1)}_{1/L} dk`, through `k = tan(θ)/L`.
pub fn fractional_norm_integral(h: f64, l: f64) -> Result<Estimate> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("integral diverges for H={h}")));
    }
    // ∫_ℝ (k² + b²)^{-s} dk = 2 b^{1-2s} ∫₀^{π/2} sin^{2H-1}(φ) dφ, then
    // y = φ^{2H} removes the endpoint singularity
    let b = 1.0 / l;
    let p = 2.0 * h - 1.0;
    let f = 2.0 * b.powf(-2.0 * h) / (2.0 * h);
    let top = (0.5 * PI).powf(2.0 * h);
    let smooth = |y: f64| {
        if y <= 0.0 {
            return 1.0;
        }
        let phi = y.powf(1.0 / (2.0 * h));
        (phi.sin() / phi).powf(p)
    };
    let e = quad(|tol| Ok(gauss_kronrod(smooth, 0.0, top, 1e-300, tol)?.value))?;
    Ok(Estimate {
        value: f * e.value,
        error: f * e.error,
    })
}

/// `L^{2H} √π Γ(H) / Γ(H + 1/2)`.
pub fn fractional_norm_integral_closed(h: f64, l: f64) -> f64 {
    l.powf(2.0 * h) * PI.sqrt() * gamma(h) / gamma(h + 0.5)
}

/// Variance, increment prefactor and logarithmic slope of the static
/// fractional Gaussian field `P_H w`.
pub fn fgf_statics(h: f64, params: &PhysParams) -> Result<OracleReport> {
    if !(h >= 0.0 && h < 1.0) {
        return Err(Error::Config(format!("fGf statics need 0 ≤ H < 1, got H={h}")));
    }
    let mut r = OracleReport::new("fgf_statics", PhysParams { h, ..*params });
    let white = params.cf0() / (2.0 * params.c.abs());
    if h > 0.0 {
        let n = fractional_norm_integral(h, params.l)?;
        r.push(
            "variance",
            "field^2",
            Method::Quadrature,
            Estimate {
                value: white * n.value,
                error: white * n.error,
            },
        );
        r.push(
            "variance_closed",
            "field^2",
            Method::ClosedForm,
            Estimate::exact(white * fractional_norm_integral_closed(h, params.l)),
        );
        let j = cosine_integral(2.0 * h + 1.0)?;
        r.push(
            "increment_prefactor",
            "length^(-2H) * field^2",
            Method::Quadrature,
            Estimate {
                value: 4.0 * white * j.value,
                error: 4.0 * white * j.error,
            },
        );
        r.push(
            "increment_prefactor_closed",
            "length^(-2H) * field^2",
            Method::ClosedForm,
            Estimate::exact(4.0 * white * cosine_integral_closed(2.0 * h + 1.0)),
        );
    } else {
        r.push("variance", "field^2", Method::ClosedForm, Estimate::exact(f64::INFINITY));
        r.notes
            .push("variance diverges logarithmically in time for H = 0".to_string());
    }
    r.push(
        "log_slope",
        "field^2",
        Method::ClosedForm,
        Estimate::exact(params.cf0() / params.c.abs()),
    );
    Ok(r)
}

/// Inner factor of the multifractal second-order prefactor,
/// `-(2π)^a Γ(1-a) cos(aπ/2) ∫_ℝ |e^{2iπk}-1|² |k|^{-(2H+1-a)} dk`,
/// with `a = γ²C_f(0)/|c|`.
pub fn gamma_identity_factor(params: &PhysParams) -> Result<OracleReport> {
    let a = params.intermittency();
    let h = params.h;
    let mut r = OracleReport::new("gamma_identity_factor", *params);
    if !(a < 1.0 && a < 2.0 * h && h < 1.0) {
        r.outside_validity = true;
        r.notes.push(format!("needs a < min(2H, 1), got a={a}"));
        return Ok(r);
    }
    let alpha = 2.0 * h + 1.0 - a;
    let pre = -(2.0 * PI).powf(a) * gamma(1.0 - a) * (a * PI / 2.0).cos() * 4.0;
    let j = cosine_integral(alpha)?;
    r.push(
        "factor",
        "1",
        Method::Quadrature,
        Estimate {
            value: pre * j.value,
            error: (pre * j.error).abs(),
        },
    );
    r.push(
        "factor_closed",
        "1",
        Method::ClosedForm,
        Estimate::exact(pre * cosine_integral_closed(alpha)),
    );
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExponentKind {
    /// `ζ₂ = 2H` of the fractional Gaussian field.
    FgfS2,
    /// Exponent of `L/ℓ` in the `2q`-th moment of the bump-averaged chaos.
    GmcMoment,
    /// `ζ_{2q} = 2qH - q²γ²C_f(0)/|c|`.
    MultifractalS2q,
    /// `3H - 2γ²C_f(0)/|c|`.
    ThirdOrder,
    /// Log-slope of the flatness, `-2γ²C_f(0)/|c|`.
    FlatnessSlope,
}

impl ExponentKind {
    pub const ALL: [ExponentKind; 5] = [
        ExponentKind::FgfS2,
        ExponentKind::GmcMoment,
        ExponentKind::MultifractalS2q,
        ExponentKind::ThirdOrder,
        ExponentKind::FlatnessSlope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExponentKind::FgfS2 => "fgf_s2",
            ExponentKind::GmcMoment => "gmc_moment",
            ExponentKind::MultifractalS2q => "multifractal_s2q",
            ExponentKind::ThirdOrder => "third_order",
            ExponentKind::FlatnessSlope => "flatness_slope",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent {
    pub value: f64,
    /// Bound that `γ²C_f(0)/|c|` must stay below.
    pub bound: f64,
    pub valid: bool,
}

pub fn scaling_exponent(kind: ExponentKind, q: f64, params: &PhysParams) -> Exponent {
    let a = params.intermittency();
    let h = params.h;
    let h_ok = h > 0.0 && h < 1.0;
    let (value, bound, extra) = match kind {
        ExponentKind::FgfS2 => (2.0 * h, f64::INFINITY, h_ok),
        ExponentKind::GmcMoment => (q * q * a, 1.0 / q, true),
        ExponentKind::MultifractalS2q => (2.0 * q * h - q * q * a, (2.0 * h / q).min(1.0), h_ok),
        ExponentKind::ThirdOrder => (3.0 * h - 2.0 * a, (1.5 * h).min(1.0), h_ok),
        ExponentKind::FlatnessSlope => (-2.0 * a, h.min(1.0), h_ok),
    };
    let valid = extra && a < bound;
    if !valid {
        warn!(
            "{} exponent requested outside its validity range (γ²C_f(0)/|c| = {a:.4}, bound {bound:.4})",
            kind.name()
        );
    }
    Exponent { value, bound, valid }
}

pub fn scaling_exponents(q: f64, params: &PhysParams) -> OracleReport {
    let mut r = OracleReport::new("scaling_exponents", *params);
    for kind in ExponentKind::ALL {
        let e = scaling_exponent(kind, q, params);
        r.outside_validity |= !e.valid;
        r.push(kind.name(), "1", Method::ClosedForm, Estimate::exact(e.value));
    }
    r
}
