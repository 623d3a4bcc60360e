//! Numerical integration used by the oracles.
//!
//! Adaptive Gauss-Kronrod (7/15) handles smooth integrands on finite
//! intervals; tanh-sinh handles integrable endpoint singularities. Half-line
//! integrals are mapped onto `[0, 1)` first.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Error estimate reported by the rule.
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod quadrature on `[a, b]`.
pub fn gauss_kronrod(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    const MAX_SEGMENTS: usize = 20_000;
    let mut heap = BinaryHeap::new();
    let (value, error) = kronrod15(&mut f, a, b);
    let mut total = value;
    let mut total_err = error;
    let mut evaluations = 15;
    heap.push(Segment { a, b, value, error });
    while total_err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature(format!(
                "Gauss-Kronrod on [{a}, {b}] stalled at error {total_err:e}"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in floating point
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod15(&mut f, worst.a, mid);
        let (v2, e2) = kronrod15(&mut f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // re-sum to shed accumulated rounding from the running updates
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    if !value.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integral on [{a}, {b}]")));
    }
    Ok(Integral {
        value,
        error,
        evaluations,
    })
}

/// Gauss-Kronrod over consecutive sub-intervals split at `breaks`.
pub fn gauss_kronrod_pieces(
    mut f: impl FnMut(f64) -> f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    let mut out = Integral {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    for w in breaks.windows(2) {
        let part = gauss_kronrod(&mut f, w[0], w[1], abs_tol / pieces, rel_tol)?;
        out.value += part.value;
        out.error += part.error;
        out.evaluations += part.evaluations;
    }
    Ok(out)
}

/// Tanh-sinh quadrature on `[a, b]`; tolerates integrable endpoint
/// singularities. The error estimate is the difference between the last two
/// step halvings.
pub fn tanh_sinh(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<Integral> {
    use std::f64::consts::FRAC_PI_2;
    const T_MAX: f64 = 4.0;
    const MAX_LEVEL: u32 = 14;
    let half = 0.5 * (b - a);
    let mid = f(0.5 * (a + b));
    // one abscissa pair at parameter t: nodes a+δ and b-δ with δ = (b-a)/(1+e^{2u})
    let mut pair = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cosh_u = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cosh_u * cosh_u);
        let delta = (b - a) / (1.0 + (2.0 * u).exp());
        let mut s = 0.0;
        if delta > 0.0 && w > 0.0 {
            let left = a + delta;
            let right = b - delta;
            if left > a && left < b {
                s += f(left);
            }
            if right < b && right > a {
                s += f(right);
            }
        }
        w * s
    };
    let mut h = 1.0;
    let mut evaluations = 1;
    let mut sum = FRAC_PI_2 * mid;
    let mut t = h;
    while t <= T_MAX {
        sum += pair(t);
        evaluations += 2;
        t += h;
    }
    let mut previous = sum * h * half;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut t = h;
        while t <= T_MAX {
            sum += pair(t);
            evaluations += 2;
            t += 2.0 * h;
        }
        let current = sum * h * half;
        let error = (current - previous).abs();
        if !current.is_finite() {
            return Err(Error::Quadrature(format!("non-finite tanh-sinh sum on [{a}, {b}]")));
        }
        if level >= 3 && error <= rel_tol * current.abs() {
            return Ok(Integral {
                value: current,
                error,
                evaluations,
            });
        }
        previous = current;
    }
    Err(Error::Quadrature(format!(
        "tanh-sinh on [{a}, {b}] did not reach relative tolerance {rel_tol:e}"
    )))
}

/// `∫_a^∞ f`, mapped by `x = a + s/(1-s)` onto `[0, 1)`.
pub fn half_line(mut f: impl FnMut(f64) -> f64, a: f64, abs_tol: f64, rel_tol: f64) -> Result<Integral> {
    gauss_kronrod(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - s;
            let x = a + s / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Evaluates an integral at a tolerance and at one hundred times tighter,
/// returning the refined value and the difference as the convergence
/// estimate.
pub fn two_resolution(mut integrate: impl FnMut(f64) -> Result<f64>, rel_tol: f64) -> Result<(f64, f64)> {
    let coarse = integrate(rel_tol)?;
    let fine = integrate(rel_tol * 1e-2)?;
    Ok((fine, (fine - coarse).abs()))
}

/// `∫_A^∞ cos(2πk) k^{-α} dk` for integer `A ≥ 1` and `α > 0` by repeated
/// integration by parts; each pass gains a factor of order `α/(2πA)`.
pub fn cosine_power_tail(alpha: f64, a: f64, passes: usize) -> f64 {
    use std::f64::consts::PI;
    let two_pi = 2.0 * PI;
    // I_c(β) = β/(2π) [A^{-β-1}/(2π) - (β+1)/(2π) I_c(β+2)]
    fn rec(beta: f64, a: f64, depth: usize, two_pi: f64) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        let inner = rec(beta + 2.0, a, depth - 1, two_pi);
        beta / two_pi * (a.powf(-beta - 1.0) / two_pi - (beta + 1.0) / two_pi * inner)
    }
    rec(alpha, a, passes, two_pi)
}
