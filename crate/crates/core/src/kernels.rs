//! Closed-form kernels of the linearized BCS problem with contact interaction.
//!
//! Everything here is a pure function of its arguments. The kernels are
//!
//! * `F(p)   = tanh((p²-μ)/2T) / (p²-μ)`
//! * `L(p,q) = (tanh((p²-μ)/2T) + tanh((q²-μ)/2T)) / (p²+q²-2μ)`
//! * `B(p,q) = L((p+q)/2, (p-q)/2)`
//!
//! together with the momentum integrals `A(p) = (1/4π)∫B(p,q)dq`, the
//! essential-spectrum edge `a = A(0)` and `E(p) = 4π(a - A(p))`.
//!
//! All removable singularities are evaluated through algebraically exact
//! rewrites of the tanh quotients, so no branch ever divides by a small
//! difference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{kernel_tail, MomentumGrid};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;

const TANH_RATIO_SWITCH: f64 = 1e-4;
const LOG_FORM_SWITCH: f64 = 20.0;

/// Physical parameters: temperature `T`, chemical potential `μ` and an
/// optional coupling `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub temperature: f64,
    pub mu: f64,
    pub coupling: Option<f64>,
}

impl ModelParams {
    pub fn new(temperature: f64, mu: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::InvalidParams(format!(
                "temperature must be positive and finite, got {temperature}"
            )));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidParams(format!("mu must be finite, got {mu}")));
        }
        Ok(Self {
            temperature,
            mu,
            coupling: None,
        })
    }

    pub fn with_coupling(mut self, v: f64) -> Result<Self> {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParams(format!(
                "coupling must be positive and finite, got {v}"
            )));
        }
        self.coupling = Some(v);
        Ok(self)
    }

    /// Solvers work at positive chemical potential only.
    pub fn require_positive_mu(&self) -> Result<()> {
        if self.mu > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "mu must be positive here, got {}",
                self.mu
            )))
        }
    }
}

/// `tanh(x)/x`, equal to 1 at the origin.
pub fn tanh_ratio(x: f64) -> f64 {
    if x.abs() < TANH_RATIO_SWITCH {
        let x2 = x * x;
        1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0
    } else {
        x.tanh() / x
    }
}

fn sinh_ratio(x: f64) -> f64 {
    if x.abs() < TANH_RATIO_SWITCH {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

fn ln_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p() - std::f64::consts::LN_2
}

fn ln_sinh_ratio(x: f64) -> f64 {
    let ax = x.abs();
    if ax < LOG_FORM_SWITCH {
        sinh_ratio(ax).ln()
    } else {
        ax + (-(-2.0 * ax).exp()).ln_1p() - std::f64::consts::LN_2 - ax.ln()
    }
}

/// `(tanh a + tanh b) / (a + b)`, evaluated without cancellation.
///
/// For arguments of equal sign the quotient is a convex combination of
/// `tanh(a)/a` and `tanh(b)/b`. For opposite signs it equals
/// `sinh(a+b)/(a+b) · sech(a) · sech(b)`, which is strictly positive and
/// regular on the line `a + b = 0`.
pub fn tanh_sum_ratio(a: f64, b: f64) -> f64 {
    if a == b {
        return tanh_ratio(a);
    }
    if a * b >= 0.0 {
        let s = a + b;
        return (a * tanh_ratio(a) + b * tanh_ratio(b)) / s;
    }
    let u = a + b;
    if a.abs().max(b.abs()) < LOG_FORM_SWITCH {
        sinh_ratio(u) / (a.cosh() * b.cosh())
    } else {
        (ln_sinh_ratio(u) - ln_cosh(a) - ln_cosh(b)).exp()
    }
}

/// `F_{T,μ}(p)`; equals `1/(2T)` at `p² = μ`.
pub fn eval_f(p: f64, params: &ModelParams) -> f64 {
    let two_t = 2.0 * params.temperature;
    tanh_ratio((p * p - params.mu) / two_t) / two_t
}

/// `L_{T,μ}(p,q)`.
pub fn eval_l(p: f64, q: f64, params: &ModelParams) -> f64 {
    let two_t = 2.0 * params.temperature;
    let x = (p * p - params.mu) / two_t;
    let y = (q * q - params.mu) / two_t;
    tanh_sum_ratio(x, y) / two_t
}

/// `B_{T,μ}(p,q) = L((p+q)/2, (p-q)/2)`.
pub fn eval_b(p: f64, q: f64, params: &ModelParams) -> f64 {
    eval_l(0.5 * (p + q), 0.5 * (p - q), params)
}

/// Truncated Matsubara representation of `L`,
/// `2T Σ_{n=-N}^{N-1} 1/((p²-μ-iwₙ)(q²-μ+iwₙ))`, `wₙ = πT(2n+1)`.
///
/// The terms `n` and `-n-1` are complex conjugates and are summed as one
/// real term, smallest first.
pub fn eval_l_series(p: f64, q: f64, params: &ModelParams, n_terms: usize) -> f64 {
    let t = params.temperature;
    let x = p * p - params.mu;
    let y = q * q - params.mu;
    let xy = x * y;
    let d2 = (x - y) * (x - y);
    // Neumaier summation: the terms cancel to L when x and y differ in sign
    let mut sum = 0.0;
    let mut comp = 0.0;
    for n in (0..n_terms).rev() {
        let w = std::f64::consts::PI * t * (2 * n + 1) as f64;
        let w2 = w * w;
        let c = xy + w2;
        let term = 2.0 * c / (c * c + w2 * d2);
        let next = sum + term;
        comp += if sum.abs() >= term.abs() {
            (sum - next) + term
        } else {
            (term - next) + sum
        };
        sum = next;
    }
    2.0 * t * (sum + comp)
}

/// [`eval_l_series`] plus the asymptotic remainder `Σ_{n≥N}` expanded to
/// third order in `1/wₙ²`.
///
/// The remainder is accurate once `wₙ` dominates `|p²-μ|` and `|q²-μ|`;
/// [`matsubara_terms_for`] picks such an `N`.
pub fn eval_l_series_with_tail(p: f64, q: f64, params: &ModelParams, n_terms: usize) -> f64 {
    let t = params.temperature;
    let x = p * p - params.mu;
    let y = q * q - params.mu;
    let c = x * y;
    let d2 = (x - y) * (x - y);
    let head = eval_l_series(p, q, params, n_terms);

    // Σ_{n≥N} wₙ^{-2k} = (2πT)^{-2k} ζ(2k, N + 1/2)
    let a = n_terms as f64 + 0.5;
    let inv = 1.0 / (2.0 * std::f64::consts::PI * t);
    let s1 = inv.powi(2) * hurwitz_zeta(2.0, a);
    let s2 = inv.powi(4) * hurwitz_zeta(4.0, a);
    let s3 = inv.powi(6) * hurwitz_zeta(6.0, a);
    let tail = 2.0 * s1 - 2.0 * (c + d2) * s2 + 2.0 * (c * c + 3.0 * c * d2 + d2 * d2) * s3;
    head + 2.0 * t * tail
}

/// Number of conjugate pairs for which [`eval_l_series_with_tail`] is within
/// about `10⁻¹⁰·L` of the closed form.
///
/// The dropped fourth-order remainder is roughly the tail `1/(π²T(N+½))`
/// times `(5s²/w_N²)³`, `s = max(|p²−μ|, |q²−μ|)`. When `p²−μ` and `q²−μ`
/// differ in sign `L` can be far smaller than the tail, so `N` grows with
/// the cancellation. Capped at `2²⁴`.
pub fn matsubara_terms_for(p: f64, q: f64, params: &ModelParams) -> usize {
    const CAP: usize = 1 << 24;
    let t = params.temperature;
    let pi = std::f64::consts::PI;
    let scale = (p * p - params.mu).abs().max((q * q - params.mu).abs());
    let needed = 12.0 * scale / (pi * t);
    let mut n = (((needed - 1.0) / 2.0).ceil().max(0.0) as usize).max(32);
    let target = 1e-10 * eval_l(p, q, params).abs();
    while n < CAP {
        let w = pi * t * (2 * n + 1) as f64;
        let remainder = (5.0 * scale * scale / (w * w)).powi(3) / (pi * pi * t * (n as f64 + 0.5));
        if remainder <= target {
            break;
        }
        n *= 2;
    }
    n.min(CAP)
}

/// Hurwitz zeta `ζ(s, a) = Σ_{k≥0} (k+a)^{-s}` for `s > 1`, `a > 0`, via
/// direct summation up to `a + k ≥ 16` followed by Euler–Maclaurin.
fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    const SHIFT: f64 = 16.0;
    // B_{2k}/(2k)!
    const BERNOULLI_OVER_FACT: [f64; 5] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
    ];
    let mut head = 0.0;
    let mut x = a;
    while x < SHIFT {
        head += x.powf(-s);
        x += 1.0;
    }
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising factorial s(s+1)...(s+2k-2)
    let mut rising = s;
    let mut power = x.powf(-s - 1.0);
    for (k, coeff) in BERNOULLI_OVER_FACT.iter().enumerate() {
        tail += coeff * rising * power;
        let m = 2.0 * k as f64;
        rising *= (s + m + 1.0) * (s + m + 2.0);
        power /= x * x;
    }
    head + tail
}

/// `A_{T,μ}(p) = (1/4π) ∫_ℝ B(p,q) dq`, folded onto the half-line grid
/// and completed with the analytic tail beyond the cutoff.
pub fn eval_a_of_p(p: f64, params: &ModelParams, grid: &MomentumGrid) -> Result<f64> {
    grid.ensure_resolved()?;
    Ok(a_of_p_unchecked(p, params, grid))
}

pub(crate) fn a_of_p_unchecked(p: f64, params: &ModelParams, grid: &MomentumGrid) -> f64 {
    let sum: f64 = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .map(|(&q, &w)| w * eval_b(p, q, params))
        .sum();
    (sum + kernel_tail(p, params, grid.cutoff())) / (2.0 * std::f64::consts::PI)
}

/// Essential-spectrum edge `a_{T,μ} = A_{T,μ}(0)`.
pub fn eval_edge(params: &ModelParams, grid: &MomentumGrid) -> Result<f64> {
    eval_a_of_p(0.0, params, grid)
}

/// `E_{T,μ}(p) = 4π(a - A(p))`.
pub fn eval_e(p: f64, params: &ModelParams, grid: &MomentumGrid) -> Result<f64> {
    let a = eval_edge(params, grid)?;
    let ap = eval_a_of_p(p, params, grid)?;
    Ok(4.0 * std::f64::consts::PI * (a - ap))
}
