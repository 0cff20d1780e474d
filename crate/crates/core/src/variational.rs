//! Trial-state certificate for the half-line gap and low/high temperature
//! diagnostics.
//!
//! The trial state is built from `ĝ(p) = exp(−(p − 2√μ)²/b)`. Maximizing
//! over its weight gives
//!
//! `−¼B(0,0) − (1/16π)·(∫B(0,q)ĝ(q)dq)² / ⟨g|A−a|g⟩`
//!
//! with `⟨g|A−a|g⟩ = ∫ĝ²(A−a) − (1/4π)∫∫ĝ(p)B(p,q)ĝ(q)`, which is negative.

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::bs_operator::{assemble, symmetrized_kernel, top_eigenvalue, BoundaryCondition};
use crate::critical_temperature::TcConfig;
use crate::error::{Error, Result};
use crate::kernels::{a_of_p_unchecked, eval_b, eval_f, ModelParams, EULER_GAMMA};
use crate::quadrature::{build_grid_with, kernel_tail, GridPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    /// Gaussian width; `None` means `b = μ`.
    pub b: Option<f64>,
    pub grid: GridPolicy,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            b: None,
            grid: GridPolicy::default(),
        }
    }
}

impl TrialConfig {
    pub fn width(&self, mu: f64) -> f64 {
        self.b.unwrap_or(mu)
    }
}

/// The pieces of the trial bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialTerms {
    pub value: f64,
    /// `∫_ℝ B(0,q)ĝ(q)dq`.
    pub overlap: f64,
    /// `⟨g|A−a|g⟩`.
    pub denominator: f64,
    pub b00: f64,
}

pub fn trial_terms(params: &ModelParams, cfg: &TrialConfig) -> Result<TrialTerms> {
    params.require_positive_mu()?;
    let b = cfg.width(params.mu);
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::InvalidParams(format!("trial width must be positive, got {b}")));
    }
    let grid = build_grid_with(params, &cfg.grid)?;
    let kf = 2.0 * params.mu.sqrt();
    let g = |p: f64| (-(p - kf) * (p - kf) / b).exp();
    let p = grid.nodes();
    let w = grid.weights();
    let n = p.len();

    // folded onto [0, Λ]: ĝ(p) + ĝ(−p) and ĝ(p)² + ĝ(−p)²
    let g_even: Vec<f64> = p.iter().map(|&x| g(x) + g(-x)).collect();
    let g_sq: Vec<f64> = p.iter().map(|&x| g(x).powi(2) + g(-x).powi(2)).collect();

    let kernel = symmetrized_kernel(params, &grid);
    let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    let a = a_of_p_unchecked(0.0, params, &grid);

    let mut overlap = 0.0;
    let mut diag_part = 0.0;
    for i in 0..n {
        overlap += w[i] * eval_b(0.0, p[i], params) * g_even[i];
        let row: f64 = kernel.row(i).iter().zip(&sw).map(|(k, s)| k * s).sum::<f64>() / sw[i];
        let a_i = (row + kernel_tail(p[i], params, grid.cutoff())) / two_pi;
        diag_part += w[i] * g_sq[i] * (a_i - a);
    }
    let u: nalgebra::DVector<f64> =
        nalgebra::DVector::from_iterator(n, g_even.iter().zip(&sw).map(|(ge, s)| ge * s));
    let cross = u.dot(&(&kernel * &u));
    let denominator = diag_part - cross / (4.0 * std::f64::consts::PI);
    if denominator >= 0.0 {
        return Err(Error::DenominatorNonnegative(denominator));
    }
    let b00 = eval_b(0.0, 0.0, params);
    let value = -0.25 * b00 - overlap * overlap / (16.0 * std::f64::consts::PI * denominator);
    Ok(TrialTerms {
        value,
        overlap,
        denominator,
        b00,
    })
}

/// Limit of the maximized trial quadratic form. The trial states are not
/// normalized, so only the sign is meaningful: a positive value certifies
/// `sup σ(A^{ℝ₊}_{T,μ}) > a_{T,μ}` (Dirichlet).
pub fn trial_gap(params: &ModelParams, cfg: &TrialConfig) -> Result<f64> {
    Ok(trial_terms(params, cfg)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T0Result {
    pub t0: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// Largest temperature below which the trial bound is positive: the first
/// sign change from `+` to `−` on `T/μ ∈ [10⁻⁶, 1]`, refined by bisection.
pub fn find_t0(mu: f64, cfg: &TrialConfig, tol: f64) -> Result<T0Result> {
    const SCAN: usize = 13;
    let gap = |t: f64| -> Result<f64> { trial_gap(&ModelParams::new(t, mu)?, cfg) };
    let ts: Vec<f64> = (0..SCAN)
        .map(|k| mu * 10f64.powf(-6.0 + 6.0 * k as f64 / (SCAN - 1) as f64))
        .collect();
    let mut evaluations = 0;
    let mut prev: Option<(f64, f64)> = None;
    for &t in &ts {
        let g = gap(t)?;
        evaluations += 1;
        log::debug!("trial gap T={t:e}: {g:e}");
        if let Some((tp, gp)) = prev {
            if gp > 0.0 && g <= 0.0 {
                let (mut lo, mut hi) = (tp, t);
                while (hi - lo) / lo > tol {
                    let mid = (lo * hi).sqrt();
                    evaluations += 1;
                    if gap(mid)? > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Ok(T0Result {
                    t0: (lo * hi).sqrt(),
                    bracket: (lo, hi),
                    evaluations,
                });
            }
        }
        prev = Some((t, g));
    }
    Err(Error::NoSignChange)
}

/// `∫_ℝ F_{T,μ}(p)dp − (2/√μ)(ln(μ/T) + γ + ln(8/π))`.
pub fn int_f_residual(params: &ModelParams, policy: &GridPolicy) -> Result<f64> {
    params.require_positive_mu()?;
    let grid = build_grid_with(params, policy)?;
    // ∫_ℝ F(p)dp = ∫₀^∞ F(q/2)dq = 2π·a
    let total = 2.0 * std::f64::consts::PI * a_of_p_unchecked(0.0, params, &grid);
    Ok(total - low_temperature_int_f(params.temperature, params.mu))
}

/// `(2/√μ)(ln(μ/T) + γ + ln(8/π))`.
pub fn low_temperature_int_f(temperature: f64, mu: f64) -> f64 {
    2.0 / mu.sqrt()
        * ((mu / temperature).ln() + EULER_GAMMA + (8.0 / std::f64::consts::PI).ln())
}

/// `∫_{|p|>√(2μ)} F dp` and its bound `2∫_{√(2μ)}^∞ dp/(p²−μ)`.
pub fn int_f_window(params: &ModelParams) -> Result<(f64, f64)> {
    params.require_positive_mu()?;
    let sm = params.mu.sqrt();
    let c = (2.0 * params.mu).sqrt();
    let far = c + 1e3 * sm.max(params.temperature.sqrt());
    let rule = GaussLegendre::new(16).map_err(|e| Error::InvalidParams(e.to_string()))?;
    // geometric panels from c to far
    let mut x = c;
    let mut h = 0.05 * sm;
    let mut inner = 0.0;
    while x < far {
        let next = (x + h).min(far);
        inner += rule.integrate(x, next, |p| eval_f(p, params));
        x = next;
        h *= 1.3;
    }
    // beyond `far` both tanh factors have saturated
    let tail = 0.5 / sm * ((far + sm) / (far - sm)).ln();
    let bound = 1.0 / sm * ((c + sm) / (c - sm)).ln();
    Ok((2.0 * (inner + tail), bound))
}

/// `T^{1/2}·sup σ(A^{ℝ₊}_{T,μ})`.
pub fn scaled_sup(temperature: f64, mu: f64, bc: BoundaryCondition, cfg: &TcConfig) -> Result<f64> {
    let params = ModelParams::new(temperature, mu)?;
    let grid = build_grid_with(&params, &cfg.grid)?;
    let op = assemble(&params, &grid, bc)?;
    Ok(temperature.sqrt() * top_eigenvalue(&op, cfg.eig_tol)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(t: f64, mu: f64) -> ModelParams {
        ModelParams::new(t, mu).unwrap()
    }

    #[test]
    fn trial_bound_positive_at_low_temperature() {
        let cfg = TrialConfig {
            b: Some(1.0),
            ..TrialConfig::default()
        };
        let t = trial_terms(&params(1e-4, 1.0), &cfg).unwrap();
        assert!(t.value > 0.0);
        assert!(t.denominator < 0.0);
    }

    #[test]
    fn trial_bound_negative_at_high_temperature() {
        let cfg = TrialConfig {
            b: Some(1.0),
            ..TrialConfig::default()
        };
        assert!(trial_gap(&params(0.5, 1.0), &cfg).unwrap() < 0.0);
    }

    #[test]
    fn window_bounded() {
        for &t in &[1e-2, 1e-4] {
            let (v, bound) = int_f_window(&params(t, 1.0)).unwrap();
            // equality up to rounding once tanh(μ/2T) saturates
            assert!(v > 0.0 && v <= bound * (1.0 + 1e-12), "{v} {bound}");
        }
    }

    #[test]
    fn requires_positive_mu() {
        assert!(trial_gap(&params(0.1, 0.0), &TrialConfig::default()).is_err());
        assert!(int_f_residual(&params(0.1, -1.0), &GridPolicy::default()).is_err());
    }
}
