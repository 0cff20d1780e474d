//! Randomized numerical checks of the standalone inequalities behind the
//! critical-temperature results.
//!
//! Every check is deterministic given its seed. A sample that violates an
//! inequality by less than `1e-12` relative is counted as float noise and
//! logged, not as a violation.

use std::collections::BTreeMap;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bs_operator::{assemble, spectral_gap, symmetrized_kernel, BoundaryCondition};
use crate::error::{Error, Result};
use crate::kernels::{a_of_p_unchecked, eval_b, eval_f, eval_l, tanh_ratio, tanh_sum_ratio, ModelParams};
use crate::quadrature::{build_grid_with, GridPolicy};
use crate::variational::{trial_terms, TrialConfig};

/// Relative size below which an apparent violation is float noise.
pub const FLOAT_NOISE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub samples: u64,
    pub violations: u64,
    pub float_noise: u64,
    /// Smallest `(rhs − lhs)/|rhs|` seen.
    pub worst_margin: f64,
    pub seed: u64,
    /// First sample that produced a genuine violation.
    pub worst_sample: Option<String>,
    /// Diagnostic quantities (observed constants and the like).
    pub observed: BTreeMap<String, f64>,
}

impl CheckReport {
    fn new(name: &str, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            samples: 0,
            violations: 0,
            float_noise: 0,
            worst_margin: f64::INFINITY,
            seed,
            worst_sample: None,
            observed: BTreeMap::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Runs the checks; `perturb` multiplies every left-hand side by
/// `1 + perturb`, which is how the harness proves it can fail.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LemmaSuite {
    pub perturb: f64,
}

struct Tally {
    report: CheckReport,
    perturb: f64,
}

impl Tally {
    fn new(name: &str, seed: u64, perturb: f64) -> Self {
        Self {
            report: CheckReport::new(name, seed),
            perturb,
        }
    }

    fn compare<F: FnOnce() -> String>(&mut self, lhs: f64, rhs: f64, strict: bool, ctx: F) {
        let lhs = lhs * (1.0 + self.perturb);
        self.report.samples += 1;
        let scale = rhs.abs().max(f64::MIN_POSITIVE);
        let margin = (rhs - lhs) / scale;
        if margin < self.report.worst_margin {
            self.report.worst_margin = margin;
        }
        let bad = if strict { lhs >= rhs } else { lhs > rhs } || lhs.is_nan() || rhs.is_nan();
        if !bad {
            return;
        }
        let excess = lhs - rhs;
        if excess.is_finite() && excess <= FLOAT_NOISE * lhs.abs().max(rhs.abs()) {
            self.report.float_noise += 1;
            log::debug!("{}: float noise at {}", self.report.name, ctx());
        } else {
            self.report.violations += 1;
            if self.report.worst_sample.is_none() {
                let s = format!("{}: lhs={lhs:e} rhs={rhs:e}", ctx());
                log::warn!("{}: violation at {s}", self.report.name);
                self.report.worst_sample = Some(s);
            }
        }
    }

    fn le<F: FnOnce() -> String>(&mut self, lhs: f64, rhs: f64, ctx: F) {
        self.compare(lhs, rhs, false, ctx)
    }

    fn lt<F: FnOnce() -> String>(&mut self, lhs: f64, rhs: f64, ctx: F) {
        self.compare(lhs, rhs, true, ctx)
    }

    fn observe(&mut self, key: &str, value: f64) {
        self.report.observed.insert(key.to_string(), value);
    }

    fn finish(self) -> CheckReport {
        self.report
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn require_samples(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParams("at least one sample is required".into()))
    } else {
        Ok(())
    }
}

/// `∫₀^x (F(q/2) − F(x/2)) dq` for `F = F_{1,0}`, the gap between the two
/// sides of the integrated majorant inequality.
fn majorant_integral_margin(x: f64, params: &ModelParams) -> f64 {
    let rule = GaussLegendre::new(16).expect("16-point rule");
    let fx = eval_f(0.5 * x, params);
    let panels = 8;
    (0..panels)
        .map(|k| {
            let a = x * k as f64 / panels as f64;
            let b = x * (k + 1) as f64 / panels as f64;
            rule.integrate(a, b, |q| eval_f(0.5 * q, params) - fx)
        })
        .sum()
}

impl LemmaSuite {
    pub fn new(perturb: f64) -> Self {
        Self { perturb }
    }

    /// `(tanh(x/T) + tanh(y/T))/(x+y) < 2/(|x|+|y|)`.
    pub fn check_tanh_sum(&self, n_samples: usize, seed: u64) -> Result<CheckReport> {
        require_samples(n_samples)?;
        let mut r = rng(seed);
        let mut t = Tally::new("tanh_sum", seed, self.perturb);
        for k in 0..n_samples {
            let x: f64 = r.random_range(-50.0..50.0);
            let temp = log_uniform(&mut r, 1e-3, 1e3);
            // every tenth sample sits just off the line x + y = 0
            let y = if k % 10 == 0 {
                let delta = log_uniform(&mut r, 1e-12, 1e-2);
                -x + if r.random::<bool>() { delta } else { -delta }
            } else {
                r.random_range(-50.0..50.0)
            };
            if x + y == 0.0 {
                continue;
            }
            let lhs = tanh_sum_ratio(x / temp, y / temp) / temp;
            let rhs = 2.0 / (x.abs() + y.abs());
            t.lt(lhs, rhs, || format!("x={x:e} y={y:e} T={temp:e}"));
        }
        Ok(t.finish())
    }

    /// `(tanh x − tanh y)/(x − y) ≤ 4e^{−2 min(x,y)}` for `x, y > 0`.
    pub fn check_tanh_diff(&self, n_samples: usize, seed: u64) -> Result<CheckReport> {
        require_samples(n_samples)?;
        let mut r = rng(seed);
        let mut t = Tally::new("tanh_diff", seed, self.perturb);
        for k in 0..n_samples {
            let x: f64 = r.random_range(0.0..50.0);
            let y = if k % 10 == 0 { x } else { r.random_range(0.0..50.0) };
            if x <= 0.0 || y <= 0.0 {
                continue;
            }
            // (tanh x − tanh y)/(x − y) = (tanh x + tanh(−y))/(x + (−y))
            let lhs = tanh_sum_ratio(x, -y);
            let rhs = 4.0 * (-2.0 * x.min(y)).exp();
            t.le(lhs, rhs, || format!("x={x:e} y={y:e}"));
        }
        Ok(t.finish())
    }

    /// `(tanh x + tanh y)/(x + y) ≤ ½(tanh x/x + tanh y/y)`.
    pub fn check_mean_bound(&self, n_samples: usize, seed: u64) -> Result<CheckReport> {
        require_samples(n_samples)?;
        let mut r = rng(seed);
        let mut t = Tally::new("mean_bound", seed, self.perturb);
        for _ in 0..n_samples {
            let x: f64 = r.random_range(-50.0..50.0);
            let y: f64 = r.random_range(-50.0..50.0);
            if x + y == 0.0 {
                continue;
            }
            let lhs = tanh_sum_ratio(x, y);
            let rhs = 0.5 * (tanh_ratio(x) + tanh_ratio(y));
            t.le(lhs, rhs, || format!("x={x:e} y={y:e}"));
        }
        Ok(t.finish())
    }

    /// `B_{1,0}(p,q) ≤ tanh((p²+q²)/8)/((p²+q²)/4)`.
    pub fn check_concavity_bound(&self, n_samples: usize, seed: u64) -> Result<CheckReport> {
        require_samples(n_samples)?;
        let mut r = rng(seed);
        let unit = ModelParams::new(1.0, 0.0)?;
        let mut t = Tally::new("concavity_bound", seed, self.perturb);
        for _ in 0..n_samples {
            let p: f64 = r.random_range(-10.0..10.0);
            let q: f64 = r.random_range(-10.0..10.0);
            let s = p * p + q * q;
            let lhs = eval_b(p, q, &unit);
            // tanh(s/8)/(s/4) = ½·tanh(s/8)/(s/8)
            let rhs = 0.5 * tanh_ratio(s / 8.0);
            t.le(lhs, rhs, || format!("p={p:e} q={q:e}"));
        }
        Ok(t.finish())
    }

    /// The min-kernel `K(p,q) = min{B_{1,0}(p,0), B_{1,0}(q,0)}` on
    /// `n_grids` random grids of `grid_size` nodes: pointwise majorant,
    /// symmetry, positive semidefiniteness, integrated majorant and the
    /// value at `q = 0`.
    pub fn check_k_majorant(
        &self,
        grid_size: usize,
        n_grids: usize,
        seed: u64,
    ) -> Result<CheckReport> {
        require_samples(grid_size)?;
        require_samples(n_grids)?;
        let mut r = rng(seed);
        let unit = ModelParams::new(1.0, 0.0)?;
        let mut t = Tally::new("K_majorant", seed, self.perturb);
        let b0 = |p: f64| eval_b(p, 0.0, &unit);
        let k = |p: f64, q: f64| b0(p).min(b0(q));
        let mut min_eig = f64::INFINITY;
        for _ in 0..n_grids {
            let nodes: Vec<f64> = (0..grid_size).map(|_| r.random_range(-8.0..8.0)).collect();
            for &p in &nodes {
                for &q in &nodes {
                    let kpq = k(p, q);
                    t.le(eval_b(p, q, &unit), kpq, || format!("(i) p={p:e} q={q:e}"));
                    // (ii) exact symmetry
                    t.le((kpq - k(q, p)).abs(), 0.0, || format!("(ii) p={p:e} q={q:e}"));
                    // K(p,q) = F(max(|p|,|q|)/2)
                    let f = eval_f(0.5 * p.abs().max(q.abs()), &unit);
                    t.le((kpq - f).abs(), 1e-15 * f, || format!("identity p={p:e} q={q:e}"));
                }
                // (iv)
                let margin = majorant_integral_margin(p.abs(), &unit);
                t.le(-margin, 0.0, || format!("(iv) p={p:e}"));
                // (v)
                t.le((k(p, 0.0) - b0(p)).abs(), 0.0, || format!("(v) p={p:e}"));
            }
            let gram = DMatrix::from_fn(grid_size, grid_size, |i, j| k(nodes[i], nodes[j]));
            let lam = gram.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
            min_eig = min_eig.min(lam);
            t.le(-lam, 1e-10, || format!("(iii) min eigenvalue {lam:e}"));
        }
        t.observe("gram_min_eigenvalue", min_eig);
        Ok(t.finish())
    }

    /// `m(T) = min_{ε ≤ p ≤ 5√μ} E(p)/ln(μ/T)` along `t_list`; passes when
    /// every `m(T)` is positive and the last one has not collapsed.
    pub fn check_e_log_growth(
        &self,
        mu: f64,
        eps: f64,
        t_list: &[f64],
        policy: &GridPolicy,
    ) -> Result<CheckReport> {
        if !(mu > 0.0 && eps > 0.0 && eps < 5.0 * mu.sqrt()) || t_list.is_empty() {
            return Err(Error::InvalidParams("need mu > 0 and 0 < eps < 5√mu".into()));
        }
        let mut t = Tally::new("E_log_growth", 0, self.perturb);
        let n_p = 64;
        let mut ms = Vec::with_capacity(t_list.len());
        let mut sup_int_b: f64 = 0.0;
        for &temp in t_list {
            if temp >= mu {
                return Err(Error::InvalidParams("temperatures must lie below mu".into()));
            }
            let params = ModelParams::new(temp, mu)?;
            let grid = build_grid_with(&params, policy)?;
            let a = a_of_p_unchecked(0.0, &params, &grid);
            let log = (mu / temp).ln();
            let four_pi = 4.0 * std::f64::consts::PI;
            // E(0) = 0 exactly
            t.le((four_pi * (a - a)).abs(), 0.0, || format!("E(0) at T={temp:e}"));
            let mut m = f64::INFINITY;
            for j in 0..n_p {
                let p = eps + (5.0 * mu.sqrt() - eps) * j as f64 / (n_p - 1) as f64;
                let ap = a_of_p_unchecked(p, &params, &grid);
                sup_int_b = sup_int_b.max(four_pi * ap);
                let e = four_pi * (a - ap);
                m = m.min(e / log);
            }
            t.observe(&format!("m(T={temp:e})"), m);
            t.lt(0.0, m, || format!("m(T={temp:e})"));
            ms.push(m);
        }
        let max_m = ms.iter().copied().fold(f64::MIN, f64::max);
        let last = *ms.last().unwrap();
        // non-vanishing: the smallest-T value keeps a fair share of the largest
        t.le(0.25 * max_m, last, || format!("m collapsed to {last:e}"));
        t.observe("sup_int_B", sup_int_b);
        Ok(t.finish())
    }

    /// Operator and Hilbert–Schmidt norms of `B_{T,μ}` over `t_list`, plus
    /// the low-momentum block bound `‖B·1_{[−ε,ε]²}‖_HS ≤ 2ε/(μ−ε²)`.
    pub fn check_b_uniform_norm(
        &self,
        mu: f64,
        t_list: &[f64],
        policy: &GridPolicy,
        norm_ceiling: f64,
    ) -> Result<CheckReport> {
        if !(mu > 0.0) || t_list.is_empty() {
            return Err(Error::InvalidParams("need mu > 0 and temperatures".into()));
        }
        let mut t = Tally::new("B_uniform_norm", 0, self.perturb);
        let rule = GaussLegendre::new(32).map_err(|e| Error::InvalidParams(e.to_string()))?;
        let eps_fracs = [0.05, 0.1, 0.2, 0.4, 0.6, 0.8];
        let mut max_norm: f64 = 0.0;
        let mut max_hs: f64 = 0.0;
        for &temp in t_list {
            let params = ModelParams::new(temp, mu)?;
            let grid = build_grid_with(&params, policy)?;
            // even sector carries the whole operator; odd functions are
            // annihilated since B is even in each variable
            let s = symmetrized_kernel(&params, &grid) * 2.0;
            let norm = s
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            let hs = s.norm();
            t.observe(&format!("norm(T={temp:e})"), norm);
            max_norm = max_norm.max(norm);
            max_hs = max_hs.max(hs);
            t.le(norm, norm_ceiling, || format!("operator norm at T={temp:e}"));

            for &frac in &eps_fracs {
                let eps = frac * mu.sqrt();
                let pairs = rule.as_node_weight_pairs();
                let mut sum = 0.0;
                for &(x, wx) in pairs {
                    let p = 0.5 * eps * (x + 1.0);
                    for &(y, wy) in pairs {
                        let q = 0.5 * eps * (y + 1.0);
                        sum += wx * wy * eval_b(p, q, &params).powi(2);
                    }
                }
                // four quadrants of [−ε,ε]², each (ε/2)² times the rule
                let block_hs = (4.0 * sum * 0.25 * eps * eps).sqrt();
                let bound = 2.0 * eps / (mu - eps * eps);
                t.le(block_hs, bound, || format!("block eps={eps:e} T={temp:e}"));
                if temp == t_list[0] {
                    t.observe(&format!("block_hs_over_eps(eps={eps:e})"), block_hs / eps);
                }
            }
        }
        t.observe("max_operator_norm", max_norm);
        t.observe("max_hs_norm", max_hs);
        Ok(t.finish())
    }

    /// Two-sided bounds on `L` at fixed `(T, μ)`:
    /// `L(1+s) ≤ (1+4T+2μ)/(2T)`, `L⁻¹ ≥ C₃(T+s)` with
    /// `C₃ = 2T₀/(5T₀+2μ)` for `T ≥ T₀`, `L ≤ min{1/2T, 2/|s−2μ|}` and
    /// `L > 0`, where `s = p²+q²`.
    pub fn check_l_sandwich(
        &self,
        mu: f64,
        temperature: f64,
        t0: f64,
        n_samples: usize,
        seed: u64,
    ) -> Result<CheckReport> {
        require_samples(n_samples)?;
        if !(mu >= 0.0 && t0 > 0.0 && temperature >= t0) {
            return Err(Error::InvalidParams("need mu ≥ 0 and T ≥ T0 > 0".into()));
        }
        let params = ModelParams::new(temperature, mu)?;
        let mut r = rng(seed);
        let mut t = Tally::new("L_sandwich", seed, self.perturb);
        let range = 10.0 * mu.sqrt().max(temperature.sqrt()).max(1.0);
        let c1_inv = (1.0 + 4.0 * temperature + 2.0 * mu) / (2.0 * temperature);
        let c3 = 2.0 * t0 / (5.0 * t0 + 2.0 * mu);
        let mut window_min = f64::INFINITY;
        let mut window_max: f64 = 0.0;
        for _ in 0..n_samples {
            let p: f64 = r.random_range(-range..range);
            let q: f64 = r.random_range(-range..range);
            let s = p * p + q * q;
            let l = eval_l(p, q, &params);
            let ctx = || format!("p={p:e} q={q:e}");
            let w = l * (1.0 + s);
            window_min = window_min.min(w);
            window_max = window_max.max(w);
            t.le(w, c1_inv, ctx);
            t.le(c3 * (temperature + s) * l, 1.0, ctx);
            let d = (s - 2.0 * mu).abs();
            let cap = if d > 0.0 {
                (0.5 / temperature).min(2.0 / d)
            } else {
                0.5 / temperature
            };
            t.le(l, cap, ctx);
            t.lt(0.0, w, ctx);
        }
        t.observe("window_min", window_min);
        t.observe("window_max", window_max);
        Ok(t.finish())
    }

    /// Trial-state certificate along `t_list`: the quadratic-form
    /// denominator is negative, a positive trial bound implies a positive
    /// Dirichlet gap, and for `T/μ ≤ 10⁻⁵` the overlap obeys
    /// `(4/√μ)e^{−4μ/b} < overlap/ln(μ/T) < 4/√μ`.
    pub fn check_trial_certificate(
        &self,
        mu: f64,
        t_list: &[f64],
        cfg: &TrialConfig,
        eig_tol: f64,
    ) -> Result<CheckReport> {
        if !(mu > 0.0) || t_list.is_empty() {
            return Err(Error::InvalidParams("need mu > 0 and temperatures".into()));
        }
        let b = cfg.width(mu);
        let mut t = Tally::new("trial_certificate", 0, self.perturb);
        for &temp in t_list {
            let params = ModelParams::new(temp, mu)?;
            let terms = trial_terms(&params, cfg)?;
            t.observe(&format!("trial_gap(T={temp:e})"), terms.value);
            t.lt(terms.denominator, 0.0, || format!("denominator at T={temp:e}"));
            if terms.value > 0.0 {
                let grid = build_grid_with(&params, &cfg.grid)?;
                let op = assemble(&params, &grid, BoundaryCondition::Dirichlet)?;
                let gap = spectral_gap(&op, eig_tol)?;
                t.observe(&format!("spectral_gap(T={temp:e})"), gap);
                t.lt(0.0, gap, || format!("positive trial bound but no gap at T={temp:e}"));
            }
            if temp / mu <= 1e-5 {
                let ratio = terms.overlap / (mu / temp).ln();
                let lower = 4.0 / mu.sqrt() * (-4.0 * mu / b).exp();
                let upper = 4.0 / mu.sqrt();
                t.observe(&format!("overlap_over_log(T={temp:e})"), ratio);
                t.lt(lower, ratio, || format!("overlap lower bound at T={temp:e}"));
                t.lt(ratio, upper, || format!("overlap upper bound at T={temp:e}"));
            }
        }
        Ok(t.finish())
    }
}

pub fn check_tanh_sum(n_samples: usize, seed: u64) -> Result<CheckReport> {
    LemmaSuite::default().check_tanh_sum(n_samples, seed)
}

pub fn check_tanh_diff(n_samples: usize, seed: u64) -> Result<CheckReport> {
    LemmaSuite::default().check_tanh_diff(n_samples, seed)
}

pub fn check_mean_bound(n_samples: usize, seed: u64) -> Result<CheckReport> {
    LemmaSuite::default().check_mean_bound(n_samples, seed)
}

pub fn check_concavity_bound(n_samples: usize, seed: u64) -> Result<CheckReport> {
    LemmaSuite::default().check_concavity_bound(n_samples, seed)
}

pub fn check_k_majorant(grid_size: usize, n_grids: usize, seed: u64) -> Result<CheckReport> {
    LemmaSuite::default().check_k_majorant(grid_size, n_grids, seed)
}

pub fn check_e_log_growth(
    mu: f64,
    eps: f64,
    t_list: &[f64],
    policy: &GridPolicy,
) -> Result<CheckReport> {
    LemmaSuite::default().check_e_log_growth(mu, eps, t_list, policy)
}

pub fn check_b_uniform_norm(
    mu: f64,
    t_list: &[f64],
    policy: &GridPolicy,
    norm_ceiling: f64,
) -> Result<CheckReport> {
    LemmaSuite::default().check_b_uniform_norm(mu, t_list, policy, norm_ceiling)
}

pub fn check_l_sandwich(
    mu: f64,
    temperature: f64,
    t0: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    LemmaSuite::default().check_l_sandwich(mu, temperature, t0, n_samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_examples() {
        assert!(1f64.tanh() < 1.0);
        let d = tanh_sum_ratio(2.0, -1.0);
        assert_relative_eq!(d, 2f64.tanh() - 1f64.tanh(), max_relative = 1e-14);
        assert!(d <= 4.0 * (-2.0f64).exp());
        let m = tanh_sum_ratio(3.0, -1.0);
        assert_relative_eq!(m, (3f64.tanh() - 1f64.tanh()) / 2.0, max_relative = 1e-14);
        assert!(m <= 0.5 * (tanh_ratio(3.0) + tanh_ratio(-1.0)));
        let unit = ModelParams::new(1.0, 0.0).unwrap();
        assert_relative_eq!(eval_b(2.0, 0.0, &unit), 0.5f64.tanh(), max_relative = 1e-14);
    }

    #[test]
    fn small_runs_pass_and_are_reproducible() {
        let a = check_tanh_sum(2000, 7).unwrap();
        let b = check_tanh_sum(2000, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.passed());
        assert!(check_tanh_diff(2000, 7).unwrap().passed());
        assert!(check_mean_bound(2000, 7).unwrap().passed());
        assert!(check_concavity_bound(2000, 7).unwrap().passed());
        assert!(check_k_majorant(20, 2, 7).unwrap().passed());
    }

    #[test]
    fn perturbation_is_detected() {
        let s = LemmaSuite::new(1e-3);
        let r = s.check_mean_bound(2000, 3).unwrap();
        assert!(r.violations > 0, "{r:?}");
        assert!(r.worst_sample.is_some());
    }

    #[test]
    fn sandwich_small() {
        let r = check_l_sandwich(1.0, 0.5, 0.5, 5000, 11).unwrap();
        assert!(r.passed(), "{r:?}");
    }
}
