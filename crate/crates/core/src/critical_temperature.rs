//! Critical temperatures on the line and on the half-line.
//!
//! `T_c^ℝ(v)` solves `a_{T,μ} = 1/v`. On the half-line `T_c^{ℝ₊}(v)` is the
//! temperature where the top of the spectrum of the discretized operator
//! crosses `1/v`; it is never below `T_c^ℝ(v)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bs_operator::{assemble, top_eigenvalue, BoundaryCondition};
use crate::error::{Error, Result};
use crate::kernels::{a_of_p_unchecked, ModelParams, EULER_GAMMA};
use crate::quadrature::{build_grid_with, GridPolicy, MomentumGrid};

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcConfig {
    /// Relative tolerance on `T`, also used as absolute tolerance on the
    /// bulk residual.
    pub tol: f64,
    pub grid: GridPolicy,
    pub eig_tol: f64,
    /// Upward bracket step: `T ← T·(1 + s)`.
    pub bracket_step: f64,
    /// Bracket expansion stops at `cap · T_c^ℝ`.
    pub bracket_cap: f64,
    /// A gap counts only above this multiple of its refinement change.
    pub gap_significance: f64,
}

impl Default for TcConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            grid: GridPolicy::default(),
            eig_tol: 1e-10,
            bracket_step: 0.5,
            bracket_cap: 1024.0,
            gap_significance: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub grid_tol: f64,
    pub points_per_panel: usize,
    pub cutoff_factor: f64,
    pub eig_tol: f64,
    pub grid_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcResult {
    pub tc: f64,
    /// Defining equation evaluated at `tc`.
    pub residual: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
    pub numerics: Numerics,
    /// Half-line only: the gap at `T_c^ℝ` was not significant, so the
    /// boundary temperature coincides with the bulk one.
    pub collapsed: bool,
    /// Half-line only: `sup σ − a` at `T_c^ℝ`.
    pub gap_at_tc_bulk: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub v: f64,
    pub mu: f64,
    pub bc: BoundaryCondition,
    pub tc_bulk: f64,
    pub tc_boundary: f64,
    pub relative_shift: f64,
    pub gap_at_tc_bulk: f64,
    pub grid_nodes: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCurve {
    pub rows: Vec<RatioRow>,
}

impl RatioCurve {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be positive, got {x}")))
    }
}

fn numerics(cfg: &TcConfig, grid: &MomentumGrid) -> Numerics {
    Numerics {
        grid_tol: cfg.grid.tol,
        points_per_panel: grid.record().points_per_panel,
        cutoff_factor: cfg.grid.cutoff_factor,
        eig_tol: cfg.eig_tol,
        grid_nodes: grid.len(),
    }
}

/// `μ·(8e^γ/π)·exp(−π√μ/v)`, the weak-coupling solution of the bulk
/// equation.
pub fn tc_bulk_asymptotic(v: f64, mu: f64) -> f64 {
    mu * 8.0 * EULER_GAMMA.exp() / std::f64::consts::PI * (-std::f64::consts::PI * mu.sqrt() / v).exp()
}

/// `a_{T,μ}` on a freshly built grid.
pub fn bulk_edge(temperature: f64, mu: f64, policy: &GridPolicy) -> Result<(f64, MomentumGrid)> {
    let params = ModelParams::new(temperature, mu)?;
    let grid = build_grid_with(&params, policy)?;
    Ok((a_of_p_unchecked(0.0, &params, &grid), grid))
}

/// Geometric bisection of a decreasing function with `f(lo) > 0 > f(hi)`.
/// Returns `(root, residual, bracket, evaluations)`.
fn bisect_decreasing<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    mut f_hi: f64,
    tol: f64,
    residual_tol: f64,
    slack: f64,
) -> Result<(f64, f64, (f64, f64), usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut evaluations = 0;
    let mut best = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    for _ in 0..MAX_BISECTIONS {
        let width = (hi - lo) / lo;
        if width <= tol && best.1.abs() <= residual_tol {
            break;
        }
        if width <= f64::EPSILON * 4.0 {
            break;
        }
        let mid = (lo * hi).sqrt();
        let fm = f(mid)?;
        evaluations += 1;
        if fm > f_lo + slack || fm < f_hi - slack {
            return Err(Error::BracketFailure(format!(
                "non-monotone: f({lo:e})={f_lo:e}, f({mid:e})={fm:e}, f({hi:e})={f_hi:e}"
            )));
        }
        if fm.abs() < best.1.abs() {
            best = (mid, fm);
        }
        if fm > 0.0 {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
            f_hi = fm;
        }
        log::trace!("bisection T={mid:e} f={fm:e}");
    }
    Ok((best.0, best.1, (lo, hi), evaluations))
}

pub fn tc_bulk(v: f64, mu: f64, cfg: &TcConfig) -> Result<TcResult> {
    check_positive("v", v)?;
    check_positive("mu", mu)?;
    check_positive("tol", cfg.tol)?;
    let target = 1.0 / v;
    let mut evaluations = 0;
    let mut eval = |t: f64| -> Result<f64> {
        evaluations += 1;
        Ok(bulk_edge(t, mu, &cfg.grid)?.0 - target)
    };

    let floor = mu * cfg.grid.min_temperature_ratio;
    let guess = tc_bulk_asymptotic(v, mu).max(floor * 10.0);
    let mut lo = (guess / 10.0).max(floor);
    let mut hi = guess * 10.0;
    let mut f_lo = eval(lo)?;
    while f_lo <= 0.0 {
        if lo <= floor {
            return Err(Error::BracketFailure(format!(
                "a_T stays below 1/v = {target} down to T = {lo:e}"
            )));
        }
        hi = lo;
        lo = (lo / 10.0).max(floor);
        f_lo = eval(lo)?;
    }
    let mut f_hi = eval(hi)?;
    while f_hi >= 0.0 {
        if hi > 1e12 * mu {
            return Err(Error::BracketFailure(format!(
                "a_T stays above 1/v = {target} up to T = {hi:e}"
            )));
        }
        lo = hi;
        f_lo = f_hi;
        hi *= 10.0;
        f_hi = eval(hi)?;
    }
    if f_lo <= f_hi {
        return Err(Error::BracketFailure("a_T not decreasing on the bracket".into()));
    }
    let slack = 10.0 * cfg.grid.tol;
    let (tc, residual, bracket, _) =
        bisect_decreasing(&mut eval, lo, hi, f_lo, f_hi, cfg.tol, cfg.tol, slack)?;
    let params = ModelParams::new(tc, mu)?;
    let grid = build_grid_with(&params, &cfg.grid)?;
    Ok(TcResult {
        tc,
        residual,
        bracket,
        evaluations,
        numerics: numerics(cfg, &grid),
        collapsed: false,
        gap_at_tc_bulk: None,
    })
}

/// Top of the discretized half-line spectrum at `(T, μ)`.
pub fn boundary_top(
    temperature: f64,
    mu: f64,
    bc: BoundaryCondition,
    cfg: &TcConfig,
) -> Result<(f64, f64, MomentumGrid)> {
    let params = ModelParams::new(temperature, mu)?;
    let grid = build_grid_with(&params, &cfg.grid)?;
    let op = assemble(&params, &grid, bc)?;
    let top = top_eigenvalue(&op, cfg.eig_tol)?;
    Ok((top, op.a_edge, grid))
}

/// Gap at `(T, μ)` together with its change under doubling the points
/// per panel.
pub fn gap_with_estimate(
    temperature: f64,
    mu: f64,
    bc: BoundaryCondition,
    cfg: &TcConfig,
) -> Result<(f64, f64, MomentumGrid)> {
    let params = ModelParams::new(temperature, mu)?;
    let grid = build_grid_with(&params, &cfg.grid)?;
    let op = assemble(&params, &grid, bc)?;
    let gap = top_eigenvalue(&op, cfg.eig_tol)? - op.a_edge;
    let fine_grid = grid.with_points_per_panel(2 * grid.record().points_per_panel)?;
    let fine = assemble(&params, &fine_grid, bc)?;
    let fine_gap = top_eigenvalue(&fine, cfg.eig_tol)? - fine.a_edge;
    Ok((gap, (fine_gap - gap).abs(), grid))
}

pub fn tc_boundary(v: f64, mu: f64, bc: BoundaryCondition, cfg: &TcConfig) -> Result<TcResult> {
    let bulk = tc_bulk(v, mu, cfg)?;
    tc_boundary_from_bulk(v, mu, bc, cfg, &bulk)
}

/// [`tc_boundary`] with a precomputed bulk result.
pub fn tc_boundary_from_bulk(
    v: f64,
    mu: f64,
    bc: BoundaryCondition,
    cfg: &TcConfig,
    bulk: &TcResult,
) -> Result<TcResult> {
    let target = 1.0 / v;
    let t0 = bulk.tc;
    let (gap, change, grid0) = gap_with_estimate(t0, mu, bc, cfg)?;
    let threshold = cfg.gap_significance * change + 1e-13;
    log::debug!("{bc} v={v}: gap at T_c^R = {gap:.6e} (threshold {threshold:.3e})");
    if gap <= threshold {
        return Ok(TcResult {
            tc: t0,
            residual: bulk.residual + gap,
            bracket: bulk.bracket,
            evaluations: bulk.evaluations + 2,
            numerics: numerics(cfg, &grid0),
            collapsed: true,
            gap_at_tc_bulk: Some(gap),
        });
    }

    let mut evaluations = 2;
    let mut eval = |t: f64| -> Result<f64> {
        evaluations += 1;
        Ok(boundary_top(t, mu, bc, cfg)?.0 - target)
    };
    let lo = t0;
    let f_lo = eval(lo)?;
    if f_lo <= 0.0 {
        return Err(Error::BracketFailure(format!(
            "significant gap {gap:e} at T_c^R but sup σ − 1/v = {f_lo:e}"
        )));
    }
    let mut lo_b = lo;
    let mut f_lo_b = f_lo;
    let mut hi = lo * (1.0 + cfg.bracket_step);
    let mut f_hi = eval(hi)?;
    while f_hi >= 0.0 {
        if f_hi > f_lo_b + 10.0 * cfg.grid.tol {
            return Err(Error::BracketFailure(format!(
                "sup σ increased between T={lo_b:e} and T={hi:e}"
            )));
        }
        lo_b = hi;
        f_lo_b = f_hi;
        hi *= 1.0 + cfg.bracket_step;
        if hi > cfg.bracket_cap * t0 {
            return Err(Error::BracketFailure(format!(
                "no sign change below {:e}·T_c^R",
                cfg.bracket_cap
            )));
        }
        f_hi = eval(hi)?;
    }
    log::debug!("{bc} v={v}: bracket [{lo_b:e}, {hi:e}]");
    let slack = 10.0 * cfg.grid.tol;
    let (tc, residual, bracket, _) =
        bisect_decreasing(&mut eval, lo_b, hi, f_lo_b, f_hi, cfg.tol, f64::INFINITY, slack)?;
    let params = ModelParams::new(tc, mu)?;
    let grid = build_grid_with(&params, &cfg.grid)?;
    Ok(TcResult {
        tc,
        residual,
        bracket,
        evaluations: bulk.evaluations + evaluations,
        numerics: numerics(cfg, &grid),
        collapsed: false,
        gap_at_tc_bulk: Some(gap),
    })
}

/// `𝔳(T) = 1/sup σ(A^{ℝ₊}_{T,μ})`.
pub fn v_of_t(temperature: f64, mu: f64, bc: BoundaryCondition, cfg: &TcConfig) -> Result<f64> {
    check_positive("T", temperature)?;
    Ok(1.0 / boundary_top(temperature, mu, bc, cfg)?.0)
}

fn ratio_row(v: f64, mu: f64, bc: BoundaryCondition, cfg: &TcConfig) -> RatioRow {
    let mut row = RatioRow {
        v,
        mu,
        bc,
        tc_bulk: f64::NAN,
        tc_boundary: f64::NAN,
        relative_shift: f64::NAN,
        gap_at_tc_bulk: f64::NAN,
        grid_nodes: 0,
        error: None,
    };
    let bulk = match tc_bulk(v, mu, cfg) {
        Ok(b) => b,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.tc_bulk = bulk.tc;
    row.grid_nodes = bulk.numerics.grid_nodes;
    match tc_boundary_from_bulk(v, mu, bc, cfg, &bulk) {
        Ok(b) => {
            row.tc_boundary = b.tc;
            row.relative_shift = (b.tc - bulk.tc) / bulk.tc;
            row.gap_at_tc_bulk = b.gap_at_tc_bulk.unwrap_or(f64::NAN);
            row.grid_nodes = b.numerics.grid_nodes;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// One row per coupling, computed in parallel. Row failures are recorded
/// in the row and do not stop the sweep.
pub fn ratio_curve(
    v_values: &[f64],
    mu: f64,
    bc: BoundaryCondition,
    cfg: &TcConfig,
) -> Result<RatioCurve> {
    check_positive("mu", mu)?;
    for &v in v_values {
        check_positive("v", v)?;
    }
    let mut vs = v_values.to_vec();
    vs.sort_by(f64::total_cmp);
    let rows = vs.par_iter().map(|&v| ratio_row(v, mu, bc, cfg)).collect();
    Ok(RatioCurve { rows })
}
