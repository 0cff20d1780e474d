//! Composite Gauss–Legendre grids on `[0, Λ]`.
//!
//! Every momentum integral of the crate is a sum over one of these grids.
//! Panels are uniform on the bulk region `[0, 2√μ + 4s]`, refined
//! geometrically towards `0`, `√μ` and `2√μ` (where `F(q/2)` develops its
//! tanh crossover of width `O(T/√μ)`), and grow geometrically beyond.
//! The part of the integral beyond the cutoff is handled analytically by
//! [`kernel_tail`].

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{eval_f, ModelParams};

const REFINE_RATIO: f64 = 0.5;
const OUTER_GROWTH: f64 = 1.5;

/// Knobs for [`build_grid_with`]. The defaults are the ones used
/// throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    /// Absolute tolerance for the self-convergence test on `∫F(q/2)dq`.
    pub tol: f64,
    pub points_per_panel: usize,
    /// `c_Λ` in `Λ = c_Λ(2√μ⁺ + √max(T,μ,1)·k_tail)`.
    pub cutoff_factor: f64,
    /// `k_tail` in the same formula.
    pub tail_factor: f64,
    /// Explicit cutoff, bypassing the formula.
    pub cutoff: Option<f64>,
    /// Number of panel bisections tried before giving up.
    pub max_depth: u32,
    /// Smallest admissible `T/μ`.
    pub min_temperature_ratio: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            points_per_panel: 8,
            cutoff_factor: 3.0,
            tail_factor: 20.0,
            cutoff: None,
            max_depth: 4,
            min_temperature_ratio: 1e-8,
        }
    }
}

impl GridPolicy {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// What a grid was built for and how well it resolved its test integrand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub temperature: f64,
    pub mu: f64,
    pub tol: f64,
    pub points_per_panel: usize,
    pub depth: u32,
    /// `|∫F(q/2)dq|` difference between this grid and the same panels at
    /// twice the points per panel.
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cutoff: f64,
    panel_edges: Vec<f64>,
    refinement_centers: Vec<f64>,
    record: GridRecord,
}

impl MomentumGrid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn panel_edges(&self) -> &[f64] {
        &self.panel_edges
    }

    pub fn refinement_centers(&self) -> &[f64] {
        &self.refinement_centers
    }

    pub fn record(&self) -> &GridRecord {
        &self.record
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Fails if the self-convergence estimate exceeds the tolerance the
    /// grid was built for.
    pub fn ensure_resolved(&self) -> Result<()> {
        if self.record.estimate <= self.record.tol {
            Ok(())
        } else {
            Err(Error::QuadratureUnderresolved {
                estimate: self.record.estimate,
                tol: self.record.tol,
            })
        }
    }

    /// Same panels, different number of Gauss points per panel. The
    /// convergence record is carried over unchanged.
    pub fn with_points_per_panel(&self, points_per_panel: usize) -> Result<Self> {
        let (nodes, weights) = panel_rule(&self.panel_edges, points_per_panel)?;
        let mut record = self.record;
        record.points_per_panel = points_per_panel;
        Ok(Self {
            nodes,
            weights,
            cutoff: self.cutoff,
            panel_edges: self.panel_edges.clone(),
            refinement_centers: self.refinement_centers.clone(),
            record,
        })
    }

    /// Grid from explicit panel edges; used for oracles and tests. The
    /// record claims a zero estimate.
    pub fn from_edges(
        edges: &[f64],
        points_per_panel: usize,
        params: &ModelParams,
    ) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges[0] != 0.0 {
            return Err(Error::InvalidParams(
                "panel edges must start at 0 and increase strictly".into(),
            ));
        }
        let (nodes, weights) = panel_rule(edges, points_per_panel)?;
        Ok(Self {
            nodes,
            weights,
            cutoff: *edges.last().unwrap(),
            panel_edges: edges.to_vec(),
            refinement_centers: Vec::new(),
            record: GridRecord {
                temperature: params.temperature,
                mu: params.mu,
                tol: f64::INFINITY,
                points_per_panel,
                depth: 0,
                estimate: 0.0,
            },
        })
    }
}

fn panel_rule(edges: &[f64], points_per_panel: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let rule = GaussLegendre::new(points_per_panel)
        .map_err(|e| Error::InvalidParams(format!("points per panel: {e}")))?;
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = (edges.len() - 1) * points_per_panel;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for w in edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let half = 0.5 * (w[1] - w[0]);
        for &(x, wt) in &pairs {
            nodes.push(mid + half * x);
            weights.push(half * wt);
        }
    }
    Ok((nodes, weights))
}

/// The cutoff `Λ` prescribed by a policy.
pub fn default_cutoff(params: &ModelParams, policy: &GridPolicy) -> f64 {
    if let Some(c) = policy.cutoff {
        return c;
    }
    let sm = params.mu.max(0.0).sqrt();
    let scale = params.temperature.max(params.mu).max(1.0).sqrt();
    policy.cutoff_factor * (2.0 * sm + scale * policy.tail_factor)
}

fn base_edges(params: &ModelParams, cutoff: f64) -> (Vec<f64>, Vec<f64>) {
    let t = params.temperature;
    let mu = params.mu;
    let sm = mu.max(0.0).sqrt();
    let s = mu.max(t).sqrt();
    let h0 = 0.25 * s;
    let (centers, floor) = if mu > 0.0 {
        (vec![0.0, sm, 2.0 * sm], (t / sm).min(h0) / 4.0)
    } else {
        (vec![0.0], h0)
    };
    let top = (2.0 * sm + 4.0 * s).min(cutoff);

    let mut edges = Vec::new();
    // top/h0 is an exact integer whenever T ≤ μ; keep rounding from adding
    // a panel, which would break scale covariance
    let k = (top / h0 * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    edges.extend((0..=k).map(|j| j as f64 * top / k as f64));
    for &c in &centers {
        let mut d = 0.5 * h0;
        while d >= floor * 0.999 {
            for x in [c - d, c + d] {
                if x > 0.0 && x < top {
                    edges.push(x);
                }
            }
            d *= REFINE_RATIO;
        }
    }
    let mut x = top;
    let mut w = h0;
    while x < cutoff {
        w *= OUTER_GROWTH;
        x = (x + w).min(cutoff);
        if cutoff - x < 0.5 * w {
            x = cutoff;
        }
        edges.push(x);
    }
    edges.sort_by(f64::total_cmp);
    // drop near-duplicates left by overlapping refinement ladders
    let min_gap = floor * 1e-3;
    let mut merged: Vec<f64> = Vec::with_capacity(edges.len());
    for e in edges {
        match merged.last() {
            Some(&last) if e - last <= min_gap => {
                if e == cutoff {
                    *merged.last_mut().unwrap() = cutoff;
                }
            }
            _ => merged.push(e),
        }
    }
    (merged, centers)
}

fn bisect_panels(edges: &[f64], depth: u32) -> Vec<f64> {
    let parts = 1usize << depth;
    let mut out = Vec::with_capacity((edges.len() - 1) * parts + 1);
    for w in edges.windows(2) {
        for j in 0..parts {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / parts as f64);
        }
    }
    out.push(*edges.last().unwrap());
    out
}

fn test_integral(nodes: &[f64], weights: &[f64], params: &ModelParams) -> f64 {
    nodes
        .iter()
        .zip(weights)
        .map(|(&q, &w)| w * eval_f(0.5 * q, params))
        .sum()
}

/// Grid with the default policy at the given tolerance.
pub fn build_grid(params: &ModelParams, tol: f64) -> Result<MomentumGrid> {
    build_grid_with(params, &GridPolicy::with_tol(tol))
}

pub fn build_grid_with(params: &ModelParams, policy: &GridPolicy) -> Result<MomentumGrid> {
    if !(policy.tol > 0.0) {
        return Err(Error::InvalidParams(format!(
            "tolerance must be positive, got {}",
            policy.tol
        )));
    }
    if policy.points_per_panel == 0 {
        return Err(Error::InvalidParams("points per panel must be positive".into()));
    }
    if params.mu > 0.0 {
        let ratio = params.temperature / params.mu;
        if ratio < policy.min_temperature_ratio {
            return Err(Error::RefusedRegime {
                ratio,
                floor: policy.min_temperature_ratio,
            });
        }
    }
    let cutoff = default_cutoff(params, policy);
    if !(cutoff.is_finite() && cutoff > 0.0) || cutoff * cutoff <= 4.0 * params.mu.max(0.0) {
        return Err(Error::CutoffTooSmall {
            cutoff,
            mu: params.mu,
        });
    }

    let (base, centers) = base_edges(params, cutoff);
    let npp = policy.points_per_panel;
    let mut estimate = f64::INFINITY;
    for depth in 0..=policy.max_depth {
        let edges = bisect_panels(&base, depth);
        let (nodes, weights) = panel_rule(&edges, npp)?;
        let (fine_n, fine_w) = panel_rule(&edges, 2 * npp)?;
        let coarse = test_integral(&nodes, &weights, params);
        let fine = test_integral(&fine_n, &fine_w, params);
        estimate = (fine - coarse).abs();
        log::debug!(
            "grid T={} mu={} depth={depth} nodes={} estimate={estimate:.3e}",
            params.temperature,
            params.mu,
            nodes.len()
        );
        if estimate <= policy.tol {
            return Ok(MomentumGrid {
                nodes,
                weights,
                cutoff,
                panel_edges: edges,
                refinement_centers: centers,
                record: GridRecord {
                    temperature: params.temperature,
                    mu: params.mu,
                    tol: policy.tol,
                    points_per_panel: npp,
                    depth,
                    estimate,
                },
            });
        }
    }
    Err(Error::ToleranceUnreachable {
        depth: policy.max_depth as usize,
        estimate,
        tol: policy.tol,
    })
}

/// `Σᵢ wᵢ f(qᵢ)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, grid: &MomentumGrid) -> f64 {
    grid.nodes
        .iter()
        .zip(&grid.weights)
        .map(|(&q, &w)| w * f(q))
        .sum()
}

/// `∫_Λ^∞ 4/(q² + p² - 4μ) dq`, the large-`q` form of `∫_Λ^∞ B(p,q)dq`
/// once both tanh factors have saturated.
pub fn kernel_tail(p: f64, params: &ModelParams, cutoff: f64) -> f64 {
    let c = p * p - 4.0 * params.mu;
    let z = c / (cutoff * cutoff);
    if z.abs() < 1e-3 {
        // atan(x)/x and atanh(x)/x share the series in z = ±x²
        let series = 1.0 - z / 3.0 + z * z / 5.0 - z * z * z / 7.0;
        return 4.0 / cutoff * series;
    }
    if c > 0.0 {
        let r = c.sqrt();
        4.0 / r * (r / cutoff).atan()
    } else {
        let r = (-c).sqrt();
        4.0 / r * (r / cutoff).atanh()
    }
}

/// Upper bound on `sup_p ∫_{|q|>Λ} B(p,q) dq`, from
/// `B(p,q) ≤ 4/(p²+q²-4μ) ≤ 4/(q²-4μ)` on `|q| > Λ`.
pub fn tail_bound(params: &ModelParams, cutoff: f64) -> Result<f64> {
    let mu = params.mu;
    if !(cutoff > 0.0) || cutoff * cutoff <= 4.0 * mu {
        return Err(Error::CutoffTooSmall { cutoff, mu });
    }
    if mu <= 0.0 {
        return Ok(8.0 / cutoff);
    }
    let r = 2.0 * mu.sqrt();
    Ok(2.0 / mu.sqrt() * ((cutoff + r) / (cutoff - r)).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{eval_b, EULER_GAMMA};
    use approx::assert_relative_eq;

    fn params(t: f64, mu: f64) -> ModelParams {
        ModelParams::new(t, mu).unwrap()
    }

    #[test]
    fn grid_invariants() {
        for &(t, mu) in &[(1e-4, 1.0), (1.0, 0.0), (0.3, -0.5), (100.0, 1.0)] {
            let g = build_grid(&params(t, mu), 1e-8).unwrap();
            assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
            assert!(g.weights().iter().all(|&w| w > 0.0));
            assert!(g.nodes()[0] > 0.0 && *g.nodes().last().unwrap() < g.cutoff());
            let total: f64 = g.weights().iter().sum();
            assert_relative_eq!(total, g.cutoff(), max_relative = 1e-13);
        }
    }

    #[test]
    fn integrates_constants_and_quadratics() {
        let g = build_grid(&params(0.1, 1.0), 1e-8).unwrap();
        let l = g.cutoff();
        assert!((integrate(|_| 1.0, &g) - l).abs() < 1e-12 * l.max(1.0));
        assert_relative_eq!(integrate(|q| q * q, &g), l.powi(3) / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn low_temperature_self_convergence() {
        let pr = params(1e-4, 1.0);
        let g = build_grid(&pr, 1e-8).unwrap();
        assert!(g.record().estimate <= 1e-8);
        let fine = g.with_points_per_panel(24).unwrap();
        let a = integrate(|q| eval_f(0.5 * q, &pr), &g) / std::f64::consts::PI;
        let b = integrate(|q| eval_f(0.5 * q, &pr), &fine) / std::f64::consts::PI;
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn scaling_limit_grid_is_coarse() {
        let g = build_grid(&params(1.0, 0.0), 1e-8).unwrap();
        assert_eq!(g.record().depth, 0);
        assert!(g.len() < 400);
    }

    #[test]
    fn low_temperature_integral_of_f() {
        // ∫₀^∞ F(q/2) dq = ∫_ℝ F ≈ (2/√μ)(ln(μ/T) + γ + ln(8/π)) up to O(T²)
        let pr = params(1e-3, 1.0);
        let g = build_grid(&pr, 1e-9).unwrap();
        let v = integrate(|q| eval_f(0.5 * q, &pr), &g) + kernel_tail(0.0, &pr, g.cutoff());
        let asy = 2.0 * ((1e3f64).ln() + EULER_GAMMA + (8.0 / std::f64::consts::PI).ln());
        assert!((v - asy).abs() < 1e-4, "{v} vs {asy}");
    }

    #[test]
    fn refuses_extreme_ratio() {
        assert!(matches!(
            build_grid(&params(1e-9, 1.0), 1e-8),
            Err(Error::RefusedRegime { .. })
        ));
    }

    #[test]
    fn tail_bound_regression() {
        let b = tail_bound(&params(0.1, 1.0), 50.0).unwrap();
        assert_relative_eq!(b, 2.0 * (52.0f64 / 48.0).ln(), max_relative = 1e-14);
        assert!(b < 0.2);
        assert!(tail_bound(&params(0.1, 1.0), 1e6).unwrap() < 1e-5);
        assert!(matches!(
            tail_bound(&params(0.1, 1.0), 1.5),
            Err(Error::CutoffTooSmall { .. })
        ));
    }

    #[test]
    fn tail_bound_dominates_numeric_tail() {
        for &(t, mu, lam) in &[(0.1, 1.0, 10.0), (1.0, 0.0, 20.0), (1e-3, 2.0, 8.0)] {
            let pr = params(t, mu);
            let edges: Vec<f64> = (0..=400).map(|j| j as f64 * 10.0 * lam / 400.0).collect();
            let g = MomentumGrid::from_edges(&edges, 8, &pr).unwrap();
            let numeric: f64 = 2.0
                * g.nodes()
                    .iter()
                    .zip(g.weights())
                    .filter(|(&q, _)| q > lam)
                    .map(|(&q, &w)| w * eval_b(0.0, q, &pr))
                    .sum::<f64>();
            let panel_aligned = edges.contains(&lam);
            assert!(panel_aligned);
            assert!(tail_bound(&pr, lam).unwrap() >= numeric);
        }
    }

    #[test]
    fn analytic_tail_matches_quadrature() {
        let pr = params(0.5, 1.0);
        let lam = 40.0;
        for &p in &[0.0, 1.0, 3.0] {
            let edges: Vec<f64> = (0..=2000).map(|j| lam + j as f64 * 0.5).collect();
            let mut shifted = vec![0.0];
            shifted.extend(edges.iter().copied());
            let g = MomentumGrid::from_edges(&shifted, 8, &pr).unwrap();
            let far = *edges.last().unwrap();
            let numeric: f64 = g
                .nodes()
                .iter()
                .zip(g.weights())
                .filter(|(&q, _)| q > lam)
                .map(|(&q, &w)| w * eval_b(p, q, &pr))
                .sum::<f64>()
                + kernel_tail(p, &pr, far);
            assert_relative_eq!(numeric, kernel_tail(p, &pr, lam), max_relative = 1e-9);
        }
    }
}
