//! Nyström discretization of the half-line Birman–Schwinger operator.
//!
//! In the even momentum sector the operator acts on `[0, ∞)` as
//! `A(p)ψ(p) ∓ (1/4π)·2∫₀^∞ B(p,q)ψ(q)dq`, minus for Dirichlet and plus for
//! Neumann. With weights `wᵢ` the matrix is symmetrized as
//! `Mᵢⱼ = δᵢⱼA(pᵢ) ∓ (1/2π)B(pᵢ,pⱼ)√(wᵢwⱼ)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{a_of_p_unchecked, eval_b, ModelParams};
use crate::quadrature::{kernel_tail, MomentumGrid};

/// Largest matrix handed to the dense symmetric eigensolver.
pub const DENSE_LIMIT: usize = 1200;
const POWER_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl BoundaryCondition {
    /// Sign in front of the `B` term.
    pub fn sign(self) -> f64 {
        match self {
            Self::Dirichlet => -1.0,
            Self::Neumann => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dirichlet => "dirichlet",
            Self::Neumann => "neumann",
        }
    }
}

impl std::fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" | "d" => Ok(Self::Dirichlet),
            "neumann" | "n" => Ok(Self::Neumann),
            other => Err(Error::InvalidParams(format!(
                "unknown boundary condition {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    pub matrix: DMatrix<f64>,
    pub grid: MomentumGrid,
    pub params: ModelParams,
    pub bc: BoundaryCondition,
    /// `a_{T,μ}` on the same grid.
    pub a_edge: f64,
    /// `A(pᵢ)`, the multiplication part.
    pub diagonal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: DVector<f64>,
    /// `‖Mx − λx‖`.
    pub residual: f64,
}

/// `Bᵢⱼ√(wᵢwⱼ)` on the grid, without any prefactor.
pub fn symmetrized_kernel(params: &ModelParams, grid: &MomentumGrid) -> DMatrix<f64> {
    let p = grid.nodes();
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let n = p.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| eval_b(p[i], p[j], params) * sw[i] * sw[j])
                .collect()
        })
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (k, v) in row.into_iter().enumerate() {
            let j = i + k;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub fn assemble(
    params: &ModelParams,
    grid: &MomentumGrid,
    bc: BoundaryCondition,
) -> Result<DiscretizedOperator> {
    grid.ensure_resolved()?;
    let kernel = symmetrized_kernel(params, grid);
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    // Row sums of the unsymmetrized kernel give A(pᵢ) on the same nodes, so
    // the continuum edge of the discrete operator sits exactly at a.
    let diagonal: Vec<f64> = (0..grid.len())
        .map(|i| {
            let row: f64 = kernel
                .row(i)
                .iter()
                .zip(&sw)
                .map(|(k, s)| k * s)
                .sum::<f64>()
                / sw[i];
            (row + kernel_tail(grid.nodes()[i], params, grid.cutoff())) / two_pi
        })
        .collect();
    let a_edge = a_of_p_unchecked(0.0, params, grid);

    let mut matrix = kernel * (bc.sign() / two_pi);
    for (i, d) in diagonal.iter().enumerate() {
        matrix[(i, i)] += d;
    }
    debug_assert!(is_symmetric(&matrix, 1e-14));
    Ok(DiscretizedOperator {
        matrix,
        grid: grid.clone(),
        params: *params,
        bc,
        a_edge,
        diagonal,
    })
}

fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

fn residual_norm(m: &DMatrix<f64>, x: &DVector<f64>, lambda: f64) -> f64 {
    (m * x - x * lambda).norm()
}

/// Largest eigenvalue and its unit eigenvector of a symmetric matrix.
pub fn top_eigenpair_of(matrix: &DMatrix<f64>, tol: f64) -> Result<Eigenpair> {
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("matrix has non-finite entries".into()));
    }
    if matrix.nrows() > DENSE_LIMIT {
        return power_top_eigenpair(matrix, tol, POWER_MAX_ITER);
    }
    let eig = matrix.clone().symmetric_eigen();
    let (k, &value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::InvalidParams("empty matrix".into()))?;
    if log::log_enabled!(log::Level::Debug) && eig.eigenvalues.len() > 1 {
        let second = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        log::debug!("top eigenvalue {value:.12e}, second {second:.12e}");
    }
    let mut vector = eig.eigenvectors.column(k).into_owned();
    // fix the sign so that results are reproducible
    if vector.iter().sum::<f64>() < 0.0 {
        vector.neg_mut();
    }
    let residual = residual_norm(matrix, &vector, value);
    Ok(Eigenpair {
        value,
        vector,
        residual,
    })
}

/// Power iteration on `M + σI` with `σ` a Gershgorin shift making the
/// spectrum nonnegative. Stops when `‖Mx − λx‖ ≤ tol·‖M‖`.
pub fn power_top_eigenpair(matrix: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<Eigenpair> {
    let n = matrix.nrows();
    if n == 0 {
        return Err(Error::InvalidParams("empty matrix".into()));
    }
    let gersh = (0..n)
        .map(|i| matrix.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let norm = gersh.max(f64::MIN_POSITIVE);
    let shift = gersh;
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let mx = matrix * &x;
        lambda = x.dot(&mx);
        residual = (&mx - &x * lambda).norm();
        if residual <= tol * norm {
            log::debug!("power iteration converged after {it} steps");
            if x.iter().sum::<f64>() < 0.0 {
                x.neg_mut();
            }
            return Ok(Eigenpair {
                value: lambda,
                vector: x,
                residual,
            });
        }
        let y = mx + &x * shift;
        let ny = y.norm();
        if ny == 0.0 {
            break;
        }
        x = y / ny;
    }
    let _ = lambda;
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Top `k` eigenvalues by power iteration with Hotelling deflation.
pub fn deflated_top_eigenvalues(
    matrix: &DMatrix<f64>,
    k: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    // found eigenvalues are moved below the Gershgorin disc
    let floor = -(0..n)
        .map(|i| matrix.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut m = matrix.clone();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k.min(n) {
        let pair = power_top_eigenpair(&m, tol, POWER_MAX_ITER)?;
        m -= &pair.vector * pair.vector.transpose() * (pair.value - floor);
        out.push(pair.value);
    }
    Ok(out)
}

pub fn top_eigenpair(op: &DiscretizedOperator, tol: f64) -> Result<Eigenpair> {
    top_eigenpair_of(&op.matrix, tol)
}

/// Largest eigenvalue only, skipping eigenvectors on the dense path.
pub fn top_eigenvalue(op: &DiscretizedOperator, tol: f64) -> Result<f64> {
    if op.matrix.nrows() > DENSE_LIMIT {
        return Ok(top_eigenpair(op, tol)?.value);
    }
    op.matrix
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::InvalidParams("empty matrix".into()))
}

/// `sup σ(M) − a_{T,μ}`.
pub fn spectral_gap(op: &DiscretizedOperator, tol: f64) -> Result<f64> {
    Ok(top_eigenvalue(op, tol)? - op.a_edge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::build_grid;
    use approx::assert_relative_eq;

    fn op(t: f64, mu: f64, bc: BoundaryCondition) -> DiscretizedOperator {
        let pr = ModelParams::new(t, mu).unwrap();
        let g = build_grid(&pr, 1e-8).unwrap();
        assemble(&pr, &g, bc).unwrap()
    }

    #[test]
    fn two_by_two() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = top_eigenpair_of(&m, 1e-12).unwrap();
        assert_relative_eq!(e.value, 3.0, max_relative = 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(e.vector[0], s, max_relative = 1e-12);
        assert_relative_eq!(e.vector[1], s, max_relative = 1e-12);
    }

    #[test]
    fn identity() {
        let m = DMatrix::<f64>::identity(5, 5);
        let e = top_eigenpair_of(&m, 1e-12).unwrap();
        assert_eq!(e.value, 1.0);
        assert!(e.residual < 1e-15);
        assert_relative_eq!(e.vector.norm(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        let n = 40;
        let m = DMatrix::from_fn(n, n, |i, j| {
            1.0 / (1.0 + (i as f64 - j as f64).abs()) + if i == j { i as f64 * 0.05 } else { 0.0 }
        });
        let dense = top_eigenpair_of(&m, 1e-12).unwrap();
        let power = power_top_eigenpair(&m, 1e-11, POWER_MAX_ITER).unwrap();
        assert_relative_eq!(dense.value, power.value, max_relative = 1e-10);
        let two = deflated_top_eigenvalues(&m, 2, 1e-11).unwrap();
        let mut all: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        all.sort_by(|a, b| b.total_cmp(a));
        assert_relative_eq!(two[1], all[1], max_relative = 1e-8);
    }

    #[test]
    fn symmetric_assembly() {
        let o = op(0.1, 1.0, BoundaryCondition::Dirichlet);
        assert!(is_symmetric(&o.matrix, 0.0));
    }

    #[test]
    fn diagonal_part_peaks_at_edge() {
        let o = op(0.05, 1.0, BoundaryCondition::Dirichlet);
        let max = o.diagonal.iter().copied().fold(f64::MIN, f64::max);
        assert!(max <= o.a_edge);
        assert_relative_eq!(max, o.diagonal[0], max_relative = 1e-12);
        assert!((o.a_edge - o.diagonal[0]) < 1e-3 * o.a_edge);
    }

    #[test]
    fn neumann_above_edge_dirichlet_below_neumann() {
        for &t in &[0.01, 0.1, 1.0] {
            let d = op(t, 1.0, BoundaryCondition::Dirichlet);
            let n = op(t, 1.0, BoundaryCondition::Neumann);
            let gd = spectral_gap(&d, 1e-10).unwrap();
            let gn = spectral_gap(&n, 1e-10).unwrap();
            assert!(gn > 0.0, "T={t}: {gn}");
            assert!(gn >= gd);
        }
    }

    #[test]
    fn dirichlet_boundary_state_at_low_temperature() {
        let o = op(1e-3, 1.0, BoundaryCondition::Dirichlet);
        let e = top_eigenpair(&o, 1e-10).unwrap();
        assert!(e.value > o.a_edge);
        assert!(e.residual <= 1e-10 * o.matrix.norm());
    }

    #[test]
    fn scaling_limit_dirichlet_has_no_gap() {
        let o = op(1.0, 0.0, BoundaryCondition::Dirichlet);
        assert!(spectral_gap(&o, 1e-10).unwrap() <= 1e-5);
    }

    #[test]
    fn parse_boundary_condition() {
        assert_eq!("Dirichlet".parse::<BoundaryCondition>().unwrap(), BoundaryCondition::Dirichlet);
        assert_eq!("neumann".parse::<BoundaryCondition>().unwrap(), BoundaryCondition::Neumann);
        assert!("robin".parse::<BoundaryCondition>().is_err());
    }
}
