//! Brute-force verification of the sampled optimum.
//!
//! The cost restricted to piecewise-constant controls is an exact quadratic
//! in the stacked coefficient vector `Û ∈ R^{mN}`, so it can be recovered
//! from cost evaluations alone:
//!
//! ```text
//! c    = C(0)
//! g_j  = ½ (C(e_j) − C(−e_j))
//! H_jj = C(e_j) + C(−e_j) − 2C(0)
//! H_jk = C(e_j + e_k) − C(e_j) − C(e_k) + C(0)
//! ```
//!
//! The only code shared with the Riccati path is the simulator.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::pipeline::solve;
use crate::problem::LqProblem;
use crate::simulate::{cost_of, PiecewiseConstantControl, RESIDUAL_FLOOR};

/// Largest stacked control dimension the oracle accepts.
pub const ORACLE_LIMIT: usize = 400;

/// `C(Û) = ½⟨HÛ, Û⟩ + ⟨g, Û⟩ + c`.
#[derive(Debug, Clone)]
pub struct DenseQp {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub constant: f64,
    pub m: usize,
}

impl DenseQp {
    pub fn value(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.hessian * u)) + self.gradient.dot(u) + self.constant
    }
}

fn stacked(grid: &SamplingGrid, m: usize, u: &DVector<f64>) -> PiecewiseConstantControl {
    let values = (0..grid.len()).map(|i| u.rows(i * m, m).into_owned()).collect();
    PiecewiseConstantControl { grid: grid.clone(), values }
}

fn unstack(controls: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(
        controls.iter().map(DVector::len).sum(),
        controls.iter().flat_map(|u| u.iter().copied()),
    )
}

pub fn assemble_qp(p: &LqProblem, grid: &SamplingGrid, substeps: usize) -> Result<DenseQp> {
    p.require_validated()?;
    let m = p.m;
    let dim = m * grid.len();
    if dim > ORACLE_LIMIT {
        return Err(Error::TooLarge { size: dim, limit: ORACLE_LIMIT });
    }
    let cost = |u: &DVector<f64>| cost_of(p, &stacked(grid, m, u), substeps);
    let unit = |j: usize, sign: f64| {
        let mut e = DVector::zeros(dim);
        e[j] = sign;
        e
    };

    let c0 = cost(&DVector::zeros(dim))?;
    let singles: Vec<(f64, f64)> = (0..dim)
        .into_par_iter()
        .map(|j| Ok((cost(&unit(j, 1.0))?, cost(&unit(j, -1.0))?)))
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> =
        (0..dim).flat_map(|j| (j + 1..dim).map(move |k| (j, k))).collect();
    let cross: Vec<f64> = pairs
        .par_iter()
        .map(|&(j, k)| {
            let mut e = unit(j, 1.0);
            e[k] = 1.0;
            Ok(cost(&e)? - singles[j].0 - singles[k].0 + c0)
        })
        .collect::<Result<_>>()?;

    let mut hessian = DMatrix::zeros(dim, dim);
    let mut gradient = DVector::zeros(dim);
    for (j, &(plus, minus)) in singles.iter().enumerate() {
        hessian[(j, j)] = plus + minus - 2.0 * c0;
        gradient[j] = 0.5 * (plus - minus);
    }
    for (&(j, k), &v) in pairs.iter().zip(&cross) {
        hessian[(j, k)] = v;
        hessian[(k, j)] = v;
    }
    if !(hessian.iter().all(|x| x.is_finite()) && gradient.iter().all(|x| x.is_finite()) && c0.is_finite()) {
        return Err(Error::NonFinite("QP assembly".into()));
    }
    Ok(DenseQp { hessian, gradient, constant: c0, m })
}

/// `Û = −H⁻¹g` via Cholesky.
pub fn solve_qp(qp: &DenseQp) -> Result<DVector<f64>> {
    let chol = Cholesky::new(qp.hessian.clone()).ok_or(Error::QpNotPd)?;
    Ok(-chol.solve(&qp.gradient))
}

#[derive(Debug, Clone)]
pub struct IndexDiff {
    pub interval: usize,
    pub component: usize,
    pub sweep: f64,
    pub qp: f64,
    pub abs_diff: f64,
}

#[derive(Debug, Clone)]
pub struct CrossCheckReport {
    pub diffs: Vec<IndexDiff>,
    pub max_abs_diff: f64,
    /// `max |Δ| / max(‖Û‖∞, floor)`.
    pub max_rel_diff: f64,
    pub sweep_cost: f64,
    pub qp_cost: f64,
    /// `‖HÛ + g‖`.
    pub certificate_norm: f64,
    pub gradient_norm: f64,
    pub hessian_min_eigenvalue: f64,
}

impl CrossCheckReport {
    pub fn agrees(&self, tol: f64) -> bool {
        self.max_rel_diff <= tol
    }

    pub fn cost_gap(&self) -> f64 {
        (self.sweep_cost - self.qp_cost).abs()
    }
}

/// Solves the sampled problem both by the sweep and by the dense QP.
pub fn cross_check(p: &LqProblem, grid: &SamplingGrid, substeps: usize) -> Result<CrossCheckReport> {
    let qp = assemble_qp(p, grid, substeps)?;
    let u_qp = solve_qp(&qp)?;
    let sol = solve(p, grid, substeps)?.solution;
    let u_sweep = unstack(&sol.controls);
    let m = p.m;
    let diffs: Vec<IndexDiff> = (0..u_qp.len())
        .map(|j| IndexDiff {
            interval: j / m,
            component: j % m,
            sweep: u_sweep[j],
            qp: u_qp[j],
            abs_diff: (u_sweep[j] - u_qp[j]).abs(),
        })
        .collect();
    let max_abs_diff = diffs.iter().map(|d| d.abs_diff).fold(0.0, f64::max);
    let scale = u_qp.amax().max(RESIDUAL_FLOOR);
    Ok(CrossCheckReport {
        max_abs_diff,
        max_rel_diff: max_abs_diff / scale,
        sweep_cost: sol.predicted_cost,
        qp_cost: qp.value(&u_qp),
        certificate_norm: (&qp.hessian * &u_qp + &qp.gradient).norm(),
        gradient_norm: qp.gradient.norm(),
        hessian_min_eigenvalue: crate::problem::min_eigenvalue(&qp.hessian),
        diffs,
    })
}
