//! State-transition matrix and Duhamel convolution terms over one sampling
//! interval.
//!
//! On `[s_i, s_{i+1}]` the three quantities
//!
//! ```text
//! Z(τ, s_i),   Γ(τ) = ∫_{s_i}^τ Z(τ, s) B(s) ds,   ξ(τ) = ∫_{s_i}^τ Z(τ, s) ω(s) ds
//! ```
//!
//! solve `Z' = AZ`, `Γ' = AΓ + B`, `ξ' = Aξ + ω` with `Z = I`, `Γ = 0`,
//! `ξ = 0` at `s_i`. They are stacked into one `n × (n + m + 1)` matrix and
//! integrated together with fixed-step RK4, keeping every node so the
//! quadrature in [`crate::blocks`] can reuse them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::problem::LqProblem;

pub const DEFAULT_SUBSTEPS: usize = 64;

/// One classical RK4 step of `x' = f(t, x)` from `t0` to `t1`.
pub(crate) fn rk4_step<F>(x: &DMatrix<f64>, t0: f64, t1: f64, f: F) -> DMatrix<f64>
where
    F: Fn(f64, &DMatrix<f64>) -> DMatrix<f64>,
{
    let dt = t1 - t0;
    let tm = t0 + 0.5 * dt;
    let k1 = f(t0, x);
    let k2 = f(tm, &(x + &k1 * (0.5 * dt)));
    let k3 = f(tm, &(x + &k2 * (0.5 * dt)));
    let k4 = f(t1, &(x + &k3 * dt));
    x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0)
}

pub(crate) fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

#[derive(Debug, Clone)]
pub struct IntervalPropagation {
    pub index: usize,
    pub nodes: Vec<f64>,
    /// `Z(τ_k, s_i)`.
    pub z: Vec<DMatrix<f64>>,
    /// `Γ(τ_k)`.
    pub gamma: Vec<DMatrix<f64>>,
    /// `ξ(τ_k)`.
    pub xi: Vec<DVector<f64>>,
}

impl IntervalPropagation {
    pub fn substeps(&self) -> usize {
        (self.nodes.len() - 1) / 2
    }
}

/// Integrates `Z`, `Γ`, `ξ` across interval `i` with `2M` RK4 steps.
pub fn propagate_interval(
    p: &LqProblem,
    grid: &SamplingGrid,
    i: usize,
    substeps: usize,
) -> Result<IntervalPropagation> {
    p.require_validated()?;
    if i >= grid.len() {
        return Err(Error::IndexOutOfRange { index: i, max: grid.len() - 1 });
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be at least 1".into()));
    }
    let (n, m) = (p.n, p.m);
    let width = n + m + 1;
    let nodes = grid.nodes(i, substeps);

    let rhs = |t: f64, x: &DMatrix<f64>| {
        let mut dx = p.a_at(t) * x;
        let mut forcing = dx.columns_mut(n, m);
        forcing += p.b_at(t);
        let mut col = dx.column_mut(n + m);
        col += p.omega_at(t);
        dx
    };

    let mut x = DMatrix::zeros(n, width);
    x.view_mut((0, 0), (n, n)).fill_with_identity();

    let mut z = Vec::with_capacity(nodes.len());
    let mut gamma = Vec::with_capacity(nodes.len());
    let mut xi = Vec::with_capacity(nodes.len());
    let mut record = |x: &DMatrix<f64>| {
        z.push(x.columns(0, n).into_owned());
        gamma.push(x.columns(n, m).into_owned());
        xi.push(x.column(n + m).into_owned());
    };
    record(&x);
    for w in nodes.windows(2) {
        x = rk4_step(&x, w[0], w[1], rhs);
        if !all_finite(&x) {
            return Err(Error::NonFinite(format!("propagation of interval {i}")));
        }
        record(&x);
    }
    Ok(IntervalPropagation { index: i, nodes, z, gamma, xi })
}

/// `Z(t, s)`, integrating forward or backward in time with `2M` RK4 steps.
pub fn transition_matrix(p: &LqProblem, t: f64, s: f64, substeps: usize) -> Result<DMatrix<f64>> {
    let eye = DMatrix::identity(p.n, p.n);
    if t == s {
        return Ok(eye);
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be at least 1".into()));
    }
    let steps = 2 * substeps;
    let mut times: Vec<f64> = (0..=steps).map(|k| s + (t - s) * k as f64 / steps as f64).collect();
    times[steps] = t;
    let mut z = eye;
    for w in times.windows(2) {
        z = rk4_step(&z, w[0], w[1], |tau, x| p.a_at(tau) * x);
        if !all_finite(&z) {
            return Err(Error::NonFinite("transition matrix".into()));
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::CoefficientFunction;
    use crate::problem::{validate_problem, DEFAULT_PROBES};
    use crate::registry;

    fn dontchev() -> LqProblem {
        registry::lookup("dontchev").unwrap().problem
    }

    #[test]
    fn zero_generator_keeps_identity() {
        let p = LqProblem::homogeneous(
            0.0,
            2.0,
            CoefficientFunction::zeros(3, 3),
            CoefficientFunction::constant(DMatrix::from_element(3, 2, 1.0)),
            CoefficientFunction::zeros(3, 3),
            CoefficientFunction::constant(DMatrix::identity(2, 2)),
            DMatrix::zeros(3, 3),
            DVector::zeros(3),
        );
        let p = validate_problem(p, DEFAULT_PROBES).unwrap();
        let grid = SamplingGrid::uniform(2, 0.0, 2.0).unwrap();
        let prop = propagate_interval(&p, &grid, 1, 8).unwrap();
        for z in &prop.z {
            assert_eq!(z, &DMatrix::<f64>::identity(3, 3));
        }
        // Γ(τ) = (τ − s_1) · B exactly integrates with RK4.
        let last = prop.gamma.last().unwrap();
        assert!(last.iter().all(|&x| (x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn scalar_exponential_and_duhamel_term() {
        let p = dontchev();
        let grid = SamplingGrid::uniform(1, 0.0, 1.0).unwrap();
        let prop = propagate_interval(&p, &grid, 0, 64).unwrap();
        assert_eq!(prop.nodes.len(), 129);
        assert_eq!(prop.z[0][(0, 0)], 1.0);
        assert_eq!(prop.gamma[0][(0, 0)], 0.0);
        let e_half = 0.5f64.exp();
        assert!((prop.z[128][(0, 0)] - e_half).abs() <= 1e-10);
        assert!((prop.gamma[128][(0, 0)] - 2.0 * (e_half - 1.0)).abs() <= 1e-10);
        assert!(prop.xi.iter().all(|x| x[0] == 0.0));
    }

    #[test]
    fn backward_transition() {
        let p = dontchev();
        let z = transition_matrix(&p, 0.0, 1.0, 64).unwrap();
        assert!((z[(0, 0)] - (-0.5f64).exp()).abs() < 1e-10);
        assert_eq!(transition_matrix(&p, 0.3, 0.3, 64).unwrap()[(0, 0)], 1.0);
        let full = transition_matrix(&p, 1.0, 0.0, 64).unwrap();
        let composed =
            transition_matrix(&p, 1.0, 0.5, 64).unwrap() * transition_matrix(&p, 0.5, 0.0, 64).unwrap();
        assert!((full - composed).norm() < 1e-10);
    }

    #[test]
    fn propagation_is_deterministic() {
        let p = registry::lookup("timevarying-demo").unwrap().problem;
        let grid = SamplingGrid::uniform(3, p.a, p.b).unwrap();
        let a = propagate_interval(&p, &grid, 2, 16).unwrap();
        let b = propagate_interval(&p, &grid, 2, 16).unwrap();
        assert_eq!(a.z, b.z);
        assert_eq!(a.gamma, b.gamma);
        assert_eq!(a.xi, b.xi);
    }

    #[test]
    fn rejects_unvalidated_problem() {
        let mut p = dontchev();
        p = p.with_drift(CoefficientFunction::scalar(1.0));
        let grid = SamplingGrid::uniform(1, 0.0, 1.0).unwrap();
        assert!(matches!(propagate_interval(&p, &grid, 0, 4), Err(Error::NotValidated)));
    }

    #[test]
    fn non_finite_data_is_reported() {
        let mut p = dontchev();
        p.state_matrix = CoefficientFunction::scalar(f64::NAN);
        let grid = SamplingGrid::uniform(1, 0.0, 1.0).unwrap();
        assert!(matches!(propagate_interval(&p, &grid, 0, 4), Err(Error::NonFinite(_))));
    }
}
