//! Per-interval integral blocks feeding the backward recursion.
//!
//! Every outer integral is a composite Simpson sum over the `2M + 1` nodes
//! produced by [`propagate_interval`]; no coefficient is evaluated anywhere
//! else. None of the blocks depends on the initial state `q_a`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::problem::{symmetrize, LqProblem};
use crate::quadrature::{simpson_matrix, simpson_scalar, simpson_vector, simpson_weights};
use crate::transition::{propagate_interval, IntervalPropagation};

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBlocks {
    pub index: usize,
    /// `Z(s_{i+1}, s_i)`.
    pub z_step: DMatrix<f64>,
    pub zb: DMatrix<f64>,
    /// `∫ Z(s_{i+1}, s) ω(s) ds`, minus `q_b` on the last interval.
    pub z_omega: DVector<f64>,
    /// `q_b` on the last interval, `None` elsewhere.
    pub terminal_target: Option<DVector<f64>>,
    pub zwz: DMatrix<f64>,
    pub zbwz: DMatrix<f64>,
    pub zbwzb: DMatrix<f64>,
    pub zbwz_omega_x: DVector<f64>,
    pub zwz_omega_x: DVector<f64>,
    pub wz_omega_x2: f64,
    /// `∫ R(s) ds` over the interval.
    pub r_bar: DMatrix<f64>,
    pub rv: DVector<f64>,
    pub rv2: f64,
}

/// Assembles the blocks of interval `i` from its node data.
pub fn compute_blocks(
    p: &LqProblem,
    grid: &SamplingGrid,
    i: usize,
    prop: &IntervalPropagation,
) -> Result<IntervalBlocks> {
    p.require_validated()?;
    if i >= grid.len() || prop.index != i {
        return Err(Error::NodeMismatch(format!(
            "propagation for interval {} used as interval {i}",
            prop.index
        )));
    }
    let count = prop.nodes.len();
    if count < 3
        || count.is_multiple_of(2)
        || prop.nodes[0] != grid.times()[i]
        || prop.nodes[count - 1] != grid.times()[i + 1]
        || prop.z.len() != count
        || prop.gamma.len() != count
        || prop.xi.len() != count
    {
        return Err(Error::NodeMismatch(format!("interval {i} node layout")));
    }
    let weights = simpson_weights(count, grid.durations()[i]);

    let mut zwz = Vec::with_capacity(count);
    let mut zbwz = Vec::with_capacity(count);
    let mut zbwzb = Vec::with_capacity(count);
    let mut zbwz_ox = Vec::with_capacity(count);
    let mut zwz_ox = Vec::with_capacity(count);
    let mut wz_ox2 = Vec::with_capacity(count);
    let mut r = Vec::with_capacity(count);
    let mut rv = Vec::with_capacity(count);
    let mut rv2 = Vec::with_capacity(count);

    for (k, &t) in prop.nodes.iter().enumerate() {
        let w = p.w_at(t);
        let z = &prop.z[k];
        let g = &prop.gamma[k];
        let d = &prop.xi[k] - p.x_at(t);
        let wz = &w * z;
        let wd = &w * &d;
        zwz.push(z.transpose() * &wz);
        zbwz.push(g.transpose() * &wz);
        zbwzb.push(g.transpose() * &w * g);
        zbwz_ox.push(g.transpose() * &wd);
        zwz_ox.push(z.transpose() * &wd);
        wz_ox2.push(d.dot(&wd));

        let rt = p.r_at(t);
        let vt = p.v_at(t);
        let rvt = &rt * &vt;
        rv2.push(rvt.dot(&vt));
        rv.push(rvt);
        r.push(rt);
    }

    let mut z_omega = prop.xi[count - 1].clone();
    let mut terminal_target = None;
    if i == grid.len() - 1 {
        z_omega -= &p.q_b;
        terminal_target = Some(p.q_b.clone());
    }

    Ok(IntervalBlocks {
        index: i,
        z_step: prop.z[count - 1].clone(),
        zb: prop.gamma[count - 1].clone(),
        z_omega,
        terminal_target,
        zwz: symmetrize(&simpson_matrix(zwz, &weights).unwrap()),
        zbwz: simpson_matrix(zbwz, &weights).unwrap(),
        zbwzb: symmetrize(&simpson_matrix(zbwzb, &weights).unwrap()),
        zbwz_omega_x: simpson_vector(zbwz_ox, &weights).unwrap(),
        zwz_omega_x: simpson_vector(zwz_ox, &weights).unwrap(),
        wz_omega_x2: simpson_scalar(wz_ox2, &weights),
        r_bar: symmetrize(&simpson_matrix(r, &weights).unwrap()),
        rv: simpson_vector(rv, &weights).unwrap(),
        rv2: simpson_scalar(rv2, &weights),
    })
}

/// Blocks for every interval, computed in parallel and returned in index
/// order.
pub fn compute_all_blocks(
    p: &LqProblem,
    grid: &SamplingGrid,
    substeps: usize,
) -> Result<Vec<IntervalBlocks>> {
    p.require_validated()?;
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            propagate_interval(p, grid, i, substeps)
                .and_then(|prop| compute_blocks(p, grid, i, &prop))
                .map_err(|e| Error::Interval { index: i, source: Box::new(e) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::CoefficientFunction;
    use crate::problem::{min_eigenvalue, validate_problem, DEFAULT_PROBES};
    use crate::random::random_problem;
    use crate::registry;

    #[test]
    fn dontchev_single_interval_blocks() {
        let p = registry::lookup("dontchev").unwrap().problem;
        let grid = SamplingGrid::uniform(1, 0.0, 1.0).unwrap();
        let b = &compute_all_blocks(&p, &grid, 64).unwrap()[0];
        let e = std::f64::consts::E;
        let sqe = 0.5f64.exp();
        assert!((b.zwz[(0, 0)] - 2.0 * (e - 1.0)).abs() < 1e-9);
        assert!((b.zbwzb[(0, 0)] - 8.0 * (e + 4.0 - 4.0 * sqe)).abs() < 1e-9);
        assert!((b.zbwz[(0, 0)] - 4.0 * (e + 1.0 - 2.0 * sqe)).abs() < 1e-9);
        assert!((b.r_bar[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(b.z_omega[0], 0.0);
        assert_eq!(b.wz_omega_x2, 0.0);
    }

    #[test]
    fn zero_weights_leave_only_dynamics_and_control_weight() {
        let p = LqProblem::homogeneous(
            0.0,
            1.0,
            CoefficientFunction::constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.3])),
            CoefficientFunction::constant(DMatrix::from_row_slice(2, 1, &[0.0, 1.0])),
            CoefficientFunction::zeros(2, 2),
            CoefficientFunction::polynomial(vec![vec![vec![1.0, 2.0]]]),
            DMatrix::zeros(2, 2),
            DVector::from_vec(vec![1.0, 0.0]),
        );
        let p = validate_problem(p, DEFAULT_PROBES).unwrap();
        let grid = SamplingGrid::uniform(2, 0.0, 1.0).unwrap();
        let blocks = compute_all_blocks(&p, &grid, 16).unwrap();
        for b in &blocks {
            assert!(b.zwz.iter().all(|&x| x == 0.0));
            assert!(b.zbwz.iter().all(|&x| x == 0.0));
            assert!(b.zbwzb.iter().all(|&x| x == 0.0));
            assert!(b.zbwz_omega_x.iter().all(|&x| x == 0.0));
            assert!(b.rv.iter().all(|&x| x == 0.0));
        }
        // ∫ (1 + 2t) dt on [0, ½] and [½, 1].
        assert!((blocks[0].r_bar[(0, 0)] - 0.75).abs() < 1e-14);
        assert!((blocks[1].r_bar[(0, 0)] - 1.25).abs() < 1e-14);
    }

    #[test]
    fn quarter_steps_of_dontchev() {
        let p = registry::lookup("dontchev").unwrap().problem;
        let grid = SamplingGrid::uniform(4, 0.0, 1.0).unwrap();
        let blocks = compute_all_blocks(&p, &grid, 64).unwrap();
        assert_eq!(blocks.len(), 4);
        for (i, b) in blocks.iter().enumerate() {
            assert_eq!(b.index, i);
            assert!((b.z_step[(0, 0)] - 0.125f64.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn target_shift_only_on_last_interval() {
        let p = registry::lookup("timevarying-demo").unwrap().problem;
        let grid = SamplingGrid::uniform(3, p.a, p.b).unwrap();
        let blocks = compute_all_blocks(&p, &grid, 16).unwrap();
        let q0 = p.clone().with_target(DVector::zeros(p.n));
        let q0 = validate_problem(q0, DEFAULT_PROBES).unwrap();
        let plain = compute_all_blocks(&q0, &grid, 16).unwrap();
        assert_eq!(blocks[0].z_omega, plain[0].z_omega);
        assert_eq!(blocks[1].z_omega, plain[1].z_omega);
        assert_eq!(blocks[2].z_omega, &plain[2].z_omega - &p.q_b);
    }

    #[test]
    fn invariants_on_random_problems() {
        for seed in 0..20 {
            let p = random_problem(seed);
            let grid = SamplingGrid::uniform(3, p.a, p.b).unwrap();
            let c_r = p.validation().unwrap().c_r;
            for b in compute_all_blocks(&p, &grid, 16).unwrap() {
                assert_eq!(b.zwz, b.zwz.transpose());
                assert_eq!(b.zbwzb, b.zbwzb.transpose());
                assert!(min_eigenvalue(&b.zwz) >= -1e-9);
                assert!(min_eigenvalue(&b.zbwzb) >= -1e-9);
                let h = grid.durations()[b.index];
                assert!(min_eigenvalue(&b.r_bar) >= c_r * h * (1.0 - 1e-6));
                if p.is_homogeneous() {
                    assert!(b.z_omega.iter().all(|&x| x == 0.0));
                    assert!(b.zwz_omega_x.iter().all(|&x| x == 0.0));
                    assert!(b.zbwz_omega_x.iter().all(|&x| x == 0.0));
                    assert!(b.rv.iter().all(|&x| x == 0.0));
                    assert_eq!(b.wz_omega_x2, 0.0);
                    assert_eq!(b.rv2, 0.0);
                }
            }
        }
    }

    #[test]
    fn mismatched_node_data_is_rejected() {
        let p = registry::lookup("dontchev").unwrap().problem;
        let grid = SamplingGrid::uniform(2, 0.0, 1.0).unwrap();
        let prop = propagate_interval(&p, &grid, 0, 8).unwrap();
        assert!(matches!(compute_blocks(&p, &grid, 1, &prop), Err(Error::NodeMismatch(_))));
        let other = SamplingGrid::uniform(3, 0.0, 1.0).unwrap();
        assert!(matches!(compute_blocks(&p, &other, 0, &prop), Err(Error::NodeMismatch(_))));
    }
}
