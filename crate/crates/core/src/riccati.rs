//! Backward Riccati-type recursion for sampled-data controls, forward
//! synthesis of the optimal coefficients, and the quadratic value function.
//!
//! Terminal data: `K_N = S`, `J_N = 0`, `Y_N = 0`. For `i = N−1, ..., 0`:
//!
//! ```text
//! F = ⟨K' zΩ, zΩ⟩ + WZΩX² + RV² + 2⟨J', zΩ⟩ + Y'
//! G = Φᵀ K' zΩ + ZWZΩX + Φᵀ J'
//! H = ZBᵀ K' zΩ + ZBWZΩX − RV + ZBᵀ J'
//! P = ZBᵀ K' Φ + ZBWZ
//! Q = Φᵀ K' Φ + ZWZ
//! T = ZBᵀ K' ZB + ZBWZB + R̄
//! K = Q − Pᵀ T⁻¹ P,  J = G − Pᵀ T⁻¹ H,  Y = F − ⟨T⁻¹ H, H⟩
//! ```
//!
//! where primes denote index `i + 1` and `Φ = Z(s_{i+1}, s_i)`. `T` is only
//! ever factorized.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::blocks::IntervalBlocks;
use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::problem::{min_eigenvalue, symmetrize};

#[derive(Debug, Clone)]
pub struct SweepStep {
    pub index: usize,
    pub f: f64,
    pub g: DVector<f64>,
    pub h: DVector<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub t_factor: Cholesky<f64, Dyn>,
    pub k: DMatrix<f64>,
    pub j: DVector<f64>,
    pub y: f64,
    /// `−T⁻¹P`.
    pub gain: DMatrix<f64>,
    /// `−T⁻¹H`.
    pub offset: DVector<f64>,
    /// Spectral condition number of `T`, for diagnostics only.
    pub t_condition: f64,
}

#[derive(Debug, Clone)]
pub struct RiccatiSweep {
    pub steps: Vec<SweepStep>,
    pub terminal_k: DMatrix<f64>,
    pub terminal_j: DVector<f64>,
    pub terminal_y: f64,
}

impl RiccatiSweep {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `(K_j, J_j, Y_j)` for `0 ≤ j ≤ N`.
    pub fn value_data(&self, j: usize) -> Result<(&DMatrix<f64>, &DVector<f64>, f64)> {
        let n = self.len();
        match j.cmp(&n) {
            std::cmp::Ordering::Less => {
                let s = &self.steps[j];
                Ok((&s.k, &s.j, s.y))
            }
            std::cmp::Ordering::Equal => Ok((&self.terminal_k, &self.terminal_j, self.terminal_y)),
            std::cmp::Ordering::Greater => Err(Error::IndexOutOfRange { index: j, max: n }),
        }
    }
}

pub fn backward_sweep(blocks: &[IntervalBlocks], s: &DMatrix<f64>) -> Result<RiccatiSweep> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("no interval blocks".into()));
    }
    let n = s.nrows();
    let m = blocks[0].zb.ncols();
    for (i, b) in blocks.iter().enumerate() {
        if b.index != i || b.z_step.shape() != (n, n) || b.zb.shape() != (n, m) {
            return Err(Error::NodeMismatch(format!("block {i} is out of order or misshaped")));
        }
    }

    let mut k_next = s.clone();
    let mut j_next = DVector::zeros(n);
    let mut y_next = 0.0;
    let mut steps = Vec::with_capacity(blocks.len());

    for b in blocks.iter().rev() {
        let i = b.index;
        let phi = &b.z_step;
        let zb = &b.zb;
        let k_zo = &k_next * &b.z_omega;
        let k_phi = &k_next * phi;
        let k_zb = &k_next * zb;

        let f = b.z_omega.dot(&k_zo) + b.wz_omega_x2 + b.rv2 + 2.0 * j_next.dot(&b.z_omega) + y_next;
        let g = phi.tr_mul(&k_zo) + &b.zwz_omega_x + phi.tr_mul(&j_next);
        let h = zb.tr_mul(&k_zo) + &b.zbwz_omega_x - &b.rv + zb.tr_mul(&j_next);
        let p = zb.tr_mul(&k_phi) + &b.zbwz;
        let q = symmetrize(&(phi.tr_mul(&k_phi) + &b.zwz));
        let t = symmetrize(&(zb.tr_mul(&k_zb) + &b.zbwzb + &b.r_bar));

        let t_factor = Cholesky::new(t.clone()).ok_or(Error::TNotPd(i))?;
        let gain = -t_factor.solve(&p);
        let offset = -t_factor.solve(&h);
        let k = symmetrize(&(&q + p.tr_mul(&gain)));
        let j = &g + p.tr_mul(&offset);
        let y = f + offset.dot(&h);
        if !(k.iter().all(|x| x.is_finite()) && j.iter().all(|x| x.is_finite()) && y.is_finite()) {
            return Err(Error::NonFinite(format!("sweep step {i}")));
        }

        let eig = nalgebra::SymmetricEigen::new(t.clone()).eigenvalues;
        let t_condition = eig.max() / eig.min();

        k_next = k.clone();
        j_next = j.clone();
        y_next = y;
        steps.push(SweepStep {
            index: i,
            f,
            g,
            h,
            p,
            q,
            t,
            t_factor,
            k,
            j,
            y,
            gain,
            offset,
            t_condition,
        });
    }
    steps.reverse();
    Ok(RiccatiSweep {
        steps,
        terminal_k: s.clone(),
        terminal_j: DVector::zeros(n),
        terminal_y: 0.0,
    })
}

#[derive(Debug, Clone)]
pub struct SampledSolution {
    pub grid: SamplingGrid,
    /// Optimal coefficients `U*_i`.
    pub controls: Vec<DVector<f64>>,
    /// `q(s_i)` for `i = 0..=N`. The recursion's last iterate is
    /// `q(b) − q_b` (the target shift lives in `ZΩ_{N−1}`); `q_b` is added
    /// back so the final entry is the actual state at `b`.
    pub q_nodes: Vec<DVector<f64>>,
    /// `q_b`, to recover the recursion's last iterate.
    pub target: DVector<f64>,
    pub predicted_cost: f64,
    pub simulated_cost: Option<f64>,
}

/// Runs the closed-loop law `U_i = gain_i q_i + offset_i` forward through
/// the exact discrete dynamics `q_{i+1} = Φ_i q_i + ZB_i U_i + ZΩ_i`.
pub fn forward_synthesis(
    sweep: &RiccatiSweep,
    blocks: &[IntervalBlocks],
    grid: &SamplingGrid,
    q_a: &DVector<f64>,
) -> Result<SampledSolution> {
    if sweep.len() != blocks.len() || blocks.len() != grid.len() {
        return Err(Error::NodeMismatch("sweep, blocks and grid lengths differ".into()));
    }
    let n = sweep.terminal_k.nrows();
    if q_a.len() != n {
        return Err(Error::DimensionMismatch {
            what: "qa".into(),
            expected: (n, 1),
            got: q_a.shape(),
        });
    }
    let mut q = q_a.clone();
    let mut q_nodes = Vec::with_capacity(blocks.len() + 1);
    let mut controls = Vec::with_capacity(blocks.len());
    q_nodes.push(q.clone());
    for (step, b) in sweep.steps.iter().zip(blocks) {
        let u = &step.gain * &q + &step.offset;
        q = &b.z_step * &q + &b.zb * &u + &b.z_omega;
        controls.push(u);
        q_nodes.push(q.clone());
    }
    // Undo the terminal shift carried by ZΩ_{N−1}.
    let target = blocks
        .last()
        .and_then(|b| b.terminal_target.clone())
        .unwrap_or_else(|| DVector::zeros(n));
    if let Some(last) = q_nodes.last_mut() {
        *last += &target;
    }
    Ok(SampledSolution {
        grid: grid.clone(),
        controls,
        q_nodes,
        target,
        predicted_cost: value_function(sweep, 0, q_a)?,
        simulated_cost: None,
    })
}

/// `V_j(y) = ½⟨K_j y, y⟩ + ⟨J_j, y⟩ + ½Y_j`.
pub fn value_function(sweep: &RiccatiSweep, j: usize, y: &DVector<f64>) -> Result<f64> {
    let (k, jv, yv) = sweep.value_data(j)?;
    Ok(0.5 * y.dot(&(k * y)) + jv.dot(y) + 0.5 * yv)
}

/// Feedback data `(gain_i, offset_i)` for online use: `U_i = gain_i q(s_i) + offset_i`.
pub fn closed_loop_gain(sweep: &RiccatiSweep, i: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let step = sweep.steps.get(i).ok_or(Error::IndexOutOfRange {
        index: i,
        max: sweep.len().saturating_sub(1),
    })?;
    Ok((step.gain.clone(), step.offset.clone()))
}

/// Relative PSD tolerance used for the `K_i`.
pub fn k_psd_floor(k: &DMatrix<f64>) -> f64 {
    -1e-8 * (1.0 + k.norm())
}

pub fn k_is_psd(k: &DMatrix<f64>) -> bool {
    min_eigenvalue(k) >= k_psd_floor(k)
}
