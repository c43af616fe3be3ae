//! State and costate simulation, cost evaluation, and optimality residuals.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::problem::LqProblem;
use crate::quadrature::{simpson_matrix, simpson_scalar, simpson_vector, simpson_weights};
use crate::riccati::SampledSolution;
use crate::transition::{all_finite, rk4_step};

/// Absolute floor for relative residual tolerances.
pub const RESIDUAL_FLOOR: f64 = 1e-9;

/// A control law evaluated on the node grid of a sampling grid.
pub trait Control: Sync {
    fn dim(&self) -> usize;
    /// Value used on interval `interval` at time `t`; piecewise-constant
    /// controls ignore `t`, so interval right ends see the held value.
    fn value(&self, interval: usize, t: f64) -> DVector<f64>;
}

/// `u = Σ U_i 1_{[s_i, s_{i+1})}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantControl {
    pub grid: SamplingGrid,
    pub values: Vec<DVector<f64>>,
}

impl PiecewiseConstantControl {
    pub fn new(grid: SamplingGrid, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} control values for {} intervals",
                values.len(),
                grid.len()
            )));
        }
        let m = values.first().map_or(0, DVector::len);
        if values.iter().any(|u| u.len() != m) {
            return Err(Error::InvalidArgument("control values differ in dimension".into()));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("control values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SamplingGrid, m: usize) -> Self {
        let values = vec![DVector::zeros(m); grid.len()];
        Self { grid, values }
    }

    pub fn from_solution(sol: &SampledSolution) -> Self {
        Self { grid: sol.grid.clone(), values: sol.controls.clone() }
    }

    /// Value at an arbitrary time, using the interval containing `t`.
    pub fn at_time(&self, t: f64) -> DVector<f64> {
        self.values[self.grid.interval_of(t)].clone()
    }
}

impl Control for PiecewiseConstantControl {
    fn dim(&self) -> usize {
        self.values.first().map_or(0, DVector::len)
    }

    fn value(&self, interval: usize, _t: f64) -> DVector<f64> {
        self.values[interval].clone()
    }
}

/// A control given as a function of time.
#[derive(Clone)]
pub struct FunctionControl {
    dim: usize,
    f: Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
}

impl FunctionControl {
    pub fn new(dim: usize, f: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self { dim, f: Arc::new(f) }
    }

    /// Staircase function of a piecewise-constant control.
    pub fn from_piecewise(u: PiecewiseConstantControl) -> Self {
        let dim = u.dim();
        Self::new(dim, move |t| u.at_time(t))
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        (self.f)(t)
    }
}

impl std::fmt::Debug for FunctionControl {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionControl").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl Control for FunctionControl {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _interval: usize, t: f64) -> DVector<f64> {
        (self.f)(t)
    }
}

/// Node data of one interval.
#[derive(Debug, Clone)]
pub struct IntervalTrace {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// `q'(τ_k)` with the control of this interval.
    pub rates: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: SamplingGrid,
    pub intervals: Vec<IntervalTrace>,
    pub q_end: DVector<f64>,
}

impl Trajectory {
    pub fn substeps(&self) -> usize {
        (self.intervals[0].times.len() - 1) / 2
    }

    /// `q(s_i)` for `i = 0..=N`.
    pub fn sample_states(&self) -> Vec<DVector<f64>> {
        let mut out: Vec<_> = self.intervals.iter().map(|iv| iv.states[0].clone()).collect();
        out.push(self.q_end.clone());
        out
    }
}

#[derive(Debug, Clone)]
pub struct CostateTrajectory {
    pub grid: SamplingGrid,
    /// Per interval, costate values on the same nodes as the state.
    pub intervals: Vec<Vec<DVector<f64>>>,
    pub times: Vec<Vec<f64>>,
    pub p_end: DVector<f64>,
}

impl CostateTrajectory {
    /// `p(s_i)` for `i = 0..=N`.
    pub fn sample_costates(&self) -> Vec<DVector<f64>> {
        let mut out: Vec<_> = self.intervals.iter().map(|iv| iv[0].clone()).collect();
        out.push(self.p_end.clone());
        out
    }
}

fn state_rate(p: &LqProblem, t: f64, q: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    p.a_at(t) * q + p.b_at(t) * u + p.omega_at(t)
}

/// Integrates `q' = Aq + Bu + ω`, `q(a) = q_a`, with `2M` RK4 steps per
/// interval of the control's grid.
pub fn simulate_state(
    p: &LqProblem,
    u: &PiecewiseConstantControl,
    substeps: usize,
) -> Result<Trajectory> {
    simulate_state_on(p, &u.grid, u, substeps)
}

/// Like [`simulate_state`] for any control law, stepping on `grid`.
pub fn simulate_state_on(
    p: &LqProblem,
    grid: &SamplingGrid,
    u: &dyn Control,
    substeps: usize,
) -> Result<Trajectory> {
    p.require_validated()?;
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be at least 1".into()));
    }
    if u.dim() != p.m {
        return Err(Error::DimensionMismatch {
            what: "control".into(),
            expected: (p.m, 1),
            got: (u.dim(), 1),
        });
    }
    if grid.start() != p.a || grid.end() != p.b {
        return Err(Error::NodeMismatch("grid does not span the problem horizon".into()));
    }
    let mut q = p.q_a.clone();
    let mut intervals = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let times = grid.nodes(i, substeps);
        let controls: Vec<DVector<f64>> = times.iter().map(|&t| u.value(i, t)).collect();
        let mut states = Vec::with_capacity(times.len());
        states.push(q.clone());
        for (k, w) in times.windows(2).enumerate() {
            let rhs = |t: f64, x: &DMatrix<f64>| {
                // Stage times are t_k, the midpoint and t_{k+1}.
                let uk = if t == w[0] {
                    controls[k].clone()
                } else if t == w[1] {
                    controls[k + 1].clone()
                } else {
                    u.value(i, t)
                };
                let col = DVector::from_column_slice(x.as_slice());
                let r = state_rate(p, t, &col, &uk);
                DMatrix::from_column_slice(r.len(), 1, r.as_slice())
            };
            let x = DMatrix::from_column_slice(q.len(), 1, q.as_slice());
            let next = rk4_step(&x, w[0], w[1], rhs);
            if !all_finite(&next) {
                return Err(Error::NonFinite(format!("state on interval {i}")));
            }
            q = DVector::from_column_slice(next.as_slice());
            states.push(q.clone());
        }
        let rates = times
            .iter()
            .zip(&states)
            .zip(&controls)
            .map(|((&t, x), uk)| state_rate(p, t, x, uk))
            .collect();
        intervals.push(IntervalTrace { times, states, rates, controls });
    }
    Ok(Trajectory { grid: grid.clone(), intervals, q_end: q })
}

/// `½∫ ⟨W(q − x), q − x⟩ + ⟨R(u − v), u − v⟩` over interval `i` of the
/// trajectory, by composite Simpson on its nodes.
pub fn running_cost_on(p: &LqProblem, u: &dyn Control, traj: &Trajectory, i: usize) -> Result<f64> {
    let iv = traj
        .intervals
        .get(i)
        .ok_or(Error::IndexOutOfRange { index: i, max: traj.intervals.len().saturating_sub(1) })?;
    let weights = simpson_weights(iv.times.len(), traj.grid.durations()[i]);
    let integrand = iv.times.iter().zip(&iv.states).map(|(&t, q)| {
        let dq = q - p.x_at(t);
        let du = u.value(i, t) - p.v_at(t);
        dq.dot(&(p.w_at(t) * &dq)) + du.dot(&(p.r_at(t) * &du))
    });
    Ok(0.5 * simpson_scalar(integrand, &weights))
}

/// Cost functional along a simulated trajectory: running cost on every
/// interval plus the terminal term.
pub fn evaluate_cost(p: &LqProblem, u: &dyn Control, traj: &Trajectory) -> Result<f64> {
    if traj.grid.start() != p.a || traj.grid.end() != p.b || traj.q_end.len() != p.n {
        return Err(Error::NodeMismatch("trajectory does not belong to this problem".into()));
    }
    let mut total = 0.0;
    for i in 0..traj.intervals.len() {
        total += running_cost_on(p, u, traj, i)?;
    }
    let e = &traj.q_end - &p.q_b;
    Ok(total + 0.5 * e.dot(&(p.s() * &e)))
}

/// Simulates and evaluates the cost of a piecewise-constant control.
pub fn cost_of(p: &LqProblem, u: &PiecewiseConstantControl, substeps: usize) -> Result<f64> {
    let traj = simulate_state(p, u, substeps)?;
    evaluate_cost(p, u, &traj)
}

/// Backward RK4 for `p' = −Aᵀp + W(q − x)`, `p(b) = −S(q(b) − q_b)`.
///
/// RK4 midpoint stages need `q` between stored nodes; it is reconstructed
/// with the cubic Hermite interpolant built from the node values and rates.
pub fn simulate_costate(p: &LqProblem, traj: &Trajectory) -> Result<CostateTrajectory> {
    if traj.q_end.len() != p.n {
        return Err(Error::NodeMismatch("trajectory does not belong to this problem".into()));
    }
    let p_end = -(p.s() * (&traj.q_end - &p.q_b));
    let mut costate = p_end.clone();
    let mut intervals = vec![Vec::new(); traj.intervals.len()];
    for (i, iv) in traj.intervals.iter().enumerate().rev() {
        let count = iv.times.len();
        let mut values = vec![DVector::zeros(p.n); count];
        values[count - 1] = costate.clone();
        for k in (0..count - 1).rev() {
            let (t0, t1) = (iv.times[k], iv.times[k + 1]);
            let dt = t1 - t0;
            let q_mid = (&iv.states[k] + &iv.states[k + 1]) * 0.5
                + (&iv.rates[k] - &iv.rates[k + 1]) * (dt / 8.0);
            let rhs = |t: f64, x: &DMatrix<f64>| {
                let q = if t == t0 {
                    &iv.states[k]
                } else if t == t1 {
                    &iv.states[k + 1]
                } else {
                    &q_mid
                };
                let col = DVector::from_column_slice(x.as_slice());
                let r = -(p.a_at(t).tr_mul(&col)) + p.w_at(t) * (q - p.x_at(t));
                DMatrix::from_column_slice(r.len(), 1, r.as_slice())
            };
            let x = DMatrix::from_column_slice(p.n, 1, costate.as_slice());
            let next = rk4_step(&x, t1, t0, rhs);
            if !all_finite(&next) {
                return Err(Error::NonFinite(format!("costate on interval {i}")));
            }
            costate = DVector::from_column_slice(next.as_slice());
            values[k] = costate.clone();
        }
        intervals[i] = values;
    }
    Ok(CostateTrajectory {
        grid: traj.grid.clone(),
        intervals,
        times: traj.intervals.iter().map(|iv| iv.times.clone()).collect(),
        p_end,
    })
}

/// Residual of the sampled optimality condition
/// `U_i = R̄_i⁻¹ (RV_i + ∫ Bᵀp ds)` for each interval.
pub fn pmp_residual_sampled(
    p: &LqProblem,
    sol: &SampledSolution,
    costate: &CostateTrajectory,
) -> Result<Vec<DVector<f64>>> {
    if costate.grid != sol.grid || sol.controls.len() != sol.grid.len() {
        return Err(Error::NodeMismatch("costate and solution grids differ".into()));
    }
    let mut out = Vec::with_capacity(sol.controls.len());
    for (i, u) in sol.controls.iter().enumerate() {
        let times = &costate.times[i];
        let weights = simpson_weights(times.len(), sol.grid.durations()[i]);
        let r_bar = simpson_matrix(times.iter().map(|&t| p.r_at(t)), &weights).unwrap();
        let rv = simpson_vector(times.iter().map(|&t| p.r_at(t) * p.v_at(t)), &weights).unwrap();
        let btp = simpson_vector(
            times.iter().zip(&costate.intervals[i]).map(|(&t, pk)| p.b_at(t).tr_mul(pk)),
            &weights,
        )
        .unwrap();
        let chol = nalgebra::Cholesky::new(r_bar).ok_or(Error::TNotPd(i))?;
        out.push(u - chol.solve(&(rv + btp)));
    }
    Ok(out)
}

/// Maximum over dense nodes of `‖u(t) − v(t) − R(t)⁻¹B(t)ᵀp(t)‖` for the
/// permanent optimality condition.
pub fn pmp_residual_permanent(p: &LqProblem, u: &FunctionControl, substeps: usize) -> Result<f64> {
    let grid = SamplingGrid::uniform(1, p.a, p.b)?;
    let traj = simulate_state_on(p, &grid, u, substeps)?;
    let costate = simulate_costate(p, &traj)?;
    let mut worst: f64 = 0.0;
    for (times, values) in costate.times.iter().zip(&costate.intervals) {
        for (&t, pk) in times.iter().zip(values) {
            let chol = nalgebra::Cholesky::new(p.r_at(t))
                .ok_or_else(|| Error::NonFinite("R(t) factorization".into()))?;
            let r = u.eval(t) - p.v_at(t) - chol.solve(&p.b_at(t).tr_mul(pk));
            if !r.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite("permanent residual".into()));
            }
            worst = worst.max(r.norm());
        }
    }
    Ok(worst)
}

/// Per-interval means `U_i = (1/h_i) ∫ u(s) ds` by composite Simpson.
pub fn averaged_control(
    u: &FunctionControl,
    grid: &SamplingGrid,
    substeps: usize,
) -> Result<PiecewiseConstantControl> {
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be at least 1".into()));
    }
    let values = (0..grid.len())
        .map(|i| {
            let times = grid.nodes(i, substeps);
            let h = grid.durations()[i];
            let weights = simpson_weights(times.len(), h);
            simpson_vector(times.iter().map(|&t| u.eval(t)), &weights).unwrap() / h
        })
        .collect();
    PiecewiseConstantControl::new(grid.clone(), values)
}
