//! End-to-end sampled solve: blocks, sweep, synthesis, simulation and
//! optimality residuals.

use nalgebra::DVector;

use crate::blocks::{compute_all_blocks, IntervalBlocks};
use crate::error::Result;
use crate::grid::SamplingGrid;
use crate::problem::LqProblem;
use crate::riccati::{backward_sweep, forward_synthesis, RiccatiSweep, SampledSolution};
use crate::simulate::{
    evaluate_cost, pmp_residual_sampled, simulate_costate, simulate_state, CostateTrajectory,
    PiecewiseConstantControl, Trajectory,
};

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub blocks: Vec<IntervalBlocks>,
    pub sweep: RiccatiSweep,
    pub solution: SampledSolution,
    pub trajectory: Trajectory,
    pub costate: CostateTrajectory,
    /// Sampled optimality residual per interval.
    pub residuals: Vec<DVector<f64>>,
}

impl SolveOutput {
    pub fn control(&self) -> PiecewiseConstantControl {
        PiecewiseConstantControl::from_solution(&self.solution)
    }

    /// `max_i ‖r_i‖ / (1 + ‖U_i‖)`.
    pub fn max_relative_residual(&self) -> f64 {
        self.residuals
            .iter()
            .zip(&self.solution.controls)
            .map(|(r, u)| r.norm() / (1.0 + u.norm()))
            .fold(0.0, f64::max)
    }
}

pub fn solve(p: &LqProblem, grid: &SamplingGrid, substeps: usize) -> Result<SolveOutput> {
    let blocks = compute_all_blocks(p, grid, substeps)?;
    let sweep = backward_sweep(&blocks, p.s())?;
    let mut solution = forward_synthesis(&sweep, &blocks, grid, &p.q_a)?;
    let control = PiecewiseConstantControl::from_solution(&solution);
    let trajectory = simulate_state(p, &control, substeps)?;
    solution.simulated_cost = Some(evaluate_cost(p, &control, &trajectory)?);
    let costate = simulate_costate(p, &trajectory)?;
    let residuals = pmp_residual_sampled(p, &solution, &costate)?;
    Ok(SolveOutput { blocks, sweep, solution, trajectory, costate, residuals })
}
