//! Convergence of sampled optima towards the permanent optimum, and the
//! comparison with interval-averaged permanent controls.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::pipeline::{solve, SolveOutput};
use crate::problem::LqProblem;
use crate::simulate::{
    averaged_control, cost_of, evaluate_cost, simulate_state_on, FunctionControl,
    PiecewiseConstantControl,
};

/// RK4 half-step pairs used to evaluate the cost of a closed-form reference.
pub const REFERENCE_SUBSTEPS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceSpec {
    ClosedForm,
    Fine(usize),
}

impl std::str::FromStr for ReferenceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "closed-form" {
            return Ok(ReferenceSpec::ClosedForm);
        }
        if let Some(n) = s.strip_prefix("fine:") {
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad fine reference '{s}'")))?;
            if n == 0 {
                return Err(Error::Parse("fine reference needs N ≥ 1".into()));
            }
            return Ok(ReferenceSpec::Fine(n));
        }
        Err(Error::Parse(format!("unknown reference '{s}' (closed-form | fine:N)")))
    }
}

/// A permanent reference control with its cost.
#[derive(Debug, Clone)]
pub struct Reference {
    pub control: FunctionControl,
    pub cost: f64,
    pub spec: ReferenceSpec,
}

pub fn resolve_reference(
    p: &LqProblem,
    spec: ReferenceSpec,
    closed_form: Option<&FunctionControl>,
    substeps: usize,
) -> Result<Reference> {
    match spec {
        ReferenceSpec::ClosedForm => {
            let control = closed_form.ok_or(Error::MissingReference)?.clone();
            let grid = SamplingGrid::uniform(1, p.a, p.b)?;
            let traj = simulate_state_on(p, &grid, &control, REFERENCE_SUBSTEPS)?;
            let cost = evaluate_cost(p, &control, &traj)?;
            Ok(Reference { control, cost, spec })
        }
        ReferenceSpec::Fine(n) => {
            let grid = SamplingGrid::uniform(n, p.a, p.b)?;
            let out = solve(p, &grid, substeps)?;
            let cost = out.solution.simulated_cost.unwrap_or(out.solution.predicted_cost);
            let control = FunctionControl::from_piecewise(out.control());
            Ok(Reference { control, cost, spec })
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    pub norm_delta: f64,
    /// `max_i ‖U*_i − u_ref(s_i)‖∞`.
    pub max_node_err: f64,
    pub cost_sampled: f64,
    pub cost_gap: f64,
    pub cost_averaged: f64,
}

impl ConvergenceRow {
    /// Sandwich ordering `C(u_ref) ≤ C(u*_h) ≤ C(u_h)` up to the tolerance
    /// `1e-6 (1 + C(u_h))`.
    pub fn sandwich_holds(&self) -> bool {
        let tol = 1e-6 * (1.0 + self.cost_averaged);
        self.cost_gap >= -tol && self.cost_sampled <= self.cost_averaged + tol
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub n: usize,
    pub row: ConvergenceRow,
    pub output: SolveOutput,
    pub averaged: PiecewiseConstantControl,
}

fn max_node_error(out: &SolveOutput, reference: &FunctionControl) -> f64 {
    let grid = &out.solution.grid;
    out.solution
        .controls
        .iter()
        .enumerate()
        .map(|(i, u)| (u - reference.eval(grid.times()[i])).amax())
        .fold(0.0, f64::max)
}

/// Solves on uniform grids with each `N` in `ns` and compares against the
/// reference.
pub fn converge(
    p: &LqProblem,
    reference: &Reference,
    ns: &[usize],
    substeps: usize,
) -> Result<Vec<ConvergenceRun>> {
    ns.par_iter()
        .map(|&n| {
            let grid = SamplingGrid::uniform(n, p.a, p.b)?;
            let output = solve(p, &grid, substeps)?;
            let averaged = averaged_control(&reference.control, &grid, substeps)?;
            let cost_averaged = cost_of(p, &averaged, substeps)?;
            let cost_sampled = output.solution.simulated_cost.unwrap_or(output.solution.predicted_cost);
            let row = ConvergenceRow {
                n,
                norm_delta: grid.norm_delta(),
                max_node_err: max_node_error(&output, &reference.control),
                cost_sampled,
                cost_gap: cost_sampled - reference.cost,
                cost_averaged,
            };
            Ok(ConvergenceRun { n, row, output, averaged })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub i: usize,
    pub s: f64,
    pub optimal: DVector<f64>,
    pub averaged: DVector<f64>,
    /// `‖U*_i − U_i‖∞`.
    pub diff: f64,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub cost_sampled: f64,
    pub cost_averaged: f64,
}

impl CompareReport {
    pub fn max_diff(&self) -> f64 {
        self.rows.iter().map(|r| r.diff).fold(0.0, f64::max)
    }
}

/// Sampled optimum `u*_h` next to the averaged reference `u_h` on a uniform
/// grid of `n` intervals.
pub fn compare_averaged(
    p: &LqProblem,
    reference: &Reference,
    n: usize,
    substeps: usize,
) -> Result<CompareReport> {
    let run = converge(p, reference, &[n], substeps)?.pop().expect("one run");
    let grid = &run.output.solution.grid;
    let rows = run
        .output
        .solution
        .controls
        .iter()
        .zip(&run.averaged.values)
        .enumerate()
        .map(|(i, (u, a))| CompareRow {
            i,
            s: grid.times()[i],
            optimal: u.clone(),
            averaged: a.clone(),
            diff: (u - a).amax(),
        })
        .collect();
    Ok(CompareReport { rows, cost_sampled: run.row.cost_sampled, cost_averaged: run.row.cost_averaged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    #[test]
    fn reference_spec_parsing() {
        assert_eq!("closed-form".parse::<ReferenceSpec>().unwrap(), ReferenceSpec::ClosedForm);
        assert_eq!("fine:1000".parse::<ReferenceSpec>().unwrap(), ReferenceSpec::Fine(1000));
        assert!("fine:x".parse::<ReferenceSpec>().is_err());
        assert!("coarse".parse::<ReferenceSpec>().is_err());
    }

    #[test]
    fn missing_closed_form() {
        let p = registry::lookup("double-integrator").unwrap().problem;
        assert!(matches!(
            resolve_reference(&p, ReferenceSpec::ClosedForm, None, 8),
            Err(Error::MissingReference)
        ));
    }

    #[test]
    fn fine_reference_rows() {
        let p = registry::lookup("double-integrator").unwrap().problem;
        let r = resolve_reference(&p, ReferenceSpec::Fine(200), None, 8).unwrap();
        let runs = converge(&p, &r, &[2, 10, 50], 8).unwrap();
        assert_eq!(runs.len(), 3);
        for run in &runs {
            assert!(run.row.sandwich_holds(), "{:?}", run.row);
        }
        assert!(runs[2].row.max_node_err < runs[0].row.max_node_err);
    }

    #[test]
    fn single_entry_gives_one_row() {
        let e = registry::lookup("dontchev").unwrap();
        let r = resolve_reference(&e.problem, ReferenceSpec::ClosedForm, e.reference_control.as_ref(), 16)
            .unwrap();
        let runs = converge(&e.problem, &r, &[7], 16).unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].row.n, 7);
    }

    #[test]
    fn averaged_comparison_shrinks() {
        let e = registry::lookup("dontchev").unwrap();
        let r = resolve_reference(&e.problem, ReferenceSpec::ClosedForm, e.reference_control.as_ref(), 64)
            .unwrap();
        let coarse = compare_averaged(&e.problem, &r, 2, 64).unwrap();
        assert!(coarse.max_diff() > 1e-3);
        assert!(coarse.cost_averaged >= coarse.cost_sampled);
        let fine = compare_averaged(&e.problem, &r, 100, 64).unwrap();
        assert!(fine.max_diff() < coarse.max_diff());
    }
}
