//! Named example problems.

use nalgebra::{DMatrix, DVector};

use crate::coefficient::CoefficientFunction;
use crate::error::{Error, Result};
use crate::problem::{validate_problem, LqProblem, DEFAULT_PROBES};
use crate::simulate::FunctionControl;

pub const NAMES: [&str; 3] = ["dontchev", "double-integrator", "timevarying-demo"];

#[derive(Debug, Clone)]
pub struct RegistryEntry {
    pub name: &'static str,
    pub problem: LqProblem,
    pub reference_control: Option<FunctionControl>,
    pub note: &'static str,
}

/// Looks up a registry entry; the returned problem is already validated.
pub fn lookup(name: &str) -> Result<RegistryEntry> {
    let (name, problem, reference_control, note) = match name {
        "dontchev" => (
            "dontchev",
            dontchev(),
            Some(FunctionControl::new(1, |t| DVector::from_element(1, dontchev_optimal(t)))),
            "scalar q' = q/2 + u on [0, 1], cost ∫ q² + u²/2, q(0) = 1; closed-form permanent optimum",
        ),
        "double-integrator" => (
            "double-integrator",
            double_integrator(),
            None,
            "homogeneous double integrator, W = I, R = 1, S = I",
        ),
        "timevarying-demo" => (
            "timevarying-demo",
            timevarying_demo(),
            None,
            "nonautonomous, nonhomogeneous 2-state oscillator with polynomial data",
        ),
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    Ok(RegistryEntry { name, problem: validate_problem(problem, DEFAULT_PROBES)?, reference_control, note })
}

/// Optimal permanent control of the `dontchev` example.
pub fn dontchev_optimal(t: f64) -> f64 {
    let e3 = 3.0f64.exp();
    2.0 * ((3.0 * t).exp() - e3) / ((1.5 * t).exp() * (2.0 + e3))
}

fn dontchev() -> LqProblem {
    LqProblem::homogeneous(
        0.0,
        1.0,
        CoefficientFunction::scalar(0.5),
        CoefficientFunction::scalar(1.0),
        CoefficientFunction::scalar(2.0),
        CoefficientFunction::scalar(1.0),
        DMatrix::zeros(1, 1),
        DVector::from_element(1, 1.0),
    )
}

fn double_integrator() -> LqProblem {
    LqProblem::homogeneous(
        0.0,
        1.0,
        CoefficientFunction::constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])),
        CoefficientFunction::constant(DMatrix::from_row_slice(2, 1, &[0.0, 1.0])),
        CoefficientFunction::constant(DMatrix::identity(2, 2)),
        CoefficientFunction::scalar(1.0),
        DMatrix::identity(2, 2),
        DVector::from_vec(vec![1.0, 0.0]),
    )
}

fn timevarying_demo() -> LqProblem {
    let a = CoefficientFunction::polynomial(vec![
        vec![vec![0.0], vec![1.0]],
        vec![vec![-1.0, -1.0], vec![0.0, -0.2]],
    ]);
    let b = CoefficientFunction::polynomial(vec![vec![vec![0.0]], vec![vec![1.0, 0.5]]]);
    let w = CoefficientFunction::polynomial(vec![
        vec![vec![1.0], vec![0.0]],
        vec![vec![0.0], vec![0.1, 0.0, 1.0]],
    ]);
    let r = CoefficientFunction::polynomial(vec![vec![vec![1.0, 1.0]]]);
    LqProblem::homogeneous(
        0.0,
        1.0,
        a,
        b,
        w,
        r,
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]),
        DVector::from_vec(vec![1.0, 0.0]),
    )
    .with_drift(CoefficientFunction::polynomial(vec![vec![vec![0.0]], vec![vec![0.0, 0.5]]]))
    .with_state_ref(CoefficientFunction::polynomial(vec![vec![vec![1.0, -1.0]], vec![vec![0.0]]]))
    .with_control_ref(CoefficientFunction::scalar(0.2))
    .with_target(DVector::from_vec(vec![0.5, 0.0]))
}
