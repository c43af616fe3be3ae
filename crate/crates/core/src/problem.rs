//! Linear-quadratic problem data and validation.
//!
//! The problem is: minimize
//!
//! ```text
//! ½⟨S(q(b) − q_b), q(b) − q_b⟩ + ½∫ ⟨W(q − x), q − x⟩ + ⟨R(u − v), u − v⟩ dt
//! ```
//!
//! subject to `q' = A q + B u + ω`, `q(a) = q_a`.
//!
//! Only the symmetric parts of `S`, `W` and `R` enter the cost, so they are
//! symmetrized rather than rejected. Positivity of `W` and `R` is checked at
//! finitely many probe times; this guards against bad input but is not a
//! proof of positivity on all of `[a, b]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::coefficient::CoefficientFunction;
use crate::error::{Error, MatrixRole, Result};

/// Minimum admissible eigenvalue of `R(t)`.
pub const TOL_PD: f64 = 1e-10;
/// Default number of probe times used by validation.
pub const DEFAULT_PROBES: usize = 33;

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub probes: usize,
    /// Smallest eigenvalue of `R(t)` over the probe times.
    pub c_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqProblem {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub m: usize,
    pub state_matrix: CoefficientFunction,
    pub input_matrix: CoefficientFunction,
    pub state_weight: CoefficientFunction,
    pub control_weight: CoefficientFunction,
    pub terminal_weight: DMatrix<f64>,
    pub drift: CoefficientFunction,
    pub state_ref: CoefficientFunction,
    pub control_ref: CoefficientFunction,
    pub q_a: DVector<f64>,
    pub q_b: DVector<f64>,
    validation: Option<Validation>,
}

impl LqProblem {
    /// Homogeneous problem (`ω = x = v = 0`, `q_b = 0`) from its matrices.
    #[allow(clippy::too_many_arguments)]
    pub fn homogeneous(
        a: f64,
        b: f64,
        state_matrix: CoefficientFunction,
        input_matrix: CoefficientFunction,
        state_weight: CoefficientFunction,
        control_weight: CoefficientFunction,
        terminal_weight: DMatrix<f64>,
        q_a: DVector<f64>,
    ) -> Self {
        let (n, m) = input_matrix.dims();
        Self {
            a,
            b,
            n,
            m,
            state_matrix,
            input_matrix,
            state_weight,
            control_weight,
            terminal_weight,
            drift: CoefficientFunction::zeros(n, 1),
            state_ref: CoefficientFunction::zeros(n, 1),
            control_ref: CoefficientFunction::zeros(m, 1),
            q_a,
            q_b: DVector::zeros(n),
            validation: None,
        }
    }

    pub fn with_drift(mut self, drift: CoefficientFunction) -> Self {
        self.drift = drift;
        self.validation = None;
        self
    }

    pub fn with_state_ref(mut self, x: CoefficientFunction) -> Self {
        self.state_ref = x;
        self.validation = None;
        self
    }

    pub fn with_control_ref(mut self, v: CoefficientFunction) -> Self {
        self.control_ref = v;
        self.validation = None;
        self
    }

    pub fn with_target(mut self, q_b: DVector<f64>) -> Self {
        self.q_b = q_b;
        self.validation = None;
        self
    }

    /// Replaces the initial condition. Validation is kept: `q_a` does not
    /// enter any of the checked quantities.
    pub fn with_initial_state(mut self, q_a: DVector<f64>) -> Self {
        self.q_a = q_a;
        self
    }

    /// Same problem restarted at time `t` from state `y`.
    pub fn restarted(&self, t: f64, y: DVector<f64>) -> Self {
        let mut p = self.clone();
        p.a = t;
        p.q_a = y;
        p
    }

    /// Variant with all affine data (`q_b`, `ω`, `x`, `v`) zeroed.
    pub fn homogenized(&self) -> Self {
        let mut p = self.clone();
        p.drift = CoefficientFunction::zeros(self.n, 1);
        p.state_ref = CoefficientFunction::zeros(self.n, 1);
        p.control_ref = CoefficientFunction::zeros(self.m, 1);
        p.q_b = DVector::zeros(self.n);
        p
    }

    pub fn is_homogeneous(&self) -> bool {
        self.drift.is_zero()
            && self.state_ref.is_zero()
            && self.control_ref.is_zero()
            && self.q_b.iter().all(|&x| x == 0.0)
    }

    pub fn validation(&self) -> Option<&Validation> {
        self.validation.as_ref()
    }

    pub fn is_validated(&self) -> bool {
        self.validation.is_some()
    }

    pub(crate) fn require_validated(&self) -> Result<()> {
        if self.is_validated() {
            Ok(())
        } else {
            Err(Error::NotValidated)
        }
    }

    pub fn a_at(&self, t: f64) -> DMatrix<f64> {
        self.state_matrix.eval(t)
    }

    pub fn b_at(&self, t: f64) -> DMatrix<f64> {
        self.input_matrix.eval(t)
    }

    /// Symmetric part of `W(t)`.
    pub fn w_at(&self, t: f64) -> DMatrix<f64> {
        symmetrize(&self.state_weight.eval(t))
    }

    /// Symmetric part of `R(t)`.
    pub fn r_at(&self, t: f64) -> DMatrix<f64> {
        symmetrize(&self.control_weight.eval(t))
    }

    pub fn omega_at(&self, t: f64) -> DVector<f64> {
        self.drift.eval_vector(t)
    }

    pub fn x_at(&self, t: f64) -> DVector<f64> {
        self.state_ref.eval_vector(t)
    }

    pub fn v_at(&self, t: f64) -> DVector<f64> {
        self.control_ref.eval_vector(t)
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.terminal_weight
    }

    pub fn probe_times(&self, probes: usize) -> Vec<f64> {
        let len = self.b - self.a;
        let mut t: Vec<f64> =
            (0..probes).map(|k| self.a + len * k as f64 / (probes - 1) as f64).collect();
        t[probes - 1] = self.b;
        t
    }

    fn check_dims(&self) -> Result<()> {
        let (n, m) = (self.n, self.m);
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("state and control dimensions must be positive".into()));
        }
        let checks: [(&str, (usize, usize), (usize, usize)); 9] = [
            ("A", (n, n), self.state_matrix.dims()),
            ("B", (n, m), self.input_matrix.dims()),
            ("W", (n, n), self.state_weight.dims()),
            ("R", (m, m), self.control_weight.dims()),
            ("S", (n, n), self.terminal_weight.shape()),
            ("omega", (n, 1), self.drift.dims()),
            ("x", (n, 1), self.state_ref.dims()),
            ("v", (m, 1), self.control_ref.dims()),
            ("qa", (n, 1), self.q_a.shape()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(Error::DimensionMismatch { what: what.into(), expected, got });
            }
        }
        if self.q_b.len() != n {
            return Err(Error::DimensionMismatch {
                what: "qb".into(),
                expected: (n, 1),
                got: self.q_b.shape(),
            });
        }
        Ok(())
    }
}

/// Validates dimensions, symmetrizes `S`, and checks `S, W(t) ⪰ 0` and
/// `R(t) ≻ 0` at `probes` equally spaced times.
pub fn validate_problem(mut p: LqProblem, probes: usize) -> Result<LqProblem> {
    if probes < 2 {
        return Err(Error::InvalidArgument("at least two probe times are required".into()));
    }
    if !(p.a < p.b) {
        return Err(Error::InvalidInterval { a: p.a, b: p.b });
    }
    p.check_dims()?;
    p.terminal_weight = symmetrize(&p.terminal_weight);

    let s_min = min_eigenvalue(&p.terminal_weight);
    if s_min < -psd_tol(&p.terminal_weight) {
        return Err(Error::NotPsd { role: MatrixRole::S, time: p.b, eigenvalue: s_min });
    }

    let mut c_r = f64::INFINITY;
    for t in p.probe_times(probes) {
        let w = p.w_at(t);
        let w_min = min_eigenvalue(&w);
        if !w_min.is_finite() || w_min < -psd_tol(&w) {
            return Err(Error::NotPsd { role: MatrixRole::W, time: t, eigenvalue: w_min });
        }
        let r_min = min_eigenvalue(&p.r_at(t));
        if !(r_min > TOL_PD) {
            return Err(Error::NotPd { role: MatrixRole::R, time: t, eigenvalue: r_min });
        }
        c_r = c_r.min(r_min);
    }
    p.validation = Some(Validation { probes, c_r });
    Ok(p)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.iter().any(|x| !x.is_finite()) {
        return f64::NAN;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn psd_tol(m: &DMatrix<f64>) -> f64 {
    1e-10 * (1.0 + m.norm())
}
