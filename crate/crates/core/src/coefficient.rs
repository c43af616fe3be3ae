//! Time-dependent problem coefficients.
//!
//! A coefficient is a matrix-valued function of time. Three shapes are
//! supported: constant matrices, per-entry polynomials in `t`, and a small
//! registry of builtin scalar profiles multiplying a constant matrix.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Sin,
    Cos,
    Exp,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(Builtin::Sin),
            "cos" => Some(Builtin::Cos),
            "exp" => Some(Builtin::Exp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Exp => "exp",
        }
    }

    fn eval(self, t: f64) -> f64 {
        match self {
            Builtin::Sin => t.sin(),
            Builtin::Cos => t.cos(),
            Builtin::Exp => t.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientFunction {
    Constant(DMatrix<f64>),
    /// Row-major per-entry coefficient lists, lowest degree first.
    Polynomial {
        rows: usize,
        cols: usize,
        coeffs: Vec<Vec<f64>>,
    },
    /// `f(t) * scale` for a named scalar profile `f`.
    Builtin { profile: Builtin, scale: DMatrix<f64> },
}

impl CoefficientFunction {
    pub fn constant(m: DMatrix<f64>) -> Self {
        CoefficientFunction::Constant(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CoefficientFunction::Constant(DMatrix::zeros(rows, cols))
    }

    pub fn scalar(value: f64) -> Self {
        CoefficientFunction::Constant(DMatrix::from_element(1, 1, value))
    }

    pub fn constant_vector(v: &[f64]) -> Self {
        CoefficientFunction::Constant(DMatrix::from_column_slice(v.len(), 1, v))
    }

    /// Builds a polynomial coefficient from a `rows x cols` grid of
    /// coefficient lists.
    pub fn polynomial(entries: Vec<Vec<Vec<f64>>>) -> Self {
        let rows = entries.len();
        let cols = entries.first().map_or(0, Vec::len);
        let coeffs = entries.into_iter().flatten().collect();
        CoefficientFunction::Polynomial { rows, cols, coeffs }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            CoefficientFunction::Constant(m) => m.shape(),
            CoefficientFunction::Polynomial { rows, cols, .. } => (*rows, *cols),
            CoefficientFunction::Builtin { scale, .. } => scale.shape(),
        }
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        match self {
            CoefficientFunction::Constant(m) => m.clone(),
            CoefficientFunction::Polynomial { rows, cols, coeffs } => {
                // Row-major storage, nalgebra is column-major.
                DMatrix::from_fn(*rows, *cols, |r, c| horner(&coeffs[r * cols + c], t))
            }
            CoefficientFunction::Builtin { profile, scale } => scale * profile.eval(t),
        }
    }

    /// Evaluates a column coefficient as a vector.
    pub fn eval_vector(&self, t: f64) -> DVector<f64> {
        let m = self.eval(t);
        DVector::from_column_slice(m.as_slice())
    }

    /// True when the function is identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            CoefficientFunction::Constant(m) => m.iter().all(|&x| x == 0.0),
            CoefficientFunction::Polynomial { coeffs, .. } => {
                coeffs.iter().flatten().all(|&x| x == 0.0)
            }
            CoefficientFunction::Builtin { scale, .. } => scale.iter().all(|&x| x == 0.0),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            CoefficientFunction::Constant(_) => true,
            CoefficientFunction::Polynomial { coeffs, .. } => {
                coeffs.iter().all(|c| c.iter().skip(1).all(|&x| x == 0.0))
            }
            CoefficientFunction::Builtin { scale, .. } => scale.iter().all(|&x| x == 0.0),
        }
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_entries_are_row_major() {
        let f = CoefficientFunction::polynomial(vec![
            vec![vec![1.0], vec![0.0, 1.0]],
            vec![vec![0.0, 0.0, 1.0], vec![2.0]],
        ]);
        assert_eq!(f.dims(), (2, 2));
        let m = f.eval(3.0);
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(0, 1)], 3.0);
        assert_eq!(m[(1, 0)], 9.0);
        assert_eq!(m[(1, 1)], 2.0);
    }

    #[test]
    fn builtin_scales_matrix() {
        let f = CoefficientFunction::Builtin {
            profile: Builtin::Cos,
            scale: DMatrix::from_element(1, 2, 2.0),
        };
        assert_eq!(f.eval(0.0), DMatrix::from_element(1, 2, 2.0));
        assert!(!f.is_constant());
    }

    #[test]
    fn evaluation_is_pure() {
        let f = CoefficientFunction::polynomial(vec![vec![vec![0.3, -1.7, 2.2, 0.9]]]);
        for &t in &[0.0, 0.1, 0.77, 1.0] {
            assert_eq!(f.eval(t).to_bits_vec(), f.eval(t).to_bits_vec());
        }
    }

    trait Bits {
        fn to_bits_vec(&self) -> Vec<u64>;
    }
    impl Bits for DMatrix<f64> {
        fn to_bits_vec(&self) -> Vec<u64> {
            self.iter().map(|x| x.to_bits()).collect()
        }
    }

    #[test]
    fn zero_detection() {
        assert!(CoefficientFunction::zeros(3, 1).is_zero());
        assert!(!CoefficientFunction::scalar(1e-300).is_zero());
        assert!(CoefficientFunction::polynomial(vec![vec![vec![0.0, 0.0]]]).is_zero());
    }
}
