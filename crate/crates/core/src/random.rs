//! Seeded random problem generator.
//!
//! Weights are built as `W = MᵀM`, `R = c_R I + MᵀM`, `S = MᵀM` so that every
//! generated problem validates. The seed also selects the flavour: seeds
//! `≡ 0 (mod 3)` are homogeneous and autonomous, `≡ 1` nonhomogeneous and
//! autonomous, `≡ 2` nonhomogeneous with polynomial `A(t)`, `B(t)`, `R(t)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coefficient::CoefficientFunction;
use crate::grid::SamplingGrid;
use crate::problem::{validate_problem, LqProblem, DEFAULT_PROBES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavour {
    Homogeneous,
    Nonhomogeneous,
    Nonautonomous,
}

impl Flavour {
    pub fn of_seed(seed: u64) -> Self {
        match seed % 3 {
            0 => Flavour::Homogeneous,
            1 => Flavour::Nonhomogeneous,
            _ => Flavour::Nonautonomous,
        }
    }
}

/// A random problem together with a random grid of at most 8 intervals.
#[derive(Debug, Clone)]
pub struct RandomCase {
    pub seed: u64,
    pub flavour: Flavour,
    pub problem: LqProblem,
    pub grid: SamplingGrid,
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

fn gram(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = uniform_matrix(rng, n, n, -1.0, 1.0);
    m.tr_mul(&m)
}

fn poly_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> CoefficientFunction {
    let entries = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| (0..3).map(|_| rng.random_range(lo..hi)).collect())
                .collect()
        })
        .collect();
    CoefficientFunction::polynomial(entries)
}

fn random_vector_fn(rng: &mut ChaCha8Rng, len: usize, polynomial: bool) -> CoefficientFunction {
    if polynomial {
        poly_matrix(rng, len, 1, -1.0, 1.0)
    } else {
        CoefficientFunction::constant(uniform_matrix(rng, len, 1, -1.0, 1.0))
    }
}

/// Validated random problem on `[0, 1]` with `n ≤ 4`, `m ≤ 3`.
pub fn random_problem(seed: u64) -> LqProblem {
    random_case(seed).problem
}

pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flavour = Flavour::of_seed(seed);
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=3);
    let timevarying = flavour == Flavour::Nonautonomous;

    let a = if timevarying {
        poly_matrix(&mut rng, n, n, -1.0, 1.0)
    } else {
        CoefficientFunction::constant(uniform_matrix(&mut rng, n, n, -2.0, 2.0))
    };
    let b = if timevarying {
        poly_matrix(&mut rng, n, m, -1.0, 1.0)
    } else {
        CoefficientFunction::constant(uniform_matrix(&mut rng, n, m, -2.0, 2.0))
    };
    let w = CoefficientFunction::constant(gram(&mut rng, n));
    let c_r = rng.random_range(0.2..1.0);
    let r_const = DMatrix::identity(m, m) * c_r + gram(&mut rng, m);
    let r = if timevarying {
        // R(t) = R₀ + t² I stays positive-definite on [0, 1].
        let entries = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let t2 = if i == j { 1.0 } else { 0.0 };
                        vec![r_const[(i, j)], 0.0, t2]
                    })
                    .collect()
            })
            .collect();
        CoefficientFunction::polynomial(entries)
    } else {
        CoefficientFunction::constant(r_const)
    };
    let s = gram(&mut rng, n);
    let q_a = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));

    let mut problem = LqProblem::homogeneous(0.0, 1.0, a, b, w, r, s, q_a);
    if flavour != Flavour::Homogeneous {
        problem = problem
            .with_drift(random_vector_fn(&mut rng, n, timevarying))
            .with_state_ref(random_vector_fn(&mut rng, n, timevarying))
            .with_control_ref(random_vector_fn(&mut rng, m, timevarying))
            .with_target(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)));
    }
    let problem = validate_problem(problem, DEFAULT_PROBES).expect("generated problems validate");

    let intervals = rng.random_range(1..=8);
    let weights: Vec<f64> = (0..intervals).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = weights.iter().sum();
    let h: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let grid = SamplingGrid::from_durations(&h, 0.0, 1.0)
        .or_else(|_| SamplingGrid::uniform(intervals, 0.0, 1.0))
        .expect("valid grid");
    RandomCase { seed, flavour, problem, grid }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_by_seed() {
        let a = random_case(42);
        let b = random_case(42);
        assert_eq!(a.problem, b.problem);
        assert_eq!(a.grid, b.grid);
        assert_ne!(random_case(43).problem, a.problem);
    }

    #[test]
    fn flavours_and_bounds() {
        for seed in 0..30 {
            let c = random_case(seed);
            assert!(c.problem.n <= 4 && c.problem.m <= 3);
            assert!(c.grid.len() <= 8);
            assert_eq!(c.problem.is_homogeneous(), c.flavour == Flavour::Homogeneous);
            if c.flavour == Flavour::Nonautonomous {
                assert!(!c.problem.state_matrix.is_constant());
            }
        }
    }
}
