//! Optimal sampled-data (sample-and-hold) controls for linear-quadratic
//! optimal control problems.
//!
//! The pipeline is: per-interval integral blocks ([`blocks`]) built from the
//! state-transition matrix and Duhamel terms ([`transition`]), a backward
//! Riccati-type recursion and forward synthesis of the optimal coefficients
//! ([`riccati`]), and verification by simulation, Pontryagin residuals
//! ([`simulate`]) and a brute-force dense QP ([`oracle`]).

pub mod blocks;
pub mod coefficient;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod pipeline;
pub mod problem;
pub mod quadrature;
pub mod random;
pub mod registry;
pub mod riccati;
pub mod simulate;
pub mod transition;

pub use blocks::{compute_all_blocks, compute_blocks, IntervalBlocks};
pub use coefficient::CoefficientFunction;
pub use error::{Error, Result};
pub use grid::SamplingGrid;
pub use pipeline::{solve, SolveOutput};
pub use problem::{validate_problem, LqProblem};
pub use riccati::{
    backward_sweep, closed_loop_gain, forward_synthesis, value_function, RiccatiSweep,
    SampledSolution,
};
pub use simulate::{FunctionControl, PiecewiseConstantControl};
pub use transition::{propagate_interval, transition_matrix, IntervalPropagation, DEFAULT_SUBSTEPS};
