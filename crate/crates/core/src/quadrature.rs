//! Composite Simpson quadrature on equally spaced nodes.

use nalgebra::{DMatrix, DVector};

/// Weights of the composite Simpson rule on `nodes` equally spaced points
/// covering an interval of length `width`. `nodes` must be odd and ≥ 3.
pub fn simpson_weights(nodes: usize, width: f64) -> Vec<f64> {
    assert!(nodes >= 3 && nodes % 2 == 1, "Simpson needs an even panel count");
    let dt = width / (nodes - 1) as f64;
    (0..nodes)
        .map(|k| {
            let c = if k == 0 || k == nodes - 1 {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * dt / 3.0
        })
        .collect()
}

pub fn simpson_scalar(values: impl IntoIterator<Item = f64>, weights: &[f64]) -> f64 {
    values.into_iter().zip(weights).map(|(v, w)| v * w).sum()
}

pub fn simpson_matrix(
    values: impl IntoIterator<Item = DMatrix<f64>>,
    weights: &[f64],
) -> Option<DMatrix<f64>> {
    let mut it = values.into_iter().zip(weights);
    let (v0, w0) = it.next()?;
    let mut acc = v0 * *w0;
    for (v, w) in it {
        acc += v * *w;
    }
    Some(acc)
}

pub fn simpson_vector(
    values: impl IntoIterator<Item = DVector<f64>>,
    weights: &[f64],
) -> Option<DVector<f64>> {
    let mut it = values.into_iter().zip(weights);
    let (v0, w0) = it.next()?;
    let mut acc = v0 * *w0;
    for (v, w) in it {
        acc += v * *w;
    }
    Some(acc)
}
