use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance on `sum(h) == b - a`.
pub const DURATION_RTOL: f64 = 1e-12;

/// A subdivision `a = s_0 < s_1 < ... < s_N = b` of the time horizon.
///
/// After construction `s[i + 1] - s[i] == h[i]` holds bitwise: durations are
/// re-derived from the snapped sample times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingGrid {
    h: Vec<f64>,
    s: Vec<f64>,
}

impl SamplingGrid {
    pub fn uniform(n: usize, a: f64, b: f64) -> Result<Self> {
        check_interval(a, b)?;
        if n == 0 {
            return Err(Error::InvalidArgument("grid needs at least one interval".into()));
        }
        let len = b - a;
        let mut s: Vec<f64> = (0..=n).map(|i| a + len * (i as f64) / (n as f64)).collect();
        s[n] = b;
        Ok(Self::from_times(s))
    }

    pub fn from_durations(h: &[f64], a: f64, b: f64) -> Result<Self> {
        check_interval(a, b)?;
        if h.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one interval".into()));
        }
        if let Some((index, &value)) = h.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
            return Err(Error::NonPositiveDuration { index, value });
        }
        let sum: f64 = h.iter().sum();
        let expected = b - a;
        if (sum - expected).abs() > DURATION_RTOL * expected.abs() {
            return Err(Error::DurationMismatch { sum, expected });
        }
        let mut s = Vec::with_capacity(h.len() + 1);
        let mut t = a;
        s.push(t);
        for &hi in h {
            t += hi;
            s.push(t);
        }
        *s.last_mut().unwrap() = b;
        let grid = Self::from_times(s);
        if grid.h.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidArgument("sample times are not strictly increasing".into()));
        }
        Ok(grid)
    }

    fn from_times(s: Vec<f64>) -> Self {
        let h = s.windows(2).map(|w| w[1] - w[0]).collect();
        Self { h, s }
    }

    /// Grid restricted to intervals `j..N`, starting at `s_j`.
    pub fn tail(&self, j: usize) -> Result<Self> {
        if j >= self.len() {
            return Err(Error::IndexOutOfRange { index: j, max: self.len() - 1 });
        }
        Ok(Self { h: self.h[j..].to_vec(), s: self.s[j..].to_vec() })
    }

    /// Number of intervals `N`.
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn durations(&self) -> &[f64] {
        &self.h
    }

    pub fn times(&self) -> &[f64] {
        &self.s
    }

    pub fn start(&self) -> f64 {
        self.s[0]
    }

    pub fn end(&self) -> f64 {
        self.s[self.len()]
    }

    /// `max_i h_i`.
    pub fn norm_delta(&self) -> f64 {
        self.h.iter().copied().fold(0.0, f64::max)
    }

    /// Index of the interval `[s_i, s_{i+1})` containing `t`; `t = b` maps to
    /// the last interval.
    pub fn interval_of(&self, t: f64) -> usize {
        let k = self.s[1..].partition_point(|&x| x <= t);
        k.min(self.len() - 1)
    }

    /// The `2M + 1` equally spaced node times of interval `i`, with the last
    /// one snapped to `s_{i+1}`.
    pub fn nodes(&self, i: usize, substeps: usize) -> Vec<f64> {
        let panels = 2 * substeps;
        let (lo, hi) = (self.s[i], self.s[i + 1]);
        let dt = self.h[i] / panels as f64;
        let mut t: Vec<f64> = (0..=panels).map(|k| lo + dt * k as f64).collect();
        t[panels] = hi;
        t
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInterval { a, b });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_single_interval() {
        let g = SamplingGrid::uniform(1, 0.0, 1.0).unwrap();
        assert_eq!(g.durations(), &[1.0]);
        assert_eq!(g.times(), &[0.0, 1.0]);
    }

    #[test]
    fn uniform_quarters() {
        let g = SamplingGrid::uniform(4, 0.0, 1.0).unwrap();
        assert_eq!(g.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.durations(), &[0.25; 4]);
        assert_eq!(g.norm_delta(), 0.25);
    }

    #[test]
    fn uniform_shifted() {
        let g = SamplingGrid::uniform(3, -1.0, 2.0).unwrap();
        assert_eq!(g.durations(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn uniform_rejects_bad_interval() {
        assert!(matches!(SamplingGrid::uniform(2, 1.0, 1.0), Err(Error::InvalidInterval { .. })));
        assert!(matches!(SamplingGrid::uniform(2, 2.0, 1.0), Err(Error::InvalidInterval { .. })));
    }

    #[test]
    fn durations() {
        let g = SamplingGrid::from_durations(&[0.5, 0.5], 0.0, 1.0).unwrap();
        assert_eq!(g.times(), &[0.0, 0.5, 1.0]);
        let g = SamplingGrid::from_durations(&[0.3, 0.7], 0.0, 1.0).unwrap();
        assert_eq!(g.times(), &[0.0, 0.3, 1.0]);
        assert!(matches!(
            SamplingGrid::from_durations(&[0.5, 0.6], 0.0, 1.0),
            Err(Error::DurationMismatch { .. })
        ));
        assert!(matches!(
            SamplingGrid::from_durations(&[1.5, -0.5], 0.0, 1.0),
            Err(Error::NonPositiveDuration { index: 1, .. })
        ));
    }

    #[test]
    fn interval_lookup() {
        let g = SamplingGrid::uniform(4, 0.0, 1.0).unwrap();
        assert_eq!(g.interval_of(0.0), 0);
        assert_eq!(g.interval_of(0.25), 1);
        assert_eq!(g.interval_of(0.9), 3);
        assert_eq!(g.interval_of(1.0), 3);
    }

    #[test]
    fn tail_keeps_times() {
        let g = SamplingGrid::uniform(5, 0.0, 1.0).unwrap();
        let t = g.tail(2).unwrap();
        assert_eq!(t.times(), &g.times()[2..]);
        assert_eq!(t.durations(), &g.durations()[2..]);
        assert!(g.tail(5).is_err());
    }

    proptest! {
        #[test]
        fn steps_match_durations(weights in prop::collection::vec(0.01f64..1.0, 1..20), a in -5.0f64..5.0, len in 0.1f64..10.0) {
            let total: f64 = weights.iter().sum();
            let h: Vec<f64> = weights.iter().map(|w| w / total * len).collect();
            let b = a + len;
            let g = SamplingGrid::from_durations(&h, a, b).unwrap();
            prop_assert_eq!(g.start(), a);
            prop_assert_eq!(g.end(), b);
            for i in 0..g.len() {
                prop_assert_eq!(g.times()[i + 1] - g.times()[i], g.durations()[i]);
                prop_assert!(g.durations()[i] > 0.0);
            }
        }

        #[test]
        fn uniform_steps_match(n in 1usize..200, a in -5.0f64..5.0, len in 0.1f64..10.0) {
            let g = SamplingGrid::uniform(n, a, a + len).unwrap();
            prop_assert_eq!(g.end(), a + len);
            for i in 0..n {
                prop_assert_eq!(g.times()[i + 1] - g.times()[i], g.durations()[i]);
            }
        }
    }
}
