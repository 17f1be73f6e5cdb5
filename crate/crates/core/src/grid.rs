use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Uniform discretization `t_k = k T / m` of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return config(format!("time horizon must be positive and finite, got {horizon}"));
        }
        if steps == 0 {
            return config("time grid needs at least one step");
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps `m`; the grid has `m + 1` points.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_k`, with the last point pinned to exactly `T`.
    pub fn time(&self, k: usize) -> f64 {
        assert!(k <= self.steps, "grid index {k} out of range 0..={}", self.steps);
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.horizon / self.steps as f64
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.time(k))
    }

    /// Index of the grid point equal to `t` (within a relative 1e-9), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.dt()).round();
        if k < 0.0 || k > self.steps as f64 {
            return None;
        }
        let k = k as usize;
        ((self.time(k) - t).abs() <= 1e-9 * self.horizon.max(1.0)).then_some(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_monotonicity() {
        let g = TimeGrid::new(1.0, 200).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(200), 1.0);
        let ts: Vec<f64> = g.times().collect();
        assert_eq!(ts.len(), 201);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.index_of(0.5), Some(100));
        assert_eq!(g.index_of(0.5001), None);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(f64::NAN, 10).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }
}
