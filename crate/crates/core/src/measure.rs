//! Sub-probability measures and measure-valued paths on a time grid.

use std::sync::Arc;

use crate::error::{KblError, Result};
use crate::grid::TimeGrid;
use crate::quadrature::GaussianRule;
use crate::rng::RngStream;

/// A finite measure on `R^d` with total mass at most one.
pub trait SubMeasure {
    fn dim(&self) -> usize;
    fn mass(&self) -> f64;
    fn integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> f64;
}

/// Equal-weight atoms `weight · Σ δ_{x_i}`, e.g. the surviving particles of an
/// `n`-particle system with `weight = 1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    d: usize,
    points: Vec<f64>,
    weight: f64,
}

impl WeightedSample {
    /// `points` is row-major `count × d`.
    pub fn new(d: usize, points: Vec<f64>, weight: f64) -> Result<Self> {
        if d == 0 || points.len() % d != 0 {
            return Err(KblError::Config(format!(
                "{} coordinates do not form points of dimension {d}",
                points.len()
            )));
        }
        if !(weight >= 0.0 && weight * (points.len() / d) as f64 <= 1.0 + 1e-12) {
            return Err(KblError::Config("weighted sample exceeds unit mass".into()));
        }
        Ok(Self { d, points, weight })
    }

    pub fn count(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.d)
    }
}

impl SubMeasure for WeightedSample {
    fn dim(&self) -> usize {
        self.d
    }

    fn mass(&self) -> f64 {
        self.weight * self.count() as f64
    }

    fn integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        self.weight * self.points().map(f).sum::<f64>()
    }
}

/// `mass · Normal(0, t I_d)`: the law-of-large-numbers limit `a(t) μ_{0,t}`.
#[derive(Debug, Clone)]
pub struct ScaledGaussian {
    d: usize,
    mass: f64,
    variance: f64,
    backend: GaussBackend,
}

#[derive(Debug, Clone)]
enum GaussBackend {
    Rule(Arc<GaussianRule>),
    /// Fixed standard-normal sample for `d >= 3`.
    Sample(Vec<f64>),
}

pub(crate) const MC_FALLBACK_SAMPLES: usize = 1_000_000;

impl ScaledGaussian {
    pub fn new(d: usize, mass: f64, variance: f64, nodes: usize) -> Result<Self> {
        if !(0.0..=1.0 + 1e-12).contains(&mass) || !(variance >= 0.0) {
            return Err(KblError::Config(format!(
                "invalid scaled Gaussian (mass {mass}, variance {variance})"
            )));
        }
        let backend = if d <= 2 {
            GaussBackend::Rule(GaussianRule::cached(d, nodes)?)
        } else {
            let count = MC_FALLBACK_SAMPLES / d;
            let mut rng = RngStream::new(0x5eed_0f_9a55, d as u64, u64::MAX - 1);
            GaussBackend::Sample((0..count * d).map(|_| rng.next_gaussian()).collect())
        };
        Ok(Self { d, mass, variance, backend })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

impl SubMeasure for ScaledGaussian {
    fn dim(&self) -> usize {
        self.d
    }

    fn mass(&self) -> f64 {
        self.mass
    }

    fn integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        let e = match &self.backend {
            GaussBackend::Rule(rule) => rule.expect(self.variance, f),
            GaussBackend::Sample(z) => {
                let s = self.variance.sqrt();
                let mut x = vec![0.0; self.d];
                let count = z.len() / self.d;
                let mut acc = 0.0;
                for row in z.chunks_exact(self.d) {
                    x.iter_mut().zip(row).for_each(|(xi, zi)| *xi = s * zi);
                    acc += f(&x);
                }
                acc / count as f64
            }
        };
        self.mass * e
    }
}

/// Cumulative killing integral `H(t_k) = ∫_0^{t_k} ⟨ζ, μ(s)⟩ ds` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl HazardPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KblError::Config("hazard path length does not match grid".into()));
        }
        if values[0] != 0.0 {
            return Err(KblError::Config("hazard path must start at 0".into()));
        }
        if values.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(KblError::Numeric("hazard path is not non-decreasing".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Cumulative trapezoid integral of `rate` on `grid`.
    pub fn trapezoid(grid: TimeGrid, rate: &[f64]) -> Vec<f64> {
        let dt = grid.dt();
        let mut out = Vec::with_capacity(rate.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in rate.windows(2) {
            acc += 0.5 * dt * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }
}

/// Grid summary of a path of sub-probability measures: total mass,
/// `⟨ζ, μ(t_k)⟩`, and the hazard built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasurePath {
    pub grid: TimeGrid,
    pub mass: Vec<f64>,
    pub zeta_mean: Vec<f64>,
    pub hazard: HazardPath,
}

impl EmpiricalMeasurePath {
    pub fn terminal_mass(&self) -> f64 {
        *self.mass.last().expect("non-empty grid")
    }
}

/// Particle-level state of one run of the `n`-particle system.
///
/// Full position paths are stored only when requested; terminal positions are
/// always kept. Positions of particles are advanced only while alive unless
/// full paths are recorded.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub n: usize,
    pub d: usize,
    pub grid: TimeGrid,
    /// Row-major `n × (m+1) × d` when recorded.
    pub paths: Option<Vec<f64>>,
    /// `(k, positions at t_k)` for requested grid points, row-major `n × d`.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    /// Row-major `n × d` positions at `T` (frozen at death for dead particles
    /// when paths are not recorded).
    pub final_positions: Vec<f64>,
    pub thresholds: Vec<f64>,
    /// Death times in `(0, T]`, `+∞` for survivors.
    pub kill_times: Vec<f64>,
    pub hazard: HazardPath,
}

impl ParticleEnsemble {
    /// Alive at `t_k` iff the threshold strictly exceeds the hazard.
    pub fn is_alive(&self, i: usize, k: usize) -> bool {
        self.thresholds[i] > self.hazard.values[k]
    }

    pub fn position(&self, i: usize, k: usize) -> Option<&[f64]> {
        let m1 = self.grid.len();
        self.paths
            .as_ref()
            .map(|p| &p[(i * m1 + k) * self.d..(i * m1 + k + 1) * self.d])
    }

    /// Surviving particles at `T` as a measure with atoms of weight `1/n`.
    pub fn terminal_measure(&self) -> WeightedSample {
        let k = self.grid.steps();
        self.measure_from(k, |i| &self.final_positions[i * self.d..(i + 1) * self.d])
    }

    /// `μ^n(t_k)`; needs recorded paths or a snapshot at `k` unless `k = m`.
    pub fn measure_at(&self, k: usize) -> Result<WeightedSample> {
        if k == self.grid.steps() {
            return Ok(self.terminal_measure());
        }
        if self.paths.is_some() {
            return Ok(self.measure_from(k, |i| self.position(i, k).expect("paths recorded")));
        }
        match self.snapshots.iter().find(|s| s.0 == k) {
            Some((_, pos)) => Ok(self.measure_from(k, |i| &pos[i * self.d..(i + 1) * self.d])),
            None => Err(KblError::Config(format!(
                "positions at step {k} need a run with recorded paths or a snapshot there"
            ))),
        }
    }

    fn measure_from<'a>(&'a self, k: usize, pos: impl Fn(usize) -> &'a [f64]) -> WeightedSample {
        let mut pts = Vec::new();
        for i in 0..self.n {
            if self.is_alive(i, k) {
                pts.extend_from_slice(pos(i));
            }
        }
        WeightedSample::new(self.d, pts, 1.0 / self.n as f64).expect("consistent ensemble")
    }
}
