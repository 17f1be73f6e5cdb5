//! The self-consistent survival equation
//! `⟨f, ϖ(t)⟩ = E[f(b̃_t) 1{σ̃ > ∫_0^t ⟨ζ, ϖ(s)⟩ ds}]` for a sampled law of
//! (controlled path, threshold), and the control cost `J`.
//!
//! The unknown is reduced to the scalar hazard `H(t) = ∫⟨ζ,ϖ⟩`: given `H`, the
//! right-hand side is an explicit average, so Picard iteration acts on `H` alone.

use rayon::prelude::*;

use crate::dictionary::{bl_distance_lower, BLDictionary};
use crate::error::{config, KblError, Result};
use crate::grid::TimeGrid;
use crate::killing::KillingFunction;
use crate::measure::{HazardPath, WeightedSample};
use crate::rng::RngStream;
use crate::sim::control::ControlSpec;
use crate::sim::engine::{run_system, step_particle, ParticleSystem, RunOptions, CHUNK};

/// `M` samples of the canonical pair `(b̃, σ̃)` under a control.
#[derive(Debug, Clone)]
pub struct ThetaSample {
    pub grid: TimeGrid,
    pub d: usize,
    /// Row-major `M × (m+1) × d`.
    pub paths: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub control: ControlSpec,
    /// Realized `½∫‖ψ‖²` per sample.
    pub drift_samples: Vec<f64>,
}

impl ThetaSample {
    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.grid.len() * self.d;
        &self.paths[i * w..(i + 1) * w]
    }

    /// `(1/M) Σ δ_{b̃_i(t_k)} 1{σ̃_i > h}`.
    pub fn surviving_measure(&self, k: usize, h: f64) -> Result<WeightedSample> {
        let d = self.d;
        let mut pts = Vec::new();
        for i in 0..self.len() {
            if self.sigmas[i] > h {
                let at = k * d;
                pts.extend_from_slice(&self.path(i)[at..at + d]);
            }
        }
        WeightedSample::new(d, pts, 1.0 / self.len() as f64)
    }
}

/// Draws `count` controlled single-particle samples. Sample `i` uses the stream
/// of particle `i` in replica `stream`, with the simulator's draw order (threshold
/// first, then `d` Gaussians per step), so it coincides with that particle's
/// recorded path in the `n`-particle engine.
pub fn sample_theta(
    control: &ControlSpec,
    d: usize,
    grid: TimeGrid,
    count: usize,
    seed: u64,
    stream: u64,
) -> Result<ThetaSample> {
    if count == 0 {
        return config("theta sample needs at least one draw");
    }
    if d == 0 {
        return config("dimension must be at least 1");
    }
    control.validate(d, &grid)?;
    let m1 = grid.len();
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let mut paths = vec![0.0; count * m1 * d];
    let mut sigmas = vec![0.0; count];
    let mut drift_samples = vec![0.0; count];
    paths
        .par_chunks_mut(CHUNK * m1 * d)
        .zip(sigmas.par_chunks_mut(CHUNK))
        .zip(drift_samples.par_chunks_mut(CHUNK))
        .enumerate()
        .for_each(|(c, ((pc, sc), dc))| {
            let mut u = vec![0.0; d];
            let mut x = vec![0.0; d];
            for (j, (path, (sigma, cost))) in
                pc.chunks_exact_mut(m1 * d).zip(sc.iter_mut().zip(dc.iter_mut())).enumerate()
            {
                let mut rng = RngStream::new(seed, (c * CHUNK + j) as u64, stream);
                *sigma = control.threshold.sample_from_exp1(rng.next_exp1());
                x.iter_mut().for_each(|v| *v = 0.0);
                for k in 0..m1 - 1 {
                    *cost += step_particle(&mut x, &mut rng, &control.drift, k, dt, sqrt_dt, &mut u);
                    path[(k + 1) * d..(k + 2) * d].copy_from_slice(&x);
                }
            }
        });
    if let Some(c) = control.drift.deterministic_cost(&grid) {
        drift_samples.iter_mut().for_each(|v| *v = c);
    }
    Ok(ThetaSample { grid, d, paths, sigmas, control: control.clone(), drift_samples })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping in `(0, 1]`; halved whenever the residual fails to shrink.
    pub damping: f64,
    /// Starting hazard (defaults to `H ≡ 0`).
    pub initial: Option<Vec<f64>>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 200, damping: 1.0, initial: None }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub hazard: HazardPath,
    pub mass: Vec<f64>,
    pub zeta_mean: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    /// Every iterate `H_0, H_1, …`, kept when requested.
    pub iterates: Option<Vec<Vec<f64>>>,
}

impl FixedPointResult {
    pub fn terminal_mass(&self) -> f64 {
        *self.mass.last().expect("non-empty grid")
    }
}

/// Per-time suffix sums of `ζ(b̃_i(t_k))` over samples sorted by `σ̃`, so that
/// `Σ_{σ̃_i > h} ζ(b̃_i(t_k))` is one binary search away.
struct SortedSums {
    sorted_sigmas: Vec<f64>,
    /// `(m+1) × (M+1)`; row `k` entry `j` sums sorted samples `j..M`.
    suffix: Vec<f64>,
}

impl SortedSums {
    fn new(theta: &ThetaSample, zeta: &KillingFunction) -> Self {
        let mcount = theta.len();
        let d = theta.d;
        let mut order: Vec<usize> = (0..mcount).collect();
        order.sort_unstable_by(|&a, &b| theta.sigmas[a].total_cmp(&theta.sigmas[b]).then(a.cmp(&b)));
        let sorted_sigmas = order.iter().map(|&i| theta.sigmas[i]).collect();
        let mut suffix = vec![0.0; theta.grid.len() * (mcount + 1)];
        suffix.par_chunks_mut(mcount + 1).enumerate().for_each(|(k, row)| {
            let mut acc = 0.0;
            for j in (0..mcount).rev() {
                let p = theta.path(order[j]);
                acc += zeta.value(&p[k * d..(k + 1) * d]);
                row[j] = acc;
            }
        });
        Self { sorted_sigmas, suffix }
    }

    /// Index of the first survivor: `σ̃ = h` counts as killed.
    fn first_alive(&self, h: f64) -> usize {
        self.sorted_sigmas.partition_point(|&s| s <= h)
    }

    fn zeta_sum(&self, k: usize, h: f64) -> f64 {
        let w = self.sorted_sigmas.len() + 1;
        self.suffix[k * w + self.first_alive(h)]
    }
}

/// Picard iteration `H ← (1−δ)H + δ·∫ m_H` with
/// `m_H(t_k) = (1/M) Σ ζ(b̃_i(t_k)) 1{σ̃_i > H(t_k)}`, trapezoid in time.
pub fn solve_fixed_point(
    theta: &ThetaSample,
    zeta: &KillingFunction,
    opts: &FixedPointOptions,
) -> Result<FixedPointResult> {
    solve_inner(theta, zeta, opts, false)
}

/// As [`solve_fixed_point`], additionally returning every iterate.
pub fn solve_fixed_point_traced(
    theta: &ThetaSample,
    zeta: &KillingFunction,
    opts: &FixedPointOptions,
) -> Result<FixedPointResult> {
    solve_inner(theta, zeta, opts, true)
}

fn solve_inner(
    theta: &ThetaSample,
    zeta: &KillingFunction,
    opts: &FixedPointOptions,
    trace: bool,
) -> Result<FixedPointResult> {
    if theta.is_empty() {
        return config("theta sample is empty");
    }
    if !(opts.tol > 0.0) {
        return config("tolerance must be positive");
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return config("damping must lie in (0, 1]");
    }
    if opts.max_iter == 0 {
        return config("max_iter must be at least 1");
    }
    let grid = theta.grid;
    let m1 = grid.len();
    let inv_m = 1.0 / theta.len() as f64;
    let mut h = match &opts.initial {
        Some(v) => HazardPath::new(grid, v.clone())?.values,
        None => vec![0.0; m1],
    };
    let sums = SortedSums::new(theta, zeta);
    let rate = |h: &[f64]| -> Vec<f64> { (0..m1).map(|k| (sums.zeta_sum(k, h[k]) * inv_m).max(0.0)).collect() };

    let mut damping = opts.damping;
    let mut history = Vec::new();
    let mut iterates = trace.then(|| vec![h.clone()]);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let target = HazardPath::trapezoid(grid, &rate(&h));
        let next: Vec<f64> = h.iter().zip(&target).map(|(a, b)| (1.0 - damping) * a + damping * b).collect();
        let res = h.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !res.is_finite() {
            return Err(KblError::Numeric("fixed-point residual is not finite".into()));
        }
        // The sampled map is piecewise constant in `H`, so plain iteration can
        // cycle with a fixed residual; any step that fails to shrink it halves δ.
        if res >= residual && damping > 1.0 / 1024.0 {
            damping *= 0.5;
            log::debug!("fixed point: residual stalled at {res:e}, damping now {damping}");
        }
        residual = res;
        history.push(res);
        h = next;
        if let Some(v) = iterates.as_mut() {
            v.push(h.clone());
        }
        if res < opts.tol {
            let mass = (0..m1).map(|k| (theta.len() - sums.first_alive(h[k])) as f64 * inv_m).collect();
            let zeta_mean = rate(&h);
            return Ok(FixedPointResult {
                hazard: HazardPath::new(grid, h)?,
                mass,
                zeta_mean,
                iterations: it,
                residual,
                residual_history: history,
                iterates,
            });
        }
    }
    Err(KblError::NonConvergence { iterations: opts.max_iter, residual })
}

/// `J(Θ)`: mean realized drift cost plus the closed-form threshold entropy.
pub fn j_cost(theta: &ThetaSample) -> Result<f64> {
    let entropy = theta.control.entropy_cost()?;
    if theta.control.drift.is_zero() {
        return Ok(entropy);
    }
    let drift = theta.drift_samples.iter().sum::<f64>() / theta.len() as f64;
    Ok(drift + entropy)
}

#[derive(Debug, Clone)]
pub struct SelfConsistencyReport {
    pub sim_mass: Vec<f64>,
    pub fixed_point_mass: Vec<f64>,
    pub sup_mass_deviation: f64,
    /// Dictionary lower bound on `d_BL(μ̃^n(T), ϖ(T))`.
    pub terminal_distance: f64,
    pub tolerance: f64,
    pub flagged: bool,
    pub fixed_point: FixedPointResult,
}

/// Compares the controlled `n`-particle system with the fixed point of `M`
/// independent controlled single-particle samples.
#[allow(clippy::too_many_arguments)]
pub fn self_consistency_check(
    control: &ControlSpec,
    n: usize,
    samples: usize,
    grid: TimeGrid,
    d: usize,
    zeta: &KillingFunction,
    seed: u64,
    tolerance: f64,
) -> Result<SelfConsistencyReport> {
    let sys = ParticleSystem::new(n, d, grid, zeta.clone())?;
    let run = run_system(&sys, control, seed, 0, RunOptions::default())?;
    let theta = sample_theta(control, d, grid, samples, seed, 1)?;
    let fp = solve_fixed_point(&theta, zeta, &FixedPointOptions::default())?;
    let sup_mass_deviation =
        run.path.mass.iter().zip(&fp.mass).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let fp_terminal = theta.surviving_measure(grid.steps(), fp.hazard.at(grid.steps()))?;
    let terminal_distance =
        bl_distance_lower(&run.ensemble.terminal_measure(), &fp_terminal, &BLDictionary::standard(d))?;
    Ok(SelfConsistencyReport {
        sim_mass: run.path.mass,
        fixed_point_mass: fp.mass.clone(),
        sup_mass_deviation,
        terminal_distance,
        tolerance,
        flagged: sup_mass_deviation > tolerance,
        fixed_point: fp,
    })
}
