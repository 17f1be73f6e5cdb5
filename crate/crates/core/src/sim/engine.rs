//! The `n`-particle system, uncontrolled and under exchangeable controls.
//!
//! Per step `[t_k, t_{k+1})` the killing rate is frozen at
//! `⟨ζ, μ^n(t_k)⟩ = (1/n) Σ_alive ζ(x_i(t_k))`, but deaths are resolved exactly
//! against the resulting piecewise-linear hazard: thresholds are consumed in
//! increasing order, each crossing removes one particle and lowers the slope,
//! until the step ends. Brownian increments are exact. Every particle draws from
//! its own counter-based stream, so results do not depend on the worker count.

use rayon::prelude::*;

use crate::error::{config, Result};
use crate::grid::TimeGrid;
use crate::killing::KillingFunction;
use crate::measure::{EmpiricalMeasurePath, HazardPath, ParticleEnsemble};
use crate::rng::RngStream;
use crate::sim::control::{sq_norm, ControlSpec, CostLedger, DriftPolicy};

/// Particles per work unit; fixed so that partial sums are combined in the
/// same order for any thread count.
pub const CHUNK: usize = 2048;

#[derive(Debug, Clone)]
pub struct ParticleSystem {
    pub n: usize,
    pub d: usize,
    pub grid: TimeGrid,
    pub zeta: KillingFunction,
}

impl ParticleSystem {
    pub fn new(n: usize, d: usize, grid: TimeGrid, zeta: KillingFunction) -> Result<Self> {
        if n == 0 {
            return config("particle count must be at least 1");
        }
        if d == 0 {
            return config("dimension must be at least 1");
        }
        Ok(Self { n, d, grid, zeta })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep every particle's full path (`n × (m+1) × d` values).
    pub record_paths: bool,
    /// Keep all positions at every `snapshot_stride`-th grid point (0: never).
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub path: EmpiricalMeasurePath,
    pub ensemble: ParticleEnsemble,
    pub cost: CostLedger,
}

#[derive(Debug, Clone)]
struct Particle {
    rng: RngStream,
    zeta: f64,
    alive: bool,
    drift_cost: f64,
}

/// Advances one particle by one step of `β(t_{k+1}) = β(t_k) + ΔB + u(t_k, β(t_k)) Δt`
/// and returns the incurred drift cost `½‖u‖² Δt`.
#[inline]
pub(crate) fn step_particle(
    x: &mut [f64],
    rng: &mut RngStream,
    drift: &DriftPolicy,
    k: usize,
    dt: f64,
    sqrt_dt: f64,
    u: &mut [f64],
) -> f64 {
    if matches!(drift, DriftPolicy::Zero) {
        x.iter_mut().for_each(|xi| *xi += sqrt_dt * rng.next_gaussian());
        return 0.0;
    }
    drift.drift_at(k, x, u);
    for (xi, ui) in x.iter_mut().zip(u.iter()) {
        *xi += sqrt_dt * rng.next_gaussian() + ui * dt;
    }
    0.5 * sq_norm(u) * dt
}

/// One run of the (possibly controlled) system with replica id `replica`.
///
/// Drift policies act on the whole horizon; after death a particle's position no
/// longer matters and is only advanced when paths are recorded or when a
/// feedback policy needs its cost.
pub fn run_system(
    sys: &ParticleSystem,
    control: &ControlSpec,
    seed: u64,
    replica: u64,
    opts: RunOptions,
) -> Result<RunOutput> {
    let ParticleSystem { n, d, grid, ref zeta } = *sys;
    control.validate(d, &grid)?;
    let entropy = control.entropy_cost()?;
    let m = grid.steps();
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let inv_n = 1.0 / n as f64;
    let drift = &control.drift;
    let advance_dead = opts.record_paths || drift.is_feedback();

    let origin = vec![0.0; d];
    let z0 = zeta.value(&origin);
    let mut parts: Vec<Particle> = (0..n)
        .map(|i| Particle { rng: RngStream::new(seed, i as u64, replica), zeta: z0, alive: true, drift_cost: 0.0 })
        .collect();
    let thresholds: Vec<f64> =
        parts.iter_mut().map(|p| control.threshold.sample_from_exp1(p.rng.next_exp1())).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]).then(a.cmp(&b)));

    let mut pos = vec![0.0; n * d];
    let mut paths = opts.record_paths.then(|| vec![0.0; n * (m + 1) * d]);
    let mut kill_times = vec![f64::INFINITY; n];
    let mut snapshots = Vec::new();
    if opts.snapshot_stride > 0 {
        snapshots.push((0, pos.clone()));
    }

    let chunk_sum = |parts: &[Particle]| -> f64 {
        parts.par_chunks(CHUNK).map(|c| c.iter().map(|p| p.zeta).sum::<f64>()).collect::<Vec<f64>>().iter().sum()
    };
    let mut zsum = chunk_sum(&parts);
    let mut alive_count = n;
    let mut next = 0usize;

    let mut hazard = Vec::with_capacity(m + 1);
    let mut mass = Vec::with_capacity(m + 1);
    let mut zeta_mean = Vec::with_capacity(m + 1);
    hazard.push(0.0);
    mass.push(1.0);
    zeta_mean.push(zsum * inv_n);

    for k in 0..m {
        let t_k = grid.time(k);
        let t_next = grid.time(k + 1);
        let mut h = hazard[k];
        let mut rem = dt;
        let mut elapsed = 0.0;
        let mut slope = zsum.max(0.0) * inv_n;
        while next < n {
            let j = order[next];
            let x = thresholds[j];
            if x > h + slope * rem {
                break;
            }
            let wait = if slope > 0.0 { ((x - h) / slope).clamp(0.0, rem) } else { 0.0 };
            elapsed += wait;
            rem = (rem - wait).max(0.0);
            h = h.max(x);
            parts[j].alive = false;
            kill_times[j] = (t_k + elapsed).min(t_next);
            alive_count -= 1;
            zsum = if alive_count == 0 { 0.0 } else { zsum - parts[j].zeta };
            slope = zsum.max(0.0) * inv_n;
            next += 1;
        }
        hazard.push(h + slope * rem);

        let partials: Vec<f64> = pos
            .par_chunks_mut(CHUNK * d)
            .zip(parts.par_chunks_mut(CHUNK))
            .map(|(pc, sc)| {
                let mut u = vec![0.0; d];
                let mut partial = 0.0;
                for (x, p) in pc.chunks_exact_mut(d).zip(sc.iter_mut()) {
                    if !p.alive && !advance_dead {
                        continue;
                    }
                    p.drift_cost += step_particle(x, &mut p.rng, drift, k, dt, sqrt_dt, &mut u);
                    if p.alive {
                        p.zeta = zeta.value(x);
                        partial += p.zeta;
                    }
                }
                partial
            })
            .collect();
        zsum = partials.iter().sum();
        mass.push(alive_count as f64 * inv_n);
        zeta_mean.push(zsum * inv_n);
        if opts.snapshot_stride > 0 && (k + 1) % opts.snapshot_stride == 0 {
            snapshots.push((k + 1, pos.clone()));
        }
        if let Some(paths) = paths.as_mut() {
            for i in 0..n {
                let at = (i * (m + 1) + k + 1) * d;
                paths[at..at + d].copy_from_slice(&pos[i * d..(i + 1) * d]);
            }
        }
    }

    let drift_cost = match drift.deterministic_cost(&grid) {
        Some(c) => c,
        None => parts.iter().map(|p| p.drift_cost).sum::<f64>() * inv_n,
    };
    let hazard = HazardPath::new(grid, hazard)?;
    let path = EmpiricalMeasurePath { grid, mass, zeta_mean, hazard: hazard.clone() };
    let ensemble = ParticleEnsemble {
        n,
        d,
        grid,
        paths,
        snapshots,
        final_positions: pos,
        thresholds,
        kill_times,
        hazard,
    };
    Ok(RunOutput { path, ensemble, cost: CostLedger::new(drift_cost, entropy) })
}

/// The uncontrolled system: Brownian particles with `Exp(1)` thresholds.
pub fn simulate_uncontrolled(
    n: usize,
    d: usize,
    grid: TimeGrid,
    zeta: &KillingFunction,
    seed: u64,
    replica: u64,
) -> Result<(EmpiricalMeasurePath, ParticleEnsemble)> {
    let sys = ParticleSystem::new(n, d, grid, zeta.clone())?;
    let out = run_system(&sys, &ControlSpec::zero(), seed, replica, RunOptions::default())?;
    Ok((out.path, out.ensemble))
}

/// The controlled system `β̃_i = β_i + ∫ψ`, thresholds `S_i ~ ν`, with its cost.
#[allow(clippy::too_many_arguments)]
pub fn simulate_controlled(
    n: usize,
    d: usize,
    grid: TimeGrid,
    zeta: &KillingFunction,
    control: &ControlSpec,
    seed: u64,
    replica: u64,
) -> Result<(EmpiricalMeasurePath, ParticleEnsemble, CostLedger)> {
    let sys = ParticleSystem::new(n, d, grid, zeta.clone())?;
    let out = run_system(&sys, control, seed, replica, RunOptions::default())?;
    Ok((out.path, out.ensemble, out.cost))
}
