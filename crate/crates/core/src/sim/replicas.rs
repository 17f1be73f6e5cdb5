use rayon::prelude::*;

use crate::error::{config, KblError, Result};
use crate::sim::control::ControlSpec;
use crate::sim::engine::{run_system, ParticleSystem, RunOptions, RunOutput};
use crate::stats::mean_and_sd;

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return config("worker count must be at least 1");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| KblError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone)]
pub struct ReplicaSpec {
    pub system: ParticleSystem,
    pub control: ControlSpec,
    pub seed: u64,
    pub options: RunOptions,
}

/// Independent replicas with across-replica aggregates of the mass path.
#[derive(Debug, Clone)]
pub struct ReplicaSet {
    pub runs: Vec<RunOutput>,
    pub mean_mass: Vec<f64>,
    /// Sample standard deviation across replicas (zero for a single replica).
    pub sd_mass: Vec<f64>,
    /// `sd_mass / √R`.
    pub se_mass: Vec<f64>,
    pub mean_zeta: Vec<f64>,
}

/// Replica `r` uses replica id `r`; output is identical for any `workers`.
pub fn run_replicas(spec: &ReplicaSpec, replicas: usize, workers: usize) -> Result<ReplicaSet> {
    if replicas == 0 {
        return config("replica count must be at least 1");
    }
    let runs: Vec<RunOutput> = with_workers(workers, || {
        (0..replicas)
            .into_par_iter()
            .map(|r| run_system(&spec.system, &spec.control, spec.seed, r as u64, spec.options))
            .collect::<Result<Vec<_>>>()
    })??;
    let m1 = spec.system.grid.len();
    let mut mean_mass = Vec::with_capacity(m1);
    let mut sd_mass = Vec::with_capacity(m1);
    let mut se_mass = Vec::with_capacity(m1);
    let mut mean_zeta = Vec::with_capacity(m1);
    for k in 0..m1 {
        let masses: Vec<f64> = runs.iter().map(|r| r.path.mass[k]).collect();
        let (mean, sd) = mean_and_sd(&masses);
        mean_mass.push(mean);
        sd_mass.push(sd);
        se_mass.push(sd / (replicas as f64).sqrt());
        let zetas: Vec<f64> = runs.iter().map(|r| r.path.zeta_mean[k]).collect();
        mean_zeta.push(mean_and_sd(&zetas).0);
    }
    Ok(ReplicaSet { runs, mean_mass, sd_mass, se_mass, mean_zeta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::killing::KillingFunction;

    fn spec(n: usize) -> ReplicaSpec {
        ReplicaSpec {
            system: ParticleSystem::new(n, 1, TimeGrid::new(1.0, 20).unwrap(), KillingFunction::abs_power(1.0).unwrap())
                .unwrap(),
            control: ControlSpec::zero(),
            seed: 17,
            options: RunOptions::default(),
        }
    }

    #[test]
    fn single_replica_aggregate_is_the_path() {
        let set = run_replicas(&spec(5000), 1, 1).unwrap();
        assert_eq!(set.mean_mass, set.runs[0].path.mass);
        assert!(set.sd_mass.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let a = run_replicas(&spec(6000), 4, 1).unwrap();
        let b = run_replicas(&spec(6000), 4, 8).unwrap();
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert_eq!(x.path, y.path);
            assert_eq!(x.ensemble.kill_times, y.ensemble.kill_times);
            assert_eq!(x.ensemble.final_positions, y.ensemble.final_positions);
        }
        assert_eq!(a.mean_mass, b.mean_mass);
    }

    #[test]
    fn zero_replicas_or_workers_rejected() {
        assert!(run_replicas(&spec(10), 0, 1).is_err());
        assert!(run_replicas(&spec(10), 1, 0).is_err());
    }
}
