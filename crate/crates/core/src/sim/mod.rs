//! Particle engines and their replica runner.

pub mod control;
pub mod engine;
pub mod replicas;

pub use control::{entropy_exp, ControlSpec, CostLedger, DriftPolicy, ThresholdLaw};
pub use engine::{run_system, simulate_controlled, simulate_uncontrolled, ParticleSystem, RunOptions, RunOutput};
pub use replicas::{run_replicas, with_workers, ReplicaSet, ReplicaSpec};
