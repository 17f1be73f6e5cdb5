//! Numerical laboratory for Brownian particles with mean-field killing.
//!
//! `n` Brownian particles in `R^d` each carry an exponential threshold; a particle
//! dies once the cumulative hazard `∫_0^t ⟨ζ, μ^n(s)⟩ ds` of the empirical
//! sub-probability measure `μ^n` exceeds its threshold. The crate simulates the
//! system (also under drift and threshold-law controls), computes its deterministic
//! limit, solves the self-consistent survival equation for sampled control laws,
//! and evaluates variational upper bounds on rate functions and Laplace functionals.

pub mod analytic;
pub mod dictionary;
pub mod error;
pub mod fixedpoint;
pub mod grid;
pub mod io;
pub mod killing;
pub mod measure;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod variational;

pub use analytic::{gaussian_expectation, limit_observable, solve_limit, Expectation, LimitProfile};
pub use dictionary::{bl_distance_lower, BLDictionary, TestFunction};
pub use error::{KblError, Result};
pub use fixedpoint::{
    j_cost, sample_theta, self_consistency_check, solve_fixed_point, FixedPointOptions, FixedPointResult,
    SelfConsistencyReport, ThetaSample,
};
pub use grid::TimeGrid;
pub use killing::{eval_zeta, Growth, KillingFunction, ZetaKind};
pub use measure::{
    EmpiricalMeasurePath, HazardPath, ParticleEnsemble, ScaledGaussian, SubMeasure, WeightedSample,
};
pub use rng::{rng_stream, RngStream};
pub use sim::{
    entropy_exp, run_replicas, simulate_controlled, simulate_uncontrolled, ControlSpec, CostLedger,
    DriftPolicy, ParticleSystem, ReplicaSet, ReplicaSpec, RunOptions, ThresholdLaw,
};
pub use variational::{
    frontier_envelope, laplace_mc, laplace_variational_upper, rate_frontier, varrep_check, Integrand,
    LaplaceReport, LaplaceSetup, MassFunctional, RateCertificate, VarRepCase, VarRepFamily,
};
