//! Variational quantities: rate-function certificates, Laplace functionals
//! and the representation formula for a single particle.

pub mod frontier;
pub mod laplace;
pub mod optimize;
pub mod varrep;

pub use frontier::{frontier_envelope, rate_frontier, FrontierBin, FrontierSetup, RateCertificate};
pub use laplace::{
    evaluate_control, laplace_mc, laplace_variational_upper, log_mean_exp_estimate, ControlEvaluation,
    LaplaceEstimate, LaplaceReport, LaplaceSetup, MassFunctional,
};
pub use optimize::golden_min;
pub use varrep::{default_suite, random_integrands, varrep_check, Integrand, VarRepCase, VarRepFamily};
