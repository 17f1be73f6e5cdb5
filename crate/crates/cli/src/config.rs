//! Experiment configuration (TOML). Every section has defaults; unknown keys
//! are rejected. Command-line flags override the file, and the worker count
//! additionally honours `KBL_WORKERS`.

use std::path::Path;

use kbl_core::fixedpoint::FixedPointOptions;
use kbl_core::sim::ControlSpec;
use kbl_core::variational::{Integrand, MassFunctional, VarRepFamily};
use kbl_core::{KillingFunction, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZetaConfig {
    Constant { c: f64 },
    AbsPower { p: f64 },
}

impl ZetaConfig {
    pub fn build(&self) -> Result<KillingFunction, CliError> {
        Ok(match *self {
            ZetaConfig::Constant { c } => KillingFunction::constant(c)?,
            ZetaConfig::AbsPower { p } => KillingFunction::abs_power(p)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub zeta: ZetaConfig,
    pub d: usize,
    pub horizon: f64,
    pub steps: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { zeta: ZetaConfig::Constant { c: 1.0 }, d: 1, horizon: 1.0, steps: 200 }
    }
}

impl ModelConfig {
    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        Ok(TimeGrid::new(self.horizon, self.steps)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { n: 10_000, replicas: 20, seed: 1, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlnConfig {
    /// Largest accepted `sup_k |mean mass − a(t_k)|`.
    pub tolerance: f64,
    /// Grid points between dictionary-distance evaluations (0: only at `T`).
    pub distance_stride: usize,
}

impl Default for LlnConfig {
    fn default() -> Self {
        Self { tolerance: 0.02, distance_stride: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub control: ControlSpec,
    pub kill_times: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { control: ControlSpec::zero(), kill_times: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointConfig {
    pub samples: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub control: ControlSpec,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        let o = FixedPointOptions::default();
        Self { samples: 100_000, tol: o.tol, max_iter: o.max_iter, damping: o.damping, control: ControlSpec::zero() }
    }
}

impl FixedPointConfig {
    pub fn options(&self) -> FixedPointOptions {
        FixedPointOptions { tol: self.tol, max_iter: self.max_iter, damping: self.damping, initial: None }
    }
}

fn exp_scan(rates: &[f64]) -> Vec<ControlSpec> {
    rates.iter().map(|&r| ControlSpec::constant(vec![0.0], r)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontierConfig {
    pub samples: usize,
    pub bins: usize,
    pub controls: Vec<ControlSpec>,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        let mut controls = exp_scan(&[0.25, 0.5, 1.0, 2.0, 4.0]);
        controls.extend([-1.0, -0.5, 0.5, 1.0].iter().map(|&u| ControlSpec::constant(vec![u], 1.0)));
        Self { samples: 20_000, bins: 20, controls }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaplaceConfig {
    pub functional: MassFunctional,
    /// Particle counts to compare; empty means `run.n` alone.
    pub sizes: Vec<usize>,
    pub controls: Vec<ControlSpec>,
    /// Golden-section refinement of the best exponential rate.
    pub refine: bool,
}

impl Default for LaplaceConfig {
    fn default() -> Self {
        Self {
            functional: MassFunctional::linear(1.0),
            sizes: Vec::new(),
            controls: exp_scan(&[1.0, 2.0, 3.0, 4.0]),
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarRepConfig {
    pub horizon: f64,
    pub nodes: usize,
    /// Extra random smooth integrands on top of the fixed suite.
    pub random_cases: usize,
    pub seed: u64,
    pub family: VarRepFamily,
    /// Accepted `|gap|` for cases with a closed-form optimum.
    pub equality_tolerance: f64,
    /// Accepted negative gap for all cases.
    pub bound_tolerance: f64,
    /// Cases to run instead of the built-in suite.
    pub cases: Vec<Integrand>,
}

impl Default for VarRepConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            nodes: 64,
            random_cases: 0,
            seed: 1,
            family: VarRepFamily::default(),
            equality_tolerance: 1e-5,
            bound_tolerance: 1e-6,
            cases: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub run: RunConfig,
    pub lln: LlnConfig,
    pub simulate: SimulateConfig,
    pub fixed_point: FixedPointConfig,
    pub frontier: FrontierConfig,
    pub laplace: LaplaceConfig,
    pub varrep: VarRepConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Range checks shared by every subcommand.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        self.model.grid()?;
        self.model.zeta.build()?;
        if self.model.d == 0 {
            return bad("model.d must be at least 1");
        }
        if self.run.n == 0 {
            return bad("run.n must be at least 1");
        }
        if self.run.replicas == 0 {
            return bad("run.replicas must be at least 1");
        }
        if self.run.workers == 0 {
            return bad("run.workers must be at least 1");
        }
        if !(self.lln.tolerance >= 0.0) {
            return bad("lln.tolerance must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
        assert_eq!(ExperimentConfig::parse("").unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::parse("[run]\nparticles = 3\n").is_err());
        assert!(ExperimentConfig::parse("[bogus]\n").is_err());
    }

    #[test]
    fn controls_parse() {
        let c = ExperimentConfig::parse(
            r#"
[model]
zeta = { kind = "abs_power", p = 1.5 }
[simulate]
control = { drift = { kind = "time_dependent", values = [[0.5]] }, threshold = { kind = "exp_rate", rate = 2.0 } }
"#,
        )
        .unwrap();
        assert_eq!(c.simulate.control, ControlSpec::constant(vec![0.5], 2.0));
        assert_eq!(c.model.zeta, ZetaConfig::AbsPower { p: 1.5 });
    }

    #[test]
    fn ranges_checked() {
        let mut c = ExperimentConfig::default();
        c.run.n = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.model.steps = 0;
        assert!(c.validate().is_err());
    }
}
