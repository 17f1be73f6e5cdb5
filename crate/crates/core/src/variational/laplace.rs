//! Laplace functionals `−(1/n) log E exp(−n F(μ^n))`: plain Monte Carlo against
//! upper bounds `E[cost + F(μ̃^n)]` from controlled systems.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::measure::EmpiricalMeasurePath;
use crate::sim::control::{ControlSpec, ThresholdLaw};
use crate::sim::engine::{ParticleSystem, RunOptions};
use crate::sim::replicas::{run_replicas, ReplicaSpec};
use crate::stats::mean_and_sd;
use crate::variational::optimize::golden_min;

/// `F(μ) = clamp(intercept + slope · mass(T), lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassFunctional {
    pub intercept: f64,
    pub slope: f64,
    pub lower: f64,
    pub upper: f64,
}

impl MassFunctional {
    pub fn constant(c: f64) -> Self {
        Self { intercept: c, slope: 0.0, lower: c, upper: c }
    }

    /// `α · mass(T)`, clipped to its natural range.
    pub fn linear(alpha: f64) -> Self {
        Self { intercept: 0.0, slope: alpha, lower: alpha.min(0.0), upper: alpha.max(0.0) }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.intercept, self.slope, self.lower, self.upper];
        if all.iter().any(|v| !v.is_finite()) || self.lower > self.upper {
            return config(format!("functional {self} is not a bounded clipped affine map"));
        }
        Ok(())
    }

    pub fn eval_mass(&self, mass: f64) -> f64 {
        (self.intercept + self.slope * mass).clamp(self.lower, self.upper)
    }

    pub fn eval(&self, path: &EmpiricalMeasurePath) -> f64 {
        self.eval_mass(path.terminal_mass())
    }

    /// `(min F, max F)` over terminal masses in `[0, 1]`.
    pub fn range(&self) -> (f64, f64) {
        let (a, b) = (self.eval_mass(0.0), self.eval_mass(1.0));
        (a.min(b), a.max(b))
    }
}

impl std::fmt::Display for MassFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "clamp({} + {}*mass(T), {}, {})", self.intercept, self.slope, self.lower, self.upper)
    }
}

/// Shared settings of a Laplace experiment.
#[derive(Debug, Clone)]
pub struct LaplaceSetup {
    pub system: ParticleSystem,
    pub replicas: usize,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceEstimate {
    pub estimate: f64,
    pub se: f64,
}

/// Log-mean-exp estimate over replicas, shifted by the smallest `F` for
/// stability, with delta-method standard error `sd(w) / (n w̄ √R)`.
pub fn log_mean_exp_estimate(values: &[f64], n: usize) -> LaplaceEstimate {
    let nf = n as f64;
    let shift = values.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = values.iter().map(|v| (-nf * (v - shift)).exp()).collect();
    let (wbar, sd) = mean_and_sd(&w);
    LaplaceEstimate { estimate: shift - wbar.ln() / nf, se: sd / (nf * wbar * (w.len() as f64).sqrt()) }
}

/// Plain Monte Carlo over `R` uncontrolled replicas.
pub fn laplace_mc(f: &MassFunctional, setup: &LaplaceSetup) -> Result<LaplaceEstimate> {
    f.validate()?;
    if setup.replicas < 2 {
        return config("the Laplace estimate needs at least two replicas");
    }
    let values = functional_values(f, setup, &ControlSpec::zero())?.1;
    Ok(log_mean_exp_estimate(&values, setup.system.n))
}

fn functional_values(f: &MassFunctional, setup: &LaplaceSetup, control: &ControlSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let spec = ReplicaSpec {
        system: setup.system.clone(),
        control: control.clone(),
        seed: setup.seed,
        options: RunOptions::default(),
    };
    let set = run_replicas(&spec, setup.replicas, setup.workers)?;
    let costs = set.runs.iter().map(|r| r.cost.total).collect();
    let values = set.runs.iter().map(|r| f.eval(&r.path)).collect();
    Ok((costs, values))
}

/// `E[cost + F(μ̃^n)]` under one control, estimated over the replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlEvaluation {
    pub control: ControlSpec,
    pub value: f64,
    pub se: f64,
    pub mean_cost: f64,
    pub mean_f: f64,
}

/// Replicas share seeds across controls (common random numbers), so the
/// objective is a smooth function of the threshold rate.
pub fn evaluate_control(f: &MassFunctional, setup: &LaplaceSetup, control: &ControlSpec) -> Result<ControlEvaluation> {
    let (costs, values) = functional_values(f, setup, control)?;
    let totals: Vec<f64> = costs.iter().zip(&values).map(|(c, v)| c + v).collect();
    let (value, sd) = mean_and_sd(&totals);
    Ok(ControlEvaluation {
        control: control.clone(),
        value,
        se: sd / (totals.len() as f64).sqrt(),
        mean_cost: mean_and_sd(&costs).0,
        mean_f: mean_and_sd(&values).0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceReport {
    pub functional: MassFunctional,
    pub n: usize,
    pub mc: LaplaceEstimate,
    pub upper: f64,
    pub upper_se: f64,
    pub best: ControlSpec,
    /// `upper − mc`.
    pub gap: f64,
    /// `√(se_mc² + se_upper²)`.
    pub gap_se: f64,
    pub evaluations: Vec<ControlEvaluation>,
}

impl LaplaceReport {
    /// Upper bound not below the Monte Carlo value beyond three combined
    /// standard errors.
    pub fn consistent(&self) -> bool {
        self.upper >= self.mc.estimate - 3.0 * self.gap_se
    }
}

/// Scans `family`, then (when `refine` is set and the best control has an
/// exponential threshold law) golden-section refines its rate between the
/// neighbouring rates of the scan that share its drift.
pub fn laplace_variational_upper(
    f: &MassFunctional,
    family: &[ControlSpec],
    setup: &LaplaceSetup,
    refine: bool,
) -> Result<LaplaceReport> {
    if family.is_empty() {
        return config("control family is empty");
    }
    let mc = laplace_mc(f, setup)?;
    let mut evaluations = Vec::with_capacity(family.len());
    for control in family {
        evaluations.push(evaluate_control(f, setup, control)?);
    }
    if refine {
        let best = best_of(&evaluations).control.clone();
        if let ThresholdLaw::ExpRate { rate } = best.threshold {
            let rates: Vec<f64> = family
                .iter()
                .filter(|c| c.drift == best.drift)
                .filter_map(|c| match c.threshold {
                    ThresholdLaw::ExpRate { rate } => Some(rate),
                    _ => None,
                })
                .collect();
            let lo = rates.iter().copied().filter(|&r| r < rate).fold(rate / 2.0, f64::max);
            let hi = rates.iter().copied().filter(|&r| r > rate).fold(rate * 2.0, f64::min);
            let mut failure = None;
            golden_min(
                |log_rate| {
                    let control = ControlSpec::new(best.drift.clone(), ThresholdLaw::ExpRate { rate: log_rate.exp() });
                    match evaluate_control(f, setup, &control) {
                        Ok(e) => {
                            let v = e.value;
                            evaluations.push(e);
                            v
                        }
                        Err(e) => {
                            failure.get_or_insert(e);
                            f64::INFINITY
                        }
                    }
                },
                lo.ln(),
                hi.ln(),
                1e-3,
                12,
            );
            if let Some(e) = failure {
                return Err(e);
            }
        }
    }
    let best = best_of(&evaluations).clone();
    Ok(LaplaceReport {
        functional: *f,
        n: setup.system.n,
        mc,
        upper: best.value,
        upper_se: best.se,
        best: best.control,
        gap: best.value - mc.estimate,
        gap_se: mc.se.hypot(best.se),
        evaluations,
    })
}

fn best_of(evals: &[ControlEvaluation]) -> &ControlEvaluation {
    evals.iter().fold(&evals[0], |b, e| if e.value < b.value { e } else { b })
}
