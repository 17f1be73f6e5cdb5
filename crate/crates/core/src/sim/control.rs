//! Exchangeable controls: a drift policy shared by all particles and a
//! threshold law `ν` replacing `Exp(1)`, with exact costs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config, KblError, Result};
use crate::grid::TimeGrid;

/// Piecewise-constant (per grid step) drift `u(t_k, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftPolicy {
    Zero,
    /// One `d`-vector per step, or a single vector used on every step.
    TimeDependent { values: Vec<Vec<f64>> },
    /// `u(t_k, x) = A_k x + c_k`; `matrices` are row-major `d × d`. Either one
    /// entry per step or a single entry for all steps.
    AffineFeedback { matrices: Vec<Vec<f64>>, offsets: Vec<Vec<f64>> },
}

/// Law `ν` of the killing thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdLaw {
    ExpRate { rate: f64 },
    /// Hazard `rates[j]` on `[breakpoints[j], breakpoints[j+1])`, the last rate
    /// on the unbounded tail. `breakpoints[0] = 0`.
    PiecewiseHazard { breakpoints: Vec<f64>, rates: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub drift: DriftPolicy,
    pub threshold: ThresholdLaw,
}

/// Per-particle averaged control cost `(1/n) Σ_i [½∫‖ψ_i‖² + R(ν_i‖θ)]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostLedger {
    pub drift_cost: f64,
    pub entropy_cost: f64,
    pub total: f64,
}

impl CostLedger {
    pub fn new(drift_cost: f64, entropy_cost: f64) -> Self {
        Self { drift_cost, entropy_cost, total: drift_cost + entropy_cost }
    }
}

/// `R(Exp(λ) ‖ Exp(1)) = log λ + 1/λ − 1`.
pub fn entropy_exp(rate: f64) -> Result<f64> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(KblError::Domain(format!("exponential rate must be positive, got {rate}")));
    }
    Ok(rate.ln() + 1.0 / rate - 1.0)
}

fn schedule<T>(v: &[T], k: usize) -> &T {
    if v.len() == 1 {
        &v[0]
    } else {
        &v[k]
    }
}

impl DriftPolicy {
    pub fn constant(u: Vec<f64>) -> Self {
        DriftPolicy::TimeDependent { values: vec![u] }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DriftPolicy::Zero => true,
            DriftPolicy::TimeDependent { values } => values.iter().flatten().all(|&v| v == 0.0),
            DriftPolicy::AffineFeedback { matrices, offsets } => {
                matrices.iter().chain(offsets).flatten().all(|&v| v == 0.0)
            }
        }
    }

    pub fn is_feedback(&self) -> bool {
        matches!(self, DriftPolicy::AffineFeedback { .. })
    }

    pub fn validate(&self, d: usize, grid: &TimeGrid) -> Result<()> {
        let len_ok = |len: usize| len == 1 || len == grid.steps();
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            DriftPolicy::Zero => Ok(()),
            DriftPolicy::TimeDependent { values } => {
                if !len_ok(values.len()) {
                    return config(format!(
                        "drift schedule has {} entries; expected 1 or {}",
                        values.len(),
                        grid.steps()
                    ));
                }
                if values.iter().any(|u| u.len() != d || !finite(u)) {
                    return config(format!("drift values must be finite {d}-vectors"));
                }
                Ok(())
            }
            DriftPolicy::AffineFeedback { matrices, offsets } => {
                if !len_ok(matrices.len()) || !len_ok(offsets.len()) {
                    return config("affine feedback schedule length must be 1 or the step count");
                }
                if matrices.iter().any(|a| a.len() != d * d || !finite(a))
                    || offsets.iter().any(|c| c.len() != d || !finite(c))
                {
                    return config(format!("affine feedback needs finite {d}x{d} matrices and {d}-vectors"));
                }
                Ok(())
            }
        }
    }

    /// Writes `u(t_k, x)` into `out`.
    #[inline]
    pub fn drift_at(&self, k: usize, x: &[f64], out: &mut [f64]) {
        match self {
            DriftPolicy::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            DriftPolicy::TimeDependent { values } => out.copy_from_slice(schedule(values, k)),
            DriftPolicy::AffineFeedback { matrices, offsets } => {
                let a = schedule(matrices, k);
                let c = schedule(offsets, k);
                let d = x.len();
                for i in 0..d {
                    out[i] = c[i] + (0..d).map(|j| a[i * d + j] * x[j]).sum::<f64>();
                }
            }
        }
    }

    /// `½∫_0^T ‖u(t)‖² dt` for state-independent policies; `None` for feedback.
    pub fn deterministic_cost(&self, grid: &TimeGrid) -> Option<f64> {
        match self {
            DriftPolicy::Zero => Some(0.0),
            DriftPolicy::TimeDependent { values } if values.len() == 1 => {
                Some(0.5 * sq_norm(&values[0]) * grid.horizon())
            }
            DriftPolicy::TimeDependent { values } => {
                Some(values.iter().map(|u| 0.5 * sq_norm(u) * grid.dt()).sum())
            }
            DriftPolicy::AffineFeedback { .. } => None,
        }
    }
}

pub(crate) fn sq_norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum()
}

impl ThresholdLaw {
    pub fn standard() -> Self {
        ThresholdLaw::ExpRate { rate: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ThresholdLaw::ExpRate { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return config(format!("threshold rate must be positive, got {rate}"));
                }
            }
            ThresholdLaw::PiecewiseHazard { breakpoints, rates } => {
                if breakpoints.is_empty() || breakpoints.len() != rates.len() {
                    return config("piecewise hazard needs one rate per breakpoint");
                }
                if breakpoints[0] != 0.0 {
                    return config("piecewise hazard partition must start at 0");
                }
                if breakpoints.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                    return config("piecewise hazard breakpoints must be finite and increasing");
                }
                if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                    return config("piecewise hazard rates must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn is_standard(&self) -> bool {
        match self {
            ThresholdLaw::ExpRate { rate } => *rate == 1.0,
            ThresholdLaw::PiecewiseHazard { rates, .. } => rates.iter().all(|&r| r == 1.0),
        }
    }

    /// Inverse cumulative hazard applied to a standard exponential `e`.
    #[inline]
    pub fn sample_from_exp1(&self, e: f64) -> f64 {
        match self {
            ThresholdLaw::ExpRate { rate } => e / rate,
            ThresholdLaw::PiecewiseHazard { breakpoints, rates } => {
                let mut cum = 0.0;
                for j in 0..rates.len() {
                    if j + 1 < rates.len() {
                        let piece = rates[j] * (breakpoints[j + 1] - breakpoints[j]);
                        if e < cum + piece {
                            return breakpoints[j] + (e - cum) / rates[j];
                        }
                        cum += piece;
                    } else {
                        return breakpoints[j] + (e - cum) / rates[j];
                    }
                }
                unreachable!("validated piecewise hazard has a tail piece")
            }
        }
    }

    /// Cumulative hazard `Λ(x)`, so `P(S > x) = exp(−Λ(x))`.
    pub fn cumulative_hazard(&self, x: f64) -> f64 {
        match self {
            ThresholdLaw::ExpRate { rate } => rate * x.max(0.0),
            ThresholdLaw::PiecewiseHazard { breakpoints, rates } => {
                let mut cum = 0.0;
                for j in 0..rates.len() {
                    let end = breakpoints.get(j + 1).copied().unwrap_or(f64::INFINITY);
                    if x <= end {
                        return cum + rates[j] * (x - breakpoints[j]).max(0.0);
                    }
                    cum += rates[j] * (end - breakpoints[j]);
                }
                cum
            }
        }
    }

    pub fn hazard_rate(&self, x: f64) -> f64 {
        match self {
            ThresholdLaw::ExpRate { rate } => *rate,
            ThresholdLaw::PiecewiseHazard { breakpoints, rates } => {
                let j = breakpoints.partition_point(|&b| b <= x).saturating_sub(1);
                rates[j]
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.hazard_rate(x) * (-self.cumulative_hazard(x)).exp()
    }

    /// Closed-form `R(ν ‖ Exp(1))`.
    ///
    /// With survival `p_j` at the start of piece `j` and `q_j = p_j (1 − e^{−λ_j L_j})`
    /// the probability of landing in it, `R = Σ q_j log λ_j − 1 + Σ q_j / λ_j`
    /// (using `E Λ(S) = 1` and `E S = ∫ e^{−Λ}`).
    pub fn relative_entropy(&self) -> Result<f64> {
        self.validate()?;
        match self {
            ThresholdLaw::ExpRate { rate } => entropy_exp(*rate),
            ThresholdLaw::PiecewiseHazard { breakpoints, rates } => {
                let mut survival = 1.0;
                let mut log_term = 0.0;
                let mut mean = 0.0;
                for j in 0..rates.len() {
                    let q = match breakpoints.get(j + 1) {
                        Some(end) => survival * (1.0 - (-rates[j] * (end - breakpoints[j])).exp()),
                        None => survival,
                    };
                    log_term += q * rates[j].ln();
                    mean += q / rates[j];
                    if let Some(end) = breakpoints.get(j + 1) {
                        survival *= (-rates[j] * (end - breakpoints[j])).exp();
                    }
                }
                Ok((log_term - 1.0 + mean).max(0.0))
            }
        }
    }
}

impl ControlSpec {
    pub fn zero() -> Self {
        Self { drift: DriftPolicy::Zero, threshold: ThresholdLaw::standard() }
    }

    pub fn new(drift: DriftPolicy, threshold: ThresholdLaw) -> Self {
        Self { drift, threshold }
    }

    /// Constant drift `u` with `Exp(rate)` thresholds.
    pub fn constant(u: Vec<f64>, rate: f64) -> Self {
        let drift = if u.iter().all(|&v| v == 0.0) { DriftPolicy::Zero } else { DriftPolicy::constant(u) };
        Self { drift, threshold: ThresholdLaw::ExpRate { rate } }
    }

    pub fn validate(&self, d: usize, grid: &TimeGrid) -> Result<()> {
        self.drift.validate(d, grid)?;
        self.threshold.validate()
    }

    pub fn is_zero(&self) -> bool {
        self.drift.is_zero() && self.threshold.is_standard()
    }

    pub fn entropy_cost(&self) -> Result<f64> {
        self.threshold.relative_entropy()
    }
}

impl fmt::Display for ControlSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vec = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
        match &self.drift {
            DriftPolicy::Zero => write!(f, "drift=zero")?,
            DriftPolicy::TimeDependent { values } if values.len() == 1 => {
                write!(f, "drift=const({})", vec(&values[0]))?
            }
            DriftPolicy::TimeDependent { values } => write!(f, "drift=schedule({} steps)", values.len())?,
            DriftPolicy::AffineFeedback { matrices, offsets } if matrices.len() == 1 && offsets.len() == 1 => {
                write!(f, "drift=affine(A=[{}] c=[{}])", vec(&matrices[0]), vec(&offsets[0]))?
            }
            DriftPolicy::AffineFeedback { matrices, .. } => {
                write!(f, "drift=affine({} steps)", matrices.len())?
            }
        }
        match &self.threshold {
            ThresholdLaw::ExpRate { rate } => write!(f, ";nu=exp({rate})"),
            ThresholdLaw::PiecewiseHazard { breakpoints, rates } => {
                write!(f, ";nu=hazard(at=[{}] rates=[{}])", vec(breakpoints), vec(rates))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `∫ log(dν/dθ) dν` by Gauss–Legendre panels on `[0, 60]`, split at the
    /// breakpoints so the integrand is smooth on every panel.
    fn kl_by_quadrature(law: &ThresholdLaw) -> f64 {
        let g = |x: f64| {
            let p = law.density(x);
            if p == 0.0 {
                0.0
            } else {
                p * (p.ln() + x)
            }
        };
        let mut cuts: Vec<f64> = (0..=120).map(|i| i as f64 * 0.5).collect();
        if let ThresholdLaw::PiecewiseHazard { breakpoints, .. } = law {
            cuts.extend_from_slice(breakpoints);
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let rule = crate::quadrature::gauss_legendre(20).unwrap();
        cuts.windows(2)
            .map(|w| {
                let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
                half * rule.integrate(|x| g(mid + half * x))
            })
            .sum()
    }

    #[test]
    fn exponential_entropy_values() {
        assert_eq!(entropy_exp(1.0).unwrap(), 0.0);
        assert!((entropy_exp(2.0).unwrap() - 0.193_147).abs() < 1e-6);
        assert!((entropy_exp(0.5).unwrap() - 0.306_853).abs() < 1e-6);
        for rate in [0.5, 2.0, 3.0] {
            let law = ThresholdLaw::ExpRate { rate };
            assert!((kl_by_quadrature(&law) - entropy_exp(rate).unwrap()).abs() < 1e-7);
        }
        assert!(matches!(entropy_exp(0.0), Err(KblError::Domain(_))));
        assert!(matches!(entropy_exp(-2.0), Err(KblError::Domain(_))));
    }

    #[test]
    fn piecewise_entropy_matches_quadrature() {
        let law = ThresholdLaw::PiecewiseHazard { breakpoints: vec![0.0, 0.3, 1.0], rates: vec![2.5, 0.7, 1.3] };
        let closed = law.relative_entropy().unwrap();
        assert!((closed - kl_by_quadrature(&law)).abs() < 1e-6, "{closed}");
        let single = ThresholdLaw::PiecewiseHazard { breakpoints: vec![0.0], rates: vec![2.0] };
        assert!((single.relative_entropy().unwrap() - entropy_exp(2.0).unwrap()).abs() < 1e-15);
        let unit = ThresholdLaw::PiecewiseHazard { breakpoints: vec![0.0, 1.0], rates: vec![1.0, 1.0] };
        assert_eq!(unit.relative_entropy().unwrap(), 0.0);
    }

    #[test]
    fn inverse_hazard_sampling() {
        let law = ThresholdLaw::PiecewiseHazard { breakpoints: vec![0.0, 0.5, 2.0], rates: vec![3.0, 0.5, 1.0] };
        for e in [0.0, 0.1, 1.5, 1.7, 2.25, 2.3, 10.0] {
            let s = law.sample_from_exp1(e);
            assert!((law.cumulative_hazard(s) - e).abs() < 1e-12, "e={e}");
        }
        assert_eq!(ThresholdLaw::ExpRate { rate: 2.0 }.sample_from_exp1(1.0), 0.5);
    }

    #[test]
    fn invalid_controls() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert!(ControlSpec::constant(vec![0.0], 0.0).validate(1, &g).is_err());
        assert!(ControlSpec::constant(vec![0.0], -1.0).validate(1, &g).is_err());
        assert!(ControlSpec::constant(vec![1.0, 2.0], 1.0).validate(1, &g).is_err());
        let bad = ThresholdLaw::PiecewiseHazard { breakpoints: vec![0.5], rates: vec![1.0] };
        assert!(bad.validate().is_err());
        let sched = DriftPolicy::TimeDependent { values: vec![vec![1.0]; 3] };
        assert!(sched.validate(1, &g).is_err());
    }

    #[test]
    fn drift_costs() {
        let g = TimeGrid::new(1.0, 200).unwrap();
        assert_eq!(DriftPolicy::constant(vec![1.0]).deterministic_cost(&g), Some(0.5));
        assert_eq!(DriftPolicy::Zero.deterministic_cost(&g), Some(0.0));
        let sched = DriftPolicy::TimeDependent { values: (0..200).map(|k| vec![if k < 100 { 2.0 } else { 0.0 }]).collect() };
        assert!((sched.deterministic_cost(&g).unwrap() - 1.0).abs() < 1e-12);
        assert!(ControlSpec::zero().is_zero());
        assert!(ControlSpec::constant(vec![0.0, 0.0], 1.0).is_zero());
    }

    #[test]
    fn affine_drift() {
        let p = DriftPolicy::AffineFeedback { matrices: vec![vec![1.0, 2.0, 0.0, -1.0]], offsets: vec![vec![0.5, 0.0]] };
        let mut out = [0.0; 2];
        p.drift_at(3, &[1.0, 1.0], &mut out);
        assert_eq!(out, [3.5, -1.0]);
    }
}
