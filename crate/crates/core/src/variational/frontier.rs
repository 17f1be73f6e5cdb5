//! Certified upper bounds on the rate function: each control law `Θ` yields
//! `I(ϖ_Θ) ≤ J(Θ)`.

use crate::error::{config, KblError, Result};
use crate::fixedpoint::{j_cost, sample_theta, solve_fixed_point, FixedPointOptions, FixedPointResult};
use crate::grid::TimeGrid;
use crate::killing::KillingFunction;
use crate::sim::control::ControlSpec;

#[derive(Debug, Clone)]
pub struct RateCertificate {
    pub control: ControlSpec,
    pub j: f64,
    pub limit: FixedPointResult,
    /// Terminal mass of `ϖ_Θ`.
    pub observable: f64,
}

#[derive(Debug, Clone)]
pub struct FrontierSetup {
    pub zeta: KillingFunction,
    pub grid: TimeGrid,
    pub d: usize,
    pub samples: usize,
    pub seed: u64,
    pub fixed_point: FixedPointOptions,
}

/// One certificate per control whose fixed point converges, sorted by
/// observable. All controls share the same underlying draws.
pub fn rate_frontier(family: &[ControlSpec], setup: &FrontierSetup) -> Result<Vec<RateCertificate>> {
    if family.is_empty() {
        return config("control family is empty");
    }
    let mut certs = Vec::with_capacity(family.len());
    for control in family {
        let theta = sample_theta(control, setup.d, setup.grid, setup.samples, setup.seed, 0)?;
        let limit = match solve_fixed_point(&theta, &setup.zeta, &setup.fixed_point) {
            Ok(r) => r,
            Err(KblError::NonConvergence { iterations, residual }) => {
                log::warn!("{control}: fixed point not reached after {iterations} iterations (residual {residual:e}); excluded");
                continue;
            }
            Err(e) => return Err(e),
        };
        let j = j_cost(&theta)?;
        let observable = limit.terminal_mass();
        certs.push(RateCertificate { control: control.clone(), j, limit, observable });
    }
    certs.sort_by(|a, b| a.observable.total_cmp(&b.observable));
    Ok(certs)
}

/// Lower envelope of `J` over observable bins: `Î(c)` for `c` in each bin.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierBin {
    pub lo: f64,
    pub hi: f64,
    pub j_min: f64,
    pub control: ControlSpec,
}

/// Bins `[0, 1]` into `bins` equal cells; empty cells are omitted.
pub fn frontier_envelope(certs: &[RateCertificate], bins: usize) -> Vec<FrontierBin> {
    let bins = bins.max(1);
    let mut out: Vec<Option<FrontierBin>> = vec![None; bins];
    for c in certs {
        let b = ((c.observable * bins as f64).floor() as usize).min(bins - 1);
        let lo = b as f64 / bins as f64;
        let hi = (b + 1) as f64 / bins as f64;
        match &out[b] {
            Some(cur) if cur.j_min <= c.j => {}
            _ => out[b] = Some(FrontierBin { lo, hi, j_min: c.j, control: c.control.clone() }),
        }
    }
    out.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> FrontierSetup {
        FrontierSetup {
            zeta: KillingFunction::constant(1.0).unwrap(),
            grid: TimeGrid::new(1.0, 40).unwrap(),
            d: 1,
            samples: 20_000,
            seed: 2,
            fixed_point: FixedPointOptions::default(),
        }
    }

    #[test]
    fn exponential_tilts_order_the_terminal_mass() {
        let family: Vec<ControlSpec> =
            [4.0, 0.5, 1.0, 2.0].iter().map(|&r| ControlSpec::constant(vec![0.0], r)).collect();
        let certs = rate_frontier(&family, &setup()).unwrap();
        let rates: Vec<f64> = certs
            .iter()
            .map(|c| match c.control.threshold {
                crate::sim::control::ThresholdLaw::ExpRate { rate } => rate,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(rates, vec![4.0, 2.0, 1.0, 0.5]);
        let zero = certs.iter().find(|c| c.j == 0.0).unwrap();
        assert!((zero.observable - 0.5).abs() < 0.01);
        assert!(certs.iter().filter(|c| c.j == 0.0).count() == 1);
    }

    #[test]
    fn envelope_keeps_the_cheapest() {
        let certs = rate_frontier(
            &[ControlSpec::zero(), ControlSpec::constant(vec![0.5], 1.0), ControlSpec::constant(vec![0.0], 1.2)],
            &setup(),
        )
        .unwrap();
        let env = frontier_envelope(&certs, 10);
        let z = certs.iter().find(|c| c.j == 0.0).unwrap().observable;
        let bin = env.iter().find(|b| b.lo <= z && z < b.hi).unwrap();
        assert_eq!(bin.j_min, 0.0);
        assert!(rate_frontier(&[], &setup()).is_err());
    }
}
