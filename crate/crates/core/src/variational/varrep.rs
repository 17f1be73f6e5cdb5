//! Single-particle check of
//! `−log E e^{−g(W_T, X)} = inf_Q { R(Q‖P) + E_Q g }` by tensor quadrature,
//! with `Q` ranging over constant drifts `u` and `Exp(λ)` thresholds:
//! `RHS(u, λ) = ln λ + 1/λ − 1 + ½u²T + E g(W_T + uT, X̄)`, `X̄ ~ Exp(λ)`.

use serde::{Deserialize, Serialize};

use crate::error::{config, KblError, Result};
use crate::quadrature::{gauss_laguerre, normal_rule, Rule};
use crate::rng::RngStream;
use crate::sim::control::entropy_exp;
use crate::variational::optimize::golden_min;

/// Integrands `g(w, x)` of the built-in family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Integrand {
    Constant { c: f64 },
    /// `α x` (unbounded, but with closed-form optimum `λ* = 1 + α`).
    Threshold { alpha: f64 },
    /// `a0 + a1 tanh(b1 w + c1) + a2 e^{−b2 x} + a3 sin(b3 w + c3 x)`, `b2 > 0`.
    Smooth { a0: f64, a1: f64, b1: f64, c1: f64, a2: f64, b2: f64, a3: f64, b3: f64, c3: f64 },
}

impl Integrand {
    pub fn eval(&self, w: f64, x: f64) -> f64 {
        match *self {
            Integrand::Constant { c } => c,
            Integrand::Threshold { alpha } => alpha * x,
            Integrand::Smooth { a0, a1, b1, c1, a2, b2, a3, b3, c3 } => {
                a0 + a1 * (b1 * w + c1).tanh() + a2 * (-b2 * x).exp() + a3 * (b3 * w + c3 * x).sin()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Integrand::Constant { c } => c.is_finite(),
            Integrand::Threshold { alpha } => alpha.is_finite() && alpha > -1.0,
            Integrand::Smooth { a0, a1, b1, c1, a2, b2, a3, b3, c3 } => {
                [a0, a1, b1, c1, a2, a3, b3, c3].iter().all(|v| v.is_finite()) && b2 > 0.0 && b2.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            config(format!("integrand {self:?} is outside the supported family"))
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Integrand::Constant { c } => format!("constant({c})"),
            Integrand::Threshold { alpha } => format!("threshold(alpha={alpha})"),
            Integrand::Smooth { .. } => "smooth".into(),
        }
    }
}

/// `count` smooth bounded integrands with coefficients drawn from `seed`.
pub fn random_integrands(count: usize, seed: u64) -> Vec<Integrand> {
    let mut rng = RngStream::new(seed, 0, u64::MAX - 3);
    let mut unif = |lo: f64, hi: f64| lo + (hi - lo) * rng.next_open01();
    (0..count)
        .map(|_| Integrand::Smooth {
            a0: unif(-1.0, 1.0),
            a1: unif(-1.0, 1.0),
            b1: unif(-2.0, 2.0),
            c1: unif(-1.0, 1.0),
            a2: unif(-1.0, 1.0),
            b2: unif(0.2, 2.0),
            a3: unif(-0.5, 0.5),
            b3: unif(-1.0, 1.0),
            c3: unif(-1.0, 1.0),
        })
        .collect()
}

/// The `(u, λ)` scan grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarRepFamily {
    pub drifts: Vec<f64>,
    pub rates: Vec<f64>,
}

impl Default for VarRepFamily {
    fn default() -> Self {
        Self {
            drifts: (-8..=8).map(|i| i as f64 * 0.25).collect(),
            rates: (1..=16).map(|i| i as f64 * 0.25).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarRepCase {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub u_star: f64,
    pub lambda_star: f64,
    /// Difference between the `nodes` and `2·nodes` rules.
    pub quadrature_error: f64,
}

struct Tensor {
    w: Rule,
    x: Rule,
}

impl Tensor {
    fn new(nodes: usize) -> Result<Self> {
        Ok(Self { w: normal_rule(nodes)?, x: gauss_laguerre(nodes, 0.0)? })
    }

    /// `E h(Z, E)` with `Z ~ N(0,1)`, `E ~ Exp(1)`.
    fn expect(&self, h: impl Fn(f64, f64) -> f64) -> f64 {
        let mut s = 0.0;
        for (z, wz) in self.w.nodes.iter().zip(&self.w.weights) {
            let mut inner = 0.0;
            for (e, we) in self.x.nodes.iter().zip(&self.x.weights) {
                inner += we * h(*z, *e);
            }
            s += wz * inner;
        }
        s
    }

    fn lhs(&self, g: &Integrand, horizon: f64) -> f64 {
        let st = horizon.sqrt();
        -self.expect(|z, e| (-g.eval(st * z, e)).exp()).ln()
    }

    fn rhs(&self, g: &Integrand, horizon: f64, u: f64, rate: f64) -> f64 {
        let st = horizon.sqrt();
        let entropy = entropy_exp(rate).unwrap_or(f64::INFINITY);
        entropy + 0.5 * u * u * horizon + self.expect(|z, e| g.eval(st * z + u * horizon, e / rate))
    }
}

/// Largest admissible disagreement between the two quadrature orders.
pub const QUADRATURE_TOLERANCE: f64 = 1e-7;

/// Computes both sides for `g` on horizon `T`; the minimization is a grid
/// scan over `family` followed by alternating golden-section refinements of
/// `u` and `λ` within one grid spacing of the best point.
pub fn varrep_check(g: &Integrand, horizon: f64, nodes: usize, family: &VarRepFamily) -> Result<VarRepCase> {
    g.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return config("horizon must be positive");
    }
    if nodes < 2 {
        return config("quadrature needs at least two nodes");
    }
    if family.drifts.is_empty() || family.rates.is_empty() || family.rates.iter().any(|&r| !(r > 0.0)) {
        return config("the (u, lambda) family needs drifts and positive rates");
    }
    let coarse = Tensor::new(nodes)?;
    let fine = Tensor::new(2 * nodes)?;
    let lhs = fine.lhs(g, horizon);
    let lhs_err = (lhs - coarse.lhs(g, horizon)).abs();

    let obj = |u: f64, l: f64| fine.rhs(g, horizon, u, l);
    let mut best = (family.drifts[0], family.rates[0], f64::INFINITY);
    for &u in &family.drifts {
        for &l in &family.rates {
            let v = obj(u, l);
            if v < best.2 {
                best = (u, l, v);
            }
        }
    }
    let spacing = |grid: &[f64], fallback: f64| {
        let mut s: Vec<f64> = grid.to_vec();
        s.sort_by(f64::total_cmp);
        s.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min).min(fallback)
    };
    let du = spacing(&family.drifts, 1.0);
    let dl = spacing(&family.rates, best.1 / 2.0);
    let (mut u, mut l) = (best.0, best.1);
    for _ in 0..4 {
        u = golden_min(|x| obj(x, l), u - du, u + du, 1e-11, 200).0;
        let lo = (l - dl).max(l / 4.0);
        l = golden_min(|x| obj(u, x), lo, l + dl, 1e-11, 200).0;
    }
    let mut rhs = obj(u, l);
    if best.2 < rhs {
        (u, l, rhs) = best;
    }
    let rhs_err = (rhs - coarse.rhs(g, horizon, u, l)).abs();
    let quadrature_error = lhs_err.max(rhs_err);
    if !(quadrature_error <= QUADRATURE_TOLERANCE) {
        return Err(KblError::Numeric(format!(
            "{}: quadrature orders {nodes} and {} disagree by {quadrature_error:e}",
            g.label(),
            2 * nodes
        )));
    }
    Ok(VarRepCase { label: g.label(), lhs, rhs, gap: rhs - lhs, u_star: u, lambda_star: l, quadrature_error })
}

/// Constant and threshold-linear integrands with known optima.
pub fn default_suite() -> Vec<Integrand> {
    vec![Integrand::Constant { c: 0.7 }, Integrand::Threshold { alpha: 1.0 }, Integrand::Threshold { alpha: 0.5 }]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrand() {
        let r = varrep_check(&Integrand::Constant { c: 0.7 }, 1.0, 64, &VarRepFamily::default()).unwrap();
        assert!((r.lhs - 0.7).abs() < 1e-12);
        assert!(r.gap.abs() < 1e-10);
        assert!(r.u_star.abs() < 1e-4 && (r.lambda_star - 1.0).abs() < 1e-4);
    }

    #[test]
    fn linear_threshold_integrands() {
        for alpha in [0.5, 1.0] {
            let r = varrep_check(&Integrand::Threshold { alpha }, 1.0, 64, &VarRepFamily::default()).unwrap();
            assert!((r.lhs - (1.0 + alpha).ln()).abs() < 1e-10, "{r:?}");
            assert!(r.gap.abs() < 1e-6, "{r:?}");
            assert!((r.lambda_star - (1.0 + alpha)).abs() < 1e-3);
            assert!(r.u_star.abs() < 1e-3);
        }
    }

    #[test]
    fn random_integrands_respect_the_bound() {
        for g in random_integrands(5, 3) {
            let r = varrep_check(&g, 1.0, 64, &VarRepFamily::default()).unwrap();
            assert!(r.gap >= -1e-9, "{r:?}");
        }
    }

    #[test]
    fn invalid_inputs() {
        let g = Integrand::Constant { c: 0.0 };
        assert!(varrep_check(&g, 0.0, 64, &VarRepFamily::default()).is_err());
        assert!(varrep_check(&g, 1.0, 1, &VarRepFamily::default()).is_err());
        let bad = VarRepFamily { drifts: vec![0.0], rates: vec![0.0] };
        assert!(varrep_check(&g, 1.0, 64, &bad).is_err());
        assert!(Integrand::Smooth { a0: 0.0, a1: 0.0, b1: 0.0, c1: 0.0, a2: 0.0, b2: 0.0, a3: 0.0, b3: 0.0, c3: 0.0 }
            .validate()
            .is_err());
    }
}
