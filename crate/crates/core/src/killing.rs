//! Killing rate functions `ζ: R^d → R_+` with a sub-quadratic growth certificate
//! `ζ(x) ≤ C (1 + ‖x‖^p)`, `p < 2`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, KblError, Result};
use crate::rng::RngStream;

/// Closure type backing a custom killing function.
pub type ZetaFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ZetaKind {
    Constant(f64),
    /// `‖x‖^p`.
    AbsPower(f64),
    Custom { name: String, f: ZetaFn },
}

/// Growth constants `(C_ζ, p)` of `ζ(x) ≤ C_ζ (1 + ‖x‖^p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub c: f64,
    pub p: f64,
}

#[derive(Clone)]
pub struct KillingFunction {
    kind: ZetaKind,
    growth: Growth,
}

impl fmt::Debug for KillingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ZetaKind::Constant(c) => write!(f, "constant({c})"),
            ZetaKind::AbsPower(p) => write!(f, "abs_power({p})"),
            ZetaKind::Custom { name, .. } => write!(f, "custom({name})"),
        }
    }
}

impl fmt::Display for KillingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

fn check_growth(g: Growth) -> Result<Growth> {
    if !(g.c.is_finite() && g.c > 0.0) {
        return config(format!("growth constant C must be positive, got {}", g.c));
    }
    if !(0.0..2.0).contains(&g.p) {
        return config(format!("growth exponent p must lie in [0, 2), got {}", g.p));
    }
    Ok(g)
}

impl KillingFunction {
    pub fn constant(c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return config(format!("constant killing rate must be finite and >= 0, got {c}"));
        }
        Ok(Self {
            kind: ZetaKind::Constant(c),
            growth: Growth { c: c.max(f64::MIN_POSITIVE), p: 0.0 },
        })
    }

    pub fn abs_power(p: f64) -> Result<Self> {
        if !(0.0..2.0).contains(&p) {
            return config(format!("abs_power exponent must lie in [0, 2), got {p}"));
        }
        Ok(Self { kind: ZetaKind::AbsPower(p), growth: Growth { c: 1.0, p } })
    }

    /// User-supplied `ζ`. The growth certificate is trusted, and only checked by
    /// [`KillingFunction::spot_check`].
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        growth: Growth,
    ) -> Result<Self> {
        Ok(Self {
            kind: ZetaKind::Custom { name: name.into(), f: Arc::new(f) },
            growth: check_growth(growth)?,
        })
    }

    pub fn kind(&self) -> &ZetaKind {
        &self.kind
    }

    pub fn growth(&self) -> Growth {
        self.growth
    }

    /// Upper bound of `ζ` when it is bounded.
    pub fn sup(&self) -> Option<f64> {
        match self.kind {
            ZetaKind::Constant(c) => Some(c),
            _ if self.growth.p == 0.0 => Some(2.0 * self.growth.c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ZetaKind::Constant(c) if c == 0.0)
    }

    /// Evaluation without input validation; used on simulator hot paths where
    /// positions are finite by construction.
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ZetaKind::Constant(c) => *c,
            ZetaKind::AbsPower(p) => {
                if x.len() == 1 {
                    x[0].abs().powf(*p)
                } else {
                    norm(x).powf(*p)
                }
            }
            ZetaKind::Custom { f, .. } => f(x),
        }
    }

    /// Growth envelope `C_ζ (1 + ‖x‖^p)`.
    pub fn envelope(&self, x: &[f64]) -> f64 {
        self.growth.c * (1.0 + norm(x).powf(self.growth.p))
    }

    /// Random spot check of `0 ≤ ζ(x) ≤ C_ζ(1+‖x‖^p)` on `count` Gaussian points of
    /// scale `scale`. Returns the first offending point.
    pub fn spot_check(&self, d: usize, count: usize, scale: f64, seed: u64) -> Result<()> {
        let mut rng = RngStream::new(seed, 0, u64::MAX);
        let mut x = vec![0.0; d];
        for _ in 0..count {
            x.iter_mut().for_each(|v| *v = scale * rng.next_gaussian());
            let z = self.value(&x);
            if !(z >= 0.0 && z <= self.envelope(&x) * (1.0 + 1e-12)) {
                return Err(KblError::Domain(format!(
                    "{self}: growth certificate violated at {x:?} (value {z})"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `ζ(x)` with input validation.
pub fn eval_zeta(zeta: &KillingFunction, x: &[f64]) -> Result<f64> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(KblError::Domain(format!("non-finite position {x:?}")));
    }
    let z = zeta.value(x);
    if !(z.is_finite() && z >= 0.0) {
        return Err(KblError::Domain(format!("{zeta} returned {z} at {x:?}")));
    }
    Ok(z)
}
