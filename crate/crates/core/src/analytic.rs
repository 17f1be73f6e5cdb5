//! Deterministic law-of-large-numbers limit.
//!
//! With `b(t) = E ζ(B_t)` the surviving mass solves `ȧ = −a² b`, `a(0) = 1`, so
//! `a(t) = 1 / (1 + ∫_0^t b)`, equivalently `a(t) = exp(−∫_0^t a b)`, and the limit
//! measure is `a(t) · Normal(0, t I_d)`.

use crate::error::{KblError, Result};
use crate::grid::TimeGrid;
use crate::killing::{KillingFunction, ZetaKind};
use crate::measure::{HazardPath, ScaledGaussian, SubMeasure, MC_FALLBACK_SAMPLES};
use crate::quadrature::GaussianRule;
use crate::rng::RngStream;

/// Nodes per axis for the polar Gaussian rule.
pub const DEFAULT_NODES: usize = 64;

/// A quadrature or Monte Carlo estimate; `std_error` is zero for quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub std_error: f64,
}

/// `E[f(Z)]`, `Z ~ Normal(0, t I_d)`: polar quadrature for `d ≤ 2`, otherwise a fixed
/// Monte Carlo sample (shared across `t`) with its standard error.
pub fn normal_expectation(d: usize, t: f64, f: &dyn Fn(&[f64]) -> f64) -> Result<Expectation> {
    if d == 0 {
        return Err(KblError::Config("dimension must be at least 1".into()));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(KblError::Domain(format!("time must be finite and >= 0, got {t}")));
    }
    let out = if t == 0.0 {
        Expectation { value: f(&vec![0.0; d]), std_error: 0.0 }
    } else if d <= 2 {
        let value = GaussianRule::cached(d, DEFAULT_NODES)?.expect(t, f);
        Expectation { value, std_error: 0.0 }
    } else {
        let count = MC_FALLBACK_SAMPLES;
        let s = t.sqrt();
        let mut x = vec![0.0; d];
        let mut rng = RngStream::new(0x5eed_0f_9a55, d as u64, u64::MAX - 2);
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..count {
            x.iter_mut().for_each(|v| *v = s * rng.next_gaussian());
            let y = f(&x);
            sum += y;
            sum2 += y * y;
        }
        let mean = sum / count as f64;
        let var = (sum2 / count as f64 - mean * mean).max(0.0) * count as f64 / (count - 1) as f64;
        Expectation { value: mean, std_error: (var / count as f64).sqrt() }
    };
    if !out.value.is_finite() {
        return Err(KblError::Numeric(format!("non-finite Gaussian expectation at t = {t}")));
    }
    Ok(out)
}

/// `b(t) = ⟨ζ, μ_{0,t}⟩`; `b(0) = ζ(0)`.
pub fn gaussian_expectation(zeta: &KillingFunction, t: f64, d: usize) -> Result<Expectation> {
    if let ZetaKind::Constant(c) = zeta.kind() {
        if !(t.is_finite() && t >= 0.0) {
            return Err(KblError::Domain(format!("time must be finite and >= 0, got {t}")));
        }
        return Ok(Expectation { value: *c, std_error: 0.0 });
    }
    normal_expectation(d, t, &|x| zeta.value(x))
}

#[derive(Debug, Clone)]
pub struct LimitProfile {
    pub grid: TimeGrid,
    pub d: usize,
    /// `b(t_k)`.
    pub b: Vec<f64>,
    /// `B(t_k) = ∫_0^{t_k} b` by the trapezoid rule.
    pub cumulative_b: Vec<f64>,
    /// `a(t_k) = 1 / (1 + B(t_k))`; also the total mass of the limit.
    pub a: Vec<f64>,
    /// Classical RK4 solution of `ȧ = −a² b`.
    pub a_ode: Vec<f64>,
    /// `exp(−∫_0^{t_k} a b)` by the trapezoid rule.
    pub a_exponential: Vec<f64>,
}

impl LimitProfile {
    pub fn mass(&self) -> &[f64] {
        &self.a
    }

    /// `sup_k |1/(1+B(t_k)) − exp(−∫ab)|`.
    pub fn dual_formula_gap(&self) -> f64 {
        self.a.iter().zip(&self.a_exponential).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    /// `sup_k |a_trap − a_ode| / a_trap`.
    pub fn ode_gap(&self) -> f64 {
        self.a.iter().zip(&self.a_ode).map(|(x, y)| ((x - y) / x).abs()).fold(0.0, f64::max)
    }

    /// The limiting hazard `∫_0^t a b`.
    pub fn hazard(&self) -> HazardPath {
        let ab: Vec<f64> = self.a.iter().zip(&self.b).map(|(a, b)| a * b).collect();
        HazardPath::new(self.grid, HazardPath::trapezoid(self.grid, &ab)).expect("a b >= 0")
    }

    /// `a(t_k) · Normal(0, t_k I_d)`.
    pub fn measure_at(&self, k: usize) -> Result<ScaledGaussian> {
        ScaledGaussian::new(self.d, self.a[k], self.grid.time(k), DEFAULT_NODES)
    }
}

/// Limit profile on `grid`; fails if the trapezoid and RK4 solutions disagree by
/// more than `10 (T/m)²` relative.
pub fn solve_limit(zeta: &KillingFunction, grid: TimeGrid, d: usize) -> Result<LimitProfile> {
    let dt = grid.dt();
    let b: Vec<f64> = grid
        .times()
        .map(|t| gaussian_expectation(zeta, t, d).map(|e| e.value))
        .collect::<Result<_>>()?;
    let cumulative_b = HazardPath::trapezoid(grid, &b);
    let a: Vec<f64> = cumulative_b.iter().map(|bb| 1.0 / (1.0 + bb)).collect();

    let mut a_ode = Vec::with_capacity(grid.len());
    let mut y = 1.0;
    a_ode.push(y);
    for k in 0..grid.steps() {
        let b_mid = gaussian_expectation(zeta, grid.time(k) + 0.5 * dt, d)?.value;
        let rhs = |a: f64, bb: f64| -a * a * bb;
        let k1 = rhs(y, b[k]);
        let k2 = rhs(y + 0.5 * dt * k1, b_mid);
        let k3 = rhs(y + 0.5 * dt * k2, b_mid);
        let k4 = rhs(y + dt * k3, b[k + 1]);
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        a_ode.push(y);
    }

    let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    let a_exponential = HazardPath::trapezoid(grid, &ab).iter().map(|c| (-c).exp()).collect();
    let profile = LimitProfile { grid, d, b, cumulative_b, a, a_ode, a_exponential };
    let gap = profile.ode_gap();
    if !(gap <= 10.0 * dt * dt) {
        return Err(KblError::Numeric(format!(
            "ODE and closed-form limit disagree by {gap:e} (allowed {:e})",
            10.0 * dt * dt
        )));
    }
    Ok(profile)
}

/// `⟨f, μ(t)⟩ = a(t) E[f(Z_t)]`; `t` must be a grid point.
pub fn limit_observable(profile: &LimitProfile, f: &dyn Fn(&[f64]) -> f64, t: f64) -> Result<f64> {
    let k = profile
        .grid
        .index_of(t)
        .ok_or_else(|| KblError::Domain(format!("t = {t} is not a grid point")))?;
    let m = profile.measure_at(k)?;
    let v = m.integrate(f);
    if !v.is_finite() {
        return Err(KblError::Numeric("non-finite limit observable".into()));
    }
    Ok(v)
}
