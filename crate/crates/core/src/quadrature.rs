//! Gauss quadrature rules from three-term recurrences (Golub–Welsch).
//!
//! Besides the classical Hermite and Laguerre rules this module builds a
//! radial rule for the `chi(d)` law, so Gaussian expectations of functions
//! with a kink at the origin (such as `‖x‖`) are integrated in polar form
//! instead of through a Cartesian tensor rule.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{KblError, Result};

/// Nodes and weights; weights sum to the total mass of the weight function.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Golub–Welsch: `diag` are the recurrence `a_k`, `offdiag` the square roots of `b_k`
/// (k = 1..n-1), `mu0` the total mass.
pub fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> Result<Rule> {
    let n = diag.len();
    if n == 0 || offdiag.len() + 1 != n {
        return Err(KblError::Config("Jacobi matrix dimensions mismatch".into()));
    }
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = diag[i];
        if i + 1 < n {
            j[(i, i + 1)] = offdiag[i];
            j[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    if pairs.iter().any(|(x, w)| !x.is_finite() || !w.is_finite()) {
        return Err(KblError::Numeric("non-finite quadrature node or weight".into()));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Gauss–Legendre on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    golub_welsch(&vec![0.0; n], &off, 2.0)
}

/// Gauss–Hermite for the weight `exp(-x²)` on the real line.
pub fn gauss_hermite(n: usize) -> Result<Rule> {
    let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    golub_welsch(&vec![0.0; n], &off, std::f64::consts::PI.sqrt())
}

/// Expectation rule for a standard normal variable.
pub fn normal_rule(n: usize) -> Result<Rule> {
    let gh = gauss_hermite(n)?;
    let s = std::f64::consts::PI.sqrt();
    Ok(Rule {
        nodes: gh.nodes.iter().map(|x| x * std::f64::consts::SQRT_2).collect(),
        weights: gh.weights.iter().map(|w| w / s).collect(),
    })
}

/// Generalized Gauss–Laguerre for `x^alpha exp(-x)` on `[0, ∞)`, normalized to a
/// probability rule (so `alpha = 0` is the expectation rule of `Exp(1)`).
pub fn gauss_laguerre(n: usize, alpha: f64) -> Result<Rule> {
    if alpha <= -1.0 {
        return Err(KblError::Domain(format!("Laguerre alpha must exceed -1, got {alpha}")));
    }
    let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + alpha + 1.0).collect();
    let off: Vec<f64> = (1..n).map(|k| (k as f64 * (k as f64 + alpha)).sqrt()).collect();
    golub_welsch(&diag, &off, 1.0)
}

/// Probability rule for the `chi(d)` law (the norm of a standard normal in `R^d`),
/// density ∝ `r^(d-1) exp(-r²/2)`.
///
/// Recurrence coefficients come from Lanczos with full reorthogonalization on a
/// fine composite Gauss–Legendre discretization of `[0, 14]`.
pub fn chi_rule(d: usize, n: usize) -> Result<Rule> {
    if d == 0 || n == 0 {
        return Err(KblError::Config("chi rule needs d >= 1 and n >= 1".into()));
    }
    const PANELS: usize = 280;
    const UPPER: f64 = 14.0;
    let leg = gauss_legendre(20)?;
    let h = UPPER / PANELS as f64;
    let mut xs = Vec::with_capacity(PANELS * leg.len());
    let mut ws = Vec::with_capacity(PANELS * leg.len());
    for p in 0..PANELS {
        let left = p as f64 * h;
        for (&u, &w) in leg.nodes.iter().zip(&leg.weights) {
            let r = left + 0.5 * h * (u + 1.0);
            xs.push(r);
            ws.push(0.5 * h * w * r.powi(d as i32 - 1) * (-0.5 * r * r).exp());
        }
    }
    let mu0: f64 = ws.iter().sum();
    let n = n.min(xs.len() / 4);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let q0: Vec<f64> = ws.iter().map(|w| (w / mu0).sqrt()).collect();
    basis.push(q0);
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n);
    for k in 0..n {
        let qk = &basis[k];
        let mut z: Vec<f64> = qk.iter().zip(&xs).map(|(q, x)| q * x).collect();
        let a = dot(&z, qk);
        diag.push(a);
        if k + 1 == n {
            break;
        }
        // Two passes of Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&z, q);
                z.iter_mut().zip(q).for_each(|(zi, qi)| *zi -= c * qi);
            }
        }
        let b = dot(&z, &z).sqrt();
        if !(b > 0.0) {
            return Err(KblError::Numeric("Lanczos breakdown while building chi rule".into()));
        }
        off.push(b);
        basis.push(z.into_iter().map(|v| v / b).collect());
    }
    golub_welsch(&diag, &off, 1.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Expectations under `Normal(0, t I_d)` for `d ∈ {1, 2}` in polar form:
/// radial `chi(d)` rule times a symmetric angular rule (`±1` for `d = 1`,
/// equispaced midpoints on the circle for `d = 2`).
#[derive(Debug, Clone)]
pub struct GaussianRule {
    d: usize,
    radial: Rule,
    directions: Vec<Vec<f64>>,
}

impl GaussianRule {
    pub fn new(d: usize, nodes: usize) -> Result<Self> {
        let directions = match d {
            1 => vec![vec![1.0], vec![-1.0]],
            2 => (0..nodes)
                .map(|j| {
                    let th = std::f64::consts::TAU * (j as f64 + 0.5) / nodes as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect(),
            _ => {
                return Err(KblError::Config(format!(
                    "polar Gaussian rule supports d <= 2, got d = {d}"
                )))
            }
        };
        Ok(Self { d, radial: chi_rule(d, nodes)?, directions })
    }

    /// Shared instance per `(d, nodes)`; building a rule costs a few milliseconds.
    pub fn cached(d: usize, nodes: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<GaussianRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&(d, nodes)) {
            return Ok(rule.clone());
        }
        let rule = Arc::new(Self::new(d, nodes)?);
        cache.lock().expect("rule cache poisoned").insert((d, nodes), rule.clone());
        Ok(rule)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `E[f(Z)]`, `Z ~ Normal(0, t I_d)`; `t = 0` evaluates `f(0)`.
    pub fn expect(&self, t: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut x = vec![0.0; self.d];
        if t == 0.0 {
            return f(&x);
        }
        let s = t.sqrt();
        let inv_dirs = 1.0 / self.directions.len() as f64;
        let mut total = 0.0;
        for (&r, &w) in self.radial.nodes.iter().zip(&self.radial.weights) {
            let mut inner = 0.0;
            for dir in &self.directions {
                x.iter_mut().zip(dir).for_each(|(xi, di)| *xi = s * r * di);
                inner += f(&x);
            }
            total += w * inner * inv_dirs;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma_half_integer_ratio(p: f64, d: usize) -> f64 {
        // E‖Z‖^p = 2^{p/2} Γ((d+p)/2) / Γ(d/2), evaluated by the Lanczos gamma approximation.
        2f64.powf(p / 2.0) * (ln_gamma((d as f64 + p) / 2.0) - ln_gamma(d as f64 / 2.0)).exp()
    }

    fn ln_gamma(x: f64) -> f64 {
        const G: [f64; 9] = [
            0.999_999_999_999_809_9,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_1,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        let x = x - 1.0;
        let mut a = G[0];
        let t = x + 7.5;
        for (i, g) in G.iter().enumerate().skip(1) {
            a += g / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }

    #[test]
    fn legendre_and_hermite_integrate_polynomials() {
        let gl = gauss_legendre(10).unwrap();
        assert!((gl.integrate(|x| x.powi(8)) - 2.0 / 9.0).abs() < 1e-14);
        let nr = normal_rule(64).unwrap();
        assert!((nr.integrate(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!((nr.integrate(|x| x * x) - 1.0).abs() < 1e-12);
        assert!((nr.integrate(|x| x.powi(4)) - 3.0).abs() < 1e-11);
        assert!((nr.integrate(|x| x.cos()) - (-0.5f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn laguerre_moments() {
        let r = gauss_laguerre(64, 0.0).unwrap();
        assert!((r.integrate(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!((r.integrate(|x| x) - 1.0).abs() < 1e-12);
        assert!((r.integrate(|x| x * x * x) - 6.0).abs() < 1e-10);
        assert!((r.integrate(|x| (-x).exp()) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn chi_rule_moments() {
        for d in [1usize, 2] {
            let r = chi_rule(d, 64).unwrap();
            assert!((r.integrate(|_| 1.0) - 1.0).abs() < 1e-12, "mass d={d}");
            for p in [1.0, 2.0, 3.0] {
                let exact = gamma_half_integer_ratio(p, d);
                let got = r.integrate(|x| x.powf(p));
                assert!((got - exact).abs() < 1e-11 * exact.max(1.0), "d={d} p={p}: {got} vs {exact}");
            }
            // Fractional power: only algebraic convergence, still far below MC noise.
            let exact = gamma_half_integer_ratio(1.5, d);
            assert!((r.integrate(|x| x.powf(1.5)) - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn gaussian_rule_abs_and_smooth() {
        let g1 = GaussianRule::new(1, 64).unwrap();
        let half_normal = (2.0 / std::f64::consts::PI).sqrt();
        assert!((g1.expect(1.0, |x| x[0].abs()) - half_normal).abs() < 1e-13);
        assert!((g1.expect(0.25, |x| x[0].abs()) - 0.5 * half_normal).abs() < 1e-13);
        assert!(g1.expect(2.0, |x| x[0]).abs() < 1e-15);
        assert!((g1.expect(2.0, |x| (x[0]).cos()) - (-1.0f64).exp()).abs() < 1e-12);
        let g2 = GaussianRule::new(2, 64).unwrap();
        assert!((g2.expect(1.0, |x| x[0] * x[0] + x[1] * x[1]) - 2.0).abs() < 1e-12);
        assert!((g2.expect(1.0, |x| (x[0] + 0.5 * x[1]).cos()) - (-0.625f64).exp()).abs() < 1e-12);
        assert_eq!(g2.expect(0.0, |x| 3.0 + x[0]), 3.0);
        assert!(GaussianRule::new(3, 16).is_err());
    }
}
