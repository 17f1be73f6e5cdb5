//! Finite dictionaries of test functions with `‖f‖_BL ≤ 1`, giving certified
//! lower bounds on the bounded-Lipschitz distance between sub-probability
//! measures. The value is reported as a "dictionary distance", never as the
//! distance itself.

use crate::error::{KblError, Result};
use crate::measure::SubMeasure;

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// The constant `c` with `|c| ≤ 1`.
    Constant(f64),
    /// `clamp(⟨v, x⟩ − offset, −1, 1)` with `‖v‖ ≤ 1`.
    ClippedAffine { direction: Vec<f64>, offset: f64 },
    /// `amplitude · exp(−‖x − center‖² / (2 width²))`; Lipschitz constant
    /// `amplitude / (width √e)`.
    Bump { center: Vec<f64>, width: f64, amplitude: f64 },
    /// `sin(⟨k, x⟩ + phase) / max(1, ‖k‖)`.
    Sinusoid { frequency: Vec<f64>, phase: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Constant(c) => *c,
            TestFunction::ClippedAffine { direction, offset } => {
                (dot(direction, x) - offset).clamp(-1.0, 1.0)
            }
            TestFunction::Bump { center, width, amplitude } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            TestFunction::Sinusoid { frequency, phase } => {
                (dot(frequency, x) + phase).sin() / norm(frequency).max(1.0)
            }
        }
    }

    /// Analytic `(sup |f|, Lipschitz constant)` bounds for the family.
    pub fn bl_bounds(&self) -> (f64, f64) {
        match self {
            TestFunction::Constant(c) => (c.abs(), 0.0),
            TestFunction::ClippedAffine { direction, .. } => (1.0, norm(direction)),
            TestFunction::Bump { width, amplitude, .. } => {
                (amplitude.abs(), amplitude.abs() / (width * std::f64::consts::E.sqrt()))
            }
            TestFunction::Sinusoid { frequency, .. } => {
                let k = norm(frequency);
                let s = k.max(1.0);
                (1.0 / s, k / s)
            }
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            TestFunction::Constant(_) => None,
            TestFunction::ClippedAffine { direction, .. } => Some(direction.len()),
            TestFunction::Bump { center, .. } => Some(center.len()),
            TestFunction::Sinusoid { frequency, .. } => Some(frequency.len()),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BLDictionary {
    d: usize,
    functions: Vec<TestFunction>,
}

/// Size of [`BLDictionary::standard`].
pub const STANDARD_SIZE: usize = 64;

impl BLDictionary {
    /// Validates `‖f‖_BL ≤ 1` for each member from its analytic bounds.
    pub fn new(d: usize, functions: Vec<TestFunction>) -> Result<Self> {
        for (j, f) in functions.iter().enumerate() {
            if let Some(fd) = f.dim() {
                if fd != d {
                    return Err(KblError::Config(format!(
                        "dictionary member {j} has dimension {fd}, expected {d}"
                    )));
                }
            }
            let (sup, lip) = f.bl_bounds();
            if sup > 1.0 + 1e-12 || lip > 1.0 + 1e-12 || !sup.is_finite() || !lip.is_finite() {
                return Err(KblError::Config(format!(
                    "dictionary member {j} has BL norm bounds ({sup}, {lip}) above 1"
                )));
            }
        }
        Ok(Self { d, functions })
    }

    /// Default 64-member dictionary on `R^d`: the unit constant, 15 clipped affine
    /// ramps, 24 Gaussian bumps and 24 normalized sinusoids along lattice directions.
    pub fn standard(d: usize) -> Self {
        assert!(d >= 1);
        let dirs = lattice_directions(d);
        let dir = |j: usize| &dirs[j % dirs.len()];
        let scaled = |v: &[f64], s: f64| v.iter().map(|x| x * s).collect::<Vec<f64>>();
        let mut fs = vec![TestFunction::Constant(1.0)];

        let offsets = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, -1.5, 1.5, -3.0, 3.0, -0.25, 0.25, -0.75, 0.75];
        for (j, &c) in offsets.iter().enumerate() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            fs.push(TestFunction::ClippedAffine { direction: scaled(dir(j / 2), sign), offset: c });
        }

        let centers = [0.0, -0.5, 0.5, -1.0, 1.0, -1.5, 1.5, -2.5, 2.5, -2.0, 2.0, 0.0];
        let widths = [1.0, 0.5];
        for (w_idx, &w) in widths.iter().enumerate() {
            for (j, &c) in centers.iter().enumerate() {
                let amplitude = (w * std::f64::consts::E.sqrt()).min(1.0);
                fs.push(TestFunction::Bump {
                    center: scaled(dir(j + w_idx), c),
                    width: if j == centers.len() - 1 { 2.0 * w } else { w },
                    amplitude,
                });
            }
        }

        let freqs = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 0.35, 1.25];
        for &phase in &[0.0, std::f64::consts::FRAC_PI_2] {
            for (j, &k) in freqs.iter().enumerate() {
                fs.push(TestFunction::Sinusoid { frequency: scaled(dir(j), k), phase });
            }
        }
        debug_assert_eq!(fs.len(), STANDARD_SIZE);
        Self::new(d, fs).expect("standard dictionary members have BL norm <= 1")
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }
}

/// Unit directions: coordinate axes first, then normalized `e_i ± e_j`.
fn lattice_directions(d: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..d {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        out.push(v);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in i + 1..d {
            for sign in [1.0, -1.0] {
                let mut v = vec![0.0; d];
                v[i] = s;
                v[j] = sign * s;
                out.push(v);
            }
        }
    }
    out
}

/// `max_j |⟨μ₁ − μ₂, f_j⟩|`: a lower bound on `d_BL(μ₁, μ₂)`.
pub fn bl_distance_lower(a: &dyn SubMeasure, b: &dyn SubMeasure, dict: &BLDictionary) -> Result<f64> {
    if dict.is_empty() {
        return Err(KblError::Config("dictionary distance needs a non-empty dictionary".into()));
    }
    if a.dim() != dict.dim() || b.dim() != dict.dim() {
        return Err(KblError::Config(format!(
            "dimension mismatch: measures {} and {}, dictionary {}",
            a.dim(),
            b.dim(),
            dict.dim()
        )));
    }
    let mut best = 0.0f64;
    for f in dict.functions() {
        let ev = |x: &[f64]| f.eval(x);
        let diff = (a.integrate(&ev) - b.integrate(&ev)).abs();
        if !diff.is_finite() {
            return Err(KblError::Numeric("non-finite dictionary integral".into()));
        }
        best = best.max(diff);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::WeightedSample;

    #[test]
    fn standard_dictionary_is_certified() {
        for d in 1..=3 {
            let dict = BLDictionary::standard(d);
            assert_eq!(dict.len(), STANDARD_SIZE);
            for f in dict.functions() {
                let (s, l) = f.bl_bounds();
                assert!(s <= 1.0 && l <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn lipschitz_bounds_hold_on_random_pairs() {
        let dict = BLDictionary::standard(2);
        let mut rng = crate::rng::RngStream::new(5, 0, 0);
        for _ in 0..2000 {
            let x = [3.0 * rng.next_gaussian(), 3.0 * rng.next_gaussian()];
            let y = [x[0] + 0.1 * rng.next_gaussian(), x[1] + 0.1 * rng.next_gaussian()];
            let dxy = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
            for f in dict.functions() {
                assert!(f.eval(&x).abs() <= 1.0);
                assert!((f.eval(&x) - f.eval(&y)).abs() <= dxy * (1.0 + 1e-9), "{f:?}");
            }
        }
    }

    #[test]
    fn rejects_uncertified_members() {
        let normalized = TestFunction::Sinusoid { frequency: vec![2.0], phase: 0.0 };
        assert!(BLDictionary::new(1, vec![normalized]).is_ok());
        let bad_bump = TestFunction::Bump { center: vec![0.0], width: 0.1, amplitude: 1.0 };
        assert!(BLDictionary::new(1, vec![bad_bump]).is_err());
        let wrong_dim = TestFunction::ClippedAffine { direction: vec![1.0, 0.0], offset: 0.0 };
        assert!(BLDictionary::new(1, vec![wrong_dim]).is_err());
    }

    #[test]
    fn reference_distances() {
        let dict = BLDictionary::standard(1);
        let full = WeightedSample::new(1, vec![0.0], 1.0).unwrap();
        let half = WeightedSample::new(1, vec![0.0], 0.5).unwrap();
        assert_eq!(bl_distance_lower(&full, &full, &dict).unwrap(), 0.0);
        assert!((bl_distance_lower(&full, &half, &dict).unwrap() - 0.5).abs() < 1e-15);
        let shifted = WeightedSample::new(1, vec![0.1], 1.0).unwrap();
        let v = bl_distance_lower(&full, &shifted, &dict).unwrap();
        assert!(v > 0.0 && v <= 0.1 + 1e-15);
        let empty = BLDictionary::new(1, vec![]).unwrap();
        assert!(matches!(bl_distance_lower(&full, &half, &empty), Err(KblError::Config(_))));
    }
}
