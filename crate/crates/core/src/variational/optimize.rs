//! Derivative-free minimization used by the control scans.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a minimum of `f` on `[a, b]`. Returns the best
/// point seen and its value after `iters` reductions or once the bracket is
/// shorter than `tol`.
pub fn golden_min(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, iters: usize) -> (f64, f64) {
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for _ in 0..iters {
        if b - a < tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let (x, fx) = golden_min(|x| (x - 0.3) * (x - 0.3) + 1.0, -2.0, 5.0, 1e-12, 200);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((fx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_plus_linear_penalty() {
        // ln λ + 1/λ − 1 + α/λ is minimized at λ = 1 + α with value ln(1 + α).
        let alpha = 0.5;
        let (x, fx) = golden_min(|l: f64| l.ln() + 1.0 / l - 1.0 + alpha / l, 0.5, 4.0, 1e-12, 200);
        assert!((x - 1.5).abs() < 1e-6);
        assert!((fx - 1.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn monotone_objective_hits_the_edge() {
        let (x, _) = golden_min(|x| x, 1.0, 2.0, 1e-9, 100);
        assert!(x - 1.0 < 1e-6);
    }
}
