//! CSV emission. Floats carry 17 significant digits so files can be diffed
//! bit-for-bit across runs.

use std::io::Write;

use crate::error::{KblError, Result};
use crate::fixedpoint::FixedPointResult;
use crate::measure::{EmpiricalMeasurePath, ParticleEnsemble};
use crate::variational::{FrontierBin, LaplaceReport, RateCertificate, VarRepCase};

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(e: impl std::fmt::Display) -> KblError {
    KblError::Config(format!("cannot write CSV: {e}"))
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(io_err)?;
    Ok(out)
}

fn finish<W: Write>(mut out: csv::Writer<W>) -> Result<()> {
    out.flush().map_err(io_err)
}

/// Columns `replica, t, mass, zeta_mean`.
pub fn write_measure_paths<W: Write>(w: W, paths: &[(u64, &EmpiricalMeasurePath)]) -> Result<()> {
    let mut out = writer(w, &["replica", "t", "mass", "zeta_mean"])?;
    for (replica, path) in paths {
        for k in 0..path.grid.len() {
            out.write_record([
                replica.to_string(),
                fmt_num(path.grid.time(k)),
                fmt_num(path.mass[k]),
                fmt_num(path.zeta_mean[k]),
            ])
            .map_err(io_err)?;
        }
    }
    finish(out)
}

/// Columns `replica, particle, threshold, kill_time` (`inf` for survivors).
pub fn write_kill_times<W: Write>(w: W, runs: &[(u64, &ParticleEnsemble)]) -> Result<()> {
    let mut out = writer(w, &["replica", "particle", "threshold", "kill_time"])?;
    for (replica, ens) in runs {
        for i in 0..ens.n {
            out.write_record([
                replica.to_string(),
                i.to_string(),
                fmt_num(ens.thresholds[i]),
                fmt_num(ens.kill_times[i]),
            ])
            .map_err(io_err)?;
        }
    }
    finish(out)
}

/// One row of an LLN comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct LlnRow {
    pub t: f64,
    pub mass: f64,
    pub mass_se: f64,
    pub analytic_mass: f64,
    /// Dictionary distance to the limit, where computed.
    pub distance: Option<f64>,
}

/// Columns `t, mass, mass_se, analytic_mass, distance` (empty distance where
/// not computed).
pub fn write_lln<W: Write>(w: W, rows: &[LlnRow]) -> Result<()> {
    let mut out = writer(w, &["t", "mass", "mass_se", "analytic_mass", "distance"])?;
    for r in rows {
        out.write_record([
            fmt_num(r.t),
            fmt_num(r.mass),
            fmt_num(r.mass_se),
            fmt_num(r.analytic_mass),
            r.distance.map(fmt_num).unwrap_or_default(),
        ])
        .map_err(io_err)?;
    }
    finish(out)
}

/// Columns `t, H, mass, zeta_mean, iterations, residual`.
pub fn write_fixed_point<W: Write>(w: W, r: &FixedPointResult) -> Result<()> {
    let mut out = writer(w, &["t", "H", "mass", "zeta_mean", "iterations", "residual"])?;
    let grid = r.hazard.grid;
    for k in 0..grid.len() {
        out.write_record([
            fmt_num(grid.time(k)),
            fmt_num(r.hazard.at(k)),
            fmt_num(r.mass[k]),
            fmt_num(r.zeta_mean[k]),
            r.iterations.to_string(),
            fmt_num(r.residual),
        ])
        .map_err(io_err)?;
    }
    finish(out)
}

/// Columns `observable_bin, J_min, control_params`; the bin is given by its
/// midpoint.
pub fn write_frontier<W: Write>(w: W, bins: &[FrontierBin]) -> Result<()> {
    let mut out = writer(w, &["observable_bin", "J_min", "control_params"])?;
    for b in bins {
        out.write_record([fmt_num(0.5 * (b.lo + b.hi)), fmt_num(b.j_min), b.control.to_string()])
            .map_err(io_err)?;
    }
    finish(out)
}

/// Columns `control_params, J, observable, iterations, residual`.
pub fn write_certificates<W: Write>(w: W, certs: &[RateCertificate]) -> Result<()> {
    let mut out = writer(w, &["control_params", "J", "observable", "iterations", "residual"])?;
    for c in certs {
        out.write_record([
            c.control.to_string(),
            fmt_num(c.j),
            fmt_num(c.observable),
            c.limit.iterations.to_string(),
            fmt_num(c.limit.residual),
        ])
        .map_err(io_err)?;
    }
    finish(out)
}

/// Columns `n, mc, se, upper, gap, upper_se, best_control`.
pub fn write_laplace<W: Write>(w: W, reports: &[LaplaceReport]) -> Result<()> {
    let mut out = writer(w, &["n", "mc", "se", "upper", "gap", "upper_se", "best_control"])?;
    for r in reports {
        out.write_record([
            r.n.to_string(),
            fmt_num(r.mc.estimate),
            fmt_num(r.mc.se),
            fmt_num(r.upper),
            fmt_num(r.gap),
            fmt_num(r.upper_se),
            r.best.to_string(),
        ])
        .map_err(io_err)?;
    }
    finish(out)
}

/// Columns `case, lhs, rhs, gap, u_star, lambda_star, quadrature_error`.
pub fn write_varrep<W: Write>(w: W, cases: &[VarRepCase]) -> Result<()> {
    let mut out = writer(w, &["case", "lhs", "rhs", "gap", "u_star", "lambda_star", "quadrature_error"])?;
    for c in cases {
        out.write_record([
            c.label.clone(),
            fmt_num(c.lhs),
            fmt_num(c.rhs),
            fmt_num(c.gap),
            fmt_num(c.u_star),
            fmt_num(c.lambda_star),
            fmt_num(c.quadrature_error),
        ])
        .map_err(io_err)?;
    }
    finish(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::killing::KillingFunction;
    use crate::sim::simulate_uncontrolled;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0] {
            let s = fmt_num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_num(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
    }

    #[test]
    fn measure_path_layout() {
        let z = KillingFunction::constant(1.0).unwrap();
        let (path, ens) = simulate_uncontrolled(10, 1, TimeGrid::new(1.0, 4).unwrap(), &z, 1, 0).unwrap();
        let mut buf = Vec::new();
        write_measure_paths(&mut buf, &[(0, &path), (1, &path)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "replica,t,mass,zeta_mean");
        assert_eq!(lines.len(), 1 + 2 * 5);
        assert!(lines[1].starts_with("0,0.0000000000000000e0,1.0000000000000000e0,"));
        let mut buf = Vec::new();
        write_kill_times(&mut buf, &[(3, &ens)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 11);
    }
}
