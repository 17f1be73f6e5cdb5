use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use kbl_core::analytic::solve_limit;
use kbl_core::dictionary::{bl_distance_lower, BLDictionary};
use kbl_core::fixedpoint::{j_cost, sample_theta, solve_fixed_point};
use kbl_core::io::{self, LlnRow};
use kbl_core::sim::{run_replicas, run_system, ControlSpec, ParticleSystem, ReplicaSpec, RunOptions};
use kbl_core::variational::{
    default_suite, frontier_envelope, laplace_variational_upper, random_integrands, rate_frontier, varrep_check,
    FrontierSetup, Integrand, LaplaceSetup,
};

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    LlnCheck,
    Simulate,
    FixedPoint,
    RateFrontier,
    LaplaceCompare,
    VarrepCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::LlnCheck => "lln-check",
            Command::Simulate => "simulate",
            Command::FixedPoint => "fixed-point",
            Command::RateFrontier => "rate-frontier",
            Command::LaplaceCompare => "laplace-compare",
            Command::VarrepCheck => "varrep-check",
        }
    }

    pub fn outputs(self, cfg: &ExperimentConfig) -> Vec<&'static str> {
        match self {
            Command::LlnCheck => vec!["lln_check.csv"],
            Command::Simulate if cfg.simulate.kill_times => vec!["measure_paths.csv", "kill_times.csv"],
            Command::Simulate => vec!["measure_paths.csv"],
            Command::FixedPoint => vec!["fixed_point.csv"],
            Command::RateFrontier => vec!["frontier.csv", "certificates.csv"],
            Command::LaplaceCompare => vec!["laplace.csv"],
            Command::VarrepCheck => vec!["varrep.csv"],
        }
    }

    /// Checks specific to this subcommand, run before any computation.
    pub fn validate(self, cfg: &ExperimentConfig) -> Result<(), CliError> {
        cfg.validate()?;
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        let (d, grid) = (cfg.model.d, cfg.model.grid()?);
        match self {
            Command::Simulate => cfg.simulate.control.validate(d, &grid)?,
            Command::FixedPoint => {
                cfg.fixed_point.control.validate(d, &grid)?;
                if cfg.fixed_point.samples == 0 {
                    return bad("fixed_point.samples must be at least 1");
                }
            }
            Command::RateFrontier => {
                if cfg.frontier.controls.is_empty() {
                    return bad("frontier.controls is empty");
                }
                for c in &cfg.frontier.controls {
                    c.validate(d, &grid)?;
                }
            }
            Command::LaplaceCompare => {
                cfg.laplace.functional.validate()?;
                if cfg.laplace.controls.is_empty() {
                    return bad("laplace.controls is empty");
                }
                if cfg.run.replicas < 2 {
                    return bad("laplace-compare needs run.replicas >= 2");
                }
                if cfg.laplace.sizes.contains(&0) {
                    return bad("laplace.sizes must be positive");
                }
                for c in &cfg.laplace.controls {
                    c.validate(d, &grid)?;
                }
            }
            Command::VarrepCheck => {
                if cfg.varrep.nodes < 2 {
                    return bad("varrep.nodes must be at least 2");
                }
                for g in &cfg.varrep.cases {
                    g.validate()?;
                }
            }
            Command::LlnCheck => {}
        }
        Ok(())
    }

    /// Runs the experiment, writes its CSV files into `out`, and reports
    /// whether its checks passed.
    pub fn run(self, cfg: &ExperimentConfig, out: &Path) -> Result<bool, CliError> {
        std::fs::create_dir_all(out)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
        match self {
            Command::LlnCheck => lln_check(cfg, out),
            Command::Simulate => simulate(cfg, out),
            Command::FixedPoint => fixed_point(cfg, out),
            Command::RateFrontier => frontier(cfg, out),
            Command::LaplaceCompare => laplace(cfg, out),
            Command::VarrepCheck => varrep(cfg, out),
        }
    }
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path: PathBuf = out.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

fn system(cfg: &ExperimentConfig, n: usize) -> Result<ParticleSystem, CliError> {
    Ok(ParticleSystem::new(n, cfg.model.d, cfg.model.grid()?, cfg.model.zeta.build()?)?)
}

fn lln_check(cfg: &ExperimentConfig, out: &Path) -> Result<bool, CliError> {
    let sys = system(cfg, cfg.run.n)?;
    let grid = sys.grid;
    let spec = ReplicaSpec { system: sys.clone(), control: ControlSpec::zero(), seed: cfg.run.seed, options: RunOptions::default() };
    let set = run_replicas(&spec, cfg.run.replicas, cfg.run.workers)?;
    let profile = solve_limit(&sys.zeta, grid, sys.d)?;

    // Replica 0 again, keeping positions where distances are wanted.
    let stride = cfg.lln.distance_stride;
    let snap = run_system(&sys, &ControlSpec::zero(), cfg.run.seed, 0, RunOptions { snapshot_stride: stride, ..Default::default() })?;
    let dict = BLDictionary::standard(sys.d);
    let mut rows = Vec::with_capacity(grid.len());
    let mut sup: f64 = 0.0;
    for k in 0..grid.len() {
        let want = k == grid.steps() || (stride > 0 && k % stride == 0);
        let distance = if want {
            Some(bl_distance_lower(&snap.ensemble.measure_at(k)?, &profile.measure_at(k)?, &dict)?)
        } else {
            None
        };
        let analytic = profile.a[k];
        sup = sup.max((set.mean_mass[k] - analytic).abs());
        rows.push(LlnRow { t: grid.time(k), mass: set.mean_mass[k], mass_se: set.se_mass[k], analytic_mass: analytic, distance });
    }
    io::write_lln(create(out, "lln_check.csv")?, &rows)?;
    let pass = sup <= cfg.lln.tolerance;
    println!(
        "lln-check: sup_k |mass - a(t_k)| = {sup:.6} (tolerance {}); mass(T) = {:.6} +- {:.6}, a(T) = {:.6}; {}",
        cfg.lln.tolerance,
        set.mean_mass[grid.steps()],
        set.se_mass[grid.steps()],
        profile.a[grid.steps()],
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(pass)
}

fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<bool, CliError> {
    let spec = ReplicaSpec {
        system: system(cfg, cfg.run.n)?,
        control: cfg.simulate.control.clone(),
        seed: cfg.run.seed,
        options: RunOptions::default(),
    };
    let set = run_replicas(&spec, cfg.run.replicas, cfg.run.workers)?;
    let paths: Vec<_> = set.runs.iter().enumerate().map(|(r, run)| (r as u64, &run.path)).collect();
    io::write_measure_paths(create(out, "measure_paths.csv")?, &paths)?;
    if cfg.simulate.kill_times {
        let ens: Vec<_> = set.runs.iter().enumerate().map(|(r, run)| (r as u64, &run.ensemble)).collect();
        io::write_kill_times(create(out, "kill_times.csv")?, &ens)?;
    }
    let last = set.mean_mass.len() - 1;
    let cost = set.runs[0].cost;
    println!(
        "simulate: {}; mass(T) = {:.6} +- {:.6}; cost = {:.6} (drift {:.6}, entropy {:.6})",
        spec.control, set.mean_mass[last], set.se_mass[last], cost.total, cost.drift_cost, cost.entropy_cost
    );
    Ok(true)
}

fn fixed_point(cfg: &ExperimentConfig, out: &Path) -> Result<bool, CliError> {
    let fp = &cfg.fixed_point;
    let theta = sample_theta(&fp.control, cfg.model.d, cfg.model.grid()?, fp.samples, cfg.run.seed, 0)?;
    let result = solve_fixed_point(&theta, &cfg.model.zeta.build()?, &fp.options())?;
    io::write_fixed_point(create(out, "fixed_point.csv")?, &result)?;
    println!(
        "fixed-point: {}; converged in {} iterations (residual {:.3e}); mass(T) = {:.6}; J = {:.6}",
        fp.control,
        result.iterations,
        result.residual,
        result.terminal_mass(),
        j_cost(&theta)?
    );
    Ok(true)
}

fn frontier(cfg: &ExperimentConfig, out: &Path) -> Result<bool, CliError> {
    let setup = FrontierSetup {
        zeta: cfg.model.zeta.build()?,
        grid: cfg.model.grid()?,
        d: cfg.model.d,
        samples: cfg.frontier.samples,
        seed: cfg.run.seed,
        fixed_point: cfg.fixed_point.options(),
    };
    let certs = rate_frontier(&cfg.frontier.controls, &setup)?;
    let bins = frontier_envelope(&certs, cfg.frontier.bins);
    io::write_frontier(create(out, "frontier.csv")?, &bins)?;
    io::write_certificates(create(out, "certificates.csv")?, &certs)?;
    for c in &certs {
        println!("rate-frontier: {} -> mass(T) = {:.6}, J = {:.6}", c.control, c.observable, c.j);
    }
    Ok(certs.iter().all(|c| c.j >= 0.0))
}

fn laplace(cfg: &ExperimentConfig, out: &Path) -> Result<bool, CliError> {
    let sizes = if cfg.laplace.sizes.is_empty() { vec![cfg.run.n] } else { cfg.laplace.sizes.clone() };
    let mut reports = Vec::with_capacity(sizes.len());
    for n in sizes {
        let setup = LaplaceSetup { system: system(cfg, n)?, replicas: cfg.run.replicas, seed: cfg.run.seed, workers: cfg.run.workers };
        let r = laplace_variational_upper(&cfg.laplace.functional, &cfg.laplace.controls, &setup, cfg.laplace.refine)?;
        println!(
            "laplace-compare: n = {n}: mc = {:.6} +- {:.6}, upper = {:.6} +- {:.6} at {}; gap = {:.6}; {}",
            r.mc.estimate,
            r.mc.se,
            r.upper,
            r.upper_se,
            r.best,
            r.gap,
            if r.consistent() { "consistent" } else { "VIOLATED" }
        );
        reports.push(r);
    }
    io::write_laplace(create(out, "laplace.csv")?, &reports)?;
    Ok(reports.iter().all(|r| r.consistent()))
}

fn varrep(cfg: &ExperimentConfig, out: &Path) -> Result<bool, CliError> {
    let v = &cfg.varrep;
    let mut cases: Vec<Integrand> = if v.cases.is_empty() { default_suite() } else { v.cases.clone() };
    cases.extend(random_integrands(v.random_cases, v.seed));
    let mut results = Vec::with_capacity(cases.len());
    let mut pass = true;
    for g in &cases {
        let r = varrep_check(g, v.horizon, v.nodes, &v.family)?;
        let exact = matches!(g, Integrand::Constant { .. } | Integrand::Threshold { .. });
        let ok = r.gap >= -v.bound_tolerance && (!exact || r.gap.abs() <= v.equality_tolerance);
        pass &= ok;
        println!(
            "varrep-check: {}: lhs = {:.9}, rhs = {:.9}, gap = {:.2e} at u = {:.6}, lambda = {:.6}; {}",
            r.label,
            r.lhs,
            r.rhs,
            r.gap,
            r.u_star,
            r.lambda_star,
            if ok { "ok" } else { "FAIL" }
        );
        results.push(r);
    }
    io::write_varrep(create(out, "varrep.csv")?, &results)?;
    Ok(pass)
}
