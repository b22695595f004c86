//! Subcommand bodies. Each returns the exit status class on failure.

use crate::config::ExperimentConfig;
use fracdiff_core::diagnostics::{
    aleksandrov_check, benilan_crandall_defect, eps_monotonicity, l1_time_continuity, lower_bound_check,
    very_weak_residual, ReportBundle, TestFunction,
};
use fracdiff_core::evolve::{StepperConfig, Trajectory};
use fracdiff_core::experiments::BarenblattSetup;
use fracdiff_core::frlap::{log_constant, power_constant, vss_constant};
use fracdiff_core::grid::{total_mass, window_mass};
use fracdiff_core::io::{write_profile, write_series, write_trajectory, FitReport};
use fracdiff_core::limits::{build_ladder, extinction_verdict, extrapolate_limit, EpsLadder, LadderManifest, LadderSetup, Verdict};
use fracdiff_core::loghalf::{run_loghalf, LogHalfConfig};
use fracdiff_core::selfsim::{profile_equation_residual, ScalingExponents};
use fracdiff_core::{build_operator, Error, Field, FracOrder, Nonlinearity};
use serde_json::json;
use std::fmt;
use std::fs;
use std::path::Path;

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or configuration: 1.
    Parse(String),
    /// Solver or IO failure: 2.
    Solver(String),
    /// A hard check failed, or the parameters sit outside the existence range: 3.
    Check(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Parse(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Check(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Parse(m) => write!(f, "configuration error: {m}"),
            Failure::Solver(m) => write!(f, "solver error: {m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

/// Core errors that report a failed property rather than a broken run.
pub fn classify(e: Error) -> Failure {
    match e {
        Error::OrderViolation { .. } | Error::NotConverging => Failure::Check(e.to_string()),
        _ => Failure::Solver(e.to_string()),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Solver(format!("{}: {e}", path.display())))
}

fn io<T>(r: fracdiff_core::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Solver(e.to_string()))
}

fn exponents(s: f64, n: f64) -> Result<ScalingExponents, Failure> {
    let order = FracOrder::new(s).map_err(|e| Failure::Parse(e.to_string()))?;
    ScalingExponents::new(order, n).map_err(|e| Failure::Parse(e.to_string()))
}

fn outside_range(s: f64, n: f64) -> Failure {
    Failure::Check(format!("(s, n) = ({s}, {n}) is outside the existence range s > 1/2 and 0 <= n < 2s - 1"))
}

/// Table of exponents and constants; exit 3 outside the existence range.
pub fn constants(s: f64, n: f64) -> Result<String, Failure> {
    let e = exponents(s, n)?;
    let order = FracOrder::new(s).map_err(|e| Failure::Parse(e.to_string()))?;
    let a = 2.0 * s * n / (1.0 + n);
    let mut out = format!("s = {s}, n = {n}\n");
    let k = if a == 0.0 { 0.0 } else { power_constant(a, order).map_err(|e| Failure::Solver(e.to_string()))? };
    out += &format!("  k(alpha,s)  alpha = 2sn/(1+n) = {a:.6}: {k:.12e}\n");
    out += &format!("  c(s)        {:.12e}\n", log_constant(order));
    if !e.in_existence_range() {
        print!("{out}");
        return Err(outside_range(s, n));
    }
    let v = vss_constant(order, n).map_err(|e| Failure::Solver(e.to_string()))?;
    out += &format!("  K(s,n)      {:.12e}\n", v.k);
    out += &format!("  C(n,s)      {:.12e}\n", v.c);
    out += &format!("  alpha       {:.12}\n", e.alpha);
    out += &format!("  delta       {:.12}\n", e.delta);
    out += &format!("  gamma       {:.12}\n", e.gamma_tail);
    Ok(out)
}

/// What `evolve` leaves on disk and prints.
pub struct EvolveSummary {
    pub verdict: Verdict,
    pub bundle: ReportBundle,
}

/// The ε-ladder run: rungs, limit, manifest and `summary.json` under `out`.
pub fn evolve(cfg: &ExperimentConfig, base: &Path, out: &Path) -> Result<EvolveSummary, Failure> {
    let (s, n) = (cfg.s, cfg.n);
    let grid = cfg.grid.build().map_err(Failure::Parse)?;
    let data = cfg.data.as_ref().ok_or_else(|| Failure::Parse("evolve needs a [data] section".into()))?;
    let ladder_cfg = cfg.ladder.as_ref().ok_or_else(|| Failure::Parse("evolve needs a [ladder] section".into()))?;
    let order = FracOrder::new(s).map_err(|e| Failure::Parse(e.to_string()))?;
    let nl = Nonlinearity::new(n).map_err(|e| Failure::Parse(e.to_string()))?;
    let u0 = data.build(grid, s, n, base).map_err(|e| Failure::Parse(format!("initial data: {e}")))?;
    let stepper = cfg.stepper.apply(StepperConfig::for_grid(grid, s)).map_err(Failure::Parse)?;
    let op = build_operator(grid, order);
    let outputs = cfg.output_times();
    let ladder = build_ladder(&op, nl, &u0, &ladder_cfg.eps, ladder_cfg.t_end, &outputs, &LadderSetup::new(s, n, stepper))
        .map_err(classify)?;

    io(fs::create_dir_all(out).map_err(Error::from))?;
    let mut names = vec![];
    for (k, tr) in ladder.trajectories.iter().enumerate() {
        let name = format!("rung_{k}");
        io(write_trajectory(tr, s, n, &out.join(&name)))?;
        names.push(name);
    }
    let limit = limit_trajectory(&ladder);
    io(write_trajectory(&limit, s, n, &out.join("limit")))?;
    let threshold = cfg.checks.verdict_threshold;
    let verdicts: Vec<(f64, Verdict)> =
        (0..ladder.times().len()).map(|k| (ladder.times()[k], extinction_verdict(&ladder, k, threshold))).collect();
    let verdict = verdicts.last().map(|v| v.1).unwrap_or(Verdict::Inconclusive);
    let manifest = LadderManifest { s, n, eps_values: ladder.eps_values.clone(), verdicts, trajectories: names };
    write(&out.join("ladder.json"), &serde_json::to_string_pretty(&manifest).expect("serializable"))?;

    let masses: Vec<f64> = limit.states.iter().map(mass_of).collect();
    let sups: Vec<f64> = limit.states.iter().map(Field::max).collect();
    io(write_series(&out.join("series.csv"), &limit.times, &[("mass", &masses), ("sup", &sups)]))?;

    let mut bundle = ReportBundle::new("evolve");
    io(bundle.push("verdict", false, verdict != Verdict::Inconclusive, &json!({ "verdict": verdict, "threshold": threshold })))?;
    let ctx = CheckContext { cfg, ladder: &ladder, limit: &limit, nl, op: &op, verdict, masses: &masses };
    for name in &cfg.checks.names {
        run_check(name, &ctx, &mut bundle)?;
    }
    write(&out.join("summary.json"), &io(bundle.to_json())?)?;
    Ok(EvolveSummary { verdict, bundle })
}

fn mass_of(f: &Field) -> f64 {
    total_mass(f).unwrap_or_else(|_| window_mass(f))
}

/// Extrapolated limit at every recorded time; the smallest rung stands in
/// where the extrapolation is unavailable.
fn limit_trajectory(ladder: &EpsLadder) -> Trajectory {
    let smallest = ladder.trajectories.last().expect("nonempty ladder");
    let states = (0..smallest.len())
        .map(|k| extrapolate_limit(ladder, k).map(|e| e.field).unwrap_or_else(|_| smallest.states[k].clone()))
        .collect();
    Trajectory { times: smallest.times.clone(), states, eps: 0.0, frame: smallest.frame, records: vec![] }
}

struct CheckContext<'a> {
    cfg: &'a ExperimentConfig,
    ladder: &'a EpsLadder,
    limit: &'a Trajectory,
    nl: Nonlinearity,
    op: &'a fracdiff_core::FrLapOperator,
    verdict: Verdict,
    masses: &'a [f64],
}

fn run_check(name: &str, c: &CheckContext, bundle: &mut ReportBundle) -> Result<(), Failure> {
    let tol = c.cfg.checks.tol;
    let smallest = c.ladder.trajectories.last().expect("nonempty ladder");
    let exists = c.verdict == Verdict::Exists;
    let pushed = match name {
        "mass" => {
            // mass is only conserved by solutions that exist
            let m0 = c.masses[0];
            let drift = c.masses.iter().map(|m| (m - m0).abs() / m0).fold(0.0, f64::max);
            bundle.push("mass", exists, drift <= 0.02, &json!({ "max_drift": drift, "tol": 0.02 }))
        }
        "eps_monotone" => bundle.push_comparison("eps_monotone", &eps_monotonicity(c.ladder, tol)),
        "benilan_crandall" => match benilan_crandall_defect(smallest, c.nl, tol) {
            Ok(r) => bundle.push_comparison("benilan_crandall", &r),
            Err(e) => bundle.push("benilan_crandall", true, false, &e.to_string()),
        },
        "aleksandrov" => match c.cfg.data.as_ref().and_then(|d| d.support_edge()) {
            Some(edge) => match aleksandrov_check(smallest, edge + c.op.grid().spacing(), tol) {
                Ok(r) => bundle.push_comparison("aleksandrov", &r),
                Err(e) => bundle.push("aleksandrov", true, false, &e.to_string()),
            },
            None => bundle.push("aleksandrov", false, false, &"needs compactly supported data"),
        },
        "time_continuity" => {
            let tau = smallest.times.iter().copied().find(|t| *t > 0.0).unwrap_or(0.0);
            match l1_time_continuity(smallest, c.nl, tau, tol) {
                Ok(r) => bundle.push_comparison("time_continuity", &r),
                Err(e) => bundle.push("time_continuity", true, false, &e.to_string()),
            }
        }
        "very_weak" => {
            let t_end = *c.limit.times.last().expect("nonempty");
            let zeta = TestFunction {
                x_center: 0.0,
                x_radius: c.op.grid().half_width() / 4.0,
                t_center: 0.5 * t_end,
                t_radius: 0.4 * t_end,
            };
            match very_weak_residual(c.limit, c.nl, c.op, &zeta) {
                Ok(r) => bundle.push("very_weak", exists, r < 0.03, &json!({ "residual": r, "tol": 0.03, "test_function": zeta })),
                Err(e) => bundle.push("very_weak", exists, false, &e.to_string()),
            }
        }
        "lower_bound" => {
            let e = exponents(c.cfg.s, c.cfg.n)?;
            let edge = c.cfg.data.as_ref().and_then(|d| d.support_edge()).unwrap_or(c.op.grid().half_width() / 4.0);
            let t = *c.limit.times.last().expect("nonempty");
            match lower_bound_check(c.limit.final_state(), t, &e, edge.abs(), tol) {
                Ok(r) => bundle.push("lower_bound", false, r.holds, &r),
                Err(err) => bundle.push("lower_bound", false, false, &err.to_string()),
            }
        }
        other => return Err(Failure::Parse(format!("unknown check {other:?}"))),
    };
    io(pushed)
}

/// What `barenblatt` leaves on disk and prints.
pub struct BarenblattSummary {
    pub report: FitReport,
    pub l1_distances: Vec<f64>,
}

/// Long comoving run, profile extraction, residual and tail fit.
pub fn barenblatt(cfg: &ExperimentConfig, out: &Path) -> Result<BarenblattSummary, Failure> {
    let b = cfg.barenblatt.as_ref().ok_or_else(|| Failure::Parse("barenblatt needs a [barenblatt] section".into()))?;
    let e = exponents(cfg.s, cfg.n)?;
    if !e.in_existence_range() {
        return Err(outside_range(cfg.s, cfg.n));
    }
    let mut setup = BarenblattSetup::new(cfg.s, cfg.n, b.mass);
    setup.half_width = cfg.grid.half_width;
    setup.n_points = cfg.grid.n_points;
    setup.t_ref = b.t_ref.unwrap_or(setup.t_ref);
    setup.t_end = b.t_end.unwrap_or(setup.t_end);
    setup.n_outputs = b.n_outputs.unwrap_or(setup.n_outputs);
    setup.decades = b.decades.unwrap_or(setup.decades);
    setup.eps = b.eps.unwrap_or(setup.eps);
    setup.bump_cells = b.bump_cells.unwrap_or(setup.bump_cells);
    setup.center = b.center.unwrap_or(setup.center);
    let traj = setup.run().map_err(classify)?;
    let ex = setup.extract(&traj, b.xi_max, b.xi_points, b.count).map_err(classify)?;

    let order = FracOrder::new(cfg.s).map_err(|e| Failure::Parse(e.to_string()))?;
    let nl = Nonlinearity::new(cfg.n).map_err(|e| Failure::Parse(e.to_string()))?;
    let op = build_operator(ex.profile.field.grid, order);
    let residual = io(profile_equation_residual(&ex.profile, &op, nl, &e, 0.0))?;
    let c = io(e.vss())?.c;
    let report = FitReport::new(&ex.profile, e.alpha, e.gamma_tail, c, Some(residual));
    io(write_profile(&ex.profile, &report, out))?;
    let sups: Vec<f64> = (0..traj.len()).map(|k| traj.u(k).max() * traj.frame.scale(traj.times[k])).collect();
    io(write_series(&out.join("series.csv"), &traj.times, &[("sup", &sups)]))?;
    let extraction = json!({ "times": ex.times, "l1_distances": ex.l1_distances, "setup": setup });
    write(&out.join("extraction.json"), &serde_json::to_string_pretty(&extraction).expect("serializable"))?;
    Ok(BarenblattSummary { report, l1_distances: ex.l1_distances })
}

/// The `s = 1/2`, `n = 0` runs from the explicit solution; report only.
pub fn loghalf(cfg: &ExperimentConfig, out: &Path) -> Result<fracdiff_core::loghalf::LogHalfReport, Failure> {
    let h = cfg.loghalf.as_ref().ok_or_else(|| Failure::Parse("loghalf needs a [loghalf] section".into()))?;
    if cfg.s != 0.5 || cfg.n != 0.0 {
        return Err(Failure::Parse(format!("loghalf runs at s = 0.5, n = 0, not ({}, {})", cfg.s, cfg.n)));
    }
    let grid = cfg.grid.build().map_err(Failure::Parse)?;
    let mut run = LogHalfConfig::for_grid(grid);
    run.stepper = cfg.stepper.apply(run.stepper).map_err(Failure::Parse)?;
    if let Some(eps) = &h.eps {
        run.eps_values = eps.clone();
    }
    run.t_end_factor = h.t_end_factor.unwrap_or(run.t_end_factor);
    run.n_outputs = h.n_outputs.unwrap_or(run.n_outputs);
    run.threshold = h.threshold.unwrap_or(run.threshold);
    let (limit, report) = run_loghalf(h.lambda, h.t_ext, grid, &run).map_err(classify)?;
    io(write_trajectory(&limit, 0.5, 0.0, &out.join("limit")))?;
    io(write_series(&out.join("series.csv"), &report.times, &[("mass", &report.masses)]))?;
    write(&out.join("report.json"), &serde_json::to_string_pretty(&report).expect("serializable"))?;
    Ok(report)
}
