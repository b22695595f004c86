//! The exceptional case `s = 1/2`, `n = 0`, where
//! `U(x,t) = 2λ(T − t)/(λ² + x²)` is an explicit solution that vanishes at
//! `t = T` and loses mass at the rate `2π`.
//!
//! The runs here are experiments: the measured extinction time and mass
//! slope are reported, never asserted.

use crate::error::{Error, Result};
use crate::evolve::{StepperConfig, TailPolicy, Trajectory};
use crate::frlap::{build_operator, FracOrder};
use crate::grid::{lp_distance, total_mass, window_mass, Field, Grid1D, TailModel};
use crate::limits::{build_ladder, extrapolate_limit, LadderSetup};
use crate::nonlin::Nonlinearity;
use crate::selfsim::explicit_log_half_solution;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHalfConfig {
    pub eps_values: Vec<f64>,
    pub stepper: StepperConfig,
    /// Run length in units of `T`.
    pub t_end_factor: f64,
    /// Recorded times, evenly spaced over the run.
    pub n_outputs: usize,
    /// Extinction threshold on `sup ū`.
    pub threshold: f64,
}

impl LogHalfConfig {
    pub fn for_grid(grid: Grid1D) -> Self {
        let mut stepper = StepperConfig::for_grid(grid, 0.5);
        stepper.dt_max = 1e-2;
        stepper.dt = stepper.dt.min(stepper.dt_max);
        LogHalfConfig {
            eps_values: vec![1e-2, 1e-3, 1e-4],
            stepper,
            t_end_factor: 1.25,
            n_outputs: 50,
            threshold: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHalfReport {
    pub lambda: f64,
    /// `‖U₀‖₁/2π`.
    pub t_exact: f64,
    /// First recorded time with `sup ū` below the threshold.
    pub t_observed: Option<f64>,
    /// Least-squares slope of `M(t)` over `[0.1T, 0.6T]`; the explicit solution has `−2π`.
    pub mass_decay_slope: f64,
    /// `‖ū − U‖₁/‖U‖₁` at the recorded time closest to `T/2`.
    pub l1_error_half: f64,
    pub times: Vec<f64>,
    pub masses: Vec<f64>,
}

/// Far field of the runs: the `|x|^{-2}` decay of the explicit solution,
/// matched to the boundary values. Mass that reaches the window edge is
/// dropped, which is how the limit loses mass.
pub fn loghalf_tail_policy() -> TailPolicy {
    TailPolicy::FixedDecayContinuity { gamma: 2.0 }
}

/// Evolves from `U(·,0)` along the ε-ladder and measures mass and extinction
/// of the limit. The returned trajectory holds the limit (ε = 0); with fewer
/// than three rungs the smallest rung stands in for it.
pub fn run_loghalf(lambda: f64, t_ext: f64, grid: Grid1D, cfg: &LogHalfConfig) -> Result<(Trajectory, LogHalfReport)> {
    if !(lambda > 0.0) || !(t_ext > 0.0) {
        return Err(Error::OutOfRange("lambda and T must be positive".into()));
    }
    if cfg.n_outputs < 2 || !(cfg.t_end_factor > 0.0) {
        return Err(Error::OutOfRange("need at least two outputs and a positive run length".into()));
    }
    let s = FracOrder::new(0.5)?;
    let op = build_operator(grid, s);
    let nl = Nonlinearity::new(0.0)?;
    let u0 = explicit_log_half_solution(lambda, t_ext, grid, 0.0)?;
    let t_end = cfg.t_end_factor * t_ext;
    let outputs: Vec<f64> = (1..=cfg.n_outputs).map(|k| t_end * k as f64 / cfg.n_outputs as f64).collect();
    let mut setup = LadderSetup::new(0.5, 0.0, cfg.stepper);
    setup.tail_policy = loghalf_tail_policy();
    let ladder = build_ladder(&op, nl, &u0, &cfg.eps_values, t_end, &outputs, &setup)?;

    let smallest = ladder.trajectories.last().expect("nonempty ladder");
    let states: Vec<Field> = (0..smallest.len())
        .map(|k| extrapolate_limit(&ladder, k).map(|e| e.field).unwrap_or_else(|_| smallest.states[k].clone()))
        .collect();
    let limit = Trajectory { times: smallest.times.clone(), states, eps: 0.0, frame: smallest.frame, records: vec![] };

    let masses: Vec<f64> = limit.states.iter().map(|f| total_mass(f).unwrap_or_else(|_| window_mass(f))).collect();
    let t_observed = limit.times.iter().zip(&limit.states).find(|(_, f)| f.max() < cfg.threshold).map(|(t, _)| *t);
    let mass_decay_slope = linear_slope(&limit.times, &masses, (0.1 * t_ext, 0.6 * t_ext))?;
    let half = (0..limit.len())
        .min_by(|a, b| (limit.times[*a] - 0.5 * t_ext).abs().partial_cmp(&(limit.times[*b] - 0.5 * t_ext).abs()).unwrap())
        .expect("nonempty");
    let exact = explicit_log_half_solution(lambda, t_ext, grid, limit.times[half])?;
    let l1_error_half = lp_distance(&limit.states[half], &exact, 1.0)? / window_mass(&exact);
    let report = LogHalfReport {
        lambda,
        t_exact: total_mass(&u0)? / (2.0 * PI),
        t_observed,
        mass_decay_slope,
        l1_error_half,
        times: limit.times.clone(),
        masses,
    };
    Ok((limit, report))
}

fn linear_slope(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(t, _)| **t >= window.0 && **t <= window.1).map(|(a, b)| (*a, *b)).collect();
    if pts.len() < 2 {
        return Err(Error::WindowTooShort(format!("{} points in {window:?}", pts.len())));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// `‖∂ₜU + (−Δ)^{1/2} log U‖_∞ / ‖∂ₜU‖_∞` for the explicit solution at time
/// `t < T`, with the logarithmic far field of `log U` passed to the operator.
pub fn explicit_identity_defect(lambda: f64, t_ext: f64, grid: Grid1D, t: f64) -> Result<f64> {
    if !(t < t_ext) {
        return Err(Error::OutOfRange(format!("t = {t} is not before T = {t_ext}")));
    }
    let op = build_operator(grid, FracOrder::new(0.5)?);
    let a = 2.0 * lambda * (t_ext - t);
    let log_u = Field::signed(
        grid,
        grid.nodes().iter().map(|x| (a / (lambda * lambda + x * x)).ln()).collect(),
        Some(TailModel::Log { left: a.ln(), right: a.ln(), slope: -2.0, radius: grid.half_width() }),
    )?;
    let lap = op.apply(&log_u)?;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (x, l) in grid.nodes().iter().zip(&lap.values) {
        let ut = -2.0 * lambda / (lambda * lambda + x * x);
        worst = worst.max((ut + l).abs());
        scale = scale.max(ut.abs());
    }
    Ok(worst / scale)
}
