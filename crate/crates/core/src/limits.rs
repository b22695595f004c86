//! ε-continuation toward the upper limit solution `ū = lim_{ε→0} u_ε`.

use crate::error::{Error, Result};
use crate::evolve::{Evolution, Frame, StepperConfig, TailPolicy, Trajectory};
use crate::frlap::FrLapOperator;
use crate::grid::{total_mass, window_mass, Field};
use crate::nonlin::Nonlinearity;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Five rungs, `1e-1` down to `1e-5`.
pub fn default_eps_values() -> Vec<f64> {
    (0..5).map(|k| 10f64.powi(-1 - k)).collect()
}

/// How each rung is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderSetup {
    pub frame: Frame,
    pub tail_policy: TailPolicy,
    pub stepper: StepperConfig,
    /// Allowed `u_{ε'} − u_ε` for `ε' < ε`, relative to `max(sup u₀, ε₀)`.
    pub order_tol: f64,
}

impl LadderSetup {
    /// Fixed frame, universal tail, ordering tolerance `1e-4`.
    pub fn new(s: f64, n: f64, stepper: StepperConfig) -> Self {
        LadderSetup { frame: Frame::Fixed, tail_policy: TailPolicy::universal(s, n), stepper, order_tol: 1e-4 }
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }
}

#[derive(Clone, Debug)]
pub struct EpsLadder {
    pub eps_values: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    /// Largest `u_{ε_{k+1}} − u_{ε_k}` over nodes, times and rungs.
    pub max_order_violation: f64,
}

impl EpsLadder {
    pub fn times(&self) -> &[f64] {
        &self.trajectories[0].times
    }

    /// Index of the recorded time closest to `t`.
    pub fn time_index(&self, t: f64) -> usize {
        let times = self.times();
        (0..times.len())
            .min_by(|a, b| (times[*a] - t).abs().partial_cmp(&(times[*b] - t).abs()).unwrap())
            .unwrap_or(0)
    }

    /// Values `u_ε(x_i, t_k)` for every rung.
    pub fn rung_values(&self, k: usize, i: usize) -> Vec<f64> {
        self.trajectories.iter().map(|tr| tr.states[k].values[i] + tr.eps_at(k)).collect()
    }
}

/// Runs one trajectory per `ε` (in parallel) from `v₀ = u₀` and checks the
/// ordering `u_{ε'} ≤ u_ε` for `ε' < ε` at every recorded time.
pub fn build_ladder(
    op: &FrLapOperator,
    nl: Nonlinearity,
    u0: &Field,
    eps_values: &[f64],
    t_end: f64,
    output_times: &[f64],
    setup: &LadderSetup,
) -> Result<EpsLadder> {
    if eps_values.is_empty() || eps_values.windows(2).any(|w| !(w[1] < w[0])) || eps_values[0] <= 0.0 {
        return Err(Error::OutOfRange("eps values must be positive and strictly decreasing".into()));
    }
    let trajectories = eps_values
        .par_iter()
        .map(|&eps| {
            let rnl = nl.regularized(eps)?;
            Evolution::new(op, rnl)
                .with_frame(setup.frame)
                .with_tail_policy(setup.tail_policy)
                .run(u0, t_end, output_times, &setup.stepper)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ladder = EpsLadder { eps_values: eps_values.to_vec(), trajectories, max_order_violation: 0.0 };
    ladder.max_order_violation = order_violation(&ladder);
    let tol = setup.order_tol * u0.max().max(eps_values[0]);
    if ladder.max_order_violation > tol {
        let (time, _) = worst_order(&ladder);
        return Err(Error::OrderViolation { time, violation: ladder.max_order_violation });
    }
    Ok(ladder)
}

fn order_violation(ladder: &EpsLadder) -> f64 {
    worst_order(ladder).1
}

fn worst_order(ladder: &EpsLadder) -> (f64, f64) {
    let mut worst = (0.0, 0.0);
    for pair in ladder.trajectories.windows(2) {
        let (big, small) = (&pair[0], &pair[1]);
        for k in 0..big.len().min(small.len()) {
            let (ub, us) = (big.eps_at(k), small.eps_at(k));
            for (a, b) in big.states[k].values.iter().zip(&small.states[k].values) {
                let d = (b + us) - (a + ub);
                if d > worst.1 {
                    worst = (big.times[k], d);
                }
            }
        }
    }
    worst
}

/// Pointwise extrapolation over the last three rungs.
#[derive(Clone, Debug)]
pub struct LimitEstimate {
    pub field: Field,
    /// Fitted exponent in `u_ε = ū + a ε^p`, clamped to `[0.5, 2]`.
    pub p: f64,
}

/// Fits `u_ε(x) = ū(x) + ε + a(x) ε^p` on the last three rungs at recorded
/// index `k`, with one exponent `p` per call. The shift `ε` is known exactly,
/// so the fit runs on `v_ε = u_ε − ε`. Negative estimates are cut to zero.
pub fn extrapolate_limit(ladder: &EpsLadder, k: usize) -> Result<LimitEstimate> {
    let m = ladder.trajectories.len();
    if m < 3 {
        return Err(Error::OutOfRange("extrapolation needs at least three rungs".into()));
    }
    let tr = &ladder.trajectories[m - 3..];
    let e = &ladder.eps_values[m - 3..];
    let v: Vec<&[f64]> = tr.iter().map(|t| t.states[k].values.as_slice()).collect();
    let last = &tr[2].states[k];

    let d1: Vec<f64> = v[0].iter().zip(v[1]).map(|(a, b)| a - b).collect();
    let d2: Vec<f64> = v[1].iter().zip(v[2]).map(|(a, b)| a - b).collect();
    let n1 = d1.iter().map(|x| x.abs()).sum::<f64>();
    let n2 = d2.iter().map(|x| x.abs()).sum::<f64>();
    if n2 == 0.0 {
        return Ok(LimitEstimate { field: last.clone(), p: 1.0 });
    }
    if !(n2 < n1) {
        return Err(Error::NonConvergent(format!("rung differences {n1:.3e} -> {n2:.3e} do not decrease")));
    }
    let p = fit_exponent(n2 / n1, e);
    let lead = (e[1].powf(p) - e[2].powf(p)) / e[2].powf(p);
    let values = v[2].iter().zip(&d2).map(|(x, d)| (x - d / lead).max(0.0)).collect();
    let field = Field::new(last.grid, values, last.tail)?;
    Ok(LimitEstimate { field, p })
}

/// Solves `(ε₂^p − ε₃^p)/(ε₁^p − ε₂^p) = ratio` for `p ∈ [0.5, 2]`.
fn fit_exponent(ratio: f64, e: &[f64]) -> f64 {
    let model = |p: f64| (e[1].powf(p) - e[2].powf(p)) / (e[0].powf(p) - e[1].powf(p));
    let (mut lo, mut hi) = (0.5, 2.0);
    // model decreases in p
    if ratio >= model(lo) {
        return lo;
    }
    if ratio <= model(hi) {
        return hi;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if model(mid) > ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Exists,
    Extinct,
    Inconclusive,
}

/// Verdict on the limit at recorded index `k`.
///
/// EXISTS needs the limit to keep 95% of the initial mass inside the window
/// plus a mass-carrying tail, and to stay positive on the central half of the
/// window. EXTINCT needs `sup ū < threshold`. A ladder whose rung differences
/// do not shrink is judged on its smallest rung with the shift removed.
pub fn extinction_verdict(ladder: &EpsLadder, k: usize, threshold: f64) -> Verdict {
    let limit = match extrapolate_limit(ladder, k) {
        Ok(est) => est.field,
        Err(_) => {
            let last = ladder.trajectories.last().expect("empty ladder");
            last.states[k].clone()
        }
    };
    if limit.max() < threshold {
        return Verdict::Extinct;
    }
    let m0 = initial_mass(ladder);
    let mass = total_mass(&limit).unwrap_or_else(|_| window_mass(&limit));
    let n = limit.values.len();
    let central = &limit.values[n / 4..=3 * n / 4];
    if mass >= 0.95 * m0 && central.iter().all(|v| *v > 0.0) {
        Verdict::Exists
    } else {
        Verdict::Inconclusive
    }
}

fn initial_mass(ladder: &EpsLadder) -> f64 {
    let f = &ladder.trajectories[0].states[0];
    total_mass(f).unwrap_or_else(|_| window_mass(f))
}

/// Manifest written next to the rung trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderManifest {
    pub s: f64,
    pub n: f64,
    pub eps_values: Vec<f64>,
    pub verdicts: Vec<(f64, Verdict)>,
    pub trajectories: Vec<String>,
}
