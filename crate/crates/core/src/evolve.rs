//! Implicit Euler for the regularized problem
//! `∂ₜv + (−Δ)^s Φ_ε(v) = 0`, solved in `v` by damped Newton with dense LU.
//!
//! Runs may use a comoving frame `x = S(t)ξ`, `S(t) = (1 + t/t_ref)^rate`,
//! with `u = S^{-1} w(ξ, t)`. The unknown `w` then obeys
//!
//! `∂ₜw = (S'/S) ∂ξ(ξw) − S^{1+n−2s} (−Δ)^s_ξ Φ_ε(w)`,
//!
//! which is the same equation written on a grid that expands with the
//! solution. `rate = 0` is the fixed frame. The regularization shift `ε` is
//! applied to the computational variable, so the physical shift is `ε/S(t)`.
//!
//! The far field keeps the decay `2s/(1+n)` of the limit solutions (see
//! [`TailPolicy`]). When that decay is integrable the tail carries exactly
//! the mass the window lost, so total mass is conserved step by step.
//! Data whose tail is not integrable (constants, say) keep their tail.

use crate::error::{Error, Result};
use crate::frlap::FrLapOperator;
use crate::grid::{tail_mass, window_mass, Field, Grid1D, TailModel};
use crate::nonlin::RegularizedNonlinearity;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub damping_min: f64,
    pub adaptive: bool,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Upper bound on `dt` relative to the elapsed time (plus the frame's
    /// reference time), so steps can grow on long runs without outrunning
    /// the solution's own time scale.
    pub dt_rel_max: f64,
}

impl StepperConfig {
    /// Defaults with the initial step `h^{2s}/10`.
    pub fn for_grid(grid: Grid1D, s: f64) -> Self {
        let dt = grid.spacing().powf(2.0 * s) / 10.0;
        StepperConfig {
            dt,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            damping_min: 1e-4,
            adaptive: true,
            dt_min: dt * 1e-6,
            dt_max: f64::INFINITY,
            dt_rel_max: 0.02,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0
            && self.newton_tol > 0.0
            && self.damping_min > 0.0
            && self.newton_max_iter > 0
            && self.dt_min > 0.0
            && self.dt_min <= self.dt
            && self.dt <= self.dt_max
            && self.dt_rel_max > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfRange(format!("invalid stepper config {self:?}")))
        }
    }
}

/// Coordinate frame of the computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Frame {
    Fixed,
    /// `S(t) = (1 + t/t_ref)^rate`.
    Comoving { rate: f64, t_ref: f64 },
}

impl Frame {
    pub fn scale(&self, t: f64) -> f64 {
        match *self {
            Frame::Fixed => 1.0,
            Frame::Comoving { rate, t_ref } => (1.0 + t / t_ref).powf(rate),
        }
    }

    /// `S'(t)/S(t)`.
    pub fn log_rate(&self, t: f64) -> f64 {
        match *self {
            Frame::Fixed => 0.0,
            Frame::Comoving { rate, t_ref } => rate / (t_ref + t),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    pub mass: f64,
    pub sup: f64,
    pub min: f64,
    pub newton_iters: usize,
    pub dt: f64,
}

/// Recorded states `v_ε(·, t)` in physical coordinates.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    /// Regularization in the computational frame; 0 for extrapolated limits.
    pub eps: f64,
    pub frame: Frame,
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    /// Physical shift `ε/S(t)` at recorded index `k`.
    pub fn eps_at(&self, k: usize) -> f64 {
        self.eps / self.frame.scale(self.times[k])
    }

    /// `u_ε = v_ε + ε/S(t)` at recorded index `k`.
    pub fn u(&self, k: usize) -> Field {
        let e = self.eps_at(k);
        let f = &self.states[k];
        if e == 0.0 {
            return f.clone();
        }
        // the shift lives on the whole line; it is not part of the tail model
        Field { grid: f.grid, values: f.values.iter().map(|v| v + e).collect(), tail: f.tail }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &Field {
        self.states.last().expect("empty trajectory")
    }
}

/// How the far field beyond the window is rebuilt after each step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TailPolicy {
    /// Fixed decay; amplitude carries `mass − window mass`, split between the
    /// sides in proportion to the boundary values.
    FixedDecayMass { gamma: f64 },
    /// Fixed decay; amplitude continuous with the boundary values. Mass that
    /// leaves the window is not tracked.
    FixedDecayContinuity { gamma: f64 },
}

impl TailPolicy {
    /// Decay `2s/(1+n)` of the limit solutions. When it is integrable the
    /// tail carries the mass that left the window; otherwise it cannot hold
    /// mass and follows the boundary values.
    pub fn universal(s: f64, n: f64) -> Self {
        let gamma = 2.0 * s / (1.0 + n);
        if gamma > 1.0 {
            TailPolicy::FixedDecayMass { gamma }
        } else {
            TailPolicy::FixedDecayContinuity { gamma }
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            TailPolicy::FixedDecayMass { gamma } | TailPolicy::FixedDecayContinuity { gamma } => gamma,
        }
    }
}

/// Regularized evolution on a fixed computational grid.
pub struct Evolution<'a> {
    op: &'a FrLapOperator,
    rnl: RegularizedNonlinearity,
    frame: Frame,
    tail_policy: TailPolicy,
    matrix: DMatrix<f64>,
}

/// Computational state: `w` on the ξ-grid, its tail and the conserved mass.
#[derive(Clone, Debug)]
struct State {
    w: Field,
    /// Total mass, or `None` when the data's own tail is not integrable.
    mass: Option<f64>,
}

impl<'a> Evolution<'a> {
    pub fn new(op: &'a FrLapOperator, rnl: RegularizedNonlinearity) -> Self {
        let tail_policy = TailPolicy::universal(op.order().value(), rnl.base().n());
        Evolution { op, rnl, frame: Frame::Fixed, tail_policy, matrix: op.matrix() }
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn with_tail_policy(mut self, policy: TailPolicy) -> Self {
        self.tail_policy = policy;
        self
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn rnl(&self) -> RegularizedNonlinearity {
        self.rnl
    }

    fn initial_state(&self, v0: &Field) -> Result<State> {
        if v0.grid != self.op.grid() {
            return Err(Error::GridMismatch);
        }
        if let Some(v) = v0.values.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidField(format!("initial data must be nonnegative, found {v}")));
        }
        let mass = match tail_mass(v0) {
            Ok((ml, mr)) => Some(window_mass(v0) + ml + mr),
            Err(Error::TailNotIntegrable(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(State { w: v0.clone(), mass })
    }

    /// Upwind discretization of `∂ξ(ξ w)` (transport velocity points inward).
    /// Returns the action and the tridiagonal Jacobian as (sub, diag, super).
    fn advection(&self, w: &[f64], far_left: f64, far_right: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let g = self.op.grid();
        let n = g.len();
        let h = g.spacing();
        let mut out = vec![0.0; n];
        let (mut sub, mut dia, mut sup) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        // face k sits between node k-1 and node k, k = 0..=n (virtual nodes -1 and n)
        for k in 0..=n {
            let xf = g.x(0) + (k as f64 - 0.5) * h;
            // flux value ξ_f · w_upwind
            let (flux, up) = if xf > 0.0 {
                let v = if k < n { w[k] } else { far_right };
                (xf * v, if k < n { Some(k) } else { None })
            } else {
                let v = if k > 0 { w[k - 1] } else { far_left };
                (xf * v, if k > 0 { Some(k - 1) } else { None })
            };
            // node k-1 gains +flux/h (right face), node k loses it (left face)
            if k >= 1 {
                out[k - 1] += flux / h;
                if let Some(j) = up {
                    let c = xf / h;
                    if j == k - 1 {
                        dia[k - 1] += c;
                    } else {
                        sup[k - 1] += c;
                    }
                }
            }
            if k < n {
                out[k] -= flux / h;
                if let Some(j) = up {
                    let c = -xf / h;
                    if j == k {
                        dia[k] += c;
                    } else {
                        sub[k] += c;
                    }
                }
            }
        }
        (out, sub, dia, sup)
    }

    /// One implicit step from `t_new − dt` to `t_new` in the computational frame.
    fn step(&self, state: &State, t_new: f64, dt: f64, cfg: &StepperConfig) -> Result<(State, usize)> {
        let g = self.op.grid();
        let n = g.len();
        let a = self.frame.log_rate(t_new);
        let sv = self.op.order().value();
        let nexp = self.rnl.base().n();
        let b = self.frame.scale(t_new).powf(1.0 + nexp - 2.0 * sv);
        let rnl = self.rnl;
        let w_old = &state.w.values;

        let tail_w = state.w.tail;
        let far_w = |y: f64| tail_w.map_or(0.0, |t| t.eval(y));
        let src = self.op.boundary_source_fn(|y| rnl.phi_eps_unchecked(far_w(y).max(0.0)));
        let edge = g.half_width() + g.spacing();
        let (far_l, far_r) = (far_w(-edge).max(0.0), far_w(edge).max(0.0));

        let residual = |w: &[f64]| -> Vec<f64> {
            let phi: Vec<f64> = w.iter().map(|v| rnl.phi_eps_unchecked(*v)).collect();
            let mphi = self.op.matvec(&phi);
            let adv = if a != 0.0 { self.advection(w, far_l, far_r).0 } else { vec![0.0; n] };
            (0..n).map(|i| w[i] - w_old[i] - dt * a * adv[i] + dt * b * (mphi[i] - src[i])).collect()
        };
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = norm(w_old).max(f64::MIN_POSITIVE);
        let tol = cfg.newton_tol * scale;

        let mut w = w_old.clone();
        let mut r = residual(&w);
        let mut rn = norm(&r);
        let mut iters = 0;
        while rn > tol {
            if iters >= cfg.newton_max_iter {
                return Err(Error::NewtonDiverged { time: t_new, dt, residual: rn / scale });
            }
            iters += 1;
            let dphi: Vec<f64> = w.iter().map(|v| rnl.phi_eps_prime_unchecked(*v)).collect();
            let mut jac = self.matrix.clone();
            for (j, mut col) in jac.column_iter_mut().enumerate() {
                col *= dt * b * dphi[j];
            }
            for j in 0..n {
                jac[(j, j)] += 1.0;
            }
            if a != 0.0 {
                let (_, sub, dia, sup) = self.advection(&w, far_l, far_r);
                for i in 0..n {
                    jac[(i, i)] -= dt * a * dia[i];
                    if i > 0 {
                        jac[(i, i - 1)] -= dt * a * sub[i];
                    }
                    if i + 1 < n {
                        jac[(i, i + 1)] -= dt * a * sup[i];
                    }
                }
            }
            let rhs = DVector::from_iterator(n, r.iter().map(|v| -v));
            let delta = jac
                .lu()
                .solve(&rhs)
                .ok_or(Error::NewtonDiverged { time: t_new, dt, residual: rn / scale })?;
            let mut lambda = 1.0;
            loop {
                let cand: Vec<f64> = w.iter().zip(delta.iter()).map(|(x, d)| x + lambda * d).collect();
                if cand.iter().all(|v| *v >= 0.0) {
                    let rc = residual(&cand);
                    let rcn = norm(&rc);
                    if rcn < rn {
                        w = cand;
                        r = rc;
                        rn = rcn;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < cfg.damping_min {
                    return Err(Error::NewtonDiverged { time: t_new, dt, residual: rn / scale });
                }
            }
        }
        let mut next = Field { grid: g, values: w, tail: state.w.tail };
        next.tail = match (self.tail_policy, state.mass) {
            (_, None) => state.w.tail,
            (TailPolicy::FixedDecayMass { gamma }, Some(m)) => mass_tail(&next, m, gamma),
            (TailPolicy::FixedDecayContinuity { gamma }, _) => continuity_tail(&next, gamma),
        };
        Ok((State { w: next, mass: state.mass }, iters))
    }

    fn time_reference(&self) -> f64 {
        match self.frame {
            Frame::Fixed => 0.0,
            Frame::Comoving { t_ref, .. } => t_ref,
        }
    }

    /// Converts a computational state at time `t` to a physical field.
    fn physical(&self, state: &State, t: f64) -> Result<Field> {
        let s = self.frame.scale(t);
        if s == 1.0 {
            return Ok(state.w.clone());
        }
        let grid = state.w.grid.scaled(s)?;
        let values = state.w.values.iter().map(|v| v / s).collect();
        let tail = state.w.tail.map(|t| match t {
            TailModel::Power { left, right, gamma, radius } => {
                let f = s.powf(gamma - 1.0);
                TailModel::Power { left: left * f, right: right * f, gamma, radius: radius * s }
            }
            other => other,
        });
        Ok(Field { grid, values, tail })
    }

    /// Advances `v0` (given at t = 0) and records the state at each of
    /// `output_times`; with no output times every accepted step is recorded.
    pub fn run(&self, v0: &Field, t_end: f64, output_times: &[f64], cfg: &StepperConfig) -> Result<Trajectory> {
        cfg.validate()?;
        let mut state = self.initial_state(v0)?;
        let mut outputs: Vec<f64> = output_times.iter().cloned().filter(|t| *t > 0.0 && *t <= t_end).collect();
        outputs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        outputs.dedup();
        let record_all = outputs.is_empty();
        if record_all || outputs.last() != Some(&t_end) {
            outputs.push(t_end);
        }

        let mut traj = Trajectory { times: vec![], states: vec![], eps: self.rnl.eps(), frame: self.frame, records: vec![] };
        let first = self.physical(&state, 0.0)?;
        traj.records.push(record(&first, 0.0, 0, 0.0));
        traj.times.push(0.0);
        traj.states.push(first);

        let mut t = 0.0;
        let mut dt = cfg.dt;
        let mut next = 0;
        while next < outputs.len() {
            let target = outputs[next];
            let remaining = target - t;
            let clipped = remaining <= dt * (1.0 + 1e-9);
            let dt_try = if clipped { remaining } else { dt };
            let t_new = if clipped { target } else { t + dt_try };
            match self.step(&state, t_new, dt_try, cfg) {
                Ok((s_new, iters)) => {
                    state = s_new;
                    t = t_new;
                    if cfg.adaptive && !clipped {
                        // Newton iteration band [3, 10]: grow at its lower edge
                        if iters <= 3 {
                            let cap = cfg.dt_max.min(cfg.dt_rel_max * (t + self.time_reference()).max(cfg.dt));
                            dt = (2.0 * dt).min(cap).max(dt);
                        } else if iters > 10 {
                            dt = (0.5 * dt).max(cfg.dt_min);
                        }
                    }
                    let hit = clipped;
                    if hit || record_all {
                        let f = self.physical(&state, t)?;
                        traj.records.push(record(&f, t, iters, dt_try));
                        traj.times.push(t);
                        traj.states.push(f);
                    }
                    if hit {
                        next += 1;
                    }
                }
                Err(e) => {
                    if cfg.adaptive && dt_try * 0.5 >= cfg.dt_min {
                        dt = dt_try * 0.5;
                    } else {
                        return Err(e);
                    }
                }
            }
        }
        Ok(traj)
    }
}

fn record(f: &Field, time: f64, newton_iters: usize, dt: f64) -> StepRecord {
    StepRecord {
        time,
        mass: crate::grid::total_mass(f).unwrap_or(f64::NAN),
        sup: f.max(),
        min: f.min(),
        newton_iters,
        dt,
    }
}

/// Fixed-decay tail holding `mass − window mass`, split by boundary values.
fn mass_tail(f: &Field, mass: f64, gamma: f64) -> Option<TailModel> {
    let l = f.grid.half_width();
    let n = f.values.len();
    let (wl, wr) = (f.values[0], f.values[n - 1]);
    let far = mass - window_mass(f);
    if !(far > 0.0) {
        return None;
    }
    let total = far * (gamma - 1.0) * l.powf(gamma - 1.0);
    let left = if wl + wr > 0.0 { wl / (wl + wr) } else { 0.5 };
    Some(TailModel::power(total * left, total * (1.0 - left), gamma, l))
}

fn continuity_tail(f: &Field, gamma: f64) -> Option<TailModel> {
    let l = f.grid.half_width();
    let n = f.values.len();
    let (wl, wr) = (f.values[0], f.values[n - 1]);
    if wl + wr <= 0.0 {
        return None;
    }
    Some(TailModel::power(wl * l.powf(gamma), wr * l.powf(gamma), gamma, l))
}

/// One implicit Euler step in the fixed frame.
pub fn implicit_step(
    op: &FrLapOperator,
    rnl: RegularizedNonlinearity,
    v_old: &Field,
    dt: f64,
    cfg: &StepperConfig,
) -> Result<Field> {
    let evo = Evolution::new(op, rnl);
    let state = evo.initial_state(v_old)?;
    let (next, _) = evo.step(&state, dt, dt, cfg)?;
    Ok(next.w)
}

/// Fixed-frame run to `t_end`, recording every accepted step.
pub fn run(
    op: &FrLapOperator,
    rnl: RegularizedNonlinearity,
    v0: &Field,
    t_end: f64,
    cfg: &StepperConfig,
) -> Result<Trajectory> {
    Evolution::new(op, rnl).run(v0, t_end, &[], cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frlap::{build_operator, FracOrder};
    use crate::grid::total_mass;
    use crate::nonlin::Nonlinearity;

    fn setup(s: f64, n: f64, eps: f64) -> (FrLapOperator, RegularizedNonlinearity, StepperConfig) {
        let g = Grid1D::new(10.0, 101).unwrap();
        let op = build_operator(g, FracOrder::new(s).unwrap());
        let rnl = Nonlinearity::new(n).unwrap().regularized(eps).unwrap();
        let cfg = StepperConfig::for_grid(g, s);
        (op, rnl, cfg)
    }

    fn bump(g: Grid1D, c: f64, amp: f64) -> Field {
        Field::from_fn(g, |x| amp * (1.0 - ((x - c) / 2.0).powi(2)).max(0.0), None)
    }

    #[test]
    fn zero_data_stays_zero() {
        let (op, rnl, cfg) = setup(0.8, 0.2, 1e-2);
        let tr = run(&op, rnl, &Field::zeros(op.grid()), 0.1, &cfg).unwrap();
        assert!(tr.states.iter().all(|f| f.values.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn constants_are_stationary() {
        let (op, rnl, cfg) = setup(0.8, 0.2, 1e-2);
        let g = op.grid();
        let c = Field::from_fn(g, |_| 0.7, Some(TailModel::constant(0.7, g.half_width())));
        let tr = run(&op, rnl, &c, 0.1, &cfg).unwrap();
        for f in &tr.states {
            assert!(f.values.iter().all(|v| (v - 0.7).abs() < 1e-9));
            assert_eq!(f.tail, c.tail);
        }
    }

    #[test]
    fn mass_is_conserved_step_by_step() {
        for (s, n) in [(0.8, 0.2), (0.75, 0.0)] {
            let (op, rnl, cfg) = setup(s, n, 1e-2);
            let u0 = bump(op.grid(), 0.0, 1.0);
            let m0 = total_mass(&u0).unwrap();
            let tr = run(&op, rnl, &u0, 0.2, &cfg).unwrap();
            for r in &tr.records {
                assert!((r.mass - m0).abs() < 1e-6 * m0, "({s}, {n}) t = {}: {} vs {m0}", r.time, r.mass);
            }
        }
    }

    #[test]
    fn sup_decreases_and_data_stay_ordered() {
        let (op, rnl, cfg) = setup(0.8, 0.2, 1e-2);
        let g = op.grid();
        let outs = [0.05, 0.1, 0.2];
        let lo = Evolution::new(&op, rnl).run(&bump(g, 0.0, 0.5), 0.2, &outs, &cfg).unwrap();
        let hi = Evolution::new(&op, rnl).run(&bump(g, 0.0, 1.0), 0.2, &outs, &cfg).unwrap();
        assert_eq!(lo.times, hi.times);
        for w in hi.states.windows(2) {
            assert!(w[1].max() <= w[0].max() + 1e-12);
        }
        for (a, b) in lo.states.iter().zip(&hi.states) {
            assert!(a.values.iter().zip(&b.values).all(|(x, y)| *x <= y + 1e-9));
        }
    }

    #[test]
    fn comoving_frame_conserves_mass_and_expands() {
        let (op, rnl, cfg) = setup(0.8, 0.2, 1e-2);
        let u0 = bump(op.grid(), 0.0, 1.0);
        let m0 = total_mass(&u0).unwrap();
        let frame = Frame::Comoving { rate: 2.5, t_ref: 1.0 };
        let tr = Evolution::new(&op, rnl).with_frame(frame).run(&u0, 0.5, &[0.25, 0.5], &cfg).unwrap();
        let last = tr.final_state();
        assert!((last.grid.half_width() - 10.0 * frame.scale(0.5)).abs() < 1e-9);
        assert!((total_mass(last).unwrap() - m0).abs() < 1e-6 * m0);
        assert!((tr.eps_at(2) - 1e-2 / frame.scale(0.5)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let (op, rnl, cfg) = setup(0.8, 0.2, 1e-2);
        let other = Field::zeros(Grid1D::new(5.0, 101).unwrap());
        assert_eq!(run(&op, rnl, &other, 0.1, &cfg).unwrap_err(), Error::GridMismatch);
        let neg = Field::signed(op.grid(), vec![-1.0; 101], None).unwrap();
        assert!(matches!(run(&op, rnl, &neg, 0.1, &cfg), Err(Error::InvalidField(_))));
        let bad = StepperConfig { dt: -1.0, ..cfg };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_step_matches_run() {
        let (op, rnl, cfg) = setup(0.8, 0.2, 1e-2);
        let u0 = bump(op.grid(), 0.0, 1.0);
        let a = implicit_step(&op, rnl, &u0, cfg.dt, &cfg).unwrap();
        let fixed = StepperConfig { adaptive: false, ..cfg };
        let b = run(&op, rnl, &u0, cfg.dt, &fixed).unwrap();
        assert_eq!(a.values, b.final_state().values);
    }
}
