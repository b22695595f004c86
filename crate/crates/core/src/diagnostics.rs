//! Certification checks: comparison principles, conservation, power-law fits,
//! the very weak formulation and the lower tail bound.
//!
//! Every comparison is an inequality. Tolerances forgive discretization
//! noise only; they never flip the direction of a check.

use crate::error::{Error, Result};
use crate::evolve::Trajectory;
use crate::frlap::{normalization, FrLapOperator};
use crate::grid::{cumulative_mass, is_rearranged, lp_distance, positive_part_mass, total_mass, window_mass, Field, TailModel};
use crate::limits::EpsLadder;
use crate::nonlin::Nonlinearity;
use crate::quad;
use crate::selfsim::{ScalingExponents, SelfSimilarProfile};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default relative tolerance of every verdict.
pub const DEFAULT_TOL: f64 = 1e-3;

/// Lower bounds are checked in the decay form `u ≥ c|x|^{-2s/(1+n)}`; a
/// growing bound would contradict integrability.
pub const LOWER_BOUND_NOTE: &str =
    "lower bounds use the decay reading u >= c |x|^(-2s/(1+n)); the growing display form is inconsistent with u in L1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Relation {
    Concentration,
    Shift,
    Pointwise,
    Aleksandrov,
    Contraction,
    BenilanCrandall,
    EpsMonotone,
    TimeContinuity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub relation: Relation,
    /// Largest defect, relative to the scale named by each check.
    pub max_violation: f64,
    pub tolerance: f64,
    pub verdict: bool,
    /// Where the largest defect sits, when it has a position.
    pub location: Option<f64>,
    pub time: Option<f64>,
}

impl ComparisonReport {
    fn new(relation: Relation, max_violation: f64, tolerance: f64, location: Option<f64>, time: Option<f64>) -> Self {
        ComparisonReport { relation, max_violation, tolerance, verdict: max_violation <= tolerance, location, time }
    }
}

/// `y ≈ prefactor · t^{exponent}` by least squares in log-log coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub fitted_exponent: f64,
    pub fitted_prefactor: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Fits the points with `t` inside `window` and `y > 0`.
pub fn power_law_fit(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<ExponentFit> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(t, y)| **t >= window.0 && **t <= window.1 && **t > 0.0 && **y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::WindowTooShort(format!("{} usable points in {window:?}", pts.len())));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::WindowTooShort("all points at one time".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(ExponentFit { fitted_exponent: slope, fitted_prefactor: (my - slope * mx).exp(), r_squared, window })
}

/// `∫_{−R}^{R} f ≤ ∫_{−R}^{R} g + tol·mass` for every grid radius, `mass`
/// the larger window mass.
pub fn concentration_compare(f: &Field, g: &Field, tol: f64) -> Result<ComparisonReport> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    for h in [f, g] {
        if !is_rearranged(h, 1e-9) {
            return Err(Error::NotRearranged);
        }
    }
    let grid = f.grid;
    let c = grid.center();
    let h = grid.spacing();
    let mass = window_mass(f).max(window_mass(g));
    let (mut cf, mut cg) = (0.0, 0.0);
    let mut worst = (0.0, 0.0);
    for m in 1..=c {
        // one trapezoid cell on each side
        cf += h * (f.values[c + m - 1] + f.values[c + m] + f.values[c - m + 1] + f.values[c - m]) / 2.0;
        cg += h * (g.values[c + m - 1] + g.values[c + m] + g.values[c - m + 1] + g.values[c - m]) / 2.0;
        let d = (cf - cg) / mass;
        if d > worst.1 {
            worst = (grid.x(c + m), d);
        }
    }
    Ok(ComparisonReport::new(Relation::Concentration, worst.1, tol, Some(worst.0), None))
}

/// `∫_{−∞}^x f ≤ ∫_{−∞}^x g + tol·mass` at every node; masses must agree
/// within `tol`.
pub fn shifting_compare(f: &Field, g: &Field, tol: f64) -> Result<ComparisonReport> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    let (mf, mg) = (total_mass(f)?, total_mass(g)?);
    if (mf - mg).abs() > tol * mf.max(mg) {
        return Err(Error::MassMismatch(mf, mg));
    }
    let (vf, vg) = (cumulative_mass(f)?, cumulative_mass(g)?);
    let mut worst = (0.0, 0.0);
    for (i, (a, b)) in vf.iter().zip(&vg).enumerate() {
        let d = (a - b) / mf.max(mg);
        if d > worst.1 {
            worst = (f.grid.x(i), d);
        }
    }
    Ok(ComparisonReport::new(Relation::Shift, worst.1, tol, Some(worst.0), None))
}

/// `f ≤ g + tol·max g` at every node.
pub fn pointwise_compare(f: &Field, g: &Field, tol: f64) -> Result<ComparisonReport> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    let scale = g.max().abs().max(f.max().abs());
    let mut worst = (0.0, 0.0);
    for (i, (a, b)) in f.values.iter().zip(&g.values).enumerate() {
        let d = (a - b) / scale;
        if d > worst.1 {
            worst = (f.grid.x(i), d);
        }
    }
    Ok(ComparisonReport::new(Relation::Pointwise, worst.1, tol, Some(worst.0), None))
}

/// Reflection about `a`: `u(x,t) ≤ u(2a − x, t)` for `x > a` at every recorded
/// time, relative to `sup u₀`. The reflected value is interpolated.
pub fn aleksandrov_check(traj: &Trajectory, a: f64, tol: f64) -> Result<ComparisonReport> {
    let u0 = traj.u(0);
    let scale = u0.max();
    let defect = |u: &Field| -> (f64, f64) {
        let mut worst = (a, 0.0);
        for (i, x) in u.grid.nodes().into_iter().enumerate() {
            if x > a {
                let d = (u.values[i] - u.value_at(2.0 * a - x)) / scale;
                if d > worst.1 {
                    worst = (x, d);
                }
            }
        }
        worst
    };
    let (_, d0) = defect(&u0);
    if d0 > tol {
        return Err(Error::PreconditionFailed(format!("initial data violate the reflection hypothesis by {d0:e}")));
    }
    let per_time: Vec<(f64, f64, f64)> = (0..traj.len())
        .into_par_iter()
        .map(|k| {
            let (x, d) = defect(&traj.u(k));
            (traj.times[k], x, d)
        })
        .collect();
    let worst = per_time.into_iter().fold((0.0, a, 0.0), |w, p| if p.2 > w.2 { p } else { w });
    Ok(ComparisonReport::new(Relation::Aleksandrov, worst.2, tol, Some(worst.1), Some(worst.0)))
}

/// `∫(u₁ − u₂)₊` never exceeds its initial value, relative to the larger
/// initial mass. Both trajectories must share times and grids.
pub fn l1_contraction_check(a: &Trajectory, b: &Trajectory, tol: f64) -> Result<ComparisonReport> {
    if a.times != b.times {
        return Err(Error::PreconditionFailed("trajectories record different times".into()));
    }
    let scale = window_mass(&a.states[0]).max(window_mass(&b.states[0]));
    let d = |k: usize| positive_part_mass(&a.u(k), &b.u(k));
    let d0 = d(0)?;
    let mut worst = (0.0, 0.0);
    for k in 1..a.len() {
        let v = (d(k)? - d0) / scale;
        if v > worst.1 {
            worst = (a.times[k], v);
        }
    }
    Ok(ComparisonReport::new(Relation::Contraction, worst.1, tol, None, Some(worst.0)))
}

/// Integrated form of `∂ₜu ≤ u/((1+n)t)`: `u(t₂) ≤ (t₂/t₁)^{1/(1+n)} u(t₁)`
/// between consecutive recorded times with `t₁ > 0`, relative to `sup u₀`.
/// Values at `t₂` are sampled on the nodes of the `t₁` grid.
pub fn benilan_crandall_defect(traj: &Trajectory, nl: Nonlinearity, tol: f64) -> Result<ComparisonReport> {
    let scale = traj.u(0).max();
    let mut worst = (0.0, 0.0, 0.0);
    for k in 0..traj.len().saturating_sub(1) {
        let (t1, t2) = (traj.times[k], traj.times[k + 1]);
        if !(t1 > 0.0) {
            continue;
        }
        let factor = (t2 / t1).powf(1.0 / (1.0 + nl.n()));
        let (u1, u2) = (traj.u(k), traj.u(k + 1));
        let l2 = u2.grid.half_width();
        for (i, x) in u1.grid.nodes().into_iter().enumerate() {
            if x.abs() > l2 {
                continue;
            }
            let d = (u2.value_at(x) - factor * u1.values[i]) / scale;
            if d > worst.2 {
                worst = (t2, x, d);
            }
        }
    }
    Ok(ComparisonReport::new(Relation::BenilanCrandall, worst.2, tol, Some(worst.1), Some(worst.0)))
}

/// Ordering `u_{ε'} ≤ u_ε` for `ε' < ε` across the ladder, relative to
/// `max(sup u₀, ε₀)`.
pub fn eps_monotonicity(ladder: &EpsLadder, tol: f64) -> ComparisonReport {
    let scale = ladder.trajectories[0].u(0).max();
    ComparisonReport::new(Relation::EpsMonotone, ladder.max_order_violation / scale, tol, None, None)
}

/// `‖u(t_{k+1}) − u(t_k)‖₁ ≤ (2/(1+n)) (t_{k+1} − t_k)/t_k · ‖u(t_k)‖₁` for
/// `t_k ≥ tau`; the defect is relative to `‖u(t_k)‖₁`. Fixed-frame only.
pub fn l1_time_continuity(traj: &Trajectory, nl: Nonlinearity, tau: f64, tol: f64) -> Result<ComparisonReport> {
    let mut worst = (0.0, 0.0);
    for k in 0..traj.len().saturating_sub(1) {
        let t = traj.times[k];
        if t < tau || !(t > 0.0) {
            continue;
        }
        let (a, b) = (&traj.states[k], &traj.states[k + 1]);
        let m = window_mass(a);
        let bound = 2.0 / (1.0 + nl.n()) * (traj.times[k + 1] - t) / t;
        let d = lp_distance(b, a, 1.0)? / m - bound;
        if d > worst.1 {
            worst = (t, d);
        }
    }
    Ok(ComparisonReport::new(Relation::TimeContinuity, worst.1, tol, None, Some(worst.0)))
}

/// Log-log fit of `sup v(t)` over `window`, which must span 1.5 decades.
pub fn smoothing_fit(traj: &Trajectory, window: (f64, f64)) -> Result<ExponentFit> {
    if !(window.0 > 0.0) || (window.1 / window.0).log10() < 1.5 {
        return Err(Error::WindowTooShort(format!("{window:?} spans less than 1.5 decades")));
    }
    let sups: Vec<f64> = traj.states.iter().map(|f| f.max()).collect();
    power_law_fit(&traj.times, &sups, window)
}

/// Smooth space-time test function `ζ(x,t) = b((x − x₀)/r) b((t − t₀)/τ)` with
/// `b(z) = exp(1 − 1/(1 − z²))` on `|z| < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub x_center: f64,
    pub x_radius: f64,
    pub t_center: f64,
    pub t_radius: f64,
}

fn bump(z: f64) -> f64 {
    if z.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - z * z)).exp()
    }
}

fn bump_prime(z: f64) -> f64 {
    if z.abs() >= 1.0 {
        0.0
    } else {
        let q = 1.0 - z * z;
        -2.0 * z / (q * q) * bump(z)
    }
}

impl TestFunction {
    pub fn space(&self, x: f64) -> f64 {
        bump((x - self.x_center) / self.x_radius)
    }

    pub fn time(&self, t: f64) -> f64 {
        bump((t - self.t_center) / self.t_radius)
    }

    pub fn time_derivative(&self, t: f64) -> f64 {
        bump_prime((t - self.t_center) / self.t_radius) / self.t_radius
    }
}

/// Relative defect of the very weak formulation
/// `∫∫ u ∂ₜζ = ∫∫ Φ(u) (−Δ)^s ζ`, relative to the larger side. Time integrals
/// use the trapezoid rule over the recorded times.
///
/// Regularized trajectories use `Φ_ε(v)`, which differs from `Φ(u)` by a
/// constant that `(−Δ)^s ζ` integrates to zero. Limit trajectories (`ε = 0`)
/// use the floored `Φ(v)`. The far field contributes through the tail of
/// `Φ(u)` against the exact exterior values of `(−Δ)^s ζ`.
pub fn very_weak_residual(traj: &Trajectory, nl: Nonlinearity, op: &FrLapOperator, zeta: &TestFunction) -> Result<f64> {
    let grid = op.grid();
    let l = grid.half_width();
    if zeta.x_center.abs() + zeta.x_radius >= l {
        return Err(Error::SupportViolation(format!("spatial support reaches |x| = {}", zeta.x_center.abs() + zeta.x_radius)));
    }
    let (t_first, t_last) = (traj.times[0], *traj.times.last().expect("nonempty"));
    if zeta.t_center - zeta.t_radius < t_first || zeta.t_center + zeta.t_radius > t_last {
        return Err(Error::SupportViolation(format!("time support leaves [{t_first}, {t_last}]")));
    }
    if traj.states.iter().any(|f| f.grid != grid) {
        return Err(Error::GridMismatch);
    }
    let phi_x = Field::from_fn(grid, |x| zeta.space(x), None);
    let lap = op.apply(&phi_x)?.values;
    let h = grid.spacing();
    let s = op.order().value();
    let c = normalization(op.order());
    let support: Vec<(f64, f64)> = grid.nodes().into_iter().zip(phi_x.values.iter().copied()).filter(|p| p.1 > 0.0).collect();
    // exterior: (−Δ)^s ζ(x) = −c ∫ ζ(y)|x − y|^{-1-2s} dy
    let lap_out = |x: f64| -> f64 { -c * h * support.iter().map(|(y, z)| z * (x - y).abs().powf(-1.0 - 2.0 * s)).sum::<f64>() };
    let rnl = if traj.eps > 0.0 { Some(nl.regularized(traj.eps)?) } else { None };
    let phi = |v: f64| match rnl {
        Some(r) => r.phi_eps_unchecked(v.max(0.0)),
        None => nl.phi_floored(v),
    };
    let per_time: Vec<(f64, f64)> = traj
        .states
        .par_iter()
        .map(|f| {
            let mass_part: f64 = h * f.values.iter().zip(&phi_x.values).map(|(v, z)| v * z).sum::<f64>();
            let inner: f64 = h * f.values.iter().zip(&lap).map(|(v, a)| phi(*v) * a).sum::<f64>();
            let outer = match f.tail {
                Some(t) => {
                    let far = |x: f64| phi(t.eval(x)) * lap_out(x);
                    let right = quad::integrate_to_infinity(far, l, 1e-300, 1e-8).value;
                    let left = quad::integrate_to_infinity(|y| far(-y), l, 1e-300, 1e-8).value;
                    right + left
                }
                None => 0.0,
            };
            (mass_part, inner + outer)
        })
        .collect();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for k in 0..traj.len() - 1 {
        let dt = traj.times[k + 1] - traj.times[k];
        let (t0, t1) = (traj.times[k], traj.times[k + 1]);
        lhs += 0.5 * dt * (per_time[k].0 * zeta.time_derivative(t0) + per_time[k + 1].0 * zeta.time_derivative(t1));
        rhs += 0.5 * dt * (per_time[k].1 * zeta.time(t0) + per_time[k + 1].1 * zeta.time(t1));
    }
    let denom = rhs.abs().max(lhs.abs());
    Ok(if denom == 0.0 { 0.0 } else { (lhs - rhs).abs() / denom })
}

/// Norm series `‖u(t) − U_M(t)‖_p` and its decay fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpRate {
    pub p: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: Option<ExponentFit>,
    /// Candidate rate `(p − 1)/(p(2s − 1 − n))`.
    pub alpha_p: f64,
    /// Candidate rate `(p − 1)/(p(2s − 1 + n))`.
    pub alpha_p_alt: f64,
}

/// `U_M(x,t) = t^{−α} F_M(x t^{−α})` sampled on `grid`.
pub fn barenblatt_field(profile: &SelfSimilarProfile, exps: &ScalingExponents, t: f64, grid: crate::grid::Grid1D) -> Result<Field> {
    let a = t.powf(-exps.alpha);
    let values = grid.nodes().iter().map(|x| a * profile.field.value_at(x * a)).collect();
    let tail = profile.field.tail.map(|tm| match tm {
        TailModel::Power { left, right, gamma, .. } => {
            let c = a.powf(1.0 - gamma);
            TailModel::Power { left: c * left, right: c * right, gamma, radius: grid.half_width() }
        }
        other => other,
    });
    Field::new(grid, values, tail)
}

/// Distances to the Barenblatt solution of the same mass for each `p`, over
/// the recorded times at or after `t_min`; fits run over `window`.
pub fn lp_convergence_rates(
    traj: &Trajectory,
    profile: &SelfSimilarProfile,
    exps: &ScalingExponents,
    p_values: &[f64],
    t_min: f64,
    window: (f64, f64),
) -> Result<Vec<LpRate>> {
    let ks: Vec<usize> = (0..traj.len()).filter(|k| traj.times[*k] >= t_min && traj.times[*k] > 0.0).collect();
    let targets: Vec<Field> = ks
        .iter()
        .map(|&k| barenblatt_field(profile, exps, traj.times[k], traj.states[k].grid))
        .collect::<Result<_>>()?;
    let times: Vec<f64> = ks.iter().map(|k| traj.times[*k]).collect();
    p_values
        .par_iter()
        .map(|&p| {
            let norms = ks
                .iter()
                .zip(&targets)
                .map(|(&k, u)| lp_distance(&traj.states[k], u, p))
                .collect::<Result<Vec<_>>>()?;
            Ok(LpRate {
                p,
                fit: power_law_fit(&times, &norms, window).ok(),
                times: times.clone(),
                norms,
                alpha_p: exps.alpha_p(p),
                alpha_p_alt: exps.alpha_p_alt(p),
            })
        })
        .collect()
}

/// Outcome of the lower tail bound on `|x| ∈ [2R, L]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    /// `min f(x)|x|^{2s/(1+n)}` over the range.
    pub ratio_min: f64,
    /// The same ratio at the window edge.
    pub ratio_edge: f64,
    /// `C(n,s) t^{1/(1+n)}`, the VSS value of the ratio.
    pub vss_ratio: f64,
    pub holds: bool,
}

/// `f(x)|x|^{2s/(1+n)}` bounded away from zero on `|x| ∈ [2R, L]`: the bound
/// holds when its minimum exceeds `tol` times the VSS ratio.
pub fn lower_bound_check(f: &Field, t: f64, exps: &ScalingExponents, r_support: f64, tol: f64) -> Result<LowerBound> {
    let gamma = exps.gamma_tail;
    let g = f.grid;
    let l = g.half_width();
    let mut ratio_min = f64::INFINITY;
    for (i, x) in g.nodes().into_iter().enumerate() {
        if x.abs() >= 2.0 * r_support && x.abs() > 0.0 {
            ratio_min = ratio_min.min(f.values[i] * x.abs().powf(gamma));
        }
    }
    if !ratio_min.is_finite() {
        return Err(Error::OutOfRange(format!("no nodes with |x| in [{}, {l}]", 2.0 * r_support)));
    }
    let n = g.len();
    let ratio_edge = 0.5 * (f.values[0] + f.values[n - 1]) * l.powf(gamma);
    let vss_ratio = exps.vss()?.c * t.powf(1.0 / (1.0 + exps.n));
    Ok(LowerBound { ratio_min, ratio_edge, vss_ratio, holds: ratio_min > tol * vss_ratio })
}

/// One named check in a report bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    /// Hard checks decide the exit status; soft ones are informational.
    pub hard: bool,
    pub pass: bool,
    pub detail: serde_json::Value,
}

/// All verdicts, fits and violation maxima of one verification run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub suite: String,
    pub checks: Vec<CheckEntry>,
    pub notes: Vec<String>,
}

impl ReportBundle {
    pub fn new(suite: &str) -> Self {
        ReportBundle { suite: suite.to_string(), checks: vec![], notes: vec![LOWER_BOUND_NOTE.to_string()] }
    }

    pub fn push<T: Serialize>(&mut self, name: &str, hard: bool, pass: bool, detail: &T) -> Result<()> {
        self.checks.push(CheckEntry { name: name.to_string(), hard, pass, detail: serde_json::to_value(detail)? });
        Ok(())
    }

    pub fn push_comparison(&mut self, name: &str, report: &ComparisonReport) -> Result<()> {
        self.push(name, true, report.verdict, report)
    }

    pub fn all_hard_pass(&self) -> bool {
        self.checks.iter().filter(|c| c.hard).all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
