//! Self-similar machinery: scaling exponents, the mass-preserving rescaling
//! `T_L`, Barenblatt profile extraction, the profile equation, the very
//! singular solution and the explicit `s = 1/2` logarithmic solution.

use crate::error::{Error, Result};
use crate::evolve::Trajectory;
use crate::frlap::{vss_constant, FracOrder, FrLapOperator, VssConstants};
use crate::grid::{is_rearranged, lp_distance, total_mass, window_mass, Field, Grid1D, TailModel};
use crate::nonlin::Nonlinearity;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingExponents {
    pub s: f64,
    pub n: f64,
    /// `1/(2s − 1 − n)`; positive exactly in the existence range.
    pub alpha: f64,
    /// `2s·α`.
    pub delta: f64,
    /// `2s/(1 + n)`.
    pub gamma_tail: f64,
}

impl ScalingExponents {
    pub fn new(s: FracOrder, n: f64) -> Result<Self> {
        Nonlinearity::new(n)?;
        let s = s.value();
        let alpha = 1.0 / (2.0 * s - 1.0 - n);
        Ok(ScalingExponents { s, n, alpha, delta: 2.0 * s * alpha, gamma_tail: 2.0 * s / (1.0 + n) })
    }

    pub fn in_existence_range(&self) -> bool {
        self.s > 0.5 && self.n < 2.0 * self.s - 1.0
    }

    /// `(p − 1)/(p(2s − 1 − n))`, consistent with `α` as `p → ∞`.
    pub fn alpha_p(&self, p: f64) -> f64 {
        (p - 1.0) / (p * (2.0 * self.s - 1.0 - self.n))
    }

    /// The variant `(p − 1)/(p(2s − 1 + n))`, reported alongside.
    pub fn alpha_p_alt(&self, p: f64) -> f64 {
        (p - 1.0) / (p * (2.0 * self.s - 1.0 + self.n))
    }

    pub fn vss(&self) -> Result<VssConstants> {
        vss_constant(FracOrder::new(self.s)?, self.n)
    }

    fn require_existence(&self) -> Result<()> {
        if self.in_existence_range() {
            Ok(())
        } else {
            Err(Error::OutOfRange(format!(
                "(s, n) = ({}, {}) outside the existence range s > 1/2, 0 <= n < 2s - 1",
                self.s, self.n
            )))
        }
    }
}

/// `T_L f(x) = L f(Lx)`, resampled on the same grid, and the companion time
/// factor `L^{2s−(1+n)}`: if `u` solves the equation so does
/// `L u(Lx, L^{2s−(1+n)} t)`.
pub fn rescale_t_l(f: &Field, l_factor: f64, nl: Nonlinearity, s: FracOrder) -> Result<(Field, f64)> {
    if !(l_factor > 0.0) {
        return Err(Error::OutOfRange(format!("scale factor must be positive, got {l_factor}")));
    }
    let time_scale = l_factor.powf(2.0 * s.value() - 1.0 - nl.n());
    let g = f.grid;
    let values = g.nodes().iter().map(|x| l_factor * f.value_at(l_factor * x)).collect();
    let tail = f.tail.map(|t| match t {
        TailModel::Power { left, right, gamma, radius } => {
            let c = l_factor.powf(1.0 - gamma);
            TailModel::Power { left: c * left, right: c * right, gamma, radius: radius.min(g.half_width()) }
        }
        other => other,
    });
    Ok((Field::new(g, values, tail)?, time_scale))
}

/// A profile `F(ξ)` on a ξ grid with its tail, mass and tail fit.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfSimilarProfile {
    pub field: Field,
    pub mass: f64,
    pub fit: TailFit,
}

/// Tail fit over the last decade of the window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Free least-squares slope of `−log F` against `log r`.
    pub gamma_fit: f64,
    /// Prefactor of the free fit.
    pub prefactor_fit: f64,
    /// `exp(mean(log F + γ log r))` with `γ = 2s/(1+n)`.
    pub c_inf: f64,
}

impl SelfSimilarProfile {
    pub fn from_field(field: Field, gamma_tail: f64) -> Result<Self> {
        let mass = total_mass(&field)?;
        let fit = tail_fit(&field, gamma_tail);
        Ok(SelfSimilarProfile { field, mass, fit })
    }

    pub fn xi(&self) -> Vec<f64> {
        self.field.grid.nodes()
    }

    pub fn values(&self) -> &[f64] {
        &self.field.values
    }

    pub fn sup(&self) -> f64 {
        self.field.max()
    }

    pub fn is_rearranged(&self, tol: f64) -> bool {
        is_rearranged(&self.field, tol)
    }

    /// Symmetrized `J(r) = F(r) r^{γ}` at the nonnegative nodes.
    pub fn tail_law(&self, gamma: f64) -> Vec<(f64, f64)> {
        let g = self.field.grid;
        let n = g.len();
        (g.center()..n)
            .map(|i| {
                let r = g.x(i);
                (r, 0.5 * (self.field.values[i] + self.field.values[n - 1 - i]) * r.powf(gamma))
            })
            .collect()
    }
}

/// Least-squares fits of `log F` against `log r` on `r ∈ [R/10, R]`, both
/// sides pooled, `R` the window half-width.
pub fn tail_fit(f: &Field, gamma_tail: f64) -> TailFit {
    let g = f.grid;
    let l = g.half_width();
    let mut pts = vec![];
    for i in 0..g.len() {
        let r = g.x(i).abs();
        if r >= 0.1 * l && f.values[i] > 0.0 {
            pts.push((r.ln(), f.values[i].ln()));
        }
    }
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return TailFit { gamma_fit: f64::NAN, prefactor_fit: f64::NAN, c_inf: f64::NAN };
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let c_inf = pts.iter().map(|p| p.1 + gamma_tail * p.0).sum::<f64>() / m;
    TailFit { gamma_fit: -slope, prefactor_fit: (my - slope * mx).exp(), c_inf: c_inf.exp() }
}

/// Profile extraction with its convergence record.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub profile: SelfSimilarProfile,
    /// Times of the rescaled snapshots.
    pub times: Vec<f64>,
    /// `‖F_{t_{j+1}} − F_{t_j}‖₁` over the ξ window.
    pub l1_distances: Vec<f64>,
}

/// Forms `F_t(ξ) = t^α v(ξ t^α, t)` on `xi_grid` for the recorded indices
/// `indices` and returns the last one. The regularization shift is left out:
/// it is a constant background, not part of the profile.
pub fn extract_profile(traj: &Trajectory, exps: &ScalingExponents, indices: &[usize], xi_grid: Grid1D) -> Result<Extraction> {
    exps.require_existence()?;
    if indices.len() < 2 {
        return Err(Error::OutOfRange("profile extraction needs at least two snapshot times".into()));
    }
    let mut profiles = vec![];
    let mut times = vec![];
    for &k in indices {
        let t = *traj.times.get(k).ok_or_else(|| Error::OutOfRange(format!("no recorded index {k}")))?;
        if !(t > 0.0) {
            return Err(Error::OutOfRange("snapshot times must be positive".into()));
        }
        profiles.push(rescale_snapshot(&traj.states[k], t, exps.alpha, xi_grid)?);
        times.push(t);
    }
    let l1_distances: Vec<f64> =
        profiles.windows(2).map(|w| lp_distance(&w[0], &w[1], 1.0)).collect::<Result<_>>()?;
    if l1_distances.len() >= 2 && l1_distances.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::NotConverging);
    }
    let last = profiles.pop().expect("at least two profiles");
    Ok(Extraction { profile: SelfSimilarProfile::from_field(last, exps.gamma_tail)?, times, l1_distances })
}

/// `t^α f(ξ t^α)` on `xi_grid`.
pub fn rescale_snapshot(f: &Field, t: f64, alpha: f64, xi_grid: Grid1D) -> Result<Field> {
    let a = t.powf(alpha);
    let values: Vec<f64> = xi_grid.nodes().iter().map(|xi| a * f.value_at(xi * a)).collect();
    let l = xi_grid.half_width();
    let inside = a * l < f.grid.half_width();
    let tail = f.tail.map(|tm| match tm {
        // window data beyond the ξ range: continue the edge values with the same decay
        TailModel::Power { gamma, .. } if inside => {
            TailModel::Power { left: values[0] * l.powf(gamma), right: values[values.len() - 1] * l.powf(gamma), gamma, radius: l }
        }
        TailModel::Power { left, right, gamma, .. } => {
            let c = a.powf(1.0 - gamma);
            TailModel::Power { left: c * left, right: c * right, gamma, radius: l }
        }
        other => other,
    });
    Field::new(xi_grid, values, tail)
}

/// `F_M(ξ) = M^{2sα} F(M^{(1+n)α} ξ)` for a unit-mass `F`.
pub fn mass_rescale_profile(f: &SelfSimilarProfile, m: f64, exps: &ScalingExponents) -> Result<SelfSimilarProfile> {
    if !(m > 0.0) {
        return Err(Error::OutOfRange(format!("mass must be positive, got {m}")));
    }
    if (f.mass - 1.0).abs() > 1e-2 {
        return Err(Error::PreconditionFailed(format!("profile mass {} is not 1", f.mass)));
    }
    let field = mass_rescale_field(&f.field, m, exps)?;
    SelfSimilarProfile::from_field(field, exps.gamma_tail)
}

/// Scales a profile of mass `M₀` to unit mass with the same law.
pub fn normalize_profile(f: &SelfSimilarProfile, exps: &ScalingExponents) -> Result<SelfSimilarProfile> {
    let field = mass_rescale_field(&f.field, 1.0 / f.mass, exps)?;
    SelfSimilarProfile::from_field(field, exps.gamma_tail)
}

fn mass_rescale_field(f: &Field, m: f64, exps: &ScalingExponents) -> Result<Field> {
    exps.require_existence()?;
    let amp = m.powf(exps.delta);
    let stretch = m.powf((1.0 + exps.n) * exps.alpha);
    let g = f.grid;
    let values = g.nodes().iter().map(|xi| amp * f.value_at(stretch * xi)).collect();
    let tail = f.tail.map(|t| match t {
        TailModel::Power { left, right, gamma, radius } => {
            let c = amp * stretch.powf(-gamma);
            TailModel::Power { left: c * left, right: c * right, gamma, radius }
        }
        other => other,
    });
    Field::new(g, values, tail)
}

/// `Φ(F)` as a signed field whose tail follows `Φ` applied to the power tail
/// of `F`: `−A^{-n}|ξ|^{γn}` for n > 0, `log A − γ log|ξ|` for n = 0.
pub fn phi_of_profile(f: &Field, nl: Nonlinearity) -> Result<Field> {
    if f.values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NonpositiveProfile);
    }
    let values = f.values.iter().map(|v| nl.phi_floored(*v)).collect();
    let tail = match f.tail {
        Some(TailModel::Power { left, right, gamma, radius }) if left > 0.0 && right > 0.0 => Some(if nl.is_log() {
            TailModel::Log { left: left.ln(), right: right.ln(), slope: -gamma, radius }
        } else {
            let n = nl.n();
            TailModel::Power { left: -left.powf(-n), right: -right.powf(-n), gamma: -gamma * n, radius }
        }),
        _ => return Err(Error::PreconditionFailed("profile needs a positive power tail".into())),
    };
    Field::signed(f.grid, values, tail)
}

/// Residual of the cumulative profile equation
/// `∫_{r₀}^x (−Δ)^s Φ(F) dr = α(xF(x) − r₀F(r₀))`,
/// evaluated for `|x| ≥ r₀` on each side, relative to `max |αxF|` there.
/// `r₀ = 0` for Barenblatt profiles; the singular VSS needs `r₀ > 0`.
pub fn profile_equation_residual(
    f: &SelfSimilarProfile,
    op: &FrLapOperator,
    nl: Nonlinearity,
    exps: &ScalingExponents,
    r0: f64,
) -> Result<f64> {
    let g = f.field.grid;
    if g != op.grid() {
        return Err(Error::GridMismatch);
    }
    let phi = phi_of_profile(&f.field, nl)?;
    let a = op.apply(&phi)?.values;
    let h = g.spacing();
    let c = g.center();
    let n = g.len();
    let start = (r0 / h).round() as usize;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for dir in [1isize, -1] {
        let idx = |m: usize| (c as isize + dir * m as isize) as usize;
        let x0 = g.x(idx(start));
        let base = exps.alpha * x0 * f.field.values[idx(start)];
        let mut integral = 0.0;
        for m in start..=(n - 1 - c) {
            if m > start {
                integral += dir as f64 * 0.5 * h * (a[idx(m - 1)] + a[idx(m)]);
            }
            let rhs = exps.alpha * g.x(idx(m)) * f.field.values[idx(m)];
            worst = worst.max((integral - (rhs - base)).abs());
            scale = scale.max(rhs.abs());
        }
    }
    Ok(worst / scale)
}

/// `C t^{1/(1+n)} |x|^{-γ}` with the origin node capped at its neighbours'
/// value and the exact tail attached.
pub fn vss_field(exps: &ScalingExponents, t: f64, grid: Grid1D) -> Result<Field> {
    exps.require_existence()?;
    if !(t > 0.0) {
        return Err(Error::OutOfRange(format!("time must be positive, got {t}")));
    }
    let amp = exps.vss()?.c * t.powf(1.0 / (1.0 + exps.n));
    let gamma = exps.gamma_tail;
    let h = grid.spacing();
    let values = grid.nodes().iter().map(|x| amp * x.abs().max(h).powf(-gamma)).collect();
    Field::new(grid, values, Some(TailModel::power(amp, amp, gamma, grid.half_width())))
}

/// The VSS as a self-similar profile `C|ξ|^{-γ}`.
pub fn vss_profile(exps: &ScalingExponents, grid: Grid1D) -> Result<SelfSimilarProfile> {
    // the VSS equals t^{-α} F(x t^{-α}) with F = C|ξ|^{-γ}; t = 1 gives F
    let field = vss_field(exps, 1.0, grid)?;
    let mass = window_mass(&field);
    let fit = tail_fit(&field, exps.gamma_tail);
    Ok(SelfSimilarProfile { field, mass, fit })
}

/// `U(x,t) = 2λ(T − t)/(λ² + x²)`, zero from `t = T` on.
pub fn explicit_log_half_solution(lambda: f64, t_ext: f64, grid: Grid1D, t: f64) -> Result<Field> {
    if !(lambda > 0.0) || !(t_ext > 0.0) {
        return Err(Error::OutOfRange("lambda and T must be positive".into()));
    }
    if t >= t_ext {
        return Ok(Field::zeros(grid));
    }
    let a = 2.0 * lambda * (t_ext - t);
    Field::new(
        grid,
        grid.nodes().iter().map(|x| a / (lambda * lambda + x * x)).collect(),
        Some(TailModel::power(a, a, 2.0, grid.half_width())),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frlap::build_operator;

    fn exps(s: f64, n: f64) -> ScalingExponents {
        ScalingExponents::new(FracOrder::new(s).unwrap(), n).unwrap()
    }

    #[test]
    fn exponents() {
        let e = exps(0.8, 0.2);
        assert!((e.alpha - 2.5).abs() < 1e-12);
        assert!((e.delta - 4.0).abs() < 1e-12);
        assert!((e.gamma_tail - 4.0 / 3.0).abs() < 1e-12);
        assert!(e.in_existence_range());
        assert!((e.alpha_p(1e12) - 2.5).abs() < 1e-9);
        assert!((e.alpha_p_alt(2.0) - 0.5 / 0.8).abs() < 1e-12);
        assert_eq!(e.alpha_p(1.0), 0.0);
        assert!(!exps(0.6, 0.5).in_existence_range());
        assert!((exps(0.75, 0.0).alpha - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rescaling_identity_and_mass() {
        let g = Grid1D::new(30.0, 1201).unwrap();
        let s = FracOrder::new(0.8).unwrap();
        let nl = Nonlinearity::new(0.2).unwrap();
        let f = Field::from_fn(g, |x| (-x * x).exp(), None);
        let (same, ts) = rescale_t_l(&f, 1.0, nl, s).unwrap();
        assert!(lp_distance(&same, &f, f64::INFINITY).unwrap() < 1e-14);
        assert_eq!(ts, 1.0);
        let (r, ts) = rescale_t_l(&f, 2.0, nl, s).unwrap();
        assert!((ts - 2f64.powf(0.4)).abs() < 1e-14);
        let m0 = total_mass(&f).unwrap();
        assert!((total_mass(&r).unwrap() - m0).abs() < 1e-3 * m0);
        // T_2 T_3 = T_6
        let (a, _) = rescale_t_l(&rescale_t_l(&f, 3.0, nl, s).unwrap().0, 2.0, nl, s).unwrap();
        let (b, _) = rescale_t_l(&f, 6.0, nl, s).unwrap();
        assert!(lp_distance(&a, &b, 1.0).unwrap() < 2e-3);
    }

    #[test]
    fn explicit_solution_mass_and_extinction() {
        let g = Grid1D::new(200.0, 4001).unwrap();
        let u = explicit_log_half_solution(1.0, 1.0, g, 0.25).unwrap();
        let m = total_mass(&u).unwrap();
        assert!((m - 2.0 * std::f64::consts::PI * 0.75).abs() < 1e-3, "mass {m}");
        let z = explicit_log_half_solution(1.0, 1.0, g, 1.0).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
        let u2 = explicit_log_half_solution(2.0, 1.0, g, 0.0).unwrap();
        assert!((total_mass(&u2).unwrap() - 2.0 * std::f64::consts::PI).abs() < 2e-3);
    }

    #[test]
    fn vss_scaling_and_tail() {
        let e = exps(0.8, 0.2);
        let g = Grid1D::new(10.0, 201).unwrap();
        let a = vss_field(&e, 1.0, g).unwrap();
        let b = vss_field(&e, 2.0, g).unwrap();
        let ratio = 2f64.powf(1.0 / 1.2);
        for i in 0..g.len() {
            assert!((b.values[i] - ratio * a.values[i]).abs() < 1e-12 * b.values[i]);
        }
        match b.tail {
            Some(TailModel::Power { left, gamma, .. }) => {
                assert!((left - e.vss().unwrap().c * ratio).abs() < 1e-12);
                assert!((gamma - 4.0 / 3.0).abs() < 1e-12);
            }
            _ => panic!("missing tail"),
        }
        assert!(vss_field(&exps(0.6, 0.5), 1.0, g).is_err());
    }

    #[test]
    fn vss_profile_solves_profile_equation() {
        for (s, n) in [(0.8, 0.2), (0.75, 0.0)] {
            let e = exps(s, n);
            let g = Grid1D::new(10.0, 1001).unwrap();
            let op = build_operator(g, FracOrder::new(s).unwrap());
            let p = vss_profile(&e, g).unwrap();
            let nl = Nonlinearity::new(n).unwrap();
            let r = profile_equation_residual(&p, &op, nl, &e, 1.0).unwrap();
            assert!(r < 0.02, "({s}, {n}) residual {r}");
            let mut bad = p.clone();
            for (x, v) in g.nodes().iter().zip(bad.field.values.iter_mut()) {
                *v *= 1.0 + 0.2 * x.cos();
            }
            let rb = profile_equation_residual(&bad, &op, nl, &e, 1.0).unwrap();
            assert!(rb > 5.0 * r, "perturbed {rb} vs {r}");
        }
    }

    #[test]
    fn mass_rescaling() {
        // a (b² + ξ²)^{-2/3} has mass close to 1 and a clean ξ^{-4/3} tail
        let e = exps(0.8, 0.2);
        let g = Grid1D::new(20.0, 4001).unwrap();
        let (a, b2) = (0.08, 0.04);
        let f = Field::from_fn(g, |x| a * (b2 + x * x).powf(-2.0 / 3.0), None);
        let f = Field { tail: Some(TailModel::power(a, a, 4.0 / 3.0, 20.0)), ..f };
        let p = SelfSimilarProfile::from_field(f, e.gamma_tail).unwrap();
        let unit = normalize_profile(&p, &e).unwrap();
        assert!((unit.mass - 1.0).abs() < 1e-2, "mass {}", unit.mass);
        let same = mass_rescale_profile(&unit, 1.0, &e).unwrap();
        assert!(lp_distance(&same.field, &unit.field, f64::INFINITY).unwrap() < 1e-14);
        let m = mass_rescale_profile(&unit, 1.2, &e).unwrap();
        assert!((m.mass - 1.2).abs() < 0.012, "mass {}", m.mass);
        assert!((m.sup() / unit.sup() - 1.2f64.powf(4.0)).abs() < 1e-6);
    }

    #[test]
    fn synthetic_self_similar_extraction() {
        let e = exps(0.8, 0.2);
        let xi = Grid1D::new(10.0, 201).unwrap();
        let x = Grid1D::new(400.0, 4001).unwrap();
        let prof = |z: f64| (1.0 + z * z).powf(-2.0 / 3.0);
        let times = [1.0, 2.0, 3.0];
        let states = times
            .iter()
            .map(|t: &f64| {
                let a = t.powf(e.alpha);
                let tail = TailModel::power(a.powf(4.0 / 3.0 - 1.0), a.powf(4.0 / 3.0 - 1.0), 4.0 / 3.0, 400.0);
                Field::from_fn(x, |y| prof(y / a) / a, Some(tail))
            })
            .collect();
        let traj = Trajectory {
            times: times.to_vec(),
            states,
            eps: 0.0,
            frame: crate::evolve::Frame::Fixed,
            records: vec![],
        };
        let ex = extract_profile(&traj, &e, &[0, 1, 2], xi).unwrap();
        for (z, v) in xi.nodes().iter().zip(ex.profile.values()) {
            assert!((v - prof(*z)).abs() < 2e-3, "ξ = {z}: {v}");
        }
        assert!(ex.profile.is_rearranged(1e-9));
    }
}
