//! Reusable experiment drivers: initial data families and long comoving
//! runs toward the self-similar regime.

use crate::error::{Error, Result};
use crate::evolve::{Evolution, Frame, StepperConfig, Trajectory};
use crate::frlap::{build_operator, FracOrder};
use crate::grid::{total_mass, window_mass, Field, Grid1D, TailModel};
use crate::nonlin::Nonlinearity;
use crate::selfsim::{extract_profile, Extraction, ScalingExponents};
use serde::{Deserialize, Serialize};

/// Initial data families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    /// `a (1 − ((x − c)/w)²)₊` scaled to `mass`.
    Bump { mass: f64, center: f64, width: f64 },
    /// `a (1 + x²)^{-γ/2}` with its power tail, scaled to `mass`; `γ > 1`.
    CauchyTail { mass: f64, gamma: f64 },
    /// The rounded VSS shape `a (1 + x²)^{-s/(1+n)}`; not integrable, so the
    /// tail is kept as data and `amplitude` sets `a`.
    VssLike { amplitude: f64 },
}

impl DataSpec {
    pub fn build(&self, grid: Grid1D, s: f64, n: f64) -> Result<Field> {
        let l = grid.half_width();
        match *self {
            DataSpec::Bump { mass, center, width } => {
                if !(mass > 0.0) || !(width > 0.0) {
                    return Err(Error::OutOfRange("bump needs positive mass and width".into()));
                }
                if center.abs() + width >= l {
                    return Err(Error::OutOfRange(format!("bump support leaves the window |x| <= {l}")));
                }
                let f = Field::from_fn(grid, |x| (1.0 - ((x - center) / width).powi(2)).max(0.0), None);
                let m = window_mass(&f);
                if width < grid.spacing() || !(m > 0.0) {
                    return Err(Error::OutOfRange(format!("bump of width {width} is not resolved by the grid")));
                }
                Ok(Field::from_fn(grid, |x| mass / m * (1.0 - ((x - center) / width).powi(2)).max(0.0), None))
            }
            DataSpec::CauchyTail { mass, gamma } => {
                if !(gamma > 1.0) || !(mass > 0.0) {
                    return Err(Error::OutOfRange("cauchy tail needs gamma > 1 and positive mass".into()));
                }
                let shape = |x: f64| (1.0 + x * x).powf(-gamma / 2.0);
                let amp_at = |r: f64| shape(r) * r.powf(gamma);
                let unit = Field::from_fn(grid, shape, Some(TailModel::power(amp_at(l), amp_at(l), gamma, l)));
                let a = mass / total_mass(&unit)?;
                Ok(Field::from_fn(grid, |x| a * shape(x), Some(TailModel::power(a * amp_at(l), a * amp_at(l), gamma, l))))
            }
            DataSpec::VssLike { amplitude } => {
                let p = s / (1.0 + n);
                let shape = |x: f64| amplitude * (1.0 + x * x).powf(-p);
                let edge = shape(l) * l.powf(2.0 * p);
                Ok(Field::from_fn(grid, shape, Some(TailModel::power(edge, edge, 2.0 * p, l))))
            }
        }
    }
}

/// A long run from near-Dirac data in the frame `S(t) = (1 + t/t_ref)^α`.
///
/// For `t ≫ t_ref` the computational coordinate is `t_ref^α ξ`, so `t_ref`
/// sets where the profile sits on the grid. The profile of mass `M` has
/// width proportional to `M^{-(1+n)α}`; keeping it in place across masses
/// takes `t_ref ∝ M^{1+n}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarenblattSetup {
    pub s: f64,
    pub n: f64,
    pub mass: f64,
    pub half_width: f64,
    pub n_points: usize,
    pub t_ref: f64,
    pub eps: f64,
    pub t_end: f64,
    /// Recorded times, geometric over `[t_end/10^decades, t_end]`.
    pub n_outputs: usize,
    pub decades: f64,
    /// Width of the initial bump, in grid cells.
    pub bump_cells: f64,
    /// Bump centre (0 for centred data).
    pub center: f64,
}

impl BarenblattSetup {
    /// Defaults that put the mass-1 profile at (0.8, 0.2) on a few cells of
    /// the grid with its tail out to `|ξ| ≈ 400`.
    pub fn new(s: f64, n: f64, mass: f64) -> Self {
        BarenblattSetup {
            s,
            n,
            mass,
            half_width: 20.0,
            n_points: 401,
            t_ref: 0.3 * mass.powf(1.0 + n),
            eps: 1e-6,
            t_end: 20.0,
            n_outputs: 41,
            decades: 1.7,
            bump_cells: 4.0,
            center: 0.0,
        }
    }

    pub fn exponents(&self) -> Result<ScalingExponents> {
        ScalingExponents::new(FracOrder::new(self.s)?, self.n)
    }

    pub fn output_times(&self) -> Vec<f64> {
        let t0 = self.t_end * 10f64.powf(-self.decades);
        let m = self.n_outputs.max(2) - 1;
        (0..=m).map(|k| t0 * (self.t_end / t0).powf(k as f64 / m as f64)).collect()
    }

    /// Runs the regularized problem in the comoving frame.
    pub fn run(&self) -> Result<Trajectory> {
        let exps = self.exponents()?;
        if !exps.in_existence_range() {
            return Err(Error::OutOfRange(format!("({}, {}) has no self-similar regime", self.s, self.n)));
        }
        let grid = Grid1D::new(self.half_width, self.n_points)?;
        let op = build_operator(grid, FracOrder::new(self.s)?);
        let nl = Nonlinearity::new(self.n)?;
        let width = self.bump_cells * grid.spacing();
        let u0 = DataSpec::Bump { mass: self.mass, center: self.center, width }.build(grid, self.s, self.n)?;
        let mut cfg = StepperConfig::for_grid(grid, self.s);
        cfg.dt = cfg.dt.min(self.t_ref * 1e-3);
        cfg.dt_min = cfg.dt * 1e-6;
        let frame = Frame::Comoving { rate: exps.alpha, t_ref: self.t_ref };
        Evolution::new(&op, nl.regularized(self.eps)?)
            .with_frame(frame)
            .run(&u0, self.t_end, &self.output_times(), &cfg)
    }

    /// Profile on `|ξ| ≤ xi_max` from the last `count` recorded times.
    pub fn extract(&self, traj: &Trajectory, xi_max: f64, xi_points: usize, count: usize) -> Result<Extraction> {
        let exps = self.exponents()?;
        let len = traj.len();
        let count = count.clamp(2, len - 1);
        let indices: Vec<usize> = (len - count..len).collect();
        extract_profile(traj, &exps, &indices, Grid1D::new(xi_max, xi_points)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_families_have_requested_mass() {
        let g = Grid1D::new(20.0, 401).unwrap();
        let b = DataSpec::Bump { mass: 2.0, center: 1.0, width: 1.0 }.build(g, 0.8, 0.2).unwrap();
        assert!((window_mass(&b) - 2.0).abs() < 1e-12);
        assert!(b.value_at(1.0) > b.value_at(0.0));
        let c = DataSpec::CauchyTail { mass: 1.5, gamma: 1.5 }.build(g, 0.8, 0.2).unwrap();
        assert!((total_mass(&c).unwrap() - 1.5).abs() < 1e-12);
        assert!(c.tail_mismatch().unwrap() < 1e-12);
        let v = DataSpec::VssLike { amplitude: 1.0 }.build(g, 0.8, 0.2).unwrap();
        assert!(v.tail_mismatch().unwrap() < 1e-12);
        // singular at the origin, integrable at infinity
        assert!(matches!(v.tail, Some(TailModel::Power { gamma, .. }) if (gamma - 4.0 / 3.0).abs() < 1e-12));
        assert!(DataSpec::Bump { mass: 1.0, center: 19.5, width: 1.0 }.build(g, 0.8, 0.2).is_err());
        assert!(DataSpec::Bump { mass: 1.0, center: 0.0, width: 0.01 }.build(g, 0.8, 0.2).is_err());
        assert!(DataSpec::CauchyTail { mass: 1.0, gamma: 1.0 }.build(g, 0.8, 0.2).is_err());
    }

    #[test]
    fn output_times_are_geometric() {
        let b = BarenblattSetup::new(0.8, 0.2, 1.0);
        let t = b.output_times();
        assert_eq!(t.len(), 41);
        assert!((t[40] - 20.0).abs() < 1e-12);
        assert!((t[0] - 20.0 * 10f64.powf(-1.7)).abs() < 1e-12);
        let r = t[1] / t[0];
        assert!(t.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-9));
    }

    #[test]
    fn outside_the_existence_range_is_an_error() {
        let b = BarenblattSetup::new(0.6, 0.5, 1.0);
        assert!(b.run().is_err());
    }
}
