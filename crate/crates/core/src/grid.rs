//! Uniform truncated grids on the line and nonnegative fields with an
//! analytic far-field tail, so whole-line integrals are computable.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform grid on `[-L, L]` with an odd number of nodes (x = 0 is a node).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    half_width: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!("half width must be positive, got {half_width}")));
        }
        if n_points < 3 || n_points % 2 == 0 {
            return Err(Error::InvalidGrid(format!("n_points must be odd and >= 3, got {n_points}")));
        }
        Ok(Grid1D { half_width, n_points })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n_points - 1) as f64
    }

    /// Index of the node at x = 0.
    pub fn center(&self) -> usize {
        (self.n_points - 1) / 2
    }

    pub fn x(&self, i: usize) -> f64 {
        // signed offset from the center keeps the grid exactly symmetric
        (i as f64 - self.center() as f64) * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Same node count, half width multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Grid1D::new(self.half_width * factor, self.n_points)
    }
}

/// Analytic model of a field outside the grid window `|x| > L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TailModel {
    /// `A_± |x|^{-gamma}`. A negative exponent describes growth.
    Power { left: f64, right: f64, gamma: f64, radius: f64 },
    /// `offset_± + slope·ln|x|`.
    Log { left: f64, right: f64, slope: f64, radius: f64 },
}

impl TailModel {
    pub fn power(left: f64, right: f64, gamma: f64, radius: f64) -> Self {
        TailModel::Power { left, right, gamma, radius }
    }

    pub fn constant(c: f64, radius: f64) -> Self {
        TailModel::Power { left: c, right: c, gamma: 0.0, radius }
    }

    /// Value at `x` (|x| is assumed beyond the window).
    pub fn eval(&self, x: f64) -> f64 {
        let r = x.abs();
        match *self {
            TailModel::Power { left, right, gamma, .. } => {
                let a = if x < 0.0 { left } else { right };
                if gamma == 0.0 {
                    a
                } else {
                    a * r.powf(-gamma)
                }
            }
            TailModel::Log { left, right, slope, .. } => {
                let a = if x < 0.0 { left } else { right };
                a + slope * r.ln()
            }
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            TailModel::Power { radius, .. } | TailModel::Log { radius, .. } => radius,
        }
    }

    /// Mass carried by `|x| > l`, split as (left, right).
    pub fn mass_beyond(&self, l: f64) -> Result<(f64, f64)> {
        match *self {
            TailModel::Power { left, right, gamma, .. } => {
                if left == 0.0 && right == 0.0 {
                    return Ok((0.0, 0.0));
                }
                if gamma <= 1.0 {
                    return Err(Error::TailNotIntegrable(gamma));
                }
                let unit = l.powf(1.0 - gamma) / (gamma - 1.0);
                Ok((left * unit, right * unit))
            }
            TailModel::Log { .. } => Err(Error::TailNotIntegrable(0.0)),
        }
    }

    /// Multiplies the amplitudes (power) or offsets and slope (log) by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        match *self {
            TailModel::Power { left, right, gamma, radius } => {
                TailModel::Power { left: c * left, right: c * right, gamma, radius }
            }
            TailModel::Log { left, right, slope, radius } => {
                TailModel::Log { left: c * left, right: c * right, slope: c * slope, radius }
            }
        }
    }
}

/// Sampled function on a [`Grid1D`] with optional tail model.
///
/// Solution fields are nonnegative; [`Field::new`] enforces that. Operator
/// inputs such as `Φ(u)` may be signed and are built with [`Field::signed`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub tail: Option<TailModel>,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<f64>, tail: Option<TailModel>) -> Result<Self> {
        let f = Field::signed(grid, values, tail)?;
        if let Some((i, v)) = f.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::InvalidField(format!("negative or NaN value {v} at node {i}")));
        }
        Ok(f)
    }

    pub fn signed(grid: Grid1D, values: Vec<f64>, tail: Option<TailModel>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values, tail })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Field { grid, values: vec![0.0; grid.len()], tail: None }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid1D, f: F, tail: Option<TailModel>) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.x(i))).collect();
        Field { grid, values, tail }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Value at an arbitrary point: linear interpolation inside the window,
    /// tail model outside (zero without a tail).
    pub fn value_at(&self, x: f64) -> f64 {
        let l = self.grid.half_width();
        if x.abs() > l {
            return self.tail.map_or(0.0, |t| t.eval(x));
        }
        let h = self.grid.spacing();
        let pos = (x + l) / h;
        let i = (pos.floor() as usize).min(self.grid.len() - 2);
        let w = pos - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }

    /// Relative mismatch between the tail model and the boundary values;
    /// `None` when there is no tail or a side carries no amplitude.
    pub fn tail_mismatch(&self) -> Option<f64> {
        let tail = self.tail?;
        let l = self.grid.half_width();
        let n = self.grid.len();
        let mut worst: f64 = 0.0;
        for (x, v) in [(-l, self.values[0]), (l, self.values[n - 1])] {
            let model = tail.eval(x);
            if model != 0.0 {
                worst = worst.max((v - model).abs() / model.abs());
            }
        }
        Some(worst)
    }
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    let inner: f64 = values.iter().sum();
    h * (inner - 0.5 * (values[0] + values[n - 1]))
}

/// Mass carried by the grid window alone (trapezoidal rule).
pub fn window_mass(f: &Field) -> f64 {
    trapezoid(&f.values, f.grid.spacing())
}

/// Tail mass split as (left, right); zero without a tail.
pub fn tail_mass(f: &Field) -> Result<(f64, f64)> {
    match f.tail {
        None => Ok((0.0, 0.0)),
        Some(t) => t.mass_beyond(f.grid.half_width()),
    }
}

/// `∫ f dx` over the whole line: trapezoid on the window plus analytic tails.
pub fn total_mass(f: &Field) -> Result<f64> {
    let (l, r) = tail_mass(f)?;
    Ok(window_mass(f) + l + r)
}

/// `V_i = ∫_{-∞}^{x_i} f dx`, including the left tail.
pub fn cumulative_mass(f: &Field) -> Result<Vec<f64>> {
    let (left, _) = tail_mass(f)?;
    let h = f.grid.spacing();
    let mut out = Vec::with_capacity(f.values.len());
    let mut acc = left;
    out.push(acc);
    for w in f.values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    Ok(out)
}

/// Symmetric about 0 and nonincreasing on x > 0, both up to `tol·max f`.
pub fn is_rearranged(f: &Field, tol: f64) -> bool {
    let n = f.values.len();
    let slack = tol * f.max().abs();
    let symmetric = (0..n).all(|i| (f.values[i] - f.values[n - 1 - i]).abs() <= slack);
    let c = f.grid.center();
    let monotone = f.values[c..].windows(2).all(|w| w[1] <= w[0] + slack);
    symmetric && monotone
}

/// Sum of the positive part of `f - g` (window and tails), for L¹ checks.
/// Both fields must share a grid.
pub fn positive_part_mass(f: &Field, g: &Field) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    let diff: Vec<f64> = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).max(0.0)).collect();
    let mut m = trapezoid(&diff, f.grid.spacing());
    if let (Some(TailModel::Power { left: la, right: ra, gamma: ga, .. }), Some(TailModel::Power { left: lb, right: rb, gamma: gb, .. })) = (f.tail, g.tail) {
        let l = f.grid.half_width();
        // tails with equal exponent only; otherwise leave the far field out
        if (ga - gb).abs() < 1e-12 && ga > 1.0 {
            let unit = l.powf(1.0 - ga) / (ga - 1.0);
            m += ((la - lb).max(0.0) + (ra - rb).max(0.0)) * unit;
        }
    }
    Ok(m)
}

/// `‖f − g‖_p` over the window (trapezoid); grids must match.
pub fn lp_distance(f: &Field, g: &Field, p: f64) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    if p.is_infinite() {
        return Ok(f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let d: Vec<f64> = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs().powf(p)).collect();
    Ok(trapezoid(&d, f.grid.spacing()).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_is_symmetric() {
        let g = Grid1D::new(3.0, 7).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.x(g.center()), 0.0);
        for i in 0..7 {
            assert_eq!(g.x(i), -g.x(6 - i));
        }
        assert!(Grid1D::new(1.0, 8).is_err());
        assert!(Grid1D::new(-1.0, 9).is_err());
    }

    #[test]
    fn zero_field_has_no_mass() {
        let g = Grid1D::new(5.0, 101).unwrap();
        let f = Field::zeros(g);
        assert_eq!(total_mass(&f).unwrap(), 0.0);
        assert!(cumulative_mass(&f).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hat_area() {
        let g = Grid1D::new(4.0, 801).unwrap();
        let f = Field::from_fn(g, |x| (1.0 - x.abs()).max(0.0), None);
        assert!((total_mass(&f).unwrap() - 1.0).abs() < 1e-12);
        // indicator-like plateau of height 1 on [−1, 1]
        let f = Field::from_fn(g, |x| if x.abs() <= 1.0 { 1.0 } else { 0.0 }, None);
        assert!((total_mass(&f).unwrap() - 2.0).abs() < 2.0 * g.spacing());
    }

    #[test]
    fn lorentzian_with_tail() {
        let g = Grid1D::new(200.0, 4001).unwrap();
        let f = Field::from_fn(g, |x| 1.0 / (1.0 + x * x), Some(TailModel::power(1.0, 1.0, 2.0, 200.0)));
        let m = total_mass(&f).unwrap();
        assert!((m - PI).abs() < 0.01 * PI, "{m}");
        let v = cumulative_mass(&f).unwrap();
        for i in (0..g.len()).step_by(97) {
            let exact = PI / 2.0 + g.x(i).atan();
            assert!((v[i] - exact).abs() < 0.01 * exact, "i = {i}");
        }
        assert!((v[g.center()] - m / 2.0).abs() < 1e-9);
        let (_, right) = tail_mass(&f).unwrap();
        assert!((v[g.len() - 1] + right - m).abs() < 1e-12);
    }

    #[test]
    fn non_integrable_tail() {
        let g = Grid1D::new(10.0, 11).unwrap();
        let f = Field::new(g, vec![1.0; 11], Some(TailModel::power(1.0, 1.0, 0.8, 10.0))).unwrap();
        assert_eq!(total_mass(&f), Err(Error::TailNotIntegrable(0.8)));
    }

    #[test]
    fn rearranged_detection() {
        let g = Grid1D::new(10.0, 201).unwrap();
        let bump = Field::from_fn(g, |x| (-x * x).exp(), None);
        assert!(is_rearranged(&bump, 1e-9));
        let h = g.spacing();
        let shifted = Field::from_fn(g, |x| (-(x - 5.0 * h).powi(2)).exp(), None);
        assert!(!is_rearranged(&shifted, 1e-3));
    }

    #[test]
    fn mass_converges_second_order() {
        // truncated window: endpoint derivative terms make the error O(h²)
        let f = |x: f64| 1.0 / (1.0 + x * x).powi(2);
        let exact = 0.3 + 3f64.atan();
        let err = |n| (total_mass(&Field::from_fn(Grid1D::new(3.0, n).unwrap(), f, None)).unwrap() - exact).abs();
        let (e1, e2) = (err(31), err(61));
        assert!(e2 < e1 / 3.5 && e2 > e1 / 4.5, "{e1} {e2}");
    }

    #[test]
    fn interpolation_and_tail() {
        let g = Grid1D::new(2.0, 5).unwrap();
        let f = Field::new(g, vec![0.25, 0.5, 1.0, 0.5, 0.25], Some(TailModel::power(1.0, 1.0, 2.0, 2.0))).unwrap();
        assert_eq!(f.value_at(0.5), 0.75);
        assert_eq!(f.value_at(4.0), 1.0 / 16.0);
        assert!(f.tail_mismatch().unwrap() < 1e-12);
    }
}
