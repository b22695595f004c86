//! The 1D fractional Laplacian `(−Δ)^s`, 0 < s < 1, as a singular-integral
//! quadrature on a uniform grid, plus closed-form symbols of powers and of
//! the logarithm.
//!
//! Discretization, in units of the grid spacing `h` (u = (y − x_i)/h):
//!
//! * cells `[k, k+1]`, k ≥ 1, integrate the kernel exactly against the
//!   piecewise-linear interpolant of the field;
//! * the near cell `[−1, 1]` uses the local quadratic model, giving the
//!   `−δ²f_i/(2 − 2s)` term;
//! * the interpolation defect of a quadratic summed over all far cells is
//!   added back through `Q(s)`, making the scheme exact on quadratics;
//! * beyond the window, one virtual node on each side at distance `h`
//!   takes its value from the tail model and the rest of the line is
//!   integrated analytically or adaptively after `y = a/t`.
//!
//! The in-window matrix is symmetric Toeplitz with positive off-diagonal
//! weights, so `I + dt·M·D` is an M-matrix for any positive diagonal `D`.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D, TailModel};
use crate::quad;
use crate::special::{gamma, ln_gamma_signed};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Fractional order `s ∈ (0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(s: f64) -> Result<Self> {
        if s > 0.0 && s < 1.0 {
            Ok(FracOrder(s))
        } else {
            Err(Error::OutOfRange(format!("fractional order must lie in (0, 1), got {s}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `c(1, s) = s·4^s·Γ(1/2 + s) / (√π·Γ(1 − s))`.
pub fn normalization(s: FracOrder) -> f64 {
    let s = s.value();
    s * 4f64.powf(s) * gamma(0.5 + s).unwrap() / (PI.sqrt() * gamma(1.0 - s).unwrap())
}

const TAIL_TOL: f64 = 1e-10;

/// Discrete `(−Δ)^s` on a fixed grid.
#[derive(Clone, Debug)]
pub struct FrLapOperator {
    grid: Grid1D,
    s: FracOrder,
    normalization: f64,
    /// `c(1,s)·h^{-2s}`.
    scale: f64,
    /// Toeplitz weights `w[m]`, m ≥ 1 (entry 0 unused).
    weights: Vec<f64>,
    /// Diagonal entry (identical for every node).
    diagonal: f64,
    /// Weight of the virtual node at distance `m` outside the window.
    virtual_weights: Vec<f64>,
}

impl FrLapOperator {
    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn order(&self) -> FracOrder {
        self.s
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// `c(1,s)·h^{-2s}`, the factor turning dimensionless weights into the operator.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Matrix entry `(i, j)` of the in-window operator (dimensional).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.scale * self.diagonal
        } else {
            -self.scale * self.weights[i.abs_diff(j)]
        }
    }

    /// The diagonal correction contributed by the near cell, `∝ h^{-2s}`.
    pub fn diag_correction(&self) -> f64 {
        let s = self.s.value();
        self.scale * 2.0 * near_coefficient(s)
    }

    /// Dense in-window matrix `M` (the operator is `M f − b(tail)`).
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        DMatrix::from_fn(n, n, |i, j| self.weight(i, j))
    }

    /// In-window part `M f`.
    pub fn matvec(&self, values: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        assert_eq!(values.len(), n);
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = self.diagonal * values[i];
                for (j, v) in values.iter().enumerate() {
                    if j != i {
                        acc -= self.weights[i.abs_diff(j)] * v;
                    }
                }
                self.scale * acc
            })
            .collect()
    }

    /// Contribution `b_i` of everything outside the window: the virtual
    /// nodes plus the tail integral. `apply = M f − b`.
    pub fn boundary_source(&self, tail: Option<&TailModel>) -> Vec<f64> {
        match tail {
            None => vec![0.0; self.grid.len()],
            Some(t) => self.boundary_source_fn(|y| t.eval(y)),
        }
    }

    /// As [`boundary_source`](Self::boundary_source) for an arbitrary far
    /// field `far(y)`, `|y| > L`.
    pub fn boundary_source_fn<T: Fn(f64) -> f64 + Sync>(&self, far: T) -> Vec<f64> {
        let n = self.grid.len();
        let l = self.grid.half_width();
        let h = self.grid.spacing();
        let c = self.normalization;
        let p = 1.0 + 2.0 * self.s.value();
        let edge = l + h;
        let (v_left, v_right) = (far(-edge), far(edge));
        (0..n)
            .into_par_iter()
            .map(|i| {
                let x = self.grid.x(i);
                let right_dist = n - i; // cells to the right virtual node
                let left_dist = i + 1;
                let virt = self.virtual_weights[right_dist] * v_right + self.virtual_weights[left_dist] * v_left;
                let right = quad::integrate_to_infinity(|y| far(y) * (y - x).powf(-p), edge, 1e-300, TAIL_TOL);
                let left = quad::integrate_to_infinity(|y| far(-y) * (y + x).powf(-p), edge, 1e-300, TAIL_TOL);
                self.scale * virt + c * (right.value + left.value)
            })
            .collect()
    }

    /// `(−Δ)^s f` at the grid nodes; the result carries no tail.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        if f.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let m = self.matvec(&f.values);
        let b = self.boundary_source(f.tail.as_ref());
        let values = m.iter().zip(&b).map(|(a, b)| a - b).collect();
        Field::signed(self.grid, values, None)
    }
}

/// `1/(2 − 2s) − Q(s)`: coefficient of `−δ²f_i` from the near cell and the
/// quadratic correction.
fn near_coefficient(s: f64) -> f64 {
    1.0 / (2.0 - 2.0 * s) - quadratic_defect_sum(s)
}

/// `Q(s) = Σ_{k≥1} ∫_k^{k+1} (u−k)(k+1−u) u^{-1-2s} du`.
fn quadratic_defect_sum(s: f64) -> f64 {
    const K: usize = 4000;
    let p = 1.0 + 2.0 * s;
    let mut q = 0.0;
    for k in 1..=K {
        let kf = k as f64;
        q += quad::fixed15(|u: f64| (u - kf) * (kf + 1.0 - u) * u.powf(-p), kf, kf + 1.0);
    }
    // remainder: q_k ≈ m^{-p}/6 + p(p+1) m^{-p-2}/240 at midpoints m = k + 1/2,
    // summed by the midpoint rule ∫_{K+1}^∞
    let a = (K + 1) as f64;
    q + a.powf(1.0 - p) / (6.0 * (p - 1.0)) + p * a.powf(-1.0 - p) / 240.0
}

/// Per-cell integrals `B_k = ∫(k+1−u)u^{-1-2s}`, `C_k = ∫(u−k)u^{-1-2s}` on `[k, k+1]`.
fn cell_integrals(s: f64, k: usize) -> (f64, f64) {
    let kf = k as f64;
    let p = 1.0 + 2.0 * s;
    let b = quad::fixed15(|u: f64| (kf + 1.0 - u) * u.powf(-p), kf, kf + 1.0);
    let c = quad::fixed15(|u: f64| (u - kf) * u.powf(-p), kf, kf + 1.0);
    (b, c)
}

/// Builds the operator for `grid` and order `s`.
pub fn build_operator(grid: Grid1D, s: FracOrder) -> FrLapOperator {
    let n = grid.len();
    let sv = s.value();
    let cells: Vec<(f64, f64)> = (0..=n).into_par_iter().map(|k| if k == 0 { (0.0, 0.0) } else { cell_integrals(sv, k) }).collect();
    let d = near_coefficient(sv);
    let mut weights = vec![0.0; n + 1];
    let mut virtual_weights = vec![0.0; n + 2];
    for m in 1..=n {
        let c_prev = if m >= 2 { cells[m - 1].1 } else { 0.0 };
        weights[m] = cells[m].0 + c_prev + if m == 1 { d } else { 0.0 };
        virtual_weights[m] = c_prev + if m == 1 { d } else { 0.0 };
    }
    // per side: Σ_{k=1}^{R} A_k + ∫_{R+1}^∞ u^{-1-2s} = 1/(2s), plus 2D from the near cell
    let diagonal = 1.0 / sv + 2.0 * d;
    let normalization = normalization(s);
    let scale = normalization * grid.spacing().powf(-2.0 * sv);
    FrLapOperator { grid, s, normalization, scale, weights, diagonal, virtual_weights }
}

/// Symbol of powers: `(−Δ)^s |x|^α = k(α,s)|x|^{α−2s}`,
/// `k(α,s) = 2^{2s} Γ((1+α)/2) Γ((2s−α)/2) / (Γ((1+α−2s)/2) Γ(−α/2))`.
pub fn power_constant(alpha: f64, s: FracOrder) -> Result<f64> {
    let s = s.value();
    if !(alpha > 0.0) {
        return Err(Error::OutOfRange(format!("power exponent must be positive, got {alpha}")));
    }
    if (alpha - 2.0 * s).abs() < 1e-14 {
        return Err(Error::OutOfRange("power exponent equals 2s".into()));
    }
    let (l1, s1) = ln_gamma_signed(0.5 * (1.0 + alpha))?;
    let (l2, s2) = ln_gamma_signed(0.5 * (2.0 * s - alpha))?;
    let (l3, s3) = ln_gamma_signed(0.5 * (1.0 + alpha - 2.0 * s))?;
    let (l4, s4) = ln_gamma_signed(-0.5 * alpha)?;
    let sign = s1 * s2 * s3 * s4;
    Ok(sign * (2.0 * s * 2f64.ln() + l1 + l2 - l3 - l4).exp())
}

/// `c(s) = lim_{α→0} k(α,s)/α = 2^{2s−2}(2s−1)Γ(1/2)Γ(s)/Γ((3−2s)/2)`, so that
/// `(−Δ)^s log|x| = c(s)|x|^{-2s}`.
pub fn log_constant(s: FracOrder) -> f64 {
    let s = s.value();
    2f64.powf(2.0 * s - 2.0) * (2.0 * s - 1.0) * PI.sqrt() * gamma(s).unwrap() / gamma(1.5 - s).unwrap()
}

/// Constants of the very singular solution `C t^{1/(1+n)} |x|^{-2s/(1+n)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VssConstants {
    /// `(−Δ)^s Φ(F) = −K F` for `F = |x|^{-2s/(1+n)}`.
    pub k: f64,
    /// Amplitude with `C^{1+n} = (1+n) K`.
    pub c: f64,
}

/// `K(s,n)` and `C(n,s)` in the existence range `s > 1/2, 0 ≤ n < 2s − 1`.
///
/// For n > 0, `K = k(2sn/(1+n), s)`. For n = 0, `Φ(F) = −2s log|x|` gives
/// `K = 2s·c(s)`.
pub fn vss_constant(s: FracOrder, n: f64) -> Result<VssConstants> {
    let sv = s.value();
    if !(sv > 0.5 && n >= 0.0 && n < 2.0 * sv - 1.0) {
        return Err(Error::OutOfRange(format!(
            "(s, n) = ({sv}, {n}) outside the existence range s > 1/2, 0 <= n < 2s - 1"
        )));
    }
    let k = if n == 0.0 { 2.0 * sv * log_constant(s) } else { power_constant(2.0 * sv * n / (1.0 + n), s)? };
    let c = ((1.0 + n) * k).powf(1.0 / (1.0 + n));
    Ok(VssConstants { k, c })
}
