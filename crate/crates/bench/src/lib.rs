//! Fixtures shared by the benchmarks.

use fracdiff_core::experiments::DataSpec;
use fracdiff_core::{build_operator, Field, FrLapOperator, FracOrder, Grid1D};

/// Operator and unit bump at (s, n) on `[-20, 20]` with `n_points` nodes.
pub fn bump_case(s: f64, n: f64, n_points: usize) -> (FrLapOperator, Field) {
    let grid = Grid1D::new(20.0, n_points).expect("valid grid");
    let op = build_operator(grid, FracOrder::new(s).expect("valid order"));
    let u0 = DataSpec::Bump { mass: 1.0, center: 0.0, width: 1.0 }.build(grid, s, n).expect("resolved bump");
    (op, u0)
}
