//! Gamma function with sign tracking for negative non-integer arguments.

use crate::error::{Error, Result};
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x >= 0.5` (Lanczos, g = 7).
fn ln_gamma_right(x: f64) -> f64 {
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Returns `(ln|Γ(x)|, sign Γ(x))`.
///
/// Arguments below 1/2 go through the reflection formula
/// `Γ(x)Γ(1−x) = π / sin(πx)`; the sign comes from `sin(πx)`.
pub fn ln_gamma_signed(x: f64) -> Result<(f64, f64)> {
    if !x.is_finite() {
        return Err(Error::OutOfRange(format!("Gamma of {x}")));
    }
    if x <= 0.0 && x == x.round() {
        return Err(Error::Pole(x));
    }
    if x >= 0.5 {
        return Ok((ln_gamma_right(x), 1.0));
    }
    let sin = sin_pi(x);
    let ln = PI.ln() - sin.abs().ln() - ln_gamma_right(1.0 - x);
    Ok((ln, sin.signum()))
}

/// Γ(x) for non-pole arguments.
pub fn gamma(x: f64) -> Result<f64> {
    let (ln, sign) = ln_gamma_signed(x)?;
    Ok(sign * ln.exp())
}

/// sin(πx) with exact zeros at integers and argument reduction.
fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).floor(); // r in [0, 2)
    let (r, sign) = if r >= 1.0 { (r - 1.0, -1.0) } else { (r, 1.0) };
    let r = if r > 0.5 { 1.0 - r } else { r };
    sign * (PI * r).sin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_and_half_integers() {
        let cases = [(1.0, 1.0), (2.0, 1.0), (5.0, 24.0), (0.5, PI.sqrt()), (1.5, 0.5 * PI.sqrt())];
        for (x, g) in cases {
            let v = gamma(x).unwrap();
            assert!((v - g).abs() < 1e-13 * g, "Γ({x}) = {v}");
        }
    }

    #[test]
    fn negative_arguments_by_reflection() {
        // Γ(−1/2) = −2√π, Γ(−3/2) = 4√π/3, Γ(−0.1) ≈ −10.686287021193193
        assert!((gamma(-0.5).unwrap() + 2.0 * PI.sqrt()).abs() < 1e-12);
        assert!((gamma(-1.5).unwrap() - 4.0 * PI.sqrt() / 3.0).abs() < 1e-12);
        assert!((gamma(-0.1).unwrap() + 10.686_287_021_193_193).abs() < 1e-11);
        assert_eq!(ln_gamma_signed(-2.5).unwrap().1, -1.0);
    }

    #[test]
    fn poles() {
        assert_eq!(gamma(0.0), Err(Error::Pole(0.0)));
        assert_eq!(gamma(-3.0), Err(Error::Pole(-3.0)));
    }

    #[test]
    fn recurrence() {
        for &x in &[-2.7, -0.3, 0.2, 0.9, 3.3, 11.1] {
            let lhs = gamma(x + 1.0).unwrap();
            let rhs = x * gamma(x).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "x = {x}");
        }
    }
}
