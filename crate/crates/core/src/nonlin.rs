//! Singular nonlinearities `Φ_n(u) = −u^{-n}` (n > 0), `Φ_0(u) = log u`, and
//! their regularizations `Φ_ε(v) = Φ(v + ε) − Φ(ε)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Positivity floor used when `Φ` is probed on limit solutions near zero.
pub const FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    n: f64,
}

impl Nonlinearity {
    pub fn new(n: f64) -> Result<Self> {
        if n >= 0.0 && n.is_finite() {
            Ok(Nonlinearity { n })
        } else {
            Err(Error::OutOfRange(format!("exponent n must be >= 0, got {n}")))
        }
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn is_log(&self) -> bool {
        self.n == 0.0
    }

    pub fn phi(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Err(Error::NonpositiveArgument(u));
        }
        Ok(self.phi_unchecked(u))
    }

    /// `Φ(max(u, FLOOR))`.
    pub fn phi_floored(&self, u: f64) -> f64 {
        self.phi_unchecked(u.max(FLOOR))
    }

    #[inline]
    pub(crate) fn phi_unchecked(&self, u: f64) -> f64 {
        if self.n == 0.0 {
            u.ln()
        } else {
            -u.powf(-self.n)
        }
    }

    #[inline]
    pub(crate) fn phi_prime_unchecked(&self, u: f64) -> f64 {
        if self.n == 0.0 {
            1.0 / u
        } else {
            self.n * u.powf(-self.n - 1.0)
        }
    }

    /// `Φ^{-1}(w)`: `(−w)^{-1/n}` for n > 0 (needs w < 0), `exp(w)` for n = 0.
    pub fn phi_inverse(&self, w: f64) -> Result<f64> {
        if self.n == 0.0 {
            return Ok(w.exp());
        }
        if !(w < 0.0) {
            return Err(Error::OutOfRange(format!("Φ^-1 needs w < 0 for n > 0, got {w}")));
        }
        Ok((-w).powf(-1.0 / self.n))
    }

    pub fn regularized(&self, eps: f64) -> Result<RegularizedNonlinearity> {
        RegularizedNonlinearity::new(*self, eps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizedNonlinearity {
    base: Nonlinearity,
    eps: f64,
}

impl RegularizedNonlinearity {
    pub fn new(base: Nonlinearity, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::OutOfRange(format!("eps must be positive, got {eps}")));
        }
        Ok(RegularizedNonlinearity { base, eps })
    }

    pub fn base(&self) -> Nonlinearity {
        self.base
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn phi_eps(&self, v: f64) -> Result<f64> {
        if v < 0.0 {
            return Err(Error::NegativeArgument(v));
        }
        Ok(self.phi_eps_unchecked(v))
    }

    pub fn phi_eps_prime(&self, v: f64) -> Result<f64> {
        if v < 0.0 {
            return Err(Error::NegativeArgument(v));
        }
        Ok(self.base.phi_prime_unchecked(v + self.eps))
    }

    /// Evaluated without the sign check; callers guarantee `v >= 0`.
    #[inline]
    pub fn phi_eps_unchecked(&self, v: f64) -> f64 {
        let n = self.base.n;
        let e = self.eps;
        if n == 0.0 {
            (v / e).ln_1p()
        } else {
            // −(v+ε)^{-n} + ε^{-n} = ε^{-n} (1 − (1 + v/ε)^{-n}), cancellation-free
            -e.powf(-n) * (-n * (v / e).ln_1p()).exp_m1()
        }
    }

    #[inline]
    pub fn phi_eps_prime_unchecked(&self, v: f64) -> f64 {
        self.base.phi_prime_unchecked(v + self.eps)
    }
}
