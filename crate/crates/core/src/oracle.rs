//! Frozen reference values, computed once with 30-digit arithmetic by
//! `tools/oracle_k.py` before the solver existed.
//!
//! `K_PV` holds principal-value quadratures of `(−Δ)^s |x|^α` at `x = 1`,
//! independent of the Gamma-function closed form. `C_LOG` holds `c(s)` from
//! `(−Δ)^s log|x| = c(s)|x|^{-2s}`.

/// `(α, s, k(α,s))`.
pub const K_PV: [(f64, f64, f64); 12] = [
    (0.4, 0.75, 0.049411119642360873),
    (0.1, 0.6, 0.014100235089966455),
    (0.25, 0.55, -0.057348200053886229),
    (0.3, 0.9, 0.16254628923127861),
    (0.5, 0.8, 0.059372205386791928),
    (0.9, 0.7, -0.75793041048142488),
    (1.2, 0.8, -1.197128094477956),
    (0.6, 0.65, -0.27119379938594003),
    (0.2, 0.3, -0.32414208067469857),
    (0.3, 0.5, -0.15285763484832863),
    (1.0 / 3.0, 0.8, 0.10441224222235811),
    (0.6, 0.9, 0.13057035475164105),
];

/// `(s, c(s))`.
pub const C_LOG: [(f64, f64); 5] = [
    (0.55, 0.14882404874973622),
    (0.6, 0.28372974510539932),
    (0.75, 0.62665706865775013),
    (0.8, 0.72286910230860858),
    (0.9, 0.8857986045623128),
];
