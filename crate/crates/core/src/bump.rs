//! The fixed radial bump profile used by every smoothed quantity.
//!
//! φ(t) = 1 for t ≤ 1, 0 for t ≥ 2, and on the transition (1,2) the
//! exponential glue q(2−t)/(q(2−t)+q(t−1)) with q(u) = exp(−1/u). The profile
//! is C^∞, nonincreasing, and fixed once and for all so that every downstream
//! constant is reproducible bit-for-bit.

use crate::error::{Error, Result};
use std::sync::OnceLock;

fn q(u: f64) -> f64 {
    (-1.0 / u).exp()
}

/// The radial bump φ together with its derivative and sup|φ′|.
#[derive(Debug, Clone, Copy, Default)]
pub struct BumpProfile;

impl BumpProfile {
    pub fn new() -> Self {
        BumpProfile
    }

    /// φ(t). Errors on negative t.
    pub fn eval(self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::Domain(format!("bump argument must be >= 0, got {t}")));
        }
        Ok(bump(t))
    }

    /// φ′(t). Errors on negative t.
    pub fn eval_deriv(self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::Domain(format!("bump argument must be >= 0, got {t}")));
        }
        Ok(bump_deriv(t))
    }

    /// sup over t of |φ′(t)|, computed once by grid search with local refinement.
    pub fn sup_deriv_abs(self) -> f64 {
        static SUP: OnceLock<f64> = OnceLock::new();
        *SUP.get_or_init(|| {
            // Coarse scan of the transition interval, then ternary refinement
            // around the best grid point. |φ′| is smooth and unimodal there.
            let mut best_t = 1.5;
            let mut best = 0.0f64;
            for i in 0..=4000 {
                let t = 1.0 + i as f64 / 4000.0;
                let v = bump_deriv(t).abs();
                if v > best {
                    best = v;
                    best_t = t;
                }
            }
            let (mut lo, mut hi) = (best_t - 1e-3, best_t + 1e-3);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if bump_deriv(m1).abs() < bump_deriv(m2).abs() {
                    lo = m1;
                } else {
                    hi = m2;
                }
            }
            bump_deriv(0.5 * (lo + hi)).abs()
        })
    }
}

/// φ(t) without the domain check (internal hot path; callers guarantee t ≥ 0).
#[inline]
pub fn bump(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let a = q(2.0 - t);
        let b = q(t - 1.0);
        a / (a + b)
    }
}

/// φ′(t); zero outside the open transition interval (1,2).
///
/// On (1,2): with a = q(2−t), b = q(t−1), a′ = −a/(2−t)², b′ = b/(t−1)²,
/// φ′ = (a′b − ab′)/(a+b)² = −ab·(1/(2−t)² + 1/(t−1)²)/(a+b)².
#[inline]
pub fn bump_deriv(t: f64) -> f64 {
    if t <= 1.0 || t >= 2.0 {
        0.0
    } else {
        let a = q(2.0 - t);
        let b = q(t - 1.0);
        let u = 2.0 - t;
        let v = t - 1.0;
        -a * b * (1.0 / (u * u) + 1.0 / (v * v)) / ((a + b) * (a + b))
    }
}
