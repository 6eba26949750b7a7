//! Closed-form constants of the moment asymptotics
//! `Σ|x₁|^r φ_t / Σ φ_t ~ A(r, α) (C v t)^{r/(α∧2)}` and helpers used alongside them.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// `A(r, α) = 2 sin(rπ/(α∨2)) / ((α∧2) sin(rπ/α)) · Γ(r+1) / Γ(r/(α∧2)+1)`.
///
/// For α ≥ 2 the sine ratio is identically 1 and is not evaluated; α may be infinite.
pub fn universal_amplitude(r: f64, alpha: f64) -> Result<f64> {
    if !(r > 0.0) {
        return invalid(format!("r must be positive, got {r}"));
    }
    if !(r < alpha) {
        return invalid(format!("r = {r} must be below alpha = {alpha}"));
    }
    let beta = alpha.min(2.0);
    let sine_ratio = if alpha >= 2.0 {
        1.0
    } else {
        2.0 * (r * PI / 2.0).sin() / (alpha * (r * PI / alpha).sin())
    };
    Ok(sine_ratio * gamma(r + 1.0) / gamma(r / beta + 1.0))
}

/// `K_q = π / (2 sin(qπ/2) Γ(q+1)) = ∫_0^∞ (1 − cos u) u^{-1-q} du`.
pub fn k_q(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 2.0) {
        return invalid(format!("q must lie in (0, 2), got {q}"));
    }
    Ok(PI / (2.0 * (q * PI / 2.0).sin() * gamma(q + 1.0)))
}

/// `d_c = 2(α∧2)`.
pub fn upper_critical_dimension(alpha: f64) -> f64 {
    2.0 * alpha.min(2.0)
}

/// Coefficient of `m^t` in `m^j / (1 − m)^{j+1}`, i.e. `C(t, j)`; `None` on `u128` overflow.
pub fn binomial_expansion_coefficient(j: u64, t: u64) -> Option<u128> {
    if t < j {
        return Some(0);
    }
    let k = j.min(t - j) as u128;
    let n = t as u128;
    let mut c: u128 = 1;
    for i in 0..k {
        // c = C(n, i) here, so c·(n−i) is divisible by i+1
        c = c.checked_mul(n - i)? / (i + 1);
    }
    Some(c)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TheoryPrediction {
    pub r: f64,
    pub alpha: f64,
    /// Model constant `C_α`.
    pub c: f64,
    /// `v_α` of the step law.
    pub v: f64,
    pub amplitude: f64,
    pub d_c: f64,
}

impl TheoryPrediction {
    pub fn new(r: f64, alpha: f64, c: f64, v: f64) -> Result<Self> {
        if !(c > 0.0) || !(v > 0.0) {
            return invalid(format!("C and v must be positive, got C={c}, v={v}"));
        }
        Ok(TheoryPrediction {
            r,
            alpha,
            c,
            v,
            amplitude: universal_amplitude(r, alpha)?,
            d_c: upper_critical_dimension(alpha),
        })
    }

    /// Growth exponent `r/(α∧2)` of the moment ratio.
    pub fn exponent(&self) -> f64 {
        self.r / self.alpha.min(2.0)
    }

    /// Prefactor of `t^{r/(α∧2)}` (times `(ln √t)^{r/2}` when α = 2).
    pub fn coefficient(&self) -> f64 {
        self.amplitude * (self.c * self.v).powf(self.exponent())
    }

    /// Predicted ratio at `t`.
    pub fn predict(&self, t: u64) -> Result<f64> {
        predict_moment_ratio(self, t)
    }
}

/// `A·(Cvt)^{r/(α∧2)}` for α ≠ 2 and `A·(Cv t ln√t)^{r/2}` for α = 2.
pub fn predict_moment_ratio(pred: &TheoryPrediction, t: u64) -> Result<f64> {
    if t == 0 {
        return invalid("t must be positive");
    }
    let tf = t as f64;
    if pred.alpha == 2.0 {
        if t < 2 {
            return Err(Error::InvalidParameter("alpha = 2 needs t >= 2".into()));
        }
        Ok(pred.amplitude * (pred.c * pred.v * tf * tf.sqrt().ln()).powf(pred.r / 2.0))
    } else {
        Ok(pred.amplitude * (pred.c * pred.v * tf).powf(pred.exponent()))
    }
}
