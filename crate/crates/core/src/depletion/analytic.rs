//! Closed-form term-wise integrals of the depletion rate for real
//! cosine-series pulses.
//!
//! With fₙ(t) = 1 − cos(ωₙt), ωₙ = 2πn/T and weight e^{Γt}, every product
//! fₙfₘ, fₙḟₘ, ḟₙḟₘ, fₙf̈ₘ, ḟₙf̈ₘ reduces to the two primitives
//!
//!   h(ω) = ∫₀ᵗ e^{Γs} cos(ωs) ds,    u(ω) = ∫₀ᵗ e^{Γs} sin(ωs) ds,
//!
//! evaluated at ω ∈ {0, ωₙ, ωₘ, ω_{m−n}, ω_{m+n}}.

use crate::error::{Error, Result};
use crate::model::EmitterParams;
use crate::pulse::{CosineSeriesPulse, Envelope};

use super::RateCoefficients;

/// ∫₀ᵗ e^{Γs} cos(ωs) ds.
pub fn h(omega: f64, gamma: f64, t: f64) -> f64 {
    if omega == 0.0 {
        return if gamma == 0.0 { t } else { (gamma * t).exp_m1() / gamma };
    }
    let (s, c) = (omega * t).sin_cos();
    let e = (gamma * t).exp();
    (e * (omega * s + gamma * c) - gamma) / (gamma * gamma + omega * omega)
}

/// ∫₀ᵗ e^{Γs} sin(ωs) ds.
pub fn u(omega: f64, gamma: f64, t: f64) -> f64 {
    if omega == 0.0 {
        return 0.0;
    }
    let (s, c) = (omega * t).sin_cos();
    let e = (gamma * t).exp();
    (omega + e * (gamma * s - omega * c)) / (gamma * gamma + omega * omega)
}

#[inline]
fn w(k: i64, base: f64) -> f64 {
    k as f64 * base
}

/// ∫₀ᵗ e^{Γs} fₙ fₘ ds.
pub fn ff_integral(n: usize, m: usize, base: f64, gamma: f64, t: f64) -> f64 {
    let (n, m) = (n as i64, m as i64);
    h(0.0, gamma, t) - h(w(n, base), gamma, t) - h(w(m, base), gamma, t)
        + 0.5 * (h(w(m - n, base), gamma, t) + h(w(m + n, base), gamma, t))
}

/// The five weighted integrals for the harmonic pair (n, m), in the order
/// [fₙfₘ, fₙḟₘ, ḟₙḟₘ, fₙf̈ₘ, ḟₙf̈ₘ].
pub fn pair_integrals(n: usize, m: usize, base: f64, gamma: f64, t: f64) -> [f64; 5] {
    let (ni, mi) = (n as i64, m as i64);
    let wn = w(ni, base);
    let wm = w(mi, base);
    let h0 = h(0.0, gamma, t);
    let hn = h(wn, gamma, t);
    let hm = h(wm, gamma, t);
    let hd = h(w(mi - ni, base), gamma, t);
    let hs = h(w(mi + ni, base), gamma, t);
    let um = u(wm, gamma, t);
    let ud = u(w(mi - ni, base), gamma, t);
    let us = u(w(mi + ni, base), gamma, t);
    [
        h0 - hn - hm + 0.5 * (hd + hs),
        wm * (um - 0.5 * (us + ud)),
        0.5 * wn * wm * (hd - hs),
        0.5 * wm * wm * (2.0 * hm - hd - hs),
        0.5 * wn * wm * wm * (us - ud),
    ]
}

/// G(t) for a real cosine-series pulse, evaluated term by term.
#[derive(Debug, Clone)]
pub struct AnalyticG {
    coeffs: Vec<f64>,
    duration: f64,
    base: f64,
    gamma: f64,
    rc: RateCoefficients,
}

impl AnalyticG {
    pub fn new(p: &EmitterParams, pulse: &CosineSeriesPulse) -> Result<Self> {
        if !pulse.is_real() {
            return Err(Error::Unsupported(
                "closed-form G needs a real pulse; use the numeric path for chirped envelopes".into(),
            ));
        }
        p.validate()?;
        Ok(AnalyticG {
            coeffs: pulse.coeffs().to_vec(),
            duration: pulse.duration(),
            base: pulse.omega(1),
            gamma: p.gamma_diff(),
            rc: RateCoefficients::new(p),
        })
    }

    /// Weighted pair kernel Xₙₘ(t): G(t) = Σₙₘ vₙ vₘ Xₙₘ(t). Row-major,
    /// indices from zero.
    pub fn pair_kernel(&self, t: f64) -> Vec<f64> {
        pair_kernel(&self.rc, self.coeffs.len(), self.base, self.gamma, t.clamp(0.0, self.duration))
    }

    pub fn at(&self, t: f64) -> f64 {
        let k = self.pair_kernel(t);
        let n = self.coeffs.len();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += self.coeffs[i] * self.coeffs[j] * k[i * n + j];
            }
        }
        acc
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }
}

/// Pair kernel for `order` harmonics with fundamental `base`.
pub fn pair_kernel(rc: &RateCoefficients, order: usize, base: f64, gamma: f64, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; order * order];
    for n in 1..=order {
        for m in 1..=order {
            let [ff, fdf, dfdf, fddf, dfddf] = pair_integrals(n, m, base, gamma, t);
            out[(n - 1) * order + (m - 1)] =
                rc.ff * ff + rc.fdf * fdf + rc.dfdf * dfdf + rc.fddf * fddf + rc.dfddf * dfddf;
        }
    }
    out
}
