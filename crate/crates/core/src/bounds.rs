//! Efficiency bound E_max and the fidelity expressions built on it.

use std::fmt::Write as _;

use serde::Serialize;

use crate::depletion::{self, DepletionProfile, GEvaluator};
use crate::error::{Error, Result};
use crate::model::{cooperativity, siv_params, EmitterParams};
use crate::pulse::{sin2_pulse, Envelope};
use crate::quad;
use crate::report::Provenance;

/// Bound summary for one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundResult {
    #[serde(rename = "E_max")]
    pub e_max: f64,
    #[serde(rename = "G_max")]
    pub g_max: f64,
    #[serde(rename = "G_T")]
    pub g_end: f64,
    pub argmax_t: f64,
    #[serde(rename = "T")]
    pub duration: f64,
    #[serde(rename = "F_worst")]
    pub f_worst: f64,
    #[serde(rename = "F_avg")]
    pub f_avg: f64,
    /// Worst-case fidelity from the G(T) bound.
    #[serde(rename = "F_simplified")]
    pub f_simplified: f64,
    #[serde(rename = "E2_slow")]
    pub e2_slow: f64,
    /// A physical efficiency must stay strictly below `e_max`.
    pub strict: bool,
}

fn from_g(g: f64, what: &str) -> Result<f64> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::domain(format!("{what} = {g} must be positive")));
    }
    Ok(g.sqrt().recip())
}

/// 1/√G_max.
pub fn e_max(profile: &DepletionProfile) -> Result<f64> {
    from_g(profile.g_max, "G_max")
}

/// 1/√G(T), never below [`e_max`].
pub fn simplified_bound(profile: &DepletionProfile) -> Result<f64> {
    from_g(profile.g_end(), "G(T)")
}

fn check_efficiency(e: f64) -> Result<()> {
    if !(e >= 0.0 && e.is_finite()) {
        return Err(Error::validation(format!("efficiency must be finite and non-negative, got {e}")));
    }
    Ok(())
}

/// e^{−Γ₂T}(E|α₀|² + 1 − |α₀|²)², the fidelity reached with efficiency E.
pub fn fidelity(e: f64, gamma2: f64, duration: f64, alpha0_sq: f64) -> Result<f64> {
    check_efficiency(e)?;
    if !(0.0..=1.0).contains(&alpha0_sq) {
        return Err(Error::validation(format!("|alpha0|^2 must lie in [0, 1], got {alpha0_sq}")));
    }
    if !(gamma2 >= 0.0 && duration >= 0.0) {
        return Err(Error::validation("Gamma2 and T must be non-negative"));
    }
    let amp = e * alpha0_sq + 1.0 - alpha0_sq;
    Ok((-gamma2 * duration).exp() * amp * amp)
}

/// Bloch-sphere average of [`fidelity`].
pub fn avg_fidelity(e: f64, gamma2: f64, duration: f64) -> f64 {
    (e * e + e + 1.0) / (3.0 * (gamma2 * duration).exp())
}

/// κ/(κ+κ̃) · 2C/(1+2C).
pub fn slow_pulse_bound(p: &EmitterParams) -> Result<f64> {
    let c = cooperativity(p)?;
    Ok(p.kappa / (p.kappa + p.kappa_tilde) * 2.0 * c / (1.0 + 2.0 * c))
}

/// All bounds for `env`, using the closed form when available.
pub fn bound_for(p: &EmitterParams, env: &dyn Envelope) -> Result<BoundResult> {
    let eval = depletion::evaluator(p, env)?;
    summarize(p, eval.as_ref())
}

pub(crate) fn summarize(p: &EmitterParams, eval: &dyn GEvaluator) -> Result<BoundResult> {
    let big_t = eval.duration();
    let (g_max, argmax_t) = depletion::max_integrated(eval)?;
    let g_end = eval.g_at(big_t)?;
    let e = from_g(g_max, "G_max")?;
    let es = from_g(g_end, "G(T)")?;
    let w = (-p.gamma2 * big_t).exp();
    let e2_slow = slow_pulse_bound(p).unwrap_or(1.0);
    Ok(BoundResult {
        e_max: e,
        g_max,
        g_end,
        argmax_t,
        duration: big_t,
        f_worst: e * e * w,
        f_avg: avg_fidelity(e, p.gamma2, big_t),
        f_simplified: es * es * w,
        e2_slow,
        strict: true,
    })
}

/// Decoherence sets (Γ₁, Γ₂)/γ̃ of the duration sweep.
pub const DECOHERENCE_SETS: [(f64, f64); 6] =
    [(0.0, 0.0), (0.01, 0.005), (0.0, 0.1), (0.1, 0.0), (0.2, 0.0), (0.1, 0.1)];

/// One row of the sin² duration sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub set: usize,
    pub gamma1_frac: f64,
    pub gamma2_frac: f64,
    pub duration: f64,
    pub f_worst_exact: f64,
    pub f_worst_simplified: f64,
    pub f_worst_slow: f64,
    pub f_avg_exact: f64,
    pub f_avg_simplified: f64,
    pub f_avg_slow: f64,
    /// Largest `f_worst_exact` within its set.
    pub is_argmax: bool,
}

/// Fidelity bounds of sin² pulses against duration for every decoherence
/// set, on a log-spaced grid.
pub fn duration_sweep(sets: &[(f64, f64)], t_lo: f64, t_hi: f64, samples: usize) -> Result<Vec<SweepRow>> {
    if !(t_lo > 0.0 && t_hi > t_lo) || samples < 2 {
        return Err(Error::validation("sweep needs 0 < T_lo < T_hi and at least 2 samples"));
    }
    let grid: Vec<f64> = quad::linspace(t_lo.ln(), t_hi.ln(), samples).into_iter().map(f64::exp).collect();
    let mut rows = Vec::with_capacity(sets.len() * samples);
    for (set, &(g1, g2)) in sets.iter().enumerate() {
        let p = siv_params(g1, g2).emitter_params()?;
        let e2_slow = slow_pulse_bound(&p)?;
        let e_slow = e2_slow.sqrt();
        let start = rows.len();
        for &t in &grid {
            let b = bound_for(&p, &sin2_pulse(t)?)?;
            let es = b.f_simplified / (-p.gamma2 * t).exp();
            rows.push(SweepRow {
                set,
                gamma1_frac: g1,
                gamma2_frac: g2,
                duration: t,
                f_worst_exact: b.f_worst,
                f_worst_simplified: b.f_simplified,
                f_worst_slow: e2_slow * (-p.gamma2 * t).exp(),
                f_avg_exact: b.f_avg,
                f_avg_simplified: avg_fidelity(es.sqrt(), p.gamma2, t),
                f_avg_slow: avg_fidelity(e_slow, p.gamma2, t),
                is_argmax: false,
            });
        }
        let best = (start..rows.len())
            .max_by(|&a, &b| rows[a].f_worst_exact.total_cmp(&rows[b].f_worst_exact).then(b.cmp(&a)))
            .expect("non-empty set");
        rows[best].is_argmax = true;
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow], prov: &Provenance) -> String {
    let mut s = prov.header();
    s.push_str(
        "set,Gamma1_over_gt,Gamma2_over_gt,T_ns,F_worst_exact,F_worst_simplified,F_worst_slow,\
F_avg_exact,F_avg_simplified,F_avg_slow,is_argmax\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.9e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
            r.set,
            r.gamma1_frac,
            r.gamma2_frac,
            r.duration,
            r.f_worst_exact,
            r.f_worst_simplified,
            r.f_worst_slow,
            r.f_avg_exact,
            r.f_avg_simplified,
            r.f_avg_slow,
            u8::from(r.is_argmax)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depletion::profile_analytic;

    #[test]
    fn fidelity_limits() {
        let (g2, t): (f64, f64) = (0.3, 0.7);
        let w = (-g2 * t).exp();
        assert!((fidelity(0.4, g2, t, 0.0).unwrap() - w).abs() < 1e-15);
        assert!((fidelity(0.4, g2, t, 1.0).unwrap() - 0.16 * w).abs() < 1e-15);
        let f = fidelity(0.988, 2.0 * std::f64::consts::PI * 0.01, 0.44, 1.0).unwrap();
        assert!((f - 0.9496).abs() < 1e-4);
        assert!(fidelity(0.5, 0.0, 1.0, 1.2).is_err());
        assert!(fidelity(-0.1, 0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn average_limits() {
        assert_eq!(avg_fidelity(1.0, 0.0, 3.0), 1.0);
        assert!((avg_fidelity(0.0, 0.0, 3.0) - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn bloch_average_by_simpson() {
        let (e, g2, t) = (0.93, 0.05, 0.8);
        let n = 2000;
        let mut acc = 0.0;
        for i in 0..=n {
            let a = i as f64 / n as f64;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * fidelity(e, g2, t, a).unwrap();
        }
        acc /= 3.0 * n as f64;
        assert!((acc - avg_fidelity(e, g2, t)).abs() < 1e-12);
    }

    #[test]
    fn slow_bound_values() {
        let p = siv_params(0.0, 0.0).emitter_params().unwrap();
        assert!((slow_pulse_bound(&p).unwrap() - 48.0 / 49.0).abs() < 1e-12);
        let mut lossy = p;
        lossy.kappa_tilde = 1e9;
        assert!(slow_pulse_bound(&lossy).unwrap() < 1e-6);
        let mut strong = p;
        strong.g = 1e6;
        assert!((slow_pulse_bound(&strong).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn siv_sin2_near_table_value() {
        let p = siv_params(0.1, 0.1).emitter_params().unwrap();
        let b = bound_for(&p, &sin2_pulse(0.44).unwrap()).unwrap();
        assert!((b.e_max - 0.988).abs() < 1e-3);
        assert!(b.f_worst <= b.f_avg && b.f_avg <= 1.0);
        assert!((b.f_worst - b.e_max.powi(2) * (-p.gamma2 * 0.44).exp()).abs() < 1e-15);
    }

    #[test]
    fn simplified_dominates() {
        let p = siv_params(0.1, 0.1).emitter_params().unwrap();
        let pulse = sin2_pulse(0.1).unwrap();
        let prof = profile_analytic(&p, &pulse, &quad::linspace(0.0, 0.1, 51)).unwrap();
        let (a, b) = (e_max(&prof).unwrap(), simplified_bound(&prof).unwrap());
        assert!(b > a, "{b} vs {a}");
    }

    #[test]
    fn sweep_marks_one_argmax_per_set() {
        let rows = duration_sweep(&DECOHERENCE_SETS[..2], 0.05, 5.0, 12).unwrap();
        assert_eq!(rows.len(), 24);
        for set in 0..2 {
            assert_eq!(rows.iter().filter(|r| r.set == set && r.is_argmax).count(), 1);
        }
        for r in &rows {
            assert!(r.f_worst_exact <= r.f_worst_simplified * (1.0 + 1e-12));
        }
        let csv = sweep_csv(&rows, &Provenance::new("sweep"));
        assert_eq!(crate::report::csv_body(&csv).lines().count(), 25);
    }
}
