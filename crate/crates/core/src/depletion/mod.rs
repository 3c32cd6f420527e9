//! Depletion rate d(t), its running integral G(t) and the phase φ(t) of the
//! |1⟩ amplitude.
//!
//! The |1⟩ amplitude follows α(t) = α₀ e^{iφ(t) − Γ₁t/2} √(1 − E² G(t)), so
//! the largest achievable efficiency is E_max = 1/√(max_t G(t)).

pub mod analytic;

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::EmitterParams;
use crate::pulse::{CosineSeriesPulse, Envelope};
use crate::quad;

pub use analytic::AnalyticG;

/// Number of points in the uniform scan used to locate max G.
pub const MAX_SCAN_POINTS: usize = 1001;

const QUAD_ABS_TOL: f64 = 1e-12;
const QUAD_REL_TOL: f64 = 1e-11;

/// Prefactors of the real-pulse part of d(t), one per product
/// f², fḟ, ḟ², f f̈ and ḟ f̈.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCoefficients {
    pub ff: f64,
    pub fdf: f64,
    pub dfdf: f64,
    pub fddf: f64,
    pub dfddf: f64,
    /// (γ̃ − Γ₂)/(κg²), multiplies θ̇² f².
    pub chirp_ff: f64,
    /// 2/(κg²), multiplies θ̈θ̇ f² and θ̇² fḟ.
    pub chirp_cross: f64,
}

impl RateCoefficients {
    pub fn new(p: &EmitterParams) -> Self {
        let q = 1.0 + p.kappa_tilde / p.kappa;
        let g2 = p.g * p.g;
        let dec = p.gamma_tilde - p.gamma2;
        let k = p.kappa;
        RateCoefficients {
            ff: q + dec / g2 * (k / 4.0) * q * q,
            fdf: 2.0 / k + k / (2.0 * g2) * q * q + dec / g2 * q,
            dfdf: q / g2 + dec / (k * g2),
            fddf: q / g2,
            dfddf: 2.0 / (k * g2),
            chirp_ff: dec / (k * g2),
            chirp_cross: 2.0 / (k * g2),
        }
    }

    fn rate(&self, gamma: f64, t: f64, amp: [f64; 3], ph: [f64; 3]) -> f64 {
        let [f, df, ddf] = amp;
        let [_, dth, ddth] = ph;
        let ff = self.ff + self.chirp_ff * dth * dth + self.chirp_cross * ddth * dth;
        let fdf = self.fdf + self.chirp_cross * dth * dth;
        (gamma * t).exp()
            * (ff * f * f + self.fddf * f * ddf + self.dfddf * df * ddf + fdf * f * df + self.dfdf * df * df)
    }
}

/// d(t) including the e^{(Γ₁−Γ₂)t} prefactor and all phase terms. Zero
/// outside the pulse support.
pub fn depletion_rate(p: &EmitterParams, env: &dyn Envelope, t: f64) -> Result<f64> {
    if !(p.g > 0.0) {
        return Err(Error::domain("depletion rate needs g > 0"));
    }
    p.validate()?;
    Ok(rate_unchecked(&RateCoefficients::new(p), p.gamma_diff(), env, t))
}

pub(crate) fn rate_unchecked(rc: &RateCoefficients, gamma: f64, env: &dyn Envelope, t: f64) -> f64 {
    if !(0.0..=env.duration()).contains(&t) {
        return 0.0;
    }
    rc.rate(gamma, t, env.amplitude(t), env.phase(t))
}

/// Anything that can evaluate G(t) = ∫₀ᵗ d at an arbitrary time.
pub trait GEvaluator: Sync {
    fn g_at(&self, t: f64) -> Result<f64>;
    fn duration(&self) -> f64;
}

impl GEvaluator for AnalyticG {
    fn g_at(&self, t: f64) -> Result<f64> {
        Ok(self.at(t))
    }

    fn duration(&self) -> f64 {
        AnalyticG::duration(self)
    }
}

/// G(t) by adaptive quadrature from a table of cumulative values.
pub struct NumericG<'a> {
    env: &'a dyn Envelope,
    rc: RateCoefficients,
    gamma: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl<'a> NumericG<'a> {
    pub fn new(p: &EmitterParams, env: &'a dyn Envelope) -> Result<Self> {
        p.validate()?;
        let rc = RateCoefficients::new(p);
        let gamma = p.gamma_diff();
        let nodes = quad::linspace(0.0, env.duration(), MAX_SCAN_POINTS);
        let values = cumulative(&rc, gamma, env, &nodes)?;
        Ok(NumericG { env, rc, gamma, nodes, values })
    }

    /// Cumulative G on the internal uniform grid.
    pub fn table(&self) -> (&[f64], &[f64]) {
        (&self.nodes, &self.values)
    }
}

impl GEvaluator for NumericG<'_> {
    fn g_at(&self, t: f64) -> Result<f64> {
        let big_t = self.env.duration();
        let t = t.clamp(0.0, big_t);
        let step = big_t / (self.nodes.len() - 1) as f64;
        let i = ((t / step).floor() as usize).min(self.nodes.len() - 1);
        let a = self.nodes[i];
        let extra = quad::integrate(
            |s| rate_unchecked(&self.rc, self.gamma, self.env, s),
            a,
            t.max(a),
            QUAD_ABS_TOL,
            QUAD_REL_TOL,
        )?;
        Ok(self.values[i] + extra.value)
    }

    fn duration(&self) -> f64 {
        self.env.duration()
    }
}

fn cumulative(rc: &RateCoefficients, gamma: f64, env: &dyn Envelope, grid: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &t in grid {
        let piece = quad::integrate(|s| rate_unchecked(rc, gamma, env, s), prev, t, QUAD_ABS_TOL, QUAD_REL_TOL)
            .map_err(|e| Error::numeric(format!("G quadrature on [{prev}, {t}]: {e}")))?;
        if piece.error > 1e-9 {
            return Err(Error::numeric(format!("G quadrature on [{prev}, {t}] has error estimate {:e}", piece.error)));
        }
        acc += piece.value;
        out.push(acc);
        prev = t;
    }
    Ok(out)
}

/// Best-effort evaluator: closed form for real cosine series, quadrature
/// otherwise.
pub fn evaluator<'a>(p: &EmitterParams, env: &'a dyn Envelope) -> Result<Box<dyn GEvaluator + 'a>> {
    if let Some(series) = env.as_cosine_series() {
        if series.is_real() {
            return Ok(Box::new(AnalyticG::new(p, series)?));
        }
    }
    Ok(Box::new(NumericG::new(p, env)?))
}

/// max G over [0, T]: uniform scan, then golden-section refinement between
/// the neighbours of the best scan point.
pub fn max_integrated(eval: &dyn GEvaluator) -> Result<(f64, f64)> {
    let big_t = eval.duration();
    let grid = quad::linspace(0.0, big_t, MAX_SCAN_POINTS);
    let mut values = Vec::with_capacity(grid.len());
    for &t in &grid {
        values.push(eval.g_at(t)?);
    }
    refine_max(eval, &grid, &values)
}

pub(crate) fn refine_max(eval: &dyn GEvaluator, grid: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    let big_t = eval.duration();
    let (best, &g_best) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::validation("empty scan grid"))?;
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let mut failure = None;
    let (t_ref, g_ref) = quad::golden_max(
        |t| match eval.g_at(t) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        1e-6 * big_t,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(if g_ref > g_best { (g_ref, t_ref) } else { (g_best, grid[best]) })
}

/// Sampled depletion data on a caller-chosen grid.
#[derive(Debug, Clone)]
pub struct DepletionProfile {
    pub grid: Vec<f64>,
    pub d: Vec<f64>,
    pub g: Vec<f64>,
    pub g_max: f64,
    pub argmax_t: f64,
    pub phi: Option<Vec<f64>>,
    /// Γ₂, kept so the CSV can emit e^{Γ₂T} G.
    pub gamma2: f64,
    pub duration: f64,
}

impl DepletionProfile {
    /// G at the end of the pulse.
    pub fn g_end(&self) -> f64 {
        *self.g.last().expect("profile grid is non-empty")
    }

    /// CSV with columns t_ns, d_per_ns, G, expG2T_G, phi_rad.
    pub fn to_csv(&self) -> String {
        let w = (self.gamma2 * self.duration).exp();
        let mut s = String::from("t_ns,d_per_ns,G,expG2T_G,phi_rad\n");
        for i in 0..self.grid.len() {
            let phi = self.phi.as_ref().map_or(0.0, |p| p[i]);
            let _ = writeln!(
                s,
                "{:.9e},{:.12e},{:.12e},{:.12e},{:.12e}",
                self.grid[i],
                self.d[i],
                self.g[i],
                w * self.g[i],
                phi
            );
        }
        s
    }
}

fn check_grid(grid: &[f64], big_t: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::validation("empty time grid"));
    }
    if grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::validation("time grid must be sorted"));
    }
    if grid[0] < 0.0 || grid[grid.len() - 1] > big_t * (1.0 + 1e-12) {
        return Err(Error::validation(format!("time grid must lie within [0, {big_t}]")));
    }
    Ok(())
}

/// G on `grid` by adaptive quadrature, plus the refined maximum.
pub fn integrated_depletion_numeric(p: &EmitterParams, env: &dyn Envelope, grid: &[f64]) -> Result<DepletionProfile> {
    p.validate()?;
    check_grid(grid, env.duration())?;
    let rc = RateCoefficients::new(p);
    let gamma = p.gamma_diff();
    let d: Vec<f64> = grid.iter().map(|&t| rate_unchecked(&rc, gamma, env, t)).collect();
    let g = cumulative(&rc, gamma, env, grid)?;
    let eval = NumericG::new(p, env)?;
    let (mut g_max, mut argmax_t) = max_integrated(&eval)?;
    for (&t, &v) in grid.iter().zip(&g) {
        if v > g_max {
            g_max = v;
            argmax_t = t;
        }
    }
    Ok(DepletionProfile {
        grid: grid.to_vec(),
        d,
        g,
        g_max,
        argmax_t,
        phi: None,
        gamma2: p.gamma2,
        duration: env.duration(),
    })
}

/// Closed-form G(t) for a real cosine-series pulse.
pub fn integrated_depletion_analytic(p: &EmitterParams, pulse: &CosineSeriesPulse, t: f64) -> Result<f64> {
    Ok(AnalyticG::new(p, pulse)?.at(t))
}

/// Profile built entirely from the closed form.
pub fn profile_analytic(p: &EmitterParams, pulse: &CosineSeriesPulse, grid: &[f64]) -> Result<DepletionProfile> {
    check_grid(grid, pulse.duration())?;
    let eval = AnalyticG::new(p, pulse)?;
    let rc = RateCoefficients::new(p);
    let gamma = p.gamma_diff();
    let d = grid.iter().map(|&t| rate_unchecked(&rc, gamma, pulse, t)).collect();
    let g: Vec<f64> = grid.iter().map(|&t| eval.at(t)).collect();
    let (mut g_max, mut argmax_t) = max_integrated(&eval)?;
    for (&t, &v) in grid.iter().zip(&g) {
        if v > g_max {
            g_max = v;
            argmax_t = t;
        }
    }
    Ok(DepletionProfile {
        grid: grid.to_vec(),
        d,
        g,
        g_max,
        argmax_t,
        phi: None,
        gamma2: p.gamma2,
        duration: pulse.duration(),
    })
}

/// φ̇(t) given G(t).
pub(crate) fn phase_rate(p: &EmitterParams, env: &dyn Envelope, efficiency: f64, t: f64, g_t: f64) -> Result<f64> {
    if !(0.0..=env.duration()).contains(&t) {
        return Ok(0.0);
    }
    let r2 = 1.0 - efficiency * efficiency * g_t;
    if !(r2 > 0.0) {
        return Err(Error::domain(format!("1 - E^2 G(t) = {r2:e} at t = {t}: efficiency above the bound")));
    }
    let [f, df, ddf] = env.amplitude(t);
    let [_, dth, ddth] = env.phase(t);
    let k = p.kappa;
    let q = 1.0 + p.kappa_tilde / k;
    let dl = p.delta;
    let bracket = (q * (dl + dth) + ddth / k) * f * df + (dl + 2.0 * dth) / k * df * df - dth / k * f * ddf
        + (k / 4.0 * q * q * (dl + dth) + q * ddth / 2.0 + (dl * dth * dth - p.g * p.g * dth + dth * dth * dth) / k)
            * f
            * f;
    Ok(efficiency * efficiency * (p.gamma_diff() * t).exp() / (p.g * p.g * r2) * bracket)
}

/// φ(t) on `grid` for target efficiency `efficiency`.
pub fn phase_evolution(p: &EmitterParams, env: &dyn Envelope, efficiency: f64, grid: &[f64]) -> Result<Vec<f64>> {
    p.validate()?;
    check_grid(grid, env.duration())?;
    let eval = evaluator(p, env)?;
    phase_on_grid(p, env, eval.as_ref(), efficiency, grid)
}

pub(crate) fn phase_on_grid(
    p: &EmitterParams,
    env: &dyn Envelope,
    eval: &dyn GEvaluator,
    efficiency: f64,
    grid: &[f64],
) -> Result<Vec<f64>> {
    let (g_max, t_max) = max_integrated(eval)?;
    if efficiency * efficiency * g_max >= 1.0 {
        return Err(Error::domain(format!(
            "E = {efficiency} exceeds E_max = {} (r^2 vanishes at t = {t_max})",
            g_max.sqrt().recip()
        )));
    }
    if efficiency == 0.0 || (p.delta == 0.0 && env.has_constant_phase()) {
        return Ok(vec![0.0; grid.len()]);
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &t in grid {
        acc += phase_increment(p, env, eval, efficiency, prev, t)?;
        out.push(acc);
        prev = t;
    }
    Ok(out)
}

pub(crate) fn phase_increment(
    p: &EmitterParams,
    env: &dyn Envelope,
    eval: &dyn GEvaluator,
    efficiency: f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    let mut failure = None;
    let r = quad::integrate(
        |s| {
            let v = eval.g_at(s).and_then(|g| phase_rate(p, env, efficiency, s, g));
            match v {
                Ok(x) => x,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        a,
        b,
        1e-14,
        1e-12,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cooperativity, siv_params};
    use crate::pulse::{sin2_pulse, CosineSeriesPulse, GenericEnvelope, PhaseProfile};

    fn perfect() -> EmitterParams {
        siv_params(0.0, 0.0).emitter_params().unwrap()
    }

    struct Flat;
    impl Envelope for Flat {
        fn duration(&self) -> f64 {
            1.0
        }
        fn amplitude(&self, _t: f64) -> [f64; 3] {
            [0.8, 0.0, 0.0]
        }
        fn phase(&self, _t: f64) -> [f64; 3] {
            [0.0; 3]
        }
        fn has_constant_phase(&self) -> bool {
            true
        }
    }

    #[test]
    fn constant_envelope_limits() {
        let mut p = perfect();
        p.gamma_tilde = 0.0;
        let d = depletion_rate(&p, &Flat, 0.5).unwrap();
        assert!((d - 0.64).abs() < 1e-14);
        let p = perfect();
        let c = cooperativity(&p).unwrap();
        let d = depletion_rate(&p, &Flat, 0.5).unwrap();
        assert!((d - (1.0 + 0.5 / c) * 0.64).abs() < 1e-13);
    }

    #[test]
    fn zero_outside_support() {
        let pulse = sin2_pulse(0.4).unwrap();
        assert_eq!(depletion_rate(&perfect(), &pulse, 0.5).unwrap(), 0.0);
        assert_eq!(depletion_rate(&perfect(), &pulse, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_coupling_is_domain_error() {
        let mut p = perfect();
        p.g = 0.0;
        assert!(matches!(depletion_rate(&p, &Flat, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn analytic_and_numeric_agree() {
        let p = siv_params(0.1, 0.1).emitter_params().unwrap();
        let pulse = CosineSeriesPulse::new(0.38, vec![1.5, -0.38, 0.16, -0.09]).unwrap().normalize().unwrap();
        let grid = quad::linspace(0.0, 0.38, 41);
        let num = integrated_depletion_numeric(&p, &pulse, &grid).unwrap();
        for (&t, &gn) in grid.iter().zip(&num.g) {
            let ga = integrated_depletion_analytic(&p, &pulse, t).unwrap();
            assert!((ga - gn).abs() <= 1e-9 * gn.abs().max(1e-3), "t={t}: {ga} vs {gn}");
        }
        assert_eq!(num.g[0], 0.0);
        assert!(num.g_max >= num.g_end());
    }

    #[test]
    fn chirped_pulse_is_unsupported_analytically() {
        let pulse = sin2_pulse(0.5).unwrap().with_phase(PhaseProfile::Linear { c_rad_per_ns: 1.0 });
        assert!(matches!(integrated_depletion_analytic(&perfect(), &pulse, 0.2), Err(Error::Unsupported(_))));
    }

    #[test]
    fn detuning_does_not_enter() {
        let pulse = sin2_pulse(0.44).unwrap();
        let p = siv_params(0.1, 0.05).emitter_params().unwrap();
        let mut q = p;
        q.delta = 17.0;
        let grid = quad::linspace(0.0, 0.44, 11);
        let a = integrated_depletion_numeric(&p, &pulse, &grid).unwrap();
        let b = integrated_depletion_numeric(&q, &pulse, &grid).unwrap();
        assert_eq!(a.d, b.d);
        assert_eq!(a.g, b.g);
    }

    #[test]
    fn phase_zero_on_resonance() {
        let pulse = sin2_pulse(0.44).unwrap();
        let p = siv_params(0.1, 0.1).emitter_params().unwrap();
        let grid = quad::linspace(0.0, 0.44, 21);
        let phi = phase_evolution(&p, &pulse, 0.95, &grid).unwrap();
        assert!(phi.iter().all(|&x| x == 0.0));
        let mut q = p;
        q.delta = 3.0;
        let phi = phase_evolution(&q, &pulse, 0.0, &grid).unwrap();
        assert!(phi.iter().all(|&x| x == 0.0));
        let phi = phase_evolution(&q, &pulse, 0.95, &grid).unwrap();
        assert!(phi.iter().any(|&x| x.abs() > 1e-6));
    }

    #[test]
    fn phase_above_bound_is_domain_error() {
        let pulse = sin2_pulse(0.44).unwrap();
        let p = siv_params(0.1, 0.1).emitter_params().unwrap();
        let grid = quad::linspace(0.0, 0.44, 5);
        assert!(matches!(phase_evolution(&p, &pulse, 1.0, &grid), Err(Error::Domain(_))));
    }

    #[test]
    fn generic_envelope_uses_numeric_path() {
        let p = perfect();
        let s = sin2_pulse(0.6).unwrap();
        let c = s.clone();
        let g = GenericEnvelope::new(0.6, move |t| c.evaluate(t)[0]).unwrap();
        let ea = evaluator(&p, &s).unwrap();
        let eg = evaluator(&p, &g).unwrap();
        let (ma, _) = max_integrated(ea.as_ref()).unwrap();
        let (mg, _) = max_integrated(eg.as_ref()).unwrap();
        // finite-difference second derivative limits agreement
        assert!((ma - mg).abs() < 1e-5 * ma);
    }

    #[test]
    fn csv_has_both_g_columns() {
        let p = siv_params(0.1, 0.1).emitter_params().unwrap();
        let pulse = sin2_pulse(0.44).unwrap();
        let prof = profile_analytic(&p, &pulse, &quad::linspace(0.0, 0.44, 3)).unwrap();
        let csv = prof.to_csv();
        assert!(csv.starts_with("t_ns,d_per_ns,G,expG2T_G,phi_rad\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
