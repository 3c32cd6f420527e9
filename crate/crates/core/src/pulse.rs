//! Photon envelopes v(t) = e^{iθ(t)} f(t) on the support [0, T].

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::depletion::analytic;
use crate::error::{Error, Result};
use crate::quad;

/// A photon envelope with access to its amplitude, phase and their first two
/// derivatives.
pub trait Envelope: Sync {
    fn duration(&self) -> f64;

    /// (f, ḟ, f̈) at `t`; zero outside [0, T].
    fn amplitude(&self, t: f64) -> [f64; 3];

    /// (θ, θ̇, θ̈) at `t`.
    fn phase(&self, t: f64) -> [f64; 3];

    /// True when θ̇ ≡ 0.
    fn has_constant_phase(&self) -> bool;

    /// ∫₀ᵗ |v|² dτ.
    fn norm_integral(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration());
        quad::integrate(|s| self.amplitude(s)[0].powi(2), 0.0, t, 1e-15, 1e-13).map(|r| r.value).unwrap_or(f64::NAN)
    }

    /// Complex envelope v(t).
    fn value(&self, t: f64) -> Complex64 {
        let f = self.amplitude(t)[0];
        Complex64::from_polar(f, self.phase(t)[0])
    }

    /// Downcast hook for paths that have a closed form.
    fn as_cosine_series(&self) -> Option<&CosineSeriesPulse> {
        None
    }
}

/// Phase profile of a cosine-series pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PhaseProfile {
    #[default]
    None,
    /// θ(t) = c·t.
    Linear { c_rad_per_ns: f64 },
}

impl PhaseProfile {
    fn eval(&self, t: f64) -> [f64; 3] {
        match *self {
            PhaseProfile::None => [0.0, 0.0, 0.0],
            PhaseProfile::Linear { c_rad_per_ns: c } => [c * t, c, 0.0],
        }
    }
}

/// f(t) = Σₙ vₙ [1 − cos(2πn t / T)] for 0 ≤ t ≤ T.
///
/// Coefficients are in ns^{-1/2} so that ∫₀ᵀ f² dt is dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineSeriesPulse {
    #[serde(rename = "T_ns")]
    duration: f64,
    coeffs: Vec<f64>,
    #[serde(default)]
    theta: PhaseProfile,
}

impl CosineSeriesPulse {
    pub fn new(duration: f64, coeffs: Vec<f64>) -> Result<Self> {
        let p = CosineSeriesPulse { duration, coeffs, theta: PhaseProfile::None };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::validation(format!("pulse duration must be positive, got {}", self.duration)));
        }
        if self.coeffs.is_empty() {
            return Err(Error::validation("cosine series needs at least one coefficient"));
        }
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation("non-finite series coefficient"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: CosineSeriesPulse = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pulse serializes")
    }

    pub fn with_phase(mut self, theta: PhaseProfile) -> Self {
        self.theta = theta;
        self
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn phase_profile(&self) -> PhaseProfile {
        self.theta
    }

    pub fn is_real(&self) -> bool {
        matches!(self.theta, PhaseProfile::None)
    }

    /// Angular frequency 2πn/T of the n-th harmonic.
    pub fn omega(&self, n: usize) -> f64 {
        2.0 * PI * n as f64 / self.duration
    }

    /// (f, ḟ, f̈) from the analytic series; zeros outside [0, T].
    pub fn evaluate(&self, t: f64) -> [f64; 3] {
        if !(0.0..=self.duration).contains(&t) {
            return [0.0; 3];
        }
        let mut out = [0.0; 3];
        for (i, &v) in self.coeffs.iter().enumerate() {
            let w = self.omega(i + 1);
            let (s, c) = (w * t).sin_cos();
            out[0] += v * (1.0 - c);
            out[1] += v * w * s;
            out[2] += v * w * w * c;
        }
        out
    }

    /// ∫₀ᵗ f² in closed form.
    pub fn norm_integral_exact(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration);
        let base = self.omega(1);
        let mut acc = 0.0;
        for (i, &vn) in self.coeffs.iter().enumerate() {
            for (j, &vm) in self.coeffs.iter().enumerate() {
                acc += vn * vm * analytic::ff_integral(i + 1, j + 1, base, 0.0, t);
            }
        }
        acc
    }

    /// Rescales the coefficients so that ∫₀ᵀ f² = 1.
    pub fn normalize(&self) -> Result<Self> {
        if self.coeffs.iter().all(|&c| c == 0.0) {
            return Err(Error::validation("cannot normalize an all-zero pulse"));
        }
        let norm = self.norm_integral_exact(self.duration);
        if !(norm > 0.0) {
            return Err(Error::numeric(format!("pulse norm evaluated to {norm}")));
        }
        let scale = norm.sqrt().recip();
        Ok(CosineSeriesPulse {
            duration: self.duration,
            coeffs: self.coeffs.iter().map(|c| c * scale).collect(),
            theta: self.theta,
        })
    }

    /// Maps T → sT with coefficients divided by √s.
    pub fn time_rescaled(&self, s: f64) -> Self {
        let k = s.sqrt().recip();
        CosineSeriesPulse {
            duration: self.duration * s,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
            theta: match self.theta {
                PhaseProfile::None => PhaseProfile::None,
                PhaseProfile::Linear { c_rad_per_ns } => PhaseProfile::Linear { c_rad_per_ns: c_rad_per_ns / s },
            },
        }
    }
}

impl Envelope for CosineSeriesPulse {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn amplitude(&self, t: f64) -> [f64; 3] {
        self.evaluate(t)
    }

    fn phase(&self, t: f64) -> [f64; 3] {
        self.theta.eval(t)
    }

    fn has_constant_phase(&self) -> bool {
        self.is_real()
    }

    fn as_cosine_series(&self) -> Option<&CosineSeriesPulse> {
        Some(self)
    }

    fn norm_integral(&self, t: f64) -> f64 {
        self.norm_integral_exact(t)
    }
}

/// Expands the free odd coefficients v₁, v₃, … into a series with
/// v₂ₖ = −(2k−1)²/(2k)² · v₂ₖ₋₁, which cancels each pair's contribution to
/// f̈(0) = f̈(T) = Σ vₙωₙ² and so makes both vanish.
///
/// The result is not normalized.
pub fn constrained_series(odd_coeffs: &[f64], duration: f64) -> Result<CosineSeriesPulse> {
    if odd_coeffs.is_empty() {
        return Err(Error::validation("constrained series needs at least one odd coefficient"));
    }
    let mut coeffs = Vec::with_capacity(2 * odd_coeffs.len());
    for (k, &v) in odd_coeffs.iter().enumerate() {
        let odd = (2 * k + 1) as f64;
        coeffs.push(v);
        coeffs.push(-(odd * odd) / ((odd + 1.0) * (odd + 1.0)) * v);
    }
    CosineSeriesPulse::new(duration, coeffs)
}

/// Normalized sin² pulse of duration `duration` (the L = 1 series).
pub fn sin2_pulse(duration: f64) -> Result<CosineSeriesPulse> {
    CosineSeriesPulse::new(duration, vec![1.0])?.normalize()
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Envelope built from user-supplied amplitude and phase functions.
///
/// Missing derivatives are taken by central differences with step T·10⁻⁴.
pub struct GenericEnvelope {
    duration: f64,
    f: ScalarFn,
    df: Option<ScalarFn>,
    ddf: Option<ScalarFn>,
    theta: Option<ScalarFn>,
    dtheta: Option<ScalarFn>,
    ddtheta: Option<ScalarFn>,
    scale: f64,
}

impl GenericEnvelope {
    pub fn new(duration: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::validation("envelope duration must be positive"));
        }
        Ok(GenericEnvelope {
            duration,
            f: Box::new(f),
            df: None,
            ddf: None,
            theta: None,
            dtheta: None,
            ddtheta: None,
            scale: 1.0,
        })
    }

    pub fn with_amplitude_derivatives(
        mut self,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ddf: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.df = Some(Box::new(df));
        self.ddf = Some(Box::new(ddf));
        self
    }

    pub fn with_phase(mut self, theta: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.theta = Some(Box::new(theta));
        self
    }

    pub fn with_phase_derivatives(
        mut self,
        dtheta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ddtheta: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.dtheta = Some(Box::new(dtheta));
        self.ddtheta = Some(Box::new(ddtheta));
        self
    }

    /// Scales the amplitude so that ∫₀ᵀ f² = 1 (by quadrature).
    pub fn normalized(mut self) -> Result<Self> {
        self.scale = 1.0;
        let norm = quad::integrate(|t| (self.f)(t).powi(2), 0.0, self.duration, 1e-15, 1e-13)?.value;
        if !(norm > 0.0) {
            return Err(Error::validation("cannot normalize a vanishing envelope"));
        }
        self.scale = norm.sqrt().recip();
        Ok(self)
    }

    fn fd(&self, g: &ScalarFn, t: f64) -> (f64, f64) {
        let h = self.duration * 1e-4;
        let (p, m, c) = (g(t + h), g(t - h), g(t));
        ((p - m) / (2.0 * h), (p - 2.0 * c + m) / (h * h))
    }
}

impl Envelope for GenericEnvelope {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn amplitude(&self, t: f64) -> [f64; 3] {
        if !(0.0..=self.duration).contains(&t) {
            return [0.0; 3];
        }
        let f = (self.f)(t);
        let (d1, d2) = match (&self.df, &self.ddf) {
            (Some(a), Some(b)) => (a(t), b(t)),
            _ => self.fd(&self.f, t),
        };
        [self.scale * f, self.scale * d1, self.scale * d2]
    }

    fn phase(&self, t: f64) -> [f64; 3] {
        let Some(theta) = &self.theta else {
            return [0.0; 3];
        };
        let (d1, d2) = match (&self.dtheta, &self.ddtheta) {
            (Some(a), Some(b)) => (a(t), b(t)),
            _ => self.fd(theta, t),
        };
        [theta(t), d1, d2]
    }

    fn has_constant_phase(&self) -> bool {
        self.theta.is_none()
    }
}

/// CSV with columns t_ns, f, theta on `n` evenly spaced samples.
pub fn sample_csv(env: &dyn Envelope, n: usize) -> String {
    let mut s = String::from("t_ns,f,theta\n");
    for t in quad::linspace(0.0, env.duration(), n.max(2)) {
        let _ = writeln!(s, "{t:.9e},{:.12e},{:.12e}", env.amplitude(t)[0], env.phase(t)[0]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_norm(p: &dyn Envelope) -> f64 {
        quad::integrate(|t| p.amplitude(t)[0].powi(2), 0.0, p.duration(), 1e-15, 1e-14).unwrap().value
    }

    #[test]
    fn endpoints_and_midpoint() {
        let p = CosineSeriesPulse::new(0.7, vec![0.4, -0.1, 0.05]).unwrap();
        let [f0, d0, dd0] = p.evaluate(0.0);
        assert_eq!(f0, 0.0);
        assert_eq!(d0, 0.0);
        let expect: f64 = p.coeffs().iter().enumerate().map(|(i, v)| v * p.omega(i + 1).powi(2)).sum();
        assert!((dd0 - expect).abs() < 1e-12 * expect.abs());
        let [ft, dt, _] = p.evaluate(0.7);
        assert!(ft.abs() < 1e-15 && dt.abs() < 1e-12);
        let single = CosineSeriesPulse::new(2.0, vec![0.3]).unwrap();
        assert!((single.evaluate(1.0)[0] - 0.6).abs() < 1e-15);
        assert_eq!(single.evaluate(2.5), [0.0; 3]);
    }

    #[test]
    fn constraint_zeroes_curvature() {
        let p = constrained_series(&[1.0], 0.5).unwrap();
        assert_eq!(p.coeffs(), &[1.0, -0.25]);
        assert!(p.evaluate(0.0)[2].abs() < 1e-12);
        let p = constrained_series(&[1.5, 0.16, -0.07], 0.38).unwrap();
        assert!((p.coeffs()[3] / p.coeffs()[2] + 9.0 / 16.0).abs() < 1e-15);
        assert!(p.evaluate(0.0)[2].abs() < 1e-10);
        assert!(p.evaluate(0.38)[2].abs() < 1e-10);
        assert!(constrained_series(&[], 1.0).is_err());
    }

    #[test]
    fn sin2_normalization() {
        let p = sin2_pulse(0.44).unwrap();
        assert!((p.coeffs()[0] - (2.0f64 / (3.0 * 0.44)).sqrt()).abs() < 1e-14);
        assert!((p.coeffs()[0] - 1.2309).abs() < 1e-4);
        assert!((quad_norm(&p) - 1.0).abs() < 1e-12);
        let mid = p.evaluate(0.22)[0];
        assert!((mid - 2.0 * (2.0f64 / (3.0 * 0.44)).sqrt()).abs() < 1e-13);
        assert!(sin2_pulse(0.0).is_err());
        assert!(sin2_pulse(-1.0).is_err());
    }

    #[test]
    fn normalize_is_idempotent() {
        let p = CosineSeriesPulse::new(1.3, vec![1.0, 0.4, -0.2]).unwrap().normalize().unwrap();
        let q = p.normalize().unwrap();
        for (a, b) in p.coeffs().iter().zip(q.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(CosineSeriesPulse::new(1.0, vec![0.0, 0.0]).unwrap().normalize().is_err());
    }

    #[test]
    fn generic_matches_series() {
        let s = CosineSeriesPulse::new(1.0, vec![1.0, -0.3]).unwrap().normalize().unwrap();
        let c = s.clone();
        let g = GenericEnvelope::new(1.0, move |t| c.evaluate(t)[0]).unwrap();
        for &t in &[0.1, 0.37, 0.8] {
            let a = s.evaluate(t);
            let b = g.amplitude(t);
            assert!((a[0] - b[0]).abs() < 1e-14);
            assert!((a[1] - b[1]).abs() < 1e-6 * a[1].abs().max(1.0));
            assert!((a[2] - b[2]).abs() < 1e-3 * a[2].abs().max(1.0));
        }
        assert!((g.norm_integral(1.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn json_shape() {
        let p = CosineSeriesPulse::new(0.5, vec![1.35, -0.3375])
            .unwrap()
            .with_phase(PhaseProfile::Linear { c_rad_per_ns: 2.0 });
        let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(v["T_ns"], 0.5);
        assert_eq!(v["theta"]["type"], "linear");
        assert_eq!(v["theta"]["c_rad_per_ns"], 2.0);
        let back = CosineSeriesPulse::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        let plain =
            CosineSeriesPulse::from_json(r#"{"T_ns": 1.0, "coeffs": [1.0], "theta": {"type": "none"}}"#).unwrap();
        assert!(plain.is_real());
    }

    #[test]
    fn csv_header() {
        let p = sin2_pulse(1.0).unwrap();
        let csv = sample_csv(&p, 5);
        assert!(csv.starts_with("t_ns,f,theta\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
