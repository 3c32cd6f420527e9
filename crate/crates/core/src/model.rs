//! Physical parameters of the emitter-cavity system.
//!
//! All rates and angular frequencies are in rad/ns and all times in ns.
//! Parameter files quote frequencies as plain GHz numbers; a value `x` in a
//! `*_GHz` field means ω = 2π·x rad/ns.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts a frequency quoted in "GHz × 2π" notation to rad/ns.
pub fn ghz(value: f64) -> f64 {
    2.0 * PI * value
}

fn check_rate(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::validation(format!("{name} must be a finite non-negative rate, got {value}")));
    }
    Ok(())
}

/// Microscopic dissipator rates of the master equation.
///
/// `gamma` is the total excited-state decay, split between |1⟩ and |0⟩ by the
/// branching angle `xi` (cos²ξ to |1⟩, sin²ξ to |0⟩).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRates {
    pub gamma: f64,
    pub xi: f64,
    pub gamma_ph_e: f64,
    pub gamma_ph_1: f64,
    pub gamma_1to0: f64,
    pub gamma_0to1: f64,
    pub kappa_tilde: f64,
}

impl Default for RawRates {
    fn default() -> Self {
        RawRates {
            gamma: 0.0,
            xi: 0.0,
            gamma_ph_e: 0.0,
            gamma_ph_1: 0.0,
            gamma_1to0: 0.0,
            gamma_0to1: 0.0,
            kappa_tilde: 0.0,
        }
    }
}

impl RawRates {
    pub fn validate(&self) -> Result<()> {
        check_rate("gamma", self.gamma)?;
        check_rate("gamma_ph_e", self.gamma_ph_e)?;
        check_rate("gamma_ph_1", self.gamma_ph_1)?;
        check_rate("gamma_1to0", self.gamma_1to0)?;
        check_rate("gamma_0to1", self.gamma_0to1)?;
        check_rate("kappa_tilde", self.kappa_tilde)?;
        if !(0.0..=FRAC_PI_2).contains(&self.xi) {
            return Err(Error::validation(format!("branching angle xi must lie in [0, pi/2], got {}", self.xi)));
        }
        Ok(())
    }
}

/// Effective decoherence rates entering the non-Hermitian Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedRates {
    pub gamma_tilde: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

/// Sums the dissipators that act on the same level.
///
/// L₁, L₂ and L₄ combine to γ̃|e⟩⟨e|, L₃ and L₆ to Γ₁|1⟩⟨1|, and L₅ alone
/// sets Γ₂. The branching angle drops out.
pub fn combine_rates(raw: &RawRates) -> Result<CombinedRates> {
    raw.validate()?;
    Ok(CombinedRates {
        gamma_tilde: raw.gamma + raw.gamma_ph_e,
        gamma1: raw.gamma_1to0 + raw.gamma_ph_1,
        gamma2: raw.gamma_0to1,
    })
}

/// Parameters of the emitter model in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    /// Single-photon coupling to the cavity.
    pub g: f64,
    /// Cavity out-coupling into the emitted mode.
    pub kappa: f64,
    /// Unwanted cavity loss.
    pub kappa_tilde: f64,
    /// Combined excited-state decoherence.
    pub gamma_tilde: f64,
    /// Combined decoherence of |1⟩.
    pub gamma1: f64,
    /// Combined decoherence of |0⟩.
    pub gamma2: f64,
    /// Detuning of the excited state.
    pub delta: f64,
}

impl EmitterParams {
    pub fn from_raw(g: f64, kappa: f64, delta: f64, raw: &RawRates) -> Result<Self> {
        let c = combine_rates(raw)?;
        let p = EmitterParams {
            g,
            kappa,
            kappa_tilde: raw.kappa_tilde,
            gamma_tilde: c.gamma_tilde,
            gamma1: c.gamma1,
            gamma2: c.gamma2,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(Error::validation(format!("g must be positive, got {}", self.g)));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::validation(format!("kappa must be positive, got {}", self.kappa)));
        }
        check_rate("kappa_tilde", self.kappa_tilde)?;
        check_rate("gamma_tilde", self.gamma_tilde)?;
        check_rate("Gamma1", self.gamma1)?;
        check_rate("Gamma2", self.gamma2)?;
        if !self.delta.is_finite() {
            return Err(Error::validation("Delta must be finite"));
        }
        Ok(())
    }

    /// Multiplies every rate (and the detuning) by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        EmitterParams {
            g: self.g * s,
            kappa: self.kappa * s,
            kappa_tilde: self.kappa_tilde * s,
            gamma_tilde: self.gamma_tilde * s,
            gamma1: self.gamma1 * s,
            gamma2: self.gamma2 * s,
            delta: self.delta * s,
        }
    }

    /// Γ₁ − Γ₂, the exponent of the depletion-rate prefactor.
    pub fn gamma_diff(&self) -> f64 {
        self.gamma1 - self.gamma2
    }
}

/// Generalized cooperativity C = 2g² / [γ̃ (κ + κ̃)].
pub fn cooperativity(p: &EmitterParams) -> Result<f64> {
    let denom = p.gamma_tilde * (p.kappa + p.kappa_tilde);
    if !(denom > 0.0) {
        return Err(Error::domain("cooperativity needs gamma_tilde > 0 and kappa + kappa_tilde > 0"));
    }
    Ok(2.0 * p.g * p.g / denom)
}

/// Lab-frame frequencies removed by the rotating-frame transformation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabFrameParams {
    /// Qubit level splitting δ.
    pub delta: f64,
    /// Cavity frequency ω_c.
    pub omega_c: f64,
}

/// Ω̃(t) = Ω(t)·exp[−i(δ + ω_c)t].
pub fn to_lab_frame_drive(omega_rot: Complex64, t: f64, lab: &LabFrameParams) -> Complex64 {
    omega_rot * Complex64::from_polar(1.0, -(lab.delta + lab.omega_c) * t)
}

/// Inverse of [`to_lab_frame_drive`].
pub fn to_rotating_frame_drive(omega_lab: Complex64, t: f64, lab: &LabFrameParams) -> Complex64 {
    omega_lab * Complex64::from_polar(1.0, (lab.delta + lab.omega_c) * t)
}

/// JSON parameter file. Frequencies are in GHz (ω = 2π·value), `xi_rad` in
/// radians. Missing decoherence keys default to zero.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamFile {
    pub g_GHz: f64,
    pub kappa_GHz: f64,
    #[serde(default)]
    pub kappa_tilde_GHz: f64,
    #[serde(default)]
    pub gamma_GHz: f64,
    #[serde(default)]
    pub gamma_ph_e_GHz: f64,
    #[serde(default)]
    pub gamma_ph_1_GHz: f64,
    #[serde(default)]
    pub gamma_1to0_GHz: f64,
    #[serde(default)]
    pub gamma_0to1_GHz: f64,
    #[serde(default)]
    pub Delta_GHz: f64,
    #[serde(default)]
    pub xi_rad: f64,
    /// Explicit |0⟩ decoherence; replaces `gamma_0to1_GHz` in Γ₂ when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub Gamma2_GHz: Option<f64>,
}

impl ParamFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn raw_rates(&self) -> Result<RawRates> {
        let raw = RawRates {
            gamma: ghz(self.gamma_GHz),
            xi: self.xi_rad,
            gamma_ph_e: ghz(self.gamma_ph_e_GHz),
            gamma_ph_1: ghz(self.gamma_ph_1_GHz),
            gamma_1to0: ghz(self.gamma_1to0_GHz),
            gamma_0to1: ghz(self.gamma_0to1_GHz),
            kappa_tilde: ghz(self.kappa_tilde_GHz),
        };
        raw.validate()?;
        Ok(raw)
    }

    pub fn emitter_params(&self) -> Result<EmitterParams> {
        let raw = self.raw_rates()?;
        let mut p = EmitterParams::from_raw(ghz(self.g_GHz), ghz(self.kappa_GHz), ghz(self.Delta_GHz), &raw)?;
        if let Some(g2) = self.Gamma2_GHz {
            p.gamma2 = ghz(g2);
            p.validate()?;
        }
        Ok(p)
    }
}

/// Cavity QED parameters of a silicon-vacancy centre, (g, κ, γ) = 2π×(6, 30, 0.1) GHz
/// in a one-sided cavity, with Γ₁ and Γ₂ given as fractions of γ.
///
/// Γ₁ is realised as |1⟩→|0⟩ relaxation and Γ₂ as |0⟩→|1⟩ relaxation; the
/// excited state decays with equal branching (ξ = π/4).
pub fn siv_params(gamma1_frac: f64, gamma2_frac: f64) -> ParamFile {
    ParamFile {
        g_GHz: 6.0,
        kappa_GHz: 30.0,
        kappa_tilde_GHz: 0.0,
        gamma_GHz: 0.1,
        gamma_ph_e_GHz: 0.0,
        gamma_ph_1_GHz: 0.0,
        gamma_1to0_GHz: 0.1 * gamma1_frac,
        gamma_0to1_GHz: 0.1 * gamma2_frac,
        Delta_GHz: 0.0,
        xi_rad: PI / 4.0,
        Gamma2_GHz: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_identity() {
        let raw = RawRates { gamma: 0.2 * PI, ..Default::default() };
        let c = combine_rates(&raw).unwrap();
        assert_eq!(c.gamma_tilde, 0.2 * PI);
        assert_eq!(c.gamma1, 0.0);
        assert_eq!(c.gamma2, 0.0);
    }

    #[test]
    fn combine_sums() {
        let raw = RawRates { gamma: 1.0, gamma_ph_e: 2.0, gamma_1to0: 0.5, gamma_ph_1: 0.25, ..Default::default() };
        let c = combine_rates(&raw).unwrap();
        assert_eq!(c.gamma_tilde, 3.0);
        assert_eq!(c.gamma1, 0.75);
    }

    #[test]
    fn negative_rate_rejected() {
        let raw = RawRates { gamma_ph_1: -1.0, ..Default::default() };
        assert!(matches!(combine_rates(&raw), Err(Error::Validation(_))));
        let raw = RawRates { xi: 2.0, ..Default::default() };
        assert!(raw.validate().is_err());
    }

    #[test]
    fn siv_cooperativity() {
        let p = siv_params(0.0, 0.0).emitter_params().unwrap();
        assert!((cooperativity(&p).unwrap() - 24.0).abs() < 1e-12);
        let mut lossy = p;
        lossy.kappa_tilde = lossy.kappa;
        assert!((cooperativity(&lossy).unwrap() - 12.0).abs() < 1e-12);
        assert!((cooperativity(&p.scaled(3.7)).unwrap() - 24.0).abs() < 1e-12);
    }

    #[test]
    fn cooperativity_zero_denominator() {
        let mut p = siv_params(0.0, 0.0).emitter_params().unwrap();
        p.gamma_tilde = 0.0;
        assert!(matches!(cooperativity(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn frame_rotation() {
        let lab = LabFrameParams { delta: 0.0, omega_c: 0.0 };
        assert_eq!(to_lab_frame_drive(Complex64::new(1.0, 0.0), 3.0, &lab), Complex64::new(1.0, 0.0));
        let lab = LabFrameParams { delta: 0.5 * PI, omega_c: 0.5 * PI };
        let z = to_lab_frame_drive(Complex64::new(1.0, 0.0), 1.0, &lab);
        assert!((z - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let back = to_rotating_frame_drive(z, 1.0, &lab);
        assert!((back - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn param_file_defaults_and_override() {
        let f = ParamFile::from_json(r#"{"g_GHz": 6, "kappa_GHz": 30, "gamma_GHz": 0.1}"#).unwrap();
        let p = f.emitter_params().unwrap();
        assert_eq!(p.gamma1, 0.0);
        assert!((p.gamma_tilde - ghz(0.1)).abs() < 1e-15);
        let f = ParamFile::from_json(r#"{"g_GHz": 6, "kappa_GHz": 30, "gamma_0to1_GHz": 0.01, "Gamma2_GHz": 0.02}"#)
            .unwrap();
        assert!((f.emitter_params().unwrap().gamma2 - ghz(0.02)).abs() < 1e-15);
        assert!(ParamFile::from_json(r#"{"g_GHz": 6, "kappa_GHz": 30, "bogus": 1}"#).is_err());
    }
}
