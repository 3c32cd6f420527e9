//! Closed-form reverse solution: amplitudes and drive that emit a chosen
//! envelope with efficiency E.
//!
//! With c = Eα₀/√κ and K = (κ+κ̃)/2,
//!
//!   η = c e^{−Γ₂t/2} v,                   λ = Eα₀ e^{−Γ₂t/2} √(∫₀ᵗ|v|²),
//!   ζ = (c/g) e^{−Γ₂t/2} (K v + v̇),       α = α₀ e^{iφ − Γ₁t/2} √(1 − E²G),
//!   β = β₀ e^{−Γ₂t/2},
//!
//! and Ω = −[(γ̃/2 + iΔ)ζ + gη + ζ̇]/α.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::depletion::{self, GEvaluator};
use crate::error::{Error, Result};
use crate::model::EmitterParams;
use crate::pulse::Envelope;
use crate::quad;
use crate::report::Provenance;

const PHASE_NODES: usize = 4001;
const NORM_TOL: f64 = 1e-6;
/// r² below this counts as a zero of |α|.
pub const POLE_R2: f64 = 1e-12;

/// (α₀, β₀) of the matter qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub alpha0: Complex64,
    pub beta0: Complex64,
}

impl InitialState {
    pub fn new(alpha0: Complex64, beta0: Complex64) -> Result<Self> {
        let s = InitialState { alpha0, beta0 };
        s.validate()?;
        Ok(s)
    }

    /// Real amplitudes √a, √(1−a).
    pub fn from_population(alpha0_sq: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha0_sq) {
            return Err(Error::validation(format!("|alpha0|^2 must lie in [0, 1], got {alpha0_sq}")));
        }
        Ok(InitialState {
            alpha0: Complex64::new(alpha0_sq.sqrt(), 0.0),
            beta0: Complex64::new((1.0 - alpha0_sq).sqrt(), 0.0),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.alpha0.norm_sqr() + self.beta0.norm_sqr();
        if !((n - 1.0).abs() <= 1e-9) {
            return Err(Error::validation(format!("initial state has norm^2 {n}, expected 1")));
        }
        Ok(())
    }

    pub fn alpha0_sq(&self) -> f64 {
        self.alpha0.norm_sqr()
    }
}

/// Wave-function amplitudes at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub zeta: Complex64,
    pub eta: Complex64,
    pub lambda: Complex64,
}

impl Amplitudes {
    pub fn norm_sqr(&self) -> f64 {
        self.alpha.norm_sqr()
            + self.beta.norm_sqr()
            + self.zeta.norm_sqr()
            + self.eta.norm_sqr()
            + self.lambda.norm_sqr()
    }
}

struct PhaseTable {
    step: f64,
    phi: Vec<f64>,
    dphi: Vec<f64>,
}

impl PhaseTable {
    // cubic Hermite interpolation with exact node derivatives
    fn at(&self, t: f64) -> f64 {
        let last = self.phi.len() - 1;
        let x = (t / self.step).clamp(0.0, last as f64);
        let i = (x.floor() as usize).min(last - 1);
        let s = x - i as f64;
        let h = self.step;
        let (p0, p1, m0, m1) = (self.phi[i], self.phi[i + 1], self.dphi[i] * h, self.dphi[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
    }
}

/// Evaluates the closed-form solution and the drive at arbitrary times.
pub struct DriveSynthesizer<'a> {
    p: EmitterParams,
    env: &'a dyn Envelope,
    efficiency: f64,
    eval: Box<dyn GEvaluator + 'a>,
    g_max: f64,
    argmax_t: f64,
    phase: Option<PhaseTable>,
}

impl<'a> DriveSynthesizer<'a> {
    /// Synthesizer for efficiency `efficiency`, which may not exceed E_max.
    pub fn new(p: &EmitterParams, env: &'a dyn Envelope, efficiency: f64) -> Result<Self> {
        p.validate()?;
        if !(p.g > 0.0 && p.kappa > 0.0) {
            return Err(Error::domain("synthesis needs g > 0 and kappa > 0"));
        }
        let norm = env.norm_integral(env.duration());
        if !((norm - 1.0).abs() <= NORM_TOL) {
            return Err(Error::validation(format!("envelope must be normalized, got integral {norm}")));
        }
        if !(efficiency >= 0.0 && efficiency.is_finite()) {
            return Err(Error::validation(format!("efficiency must be non-negative, got {efficiency}")));
        }
        let eval = depletion::evaluator(p, env)?;
        let (g_max, argmax_t) = depletion::max_integrated(eval.as_ref())?;
        let e_max = g_max.sqrt().recip();
        if efficiency > e_max {
            return Err(Error::domain(format!(
                "efficiency {efficiency} exceeds E_max = {e_max} (reached at t = {argmax_t} ns)"
            )));
        }
        let phase = if efficiency == 0.0 || (p.delta == 0.0 && env.has_constant_phase()) {
            None
        } else {
            if efficiency * efficiency * g_max >= 1.0 {
                return Err(Error::domain("phase evolution undefined at E = E_max"));
            }
            let nodes = quad::linspace(0.0, env.duration(), PHASE_NODES);
            let phi = depletion::phase_on_grid(p, env, eval.as_ref(), efficiency, &nodes)?;
            let mut dphi = Vec::with_capacity(nodes.len());
            for &t in &nodes {
                dphi.push(depletion::phase_rate(p, env, efficiency, t, eval.g_at(t)?)?);
            }
            Some(PhaseTable { step: env.duration() / (PHASE_NODES - 1) as f64, phi, dphi })
        };
        Ok(DriveSynthesizer { p: *p, env, efficiency, eval, g_max, argmax_t, phase })
    }

    /// Synthesizer at E = s·E_max.
    pub fn at_fraction(p: &EmitterParams, env: &'a dyn Envelope, s: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::validation(format!("efficiency fraction must lie in (0, 1], got {s}")));
        }
        let eval = depletion::evaluator(p, env)?;
        let (g_max, _) = depletion::max_integrated(eval.as_ref())?;
        Self::new(p, env, s * g_max.sqrt().recip())
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn e_max(&self) -> f64 {
        self.g_max.sqrt().recip()
    }

    pub fn argmax_t(&self) -> f64 {
        self.argmax_t
    }

    pub fn params(&self) -> &EmitterParams {
        &self.p
    }

    pub fn envelope(&self) -> &dyn Envelope {
        self.env
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.phase.as_ref().map_or(0.0, |tab| tab.at(t))
    }

    /// 1 − E²G(t).
    pub fn r2(&self, t: f64) -> Result<f64> {
        Ok(1.0 - self.efficiency * self.efficiency * self.eval.g_at(t)?)
    }

    fn envelope_derivs(&self, t: f64) -> (Complex64, Complex64, Complex64) {
        let [f, df, ddf] = self.env.amplitude(t);
        let [th, dth, ddth] = self.env.phase(t);
        let rot = Complex64::from_polar(1.0, th);
        let i = Complex64::i();
        let v = rot * f;
        let dv = rot * (df + i * dth * f);
        let ddv = rot * (ddf + 2.0 * i * dth * df + i * ddth * f - dth * dth * f);
        (v, dv, ddv)
    }

    /// Emitter amplitudes per unit α₀ (ζ, η, λ/α₀-phase) and ζ̇, plus r².
    fn unit_solution(&self, t: f64) -> Result<(Complex64, Complex64, f64, Complex64, Complex64, f64)> {
        let p = &self.p;
        let (v, dv, ddv) = self.envelope_derivs(t);
        let decay2 = (-0.5 * p.gamma2 * t).exp();
        let c = self.efficiency / p.kappa.sqrt();
        let k = 0.5 * (p.kappa + p.kappa_tilde);
        let eta = c * decay2 * v;
        let zeta = c / p.g * decay2 * (k * v + dv);
        let zeta_dot = c / p.g * decay2 * (k * dv + ddv - 0.5 * p.gamma2 * (k * v + dv));
        let lambda = self.efficiency * decay2 * self.env.norm_integral(t).max(0.0).sqrt();
        let r2 = self.r2(t)?;
        if r2 < -POLE_R2 {
            return Err(Error::domain(format!("1 - E^2 G = {r2:e} < 0 at t = {t}")));
        }
        let alpha = Complex64::from_polar((-0.5 * p.gamma1 * t).exp() * r2.max(0.0).sqrt(), self.phi(t));
        Ok((zeta, eta, lambda, zeta_dot, alpha, r2))
    }

    pub fn amplitudes(&self, t: f64, init: &InitialState) -> Result<Amplitudes> {
        let (zeta, eta, lambda, _, alpha, _) = self.unit_solution(t)?;
        let a0 = init.alpha0;
        let phase0 = if a0.norm() > 0.0 { a0 / a0.norm() } else { Complex64::new(1.0, 0.0) };
        Ok(Amplitudes {
            alpha: a0 * alpha,
            beta: init.beta0 * (-0.5 * self.p.gamma2 * t).exp(),
            zeta: a0 * zeta,
            eta: a0 * eta,
            lambda: a0.norm() * phase0 * lambda,
        })
    }

    /// Ω(t); independent of the initial state.
    pub fn omega(&self, t: f64) -> Result<Complex64> {
        if !(0.0..=self.env.duration()).contains(&t) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let p = &self.p;
        let (zeta, eta, _, zeta_dot, alpha, r2) = self.unit_solution(t)?;
        let num = Complex64::new(0.5 * p.gamma_tilde, p.delta) * zeta + p.g * eta + zeta_dot;
        if r2 <= POLE_R2 {
            if num.norm() <= POLE_R2 {
                return Ok(Complex64::new(0.0, 0.0));
            }
            return Err(Error::Pole { t, r2 });
        }
        Ok(-num / alpha)
    }
}

/// Sampled closed-form solution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    pub zeta: Vec<Complex64>,
    pub eta: Vec<Complex64>,
    pub lambda: Vec<Complex64>,
    pub omega: Vec<Complex64>,
    pub efficiency: f64,
    pub e_max: f64,
    pub p_e: Vec<f64>,
    /// False for α₀ = 0, where the drive has no effect.
    pub drive_relevant: bool,
    pub init: InitialState,
}

impl Trajectory {
    pub fn amplitudes(&self, i: usize) -> Amplitudes {
        Amplitudes {
            alpha: self.alpha[i],
            beta: self.beta[i],
            zeta: self.zeta[i],
            eta: self.eta[i],
            lambda: self.lambda[i],
        }
    }

    /// |⟨target|Ψ(T)⟩|² with target α₀|1⟩_v + β₀|0⟩_v.
    pub fn final_fidelity(&self) -> f64 {
        let n = self.grid.len() - 1;
        let ov = self.init.alpha0.conj() * self.lambda[n] + self.init.beta0.conj() * self.beta[n];
        ov.norm_sqr()
    }

    /// CSV: t_ns, Re/Im of every amplitude and of Ω, p_e.
    pub fn to_csv(&self, prov: &Provenance) -> String {
        let mut s = prov.header();
        s.push_str(
            "t_ns,re_alpha,im_alpha,re_beta,im_beta,re_zeta,im_zeta,re_eta,im_eta,re_lambda,im_lambda,\
re_Omega,im_Omega,p_e\n",
        );
        for i in 0..self.grid.len() {
            let _ = write!(s, "{:.9e}", self.grid[i]);
            for z in [self.alpha[i], self.beta[i], self.zeta[i], self.eta[i], self.lambda[i], self.omega[i]] {
                let _ = write!(s, ",{:.12e},{:.12e}", z.re, z.im);
            }
            let _ = writeln!(s, ",{:.12e}", self.p_e[i]);
        }
        s
    }
}

/// Closed-form amplitudes and drive on `grid`.
pub fn closed_form_trajectory(
    p: &EmitterParams,
    env: &dyn Envelope,
    efficiency: f64,
    init: &InitialState,
    grid: &[f64],
) -> Result<Trajectory> {
    init.validate()?;
    let synth = DriveSynthesizer::new(p, env, efficiency)?;
    trajectory_from(&synth, init, grid)
}

pub fn trajectory_from(synth: &DriveSynthesizer<'_>, init: &InitialState, grid: &[f64]) -> Result<Trajectory> {
    init.validate()?;
    check_grid(grid, synth.env.duration())?;
    let n = grid.len();
    let mut tr = Trajectory {
        grid: grid.to_vec(),
        alpha: Vec::with_capacity(n),
        beta: Vec::with_capacity(n),
        zeta: Vec::with_capacity(n),
        eta: Vec::with_capacity(n),
        lambda: Vec::with_capacity(n),
        omega: Vec::with_capacity(n),
        efficiency: synth.efficiency,
        e_max: synth.e_max(),
        p_e: Vec::with_capacity(n),
        drive_relevant: init.alpha0.norm() > 0.0,
        init: *init,
    };
    for &t in grid {
        let a = synth.amplitudes(t, init)?;
        tr.alpha.push(a.alpha);
        tr.beta.push(a.beta);
        tr.zeta.push(a.zeta);
        tr.eta.push(a.eta);
        tr.lambda.push(a.lambda);
        tr.p_e.push(1.0 - a.norm_sqr());
        tr.omega.push(synth.omega(t)?);
    }
    Ok(tr)
}

fn check_grid(grid: &[f64], big_t: f64) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::validation("grid must be non-empty and sorted"));
    }
    if grid[0] < 0.0 || grid[grid.len() - 1] > big_t {
        return Err(Error::validation(format!("grid must lie within [0, {big_t}]")));
    }
    Ok(())
}

/// Ω(t) samples for efficiency `efficiency`.
pub fn drive_omega(p: &EmitterParams, env: &dyn Envelope, efficiency: f64, grid: &[f64]) -> Result<Vec<Complex64>> {
    let synth = DriveSynthesizer::new(p, env, efficiency)?;
    check_grid(grid, env.duration())?;
    grid.iter().map(|&t| synth.omega(t)).collect()
}

/// Coupling of the virtual cavity that absorbs `env`.
#[derive(Clone, Copy)]
pub struct VirtualCoupling<'a> {
    env: &'a dyn Envelope,
    cap: f64,
}

impl<'a> VirtualCoupling<'a> {
    /// `kappa` sets the clamp |g_v| ≤ 10³√κ used where ∫|v|² < 10⁻¹².
    pub fn new(env: &'a dyn Envelope, kappa: f64) -> Self {
        VirtualCoupling { env, cap: 1e3 * kappa.sqrt() }
    }

    /// g_v(t) = −v*(t)/√(∫₀ᵗ|v|²), zero at t = 0 and outside the support.
    pub fn at(&self, t: f64) -> Complex64 {
        if t <= 0.0 || t > self.env.duration() {
            return Complex64::new(0.0, 0.0);
        }
        let v = self.env.value(t);
        let n = self.env.norm_integral(t);
        if n < 1e-12 {
            let raw = if n > 0.0 { v.norm() / n.sqrt() } else { f64::INFINITY };
            return -v.conj().unscale(v.norm().max(f64::MIN_POSITIVE)) * raw.min(self.cap);
        }
        -v.conj() / n.sqrt()
    }
}

/// g_v(t) for the normalized envelope `env`.
pub fn virtual_coupling(env: &dyn Envelope, kappa: f64, t: f64) -> Complex64 {
    VirtualCoupling::new(env, kappa).at(t)
}

/// max_t |g_v*(t)λ(t) + √κ η(t)|, the residual of L₀|Ψ⟩ = 0.
pub fn mode_matching_residual(tr: &Trajectory, env: &dyn Envelope, kappa: f64) -> f64 {
    let gv = VirtualCoupling::new(env, kappa);
    let mut worst: f64 = 0.0;
    for i in 0..tr.grid.len() {
        let t = tr.grid[i];
        if tr.lambda[i].norm() == 0.0 {
            continue;
        }
        let res = gv.at(t).conj() * tr.lambda[i] + kappa.sqrt() * tr.eta[i];
        worst = worst.max(res.norm());
    }
    worst
}
