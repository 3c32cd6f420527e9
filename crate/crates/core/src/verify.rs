//! Independent oracles for the closed-form solution: forward integration of
//! the non-Hermitian amplitude equations, and the full master equation in the
//! truncated 12-dimensional space.

use nalgebra::{SMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::model::{combine_rates, EmitterParams, ParamFile, RawRates};
use crate::ode::{self, OdeOptions};
use crate::pulse::{CosineSeriesPulse, Envelope};
use crate::quad;
use crate::trajectory::{trajectory_from, DriveSynthesizer, InitialState, Trajectory, VirtualCoupling};

/// A time-dependent Rabi frequency.
pub trait Drive: Sync {
    fn omega(&self, t: f64) -> Result<Complex64>;
}

impl Drive for DriveSynthesizer<'_> {
    fn omega(&self, t: f64) -> Result<Complex64> {
        DriveSynthesizer::omega(self, t)
    }
}

impl<F: Fn(f64) -> Complex64 + Sync> Drive for F {
    fn omega(&self, t: f64) -> Result<Complex64> {
        Ok(self(t))
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Amplitudes from forward integration.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub grid: Vec<f64>,
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    pub zeta: Vec<Complex64>,
    pub eta: Vec<Complex64>,
    pub lambda: Vec<Complex64>,
    pub local_error: Vec<f64>,
    pub steps: usize,
}

impl OdeSolution {
    pub fn norm_sqr(&self, i: usize) -> f64 {
        self.alpha[i].norm_sqr()
            + self.beta[i].norm_sqr()
            + self.zeta[i].norm_sqr()
            + self.eta[i].norm_sqr()
            + self.lambda[i].norm_sqr()
    }

    pub fn final_fidelity(&self, init: &InitialState) -> f64 {
        let n = self.grid.len() - 1;
        (init.alpha0.conj() * self.lambda[n] + init.beta0.conj() * self.beta[n]).norm_sqr()
    }
}

/// Integrates the amplitude equations under `drive`.
///
/// λ is carried as |λ|², which obeys d|λ|²/dt = −Γ₂|λ|² + κ|η|², and
/// takes the phase of α₀.
pub fn integrate_nonhermitian(
    p: &EmitterParams,
    drive: &dyn Drive,
    init: &InitialState,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<OdeSolution> {
    p.validate()?;
    init.validate()?;
    let mut failure: Option<Error> = None;
    let a0 = init.alpha0;
    let y0 = [a0.re, a0.im, init.beta0.re, init.beta0.im, 0.0, 0.0, 0.0, 0.0, 0.0];
    let pp = *p;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let om = match drive.omega(t) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                c(0.0, 0.0)
            }
        };
        let alpha = c(y[0], y[1]);
        let beta = c(y[2], y[3]);
        let zeta = c(y[4], y[5]);
        let eta = c(y[6], y[7]);
        let da = -0.5 * pp.gamma1 * alpha + om.conj() * zeta;
        let db = -0.5 * pp.gamma2 * beta;
        let dz = c(-0.5 * pp.gamma_tilde, -pp.delta) * zeta - pp.g * eta - om * alpha;
        let de = -0.5 * (pp.gamma2 + pp.kappa + pp.kappa_tilde) * eta + pp.g * zeta;
        dy[0] = da.re;
        dy[1] = da.im;
        dy[2] = db.re;
        dy[3] = db.im;
        dy[4] = dz.re;
        dy[5] = dz.im;
        dy[6] = de.re;
        dy[7] = de.im;
        dy[8] = -pp.gamma2 * y[8] + pp.kappa * eta.norm_sqr();
    };
    let out = ode::integrate(rhs, &y0, grid, opts, |_, _| Ok(()));
    if let Some(e) = failure {
        return Err(e);
    }
    let out = out?;
    let phase0 = if a0.norm() > 0.0 { a0 / a0.norm() } else { c(1.0, 0.0) };
    let n = out.states.len();
    let mut sol = OdeSolution {
        grid: out.times.clone(),
        alpha: Vec::with_capacity(n),
        beta: Vec::with_capacity(n),
        zeta: Vec::with_capacity(n),
        eta: Vec::with_capacity(n),
        lambda: Vec::with_capacity(n),
        local_error: out.local_error,
        steps: out.steps,
    };
    for y in &out.states {
        sol.alpha.push(c(y[0], y[1]));
        sol.beta.push(c(y[2], y[3]));
        sol.zeta.push(c(y[4], y[5]));
        sol.eta.push(c(y[6], y[7]));
        sol.lambda.push(phase0 * y[8].max(0.0).sqrt());
    }
    Ok(sol)
}

/// Deviations between a closed-form trajectory and an oracle run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareReport {
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    pub eta: f64,
    pub lambda: f64,
    pub max_amp_dev: f64,
    /// max |p_e,closed − p_e,ode|.
    pub norm_loss_dev: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Tolerance used by [`compare`].
pub const AMPLITUDE_TOL: f64 = 1e-6;

pub fn compare(closed: &Trajectory, ode: &OdeSolution) -> Result<CompareReport> {
    if closed.grid.len() != ode.grid.len()
        || closed.grid.iter().zip(&ode.grid).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::validation("trajectory and ODE solution use different grids"));
    }
    let dev = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let alpha = dev(&closed.alpha, &ode.alpha);
    let beta = dev(&closed.beta, &ode.beta);
    let zeta = dev(&closed.zeta, &ode.zeta);
    let eta = dev(&closed.eta, &ode.eta);
    let lambda = dev(&closed.lambda, &ode.lambda);
    let max_amp_dev = alpha.max(beta).max(zeta).max(eta).max(lambda);
    let norm_loss_dev =
        (0..closed.grid.len()).map(|i| (closed.p_e[i] - (1.0 - ode.norm_sqr(i))).abs()).fold(0.0, f64::max);
    Ok(CompareReport {
        alpha,
        beta,
        zeta,
        eta,
        lambda,
        max_amp_dev,
        norm_loss_dev,
        tolerance: AMPLITUDE_TOL,
        pass: max_amp_dev <= AMPLITUDE_TOL,
    })
}

/// 12×12 density matrix over {|1⟩,|0⟩,|e⟩} ⊗ {|0⟩_c,|1⟩_c} ⊗ {|0⟩_v,|1⟩_v}.
pub type Mat12 = SMatrix<Complex64, 12, 12>;

/// Index of |m⟩|c⟩|v⟩ with m = 0 for |1⟩, 1 for |0⟩, 2 for |e⟩.
pub const fn basis_index(m: usize, cav: usize, vc: usize) -> usize {
    m * 4 + cav * 2 + vc
}

pub const LEVEL_1: usize = 0;
pub const LEVEL_0: usize = 1;
pub const LEVEL_E: usize = 2;

fn excitations(k: usize) -> usize {
    let m = k / 4;
    usize::from(m != LEVEL_0) + (k / 2) % 2 + k % 2
}

/// σ_{ab} = |a⟩⟨b| on the emitter, identity on both modes.
fn emitter_op(a: usize, b: usize) -> Mat12 {
    let mut m = Mat12::zeros();
    for cav in 0..2 {
        for vc in 0..2 {
            m[(basis_index(a, cav, vc), basis_index(b, cav, vc))] = c(1.0, 0.0);
        }
    }
    m
}

fn cavity_lower() -> Mat12 {
    let mut m = Mat12::zeros();
    for lvl in 0..3 {
        for vc in 0..2 {
            m[(basis_index(lvl, 0, vc), basis_index(lvl, 1, vc))] = c(1.0, 0.0);
        }
    }
    m
}

fn virtual_lower() -> Mat12 {
    let mut m = Mat12::zeros();
    for lvl in 0..3 {
        for cav in 0..2 {
            m[(basis_index(lvl, cav, 0), basis_index(lvl, cav, 1))] = c(1.0, 0.0);
        }
    }
    m
}

/// Options of the master-equation run.
#[derive(Debug, Clone, Copy)]
pub struct LindbladOptions {
    pub ode: OdeOptions,
    /// Keep the recycling terms LρL†. With `false` the run follows the
    /// no-jump branch only.
    pub jumps: bool,
    pub trace_tol: f64,
    pub hermiticity_tol: f64,
    pub psd_tol: f64,
    pub leakage_tol: f64,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        LindbladOptions {
            ode: OdeOptions::default(),
            jumps: true,
            trace_tol: 1e-6,
            hermiticity_tol: 1e-10,
            psd_tol: 1e-8,
            leakage_tol: 1e-8,
        }
    }
}

/// Final state of a master-equation run with diagnostics.
#[derive(Debug, Clone)]
pub struct LindbladResult {
    pub rho: Mat12,
    pub fidelity: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub max_trace_dev: f64,
    pub max_hermiticity_dev: f64,
    /// Largest population seen outside the ≤1-excitation sector.
    pub multi_excitation_population: f64,
    pub steps: usize,
}

fn check_consistent(raw: &RawRates, p: &EmitterParams) -> Result<()> {
    let cr = combine_rates(raw)?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    if !(close(cr.gamma_tilde, p.gamma_tilde)
        && close(cr.gamma1, p.gamma1)
        && close(cr.gamma2, p.gamma2)
        && close(raw.kappa_tilde, p.kappa_tilde))
    {
        return Err(Error::validation(
            "raw dissipator rates do not combine to the emitter parameters used for synthesis",
        ));
    }
    Ok(())
}

fn pack(m: &Mat12, out: &mut [f64]) {
    for (k, z) in m.iter().enumerate() {
        out[2 * k] = z.re;
        out[2 * k + 1] = z.im;
    }
}

fn unpack(y: &[f64]) -> Mat12 {
    Mat12::from_iterator((0..144).map(|k| c(y[2 * k], y[2 * k + 1])))
}

/// Master-equation evolution on [0, t_end] with drive Ω(t) and virtual
/// coupling g_v(t).
pub fn lindblad_evolve(
    raw: &RawRates,
    p: &EmitterParams,
    drive: &dyn Drive,
    coupling: &(dyn Fn(f64) -> Complex64 + Sync),
    init: &InitialState,
    t_end: f64,
    opts: &LindbladOptions,
) -> Result<LindbladResult> {
    raw.validate()?;
    p.validate()?;
    init.validate()?;
    check_consistent(raw, p)?;
    if !(t_end > 0.0) {
        return Err(Error::validation("evolution time must be positive"));
    }

    let s1e = emitter_op(LEVEL_1, LEVEL_E);
    let s0e = emitter_op(LEVEL_0, LEVEL_E);
    let cl = cavity_lower();
    let av = virtual_lower();
    let sk = p.kappa.sqrt();
    let mut fixed: Vec<Mat12> = vec![
        s1e * c(raw.gamma.sqrt() * raw.xi.cos(), 0.0),
        s0e * c(raw.gamma.sqrt() * raw.xi.sin(), 0.0),
        emitter_op(LEVEL_1, LEVEL_1) * c(raw.gamma_ph_1.sqrt(), 0.0),
        emitter_op(LEVEL_E, LEVEL_E) * c(raw.gamma_ph_e.sqrt(), 0.0),
        emitter_op(LEVEL_1, LEVEL_0) * c(raw.gamma_0to1.sqrt(), 0.0),
        emitter_op(LEVEL_0, LEVEL_1) * c(raw.gamma_1to0.sqrt(), 0.0),
        cl * c(raw.kappa_tilde.sqrt(), 0.0),
    ];
    fixed.retain(|l| l.iter().any(|z| z.norm() > 0.0));
    let decay_fixed: Mat12 = fixed.iter().map(|l| l.adjoint() * l).fold(Mat12::zeros(), |a, b| a + b);

    let cd = cl.adjoint();
    let coupling_ce = cd * s0e;
    let h_static = emitter_op(LEVEL_E, LEVEL_E) * c(p.delta, 0.0) + (coupling_ce + coupling_ce.adjoint()) * c(p.g, 0.0);
    let e1 = emitter_op(LEVEL_E, LEVEL_1);
    let e1d = e1.adjoint();
    let cd_a = cd * av;
    let ad_c = av.adjoint() * cl;
    let ad_a = av.adjoint() * av;
    let cd_c = cd * cl;
    let heff_static = h_static - decay_fixed * c(0.0, 0.5) - cd_c * c(0.0, 0.5 * p.kappa);

    let mut failure: Option<Error> = None;
    let jumps = opts.jumps;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let om = match drive.omega(t) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                c(0.0, 0.0)
            }
        };
        let gv = coupling(t);
        let rho = unpack(y);
        // (i/2)√κ(g_v* c†a − g_v a†c)
        let h_virtual = cd_a * (c(0.0, 0.5 * sk) * gv.conj()) - ad_c * (c(0.0, 0.5 * sk) * gv);
        let l0 = av * gv.conj() + cl * c(sk, 0.0);
        // L0†L0 without the static κ c†c part
        let l0_extra = ad_a * c(gv.norm_sqr(), 0.0) + ad_c * (gv * sk) + cd_a * (gv.conj() * sk);
        let heff = heff_static + e1 * om + e1d * om.conj() + h_virtual - l0_extra * c(0.0, 0.5);
        let hr = heff * rho;
        let mut d = (hr - hr.adjoint()) * c(0.0, -1.0);
        if jumps {
            d += l0 * rho * l0.adjoint();
            for l in &fixed {
                d += l * rho * l.adjoint();
            }
        }
        pack(&d, dy);
    };

    let psi0 = {
        let mut v = SMatrix::<Complex64, 12, 1>::zeros();
        v[basis_index(LEVEL_1, 0, 0)] = init.alpha0;
        v[basis_index(LEVEL_0, 0, 0)] = init.beta0;
        v
    };
    let rho0 = psi0 * psi0.adjoint();
    let mut y0 = vec![0.0; 288];
    pack(&rho0, &mut y0);

    let mut max_trace_dev: f64 = 0.0;
    let mut max_herm: f64 = 0.0;
    let mut leak: f64 = 0.0;
    let check_leak = raw.gamma_0to1 == 0.0;
    let observer = |t: f64, y: &[f64]| -> Result<()> {
        let rho = unpack(y);
        let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        max_herm = max_herm.max(herm);
        if herm > opts.hermiticity_tol {
            return Err(Error::numeric(format!("density matrix lost Hermiticity ({herm:e}) at t = {t}")));
        }
        if jumps {
            let tr = rho.trace().re;
            max_trace_dev = max_trace_dev.max((tr - 1.0).abs());
            if (tr - 1.0).abs() > opts.trace_tol {
                return Err(Error::numeric(format!("trace drifted to {tr} at t = {t}")));
            }
        }
        let multi: f64 = (0..12).filter(|&k| excitations(k) >= 2).map(|k| rho[(k, k)].re).sum();
        leak = leak.max(multi);
        if check_leak && multi > opts.leakage_tol {
            return Err(Error::Model(format!("population {multi:e} left the single-excitation sector at t = {t}")));
        }
        Ok(())
    };
    let out = ode::integrate(rhs, &y0, &[0.0, t_end], &opts.ode, observer);
    if let Some(e) = failure {
        return Err(e);
    }
    let out = out?;
    let rho = unpack(&out.states[1]);
    let herm = (rho + rho.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if jumps && min_eigenvalue < -opts.psd_tol {
        return Err(Error::numeric(format!("density matrix not positive: eigenvalue {min_eigenvalue:e}")));
    }
    let mut target = SMatrix::<Complex64, 12, 1>::zeros();
    target[basis_index(LEVEL_0, 0, 1)] = init.alpha0;
    target[basis_index(LEVEL_0, 0, 0)] = init.beta0;
    let fidelity = (target.adjoint() * rho * target)[(0, 0)].re;
    Ok(LindbladResult {
        trace: rho.trace().re,
        rho,
        fidelity,
        min_eigenvalue,
        max_trace_dev,
        max_hermiticity_dev: max_herm,
        multi_excitation_population: leak,
        steps: out.steps,
    })
}

/// Master-equation run for the emission of `env`, with the virtual cavity
/// matched to it.
pub fn lindblad_simulate(
    raw: &RawRates,
    p: &EmitterParams,
    env: &dyn Envelope,
    drive: &dyn Drive,
    init: &InitialState,
    opts: &LindbladOptions,
) -> Result<LindbladResult> {
    let gv = VirtualCoupling::new(env, p.kappa);
    lindblad_evolve(raw, p, drive, &|t| gv.at(t), init, env.duration(), opts)
}

/// Synthesis request consumed by the verify pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRequest {
    pub params: ParamFile,
    pub pulse: CosineSeriesPulse,
    /// Target efficiency; defaults to `s`·E_max.
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
    #[serde(default = "default_fraction")]
    pub s: f64,
    #[serde(default = "default_populations")]
    pub alpha0_sq: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_fraction() -> f64 {
    0.99
}

fn default_populations() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}

fn default_samples() -> usize {
    201
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize)]
pub struct VerifyCase {
    pub alpha0_sq: f64,
    pub F_closed: f64,
    pub F_ode: f64,
    pub F_lindblad: f64,
    pub p_e: f64,
    pub max_amp_dev: f64,
    pub multi_excitation_population: f64,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub E: f64,
    pub E_max: f64,
    pub T_ns: f64,
    pub cases: Vec<VerifyCase>,
}

/// Synthesis, forward integration and master equation for every requested
/// initial state.
pub fn verify_request(req: &VerifyRequest) -> Result<VerifyReport> {
    let raw = req.params.raw_rates()?;
    let p = req.params.emitter_params()?;
    let synth = match req.efficiency {
        Some(e) => DriveSynthesizer::new(&p, &req.pulse, e)?,
        None => DriveSynthesizer::at_fraction(&p, &req.pulse, req.s)?,
    };
    if req.samples < 2 {
        return Err(Error::validation("need at least 2 samples"));
    }
    let big_t = req.pulse.duration();
    let grid = quad::linspace(0.0, big_t, req.samples);
    let mut cases = Vec::with_capacity(req.alpha0_sq.len());
    for &a2 in &req.alpha0_sq {
        let init = InitialState::from_population(a2)?;
        let closed = trajectory_from(&synth, &init, &grid)?;
        let sol = integrate_nonhermitian(&p, &synth, &init, &grid, &OdeOptions::default())?;
        let cmp = compare(&closed, &sol)?;
        let lind = lindblad_simulate(&raw, &p, &req.pulse, &synth, &init, &LindbladOptions::default())?;
        cases.push(VerifyCase {
            alpha0_sq: a2,
            F_closed: bounds::fidelity(synth.efficiency(), p.gamma2, big_t, a2)?,
            F_ode: sol.final_fidelity(&init),
            F_lindblad: lind.fidelity,
            p_e: *closed.p_e.last().expect("non-empty grid"),
            max_amp_dev: cmp.max_amp_dev,
            multi_excitation_population: lind.multi_excitation_population,
        });
    }
    Ok(VerifyReport { E: synth.efficiency(), E_max: synth.e_max(), T_ns: big_t, cases })
}
