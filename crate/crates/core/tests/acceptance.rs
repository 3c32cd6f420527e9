//! Acceptance gate. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use flyqubit::bounds::{self, avg_fidelity, fidelity};
use flyqubit::depletion::{self, depletion_rate, AnalyticG};
use flyqubit::model::{ghz, siv_params, EmitterParams};
use flyqubit::ode::OdeOptions;
use flyqubit::optimize::{default_t_range, optimize_shape, OptimizationConfig};
use flyqubit::protocol::{run_protocol, Protocol};
use flyqubit::pulse::{constrained_series, sin2_pulse, PhaseProfile};
use flyqubit::quad;
use flyqubit::trajectory::{trajectory_from, DriveSynthesizer, InitialState};
use flyqubit::verify::{compare, integrate_nonhermitian, lindblad_simulate, LindbladOptions};
use flyqubit::{CosineSeriesPulse, Envelope, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn table_params() -> EmitterParams {
    siv_params(0.1, 0.1).emitter_params().expect("valid parameters")
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn optimized_table() -> Result<Outcome> {
    let p = table_params();
    let (lo, hi) = default_t_range(&p)?;
    let step = (hi - lo) / 499.0;
    let mut ok = true;
    let mut detail = String::new();

    let t0 = Instant::now();
    let u = optimize_shape(&p, &OptimizationConfig::full(1, false))?;
    let c = optimize_shape(&p, &OptimizationConfig::full(1, true))?;
    let l1_time = t0.elapsed().as_secs_f64();
    ok &= within(u.e_max, 0.988, 0.001) && within(u.duration, 0.44, step) && within(u.coeffs[0], 1.23, 0.01);
    ok &= within(c.e_max, 0.987, 0.001)
        && within(c.duration, 0.50, step)
        && within(c.coeffs[0], 1.35, 0.02)
        && within(c.coeffs[1], -0.34, 0.02);
    ok &= l1_time < 60.0;
    detail += &format!(
        "L=1: E_max={:.4} T={:.4} v1={:.4}; L=1 smooth: E_max={:.4} T={:.4} v=({:.4}, {:.4}); {:.1}s",
        u.e_max, u.duration, u.coeffs[0], c.e_max, c.duration, c.coeffs[0], c.coeffs[1], l1_time
    );

    let t0 = Instant::now();
    let d = optimize_shape(&p, &OptimizationConfig::desk(2, true))?;
    let l2_time = t0.elapsed().as_secs_f64();
    ok &= l2_time < 600.0;
    detail += &format!("; L=2 smooth desk grid: E_max={:.4} T={:.4} in {:.1}s", d.e_max, d.duration, l2_time);
    outcome(ok, detail)
}

fn slow_pulse_asymptote() -> Result<Outcome> {
    let p = siv_params(0.0, 0.0).emitter_params()?;
    let limit = bounds::slow_pulse_bound(&p)?;
    let durations = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0];
    let mut prev = 0.0;
    let mut ok = within(limit, 48.0 / 49.0, 1e-12);
    let mut worst_rel: f64 = 0.0;
    for &t in &durations {
        let e2 = bounds::bound_for(&p, &sin2_pulse(t)?)?.e_max.powi(2);
        ok &= e2 > prev && e2 < limit;
        if t >= 10.0 {
            worst_rel = worst_rel.max((limit - e2).abs() / limit);
        }
        prev = e2;
    }
    ok &= worst_rel <= 0.02;
    outcome(
        ok,
        format!("E_max^2(40 ns)={prev:.5}; limit 48/49={limit:.5}; worst relative gap over T>=10 ns {worst_rel:.2e}"),
    )
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn analytic_vs_quadrature() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = EmitterParams {
            g: ghz(log_uniform(&mut rng, 0.3, 300.0)),
            kappa: ghz(log_uniform(&mut rng, 0.3, 300.0)),
            kappa_tilde: ghz(log_uniform(&mut rng, 0.01, 10.0)),
            gamma_tilde: ghz(log_uniform(&mut rng, 0.01, 10.0)),
            gamma1: ghz(log_uniform(&mut rng, 0.001, 1.0)),
            gamma2: ghz(log_uniform(&mut rng, 0.001, 1.0)),
            delta: ghz(rng.gen_range(-1.0..1.0)),
        };
        let order = rng.gen_range(1..=3);
        let coeffs: Vec<f64> = (0..order).map(|n| if n == 0 { 1.0 } else { rng.gen_range(-1.0..1.0) }).collect();
        let big_t = log_uniform(&mut rng, 0.05, 5.0);
        let pulse = CosineSeriesPulse::new(big_t, coeffs)?.normalize()?;
        let eval = AnalyticG::new(&p, &pulse)?;
        for frac in [0.25, 0.5, 0.75, 1.0] {
            let t = frac * big_t;
            let oracle =
                quad::integrate(|s| depletion_rate(&p, &pulse, s).expect("g > 0"), 0.0, t, 1e-14, 1e-12)?.value;
            worst = worst.max((eval.at(t) - oracle).abs() / oracle.abs().max(1e-12));
        }
    }
    outcome(worst <= 1e-6, format!("100 random cases, worst relative deviation {worst:.2e}"))
}

fn synthesis_closure() -> Result<Outcome> {
    let p = table_params();
    let best = optimize_shape(&p, &OptimizationConfig::full(1, false))?.pulse();
    let smooth = constrained_series(&[1.5, 0.16], 0.38)?.normalize()?;
    let mut detuned = p;
    detuned.delta = ghz(0.5);
    let a0 = Complex64::from_polar(0.6, 0.7);
    let b0 = Complex64::from_polar(0.8, -0.2);
    let cases: [(&EmitterParams, &CosineSeriesPulse, InitialState); 3] = [
        (&p, &best, InitialState::from_population(1.0)?),
        (&detuned, &best, InitialState::new(a0, b0)?),
        (&p, &smooth, InitialState::from_population(0.5)?),
    ];
    let mut worst_amp: f64 = 0.0;
    let mut worst_lambda: f64 = 0.0;
    for (params, pulse, init) in cases {
        let synth = DriveSynthesizer::at_fraction(params, pulse, 0.99)?;
        let big_t = pulse.duration();
        let grid = quad::linspace(0.0, big_t, 201);
        let closed = trajectory_from(&synth, &init, &grid)?;
        let sol = integrate_nonhermitian(params, &synth, &init, &grid, &OdeOptions::default())?;
        worst_amp = worst_amp.max(compare(&closed, &sol)?.max_amp_dev);
        let expected = synth.efficiency() * (-0.5 * params.gamma2 * big_t).exp();
        let ratio = sol.lambda[grid.len() - 1] / init.alpha0;
        worst_lambda = worst_lambda.max((ratio - expected).norm() / expected);
    }
    outcome(
        worst_amp <= 1e-6 && worst_lambda <= 1e-6,
        format!("max amplitude deviation {worst_amp:.2e}; lambda(T)/alpha0 relative error {worst_lambda:.2e}"),
    )
}

fn lindblad_confirmation() -> Result<Outcome> {
    let pf = siv_params(0.1, 0.1);
    let raw = pf.raw_rates()?;
    let p = pf.emitter_params()?;
    let pulse = optimize_shape(&p, &OptimizationConfig::full(1, false))?.pulse();
    let synth = DriveSynthesizer::at_fraction(&p, &pulse, 0.99)?;
    let big_t = pulse.duration();
    let t0 = Instant::now();
    let mut worst_dev: f64 = 0.0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_no_jump: f64 = 0.0;
    let mut rows = Vec::new();
    for a2 in [0.0, 0.5, 1.0] {
        let init = InitialState::from_population(a2)?;
        let full = lindblad_simulate(&raw, &p, &pulse, &synth, &init, &LindbladOptions::default())?;
        let no_jump = lindblad_simulate(
            &raw,
            &p,
            &pulse,
            &synth,
            &init,
            &LindbladOptions { jumps: false, ..LindbladOptions::default() },
        )?;
        let predicted = fidelity(synth.efficiency(), p.gamma2, big_t, a2)?;
        let bound = fidelity(synth.e_max(), p.gamma2, big_t, a2)?;
        worst_dev = worst_dev.max((full.fidelity - predicted).abs());
        worst_excess = worst_excess.max(full.fidelity - bound);
        worst_no_jump = worst_no_jump.max((no_jump.fidelity - predicted).abs());
        rows.push(format!("|a0|^2={a2}: F_L={:.5} F_pred={predicted:.5}", full.fidelity));
    }
    let elapsed = t0.elapsed().as_secs_f64();
    outcome(
        worst_dev <= 1e-3 && worst_excess <= 1e-3 && elapsed < 60.0,
        format!(
            "{}; max |F_L - F_pred| {worst_dev:.2e}, max excess over bound {worst_excess:.2e}, \
no-jump branch deviation {worst_no_jump:.2e}; {elapsed:.1}s",
            rows.join(", ")
        ),
    )
}

fn phase_properties() -> Result<Outcome> {
    let p = table_params();
    let mut worst_phase: f64 = 0.0;
    for pulse in [sin2_pulse(0.44)?, constrained_series(&[1.5, 0.16], 0.38)?.normalize()?] {
        let e = 0.99 * bounds::bound_for(&p, &pulse)?.e_max;
        let grid = quad::linspace(0.0, pulse.duration(), 401);
        let phi = depletion::phase_evolution(&p, &pulse, e, &grid)?;
        worst_phase = phi.iter().fold(worst_phase, |m, v| m.max(v.abs()));
    }
    assert!(p.gamma1 < p.gamma_tilde);
    let base = sin2_pulse(0.44)?;
    let e0 = bounds::bound_for(&p, &base)?.e_max;
    let mut all_lower = true;
    let mut largest = f64::NEG_INFINITY;
    for mult in [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0] {
        let chirped = base.clone().with_phase(PhaseProfile::Linear { c_rad_per_ns: mult * p.kappa });
        let e = bounds::bound_for(&p, &chirped)?.e_max;
        all_lower &= e < e0;
        largest = largest.max(e);
    }
    outcome(
        worst_phase <= 1e-10 && all_lower,
        format!("max |phi| {worst_phase:.1e} at Delta=0; E_max unchirped {e0:.5}, largest chirped {largest:.5}"),
    )
}

fn bloch_average() -> Result<Outcome> {
    let p = table_params();
    let (e, big_t) = (0.98769, 0.44);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 100_000;
    let mut acc = 0.0;
    for _ in 0..n {
        // z uniform on [-1, 1] gives a uniform point on the sphere
        let z: f64 = rng.gen_range(-1.0..=1.0);
        acc += fidelity(e, p.gamma2, big_t, 0.5 * (1.0 + z))?;
    }
    let mc = acc / n as f64;
    let exact = avg_fidelity(e, p.gamma2, big_t);
    outcome((mc - exact).abs() <= 1e-3, format!("Monte Carlo {mc:.6} vs closed form {exact:.6}"))
}

fn protocol_exactness() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let required = [Protocol::TimebinA, Protocol::TimebinB, Protocol::EntangleA, Protocol::EntangleB];
    for _ in 0..20 {
        let a2: f64 = rng.gen_range(0.0..=1.0);
        let a0 = Complex64::from_polar(a2.sqrt(), rng.gen_range(0.0..2.0 * PI));
        let b0 = Complex64::from_polar((1.0 - a2).sqrt(), rng.gen_range(0.0..2.0 * PI));
        for which in Protocol::ALL {
            let run = run_protocol(which, a0, b0, 1.0)?;
            worst = worst.max(run.max_deviation);
        }
    }
    let ids: Vec<&str> = required.iter().map(|p| p.id()).collect();
    outcome(worst <= 1e-12, format!("{} (+ timebin_entangle_a): max amplitude deviation {worst:.1e}", ids.join(", ")))
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("optimized pulse table", optimized_table),
        ("slow-pulse asymptote", slow_pulse_asymptote),
        ("analytic vs quadrature G", analytic_vs_quadrature),
        ("synthesis closure", synthesis_closure),
        ("master-equation confirmation", lindblad_confirmation),
        ("phase properties", phase_properties),
        ("Bloch-average identity", bloch_average),
        ("protocol exactness", protocol_exactness),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name} [{:.1}s] {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
