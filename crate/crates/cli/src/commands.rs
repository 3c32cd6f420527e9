use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use flyqubit::bounds::{self, duration_sweep, sweep_csv, DECOHERENCE_SETS};
use flyqubit::model::siv_params;
use flyqubit::optimize::{optimize_shape, OptimizationConfig, OptimizationResult};
use flyqubit::protocol::run_protocol;
use flyqubit::pulse::sin2_pulse;
use flyqubit::report::Provenance;
use flyqubit::trajectory::{drive_omega, mode_matching_residual, trajectory_from, DriveSynthesizer, InitialState};
use flyqubit::verify::{verify_request, VerifyRequest, AMPLITUDE_TOL};
use flyqubit::{quad, CosineSeriesPulse, EmitterParams, Envelope, ParamFile};
use serde::Serialize;

use crate::{reference, BoundArgs, CliError, Common, Grid, OptimizeArgs, ProtocolArgs, TrajectoryArgs, VerifyArgs};

pub type CmdResult = Result<(), CliError>;

/// Agreement required between the master equation and the closed-form fidelity.
pub const LINDBLAD_TOL: f64 = 1e-3;

pub struct Loaded {
    pub file: ParamFile,
    pub params: EmitterParams,
    /// True when no parameter file was given.
    pub default: bool,
}

pub fn load_params(common: &Common) -> Result<Loaded, CliError> {
    let (file, default) = match &common.params {
        Some(path) => (ParamFile::from_json(&fs::read_to_string(path)?)?, false),
        None => (siv_params(0.1, 0.1), true),
    };
    let params = file.emitter_params()?;
    Ok(Loaded { file, params, default })
}

pub fn load_pulse(path: Option<&Path>) -> Result<CosineSeriesPulse, CliError> {
    match path {
        Some(p) => Ok(CosineSeriesPulse::from_json(&fs::read_to_string(p)?)?),
        None => Ok(sin2_pulse(0.44)?),
    }
}

pub fn write(out: &Path, name: &str, content: &str) -> CmdResult {
    fs::create_dir_all(out)?;
    fs::write(out.join(name), content)?;
    Ok(())
}

pub fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(out, name, &text)?;
    Ok(text)
}

pub fn checked(failures: Vec<String>) -> CmdResult {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failures))
    }
}

pub fn bound(common: &Common, args: &BoundArgs) -> CmdResult {
    let loaded = load_params(common)?;
    let pulse = load_pulse(args.pulse.as_deref())?.normalize()?;
    let b = bounds::bound_for(&loaded.params, &pulse)?;
    print!("{}", write_json(&common.out, "bound.json", &b)?);

    let rows = duration_sweep(&DECOHERENCE_SETS, args.t_min, args.t_max, args.samples)?;
    let prov = Provenance::new("fidelity bounds of sin2 pulses")
        .with("T_range_ns", format!("{} {}", args.t_min, args.t_max))
        .with("samples", args.samples);
    write(&common.out, "bounds_sweep.csv", &sweep_csv(&rows, &prov))?;

    if !common.check {
        return Ok(());
    }
    let mut failures = Vec::new();
    for r in &rows {
        if r.f_worst_exact > r.f_worst_simplified * (1.0 + 1e-12) {
            failures.push(format!("set {} T={}: exact bound above the G(T) bound", r.set, r.duration));
        }
    }
    let perfect: Vec<_> = rows.iter().filter(|r| r.set == 0).collect();
    if let Some(last) = perfect.last() {
        let limit = last.f_worst_slow;
        if last.duration >= 10.0 && !(last.f_worst_exact < limit && last.f_worst_exact > 0.98 * limit) {
            failures.push(format!(
                "perfect emitter at T={}: {} not within 2% below {limit}",
                last.duration, last.f_worst_exact
            ));
        }
    }
    checked(failures)
}

pub fn optimization_config(order: usize, constrained: bool, grid: Grid, refine: Option<bool>) -> OptimizationConfig {
    let mut cfg = match grid {
        Grid::Full => OptimizationConfig::full(order, constrained),
        Grid::Desk => OptimizationConfig::desk(order, constrained),
    };
    if let Some(r) = refine {
        cfg.refine = r;
    }
    cfg
}

pub fn pulse_name(res: &OptimizationResult) -> String {
    format!("L{}_{}", res.order, if res.constrained { "constrained" } else { "free" })
}

/// f(t) and Ω(t) of an optimized pulse driven at s·E_max.
pub fn pulse_csv(p: &EmitterParams, res: &OptimizationResult, s: f64, samples: usize) -> Result<String, CliError> {
    let pulse = res.pulse();
    let e = s * res.e_max;
    let grid = quad::linspace(0.0, pulse.duration(), samples.max(2));
    let omega = drive_omega(p, &pulse, e, &grid)?;
    let prov = Provenance::new("optimized pulse and drive")
        .with_params(p)
        .with("L", res.order)
        .with("constrained", res.constrained)
        .with("T_ns", format!("{:.12e}", res.duration))
        .with("E", format!("{e:.12e}"))
        .with("E_over_E_max", s);
    let mut csv = prov.header();
    csv.push_str("t_ns,f,re_Omega,im_Omega,abs_Omega\n");
    for (&t, om) in grid.iter().zip(&omega) {
        let _ =
            writeln!(csv, "{t:.9e},{:.12e},{:.12e},{:.12e},{:.12e}", pulse.amplitude(t)[0], om.re, om.im, om.norm());
    }
    Ok(csv)
}

pub fn optimize(common: &Common, args: &OptimizeArgs) -> CmdResult {
    let loaded = load_params(common)?;
    let cfg = optimization_config(args.order, args.constrained, args.grid, args.refine);
    let res = optimize_shape(&loaded.params, &cfg)?;
    let name = pulse_name(&res);
    print!("{}", write_json(&common.out, &format!("optimize_{name}.json"), &res)?);
    write(&common.out, &format!("pulse_{name}.csv"), &pulse_csv(&loaded.params, &res, args.s, args.samples)?)?;
    if !common.check {
        return Ok(());
    }
    let mut failures = Vec::new();
    let again = bounds::bound_for(&loaded.params, &res.pulse())?.e_max;
    if (again - res.e_max).abs() > 1e-9 {
        failures.push(format!("E_max {} not reproduced ({again})", res.e_max));
    }
    if res.partial {
        failures.push("grid search stopped at the candidate budget".into());
    }
    if loaded.default {
        failures.extend(reference::compare(&res).unwrap_or_default());
    }
    checked(failures)
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct TrajectorySummary {
    E: f64,
    E_max: f64,
    T_ns: f64,
    fidelity: f64,
    p_e: f64,
    max_abs_Omega: f64,
    mode_matching_residual: f64,
}

pub fn trajectory(common: &Common, args: &TrajectoryArgs) -> CmdResult {
    let loaded = load_params(common)?;
    let p = loaded.params;
    let pulse = load_pulse(args.pulse.as_deref())?.normalize()?;
    let synth = match args.efficiency {
        Some(e) => DriveSynthesizer::new(&p, &pulse, e)?,
        None => DriveSynthesizer::at_fraction(&p, &pulse, args.s)?,
    };
    let init = InitialState::from_population(args.alpha0_sq)?;
    let grid = quad::linspace(0.0, pulse.duration(), args.samples.max(2));
    let tr = trajectory_from(&synth, &init, &grid)?;
    let prov = Provenance::new("closed-form trajectory")
        .with_params(&p)
        .with("T_ns", format!("{:.12e}", pulse.duration()))
        .with("E", format!("{:.12e}", synth.efficiency()))
        .with("E_over_E_max", format!("{:.12e}", synth.efficiency() / synth.e_max()))
        .with("alpha0_sq", args.alpha0_sq);
    write(&common.out, "trajectory.csv", &tr.to_csv(&prov))?;
    let residual = mode_matching_residual(&tr, &pulse, p.kappa);
    let summary = TrajectorySummary {
        E: synth.efficiency(),
        E_max: synth.e_max(),
        T_ns: pulse.duration(),
        fidelity: tr.final_fidelity(),
        p_e: *tr.p_e.last().expect("grid has two points"),
        max_abs_Omega: tr.omega.iter().map(|o| o.norm()).fold(0.0, f64::max),
        mode_matching_residual: residual,
    };
    print!("{}", write_json(&common.out, "trajectory.json", &summary)?);
    if common.check && residual > 1e-10 {
        return checked(vec![format!("mode-matching residual {residual:e} above 1e-10")]);
    }
    Ok(())
}

pub fn verify(common: &Common, args: &VerifyArgs) -> CmdResult {
    let req: VerifyRequest = match &args.request {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => {
            let loaded = load_params(common)?;
            VerifyRequest {
                params: loaded.file,
                pulse: load_pulse(args.pulse.as_deref())?.normalize()?,
                efficiency: None,
                s: 0.99,
                alpha0_sq: vec![0.0, 0.5, 1.0],
                samples: 201,
            }
        }
    };
    let report = verify_request(&req)?;
    print!("{}", write_json(&common.out, "verify.json", &report)?);
    if !common.check {
        return Ok(());
    }
    let mut failures = Vec::new();
    for c in &report.cases {
        if c.max_amp_dev > AMPLITUDE_TOL {
            failures.push(format!("|alpha0|^2={}: ODE deviates by {:e}", c.alpha0_sq, c.max_amp_dev));
        }
        if (c.F_lindblad - c.F_closed).abs() > LINDBLAD_TOL {
            failures.push(format!(
                "|alpha0|^2={}: master-equation fidelity {:.6} vs closed form {:.6}",
                c.alpha0_sq, c.F_lindblad, c.F_closed
            ));
        }
    }
    checked(failures)
}

pub fn protocol(common: &Common, args: &ProtocolArgs) -> CmdResult {
    let which = args.which.parse()?;
    let run = run_protocol(which, args.alpha0, args.beta0, args.efficiency)?;
    print!("{}", write_json(&common.out, &format!("protocol_{}.json", run.protocol), &run)?);
    if common.check && args.efficiency == 1.0 && run.max_deviation > 1e-12 {
        return checked(vec![format!("{}: deviation {:e} from the target state", run.protocol, run.max_deviation)]);
    }
    Ok(())
}
