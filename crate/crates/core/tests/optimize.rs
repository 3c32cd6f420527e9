use flyqubit::depletion::{depletion_rate, integrated_depletion_numeric};
use flyqubit::model::siv_params;
use flyqubit::optimize::{optimize_duration, optimize_shape, DurationConfig, OptimizationConfig};
use flyqubit::{quad, EmitterParams, Envelope};

fn params() -> EmitterParams {
    siv_params(0.1, 0.1).emitter_params().unwrap()
}

fn small(order: usize, constrained: bool) -> OptimizationConfig {
    OptimizationConfig {
        t_range: Some((0.2, 0.8)),
        t_samples: 25,
        ratio_samples: 21,
        ..OptimizationConfig::full(order, constrained)
    }
}

#[test]
fn more_coefficients_never_hurt() {
    let p = params();
    for constrained in [false, true] {
        let mut prev = 0.0;
        for order in 1..=3 {
            let r = optimize_shape(&p, &small(order, constrained)).unwrap();
            assert!(r.objective >= prev * (1.0 - 1e-12), "L={order}: {} < {prev}", r.objective);
            prev = r.objective;
        }
    }
}

#[test]
fn identical_configs_give_identical_results() {
    let p = params();
    let cfg = small(2, false);
    let a = serde_json::to_string(&optimize_shape(&p, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&optimize_shape(&p, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn constrained_optimum_starts_smoothly() {
    let p = params();
    let r = optimize_shape(&p, &small(2, true)).unwrap();
    let pulse = r.pulse();
    assert_eq!(pulse.order(), 4);
    assert!(pulse.amplitude(0.0)[2].abs() < 1e-10);
    assert!(pulse.amplitude(pulse.duration())[2].abs() < 1e-10);
}

#[test]
fn reported_bound_survives_quadrature() {
    let p = params();
    let r = optimize_shape(&p, &small(2, false)).unwrap();
    let pulse = r.pulse();
    let grid = quad::linspace(0.0, pulse.duration(), 401);
    let prof = integrated_depletion_numeric(&p, &pulse, &grid).unwrap();
    assert!((prof.g_max.sqrt().recip() - r.e_max).abs() < 1e-6);
    let direct = quad::integrate(|t| depletion_rate(&p, &pulse, t).unwrap(), 0.0, r.argmax_t, 1e-14, 1e-12).unwrap();
    assert!((direct.value.sqrt().recip() - r.e_max).abs() < 1e-6);
}

#[test]
fn lossier_ground_state_lowers_worst_fidelity() {
    let mut prev = f64::INFINITY;
    for g2 in [0.0, 0.05, 0.1, 0.2] {
        let p = siv_params(0.1, g2).emitter_params().unwrap();
        let cfg = DurationConfig { t_range: Some((0.05, 5.0)), stage1: 60, stage2: 40, log_spaced: true };
        let r = optimize_duration(&p, &cfg).unwrap();
        assert!(r.f_worst < prev);
        prev = r.f_worst;
    }
}
