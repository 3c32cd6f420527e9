//! Browser bindings: each export returns a JSON string for the page to plot.

use flyqubit::bounds::{bound_for, duration_sweep};
use flyqubit::depletion::profile_analytic;
use flyqubit::model::siv_params;
use flyqubit::pulse::sin2_pulse;
use flyqubit::trajectory::DriveSynthesizer;
use flyqubit::{quad, EmitterParams, Envelope};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn params(gamma1_frac: f64, gamma2_frac: f64) -> Result<EmitterParams, String> {
    siv_params(gamma1_frac, gamma2_frac).emitter_params().map_err(|e| e.to_string())
}

/// d(t) and G(t) of a sin² pulse with the bound it implies.
pub fn depletion_json(gamma1_frac: f64, gamma2_frac: f64, duration: f64, samples: usize) -> Result<String, String> {
    let p = params(gamma1_frac, gamma2_frac)?;
    let pulse = sin2_pulse(duration).map_err(|e| e.to_string())?;
    let grid = quad::linspace(0.0, duration, samples.clamp(2, 4001));
    let prof = profile_analytic(&p, &pulse, &grid).map_err(|e| e.to_string())?;
    let b = bound_for(&p, &pulse).map_err(|e| e.to_string())?;
    Ok(json!({ "t": prof.grid, "d": prof.d, "G": prof.g, "bound": b }).to_string())
}

/// F_worst of sin² pulses against duration, with the slow-pulse limit.
pub fn sweep_json(gamma1_frac: f64, gamma2_frac: f64, t_lo: f64, t_hi: f64, samples: usize) -> Result<String, String> {
    let rows =
        duration_sweep(&[(gamma1_frac, gamma2_frac)], t_lo, t_hi, samples.clamp(2, 1001)).map_err(|e| e.to_string())?;
    Ok(json!({
        "T": rows.iter().map(|r| r.duration).collect::<Vec<_>>(),
        "exact": rows.iter().map(|r| r.f_worst_exact).collect::<Vec<_>>(),
        "simplified": rows.iter().map(|r| r.f_worst_simplified).collect::<Vec<_>>(),
        "slow": rows.iter().map(|r| r.f_worst_slow).collect::<Vec<_>>(),
    })
    .to_string())
}

/// |Ω(t)| and arg Ω(t) driving a sin² pulse at `s`·E_max.
pub fn drive_json(gamma1_frac: f64, gamma2_frac: f64, duration: f64, s: f64, samples: usize) -> Result<String, String> {
    let p = params(gamma1_frac, gamma2_frac)?;
    let pulse = sin2_pulse(duration).map_err(|e| e.to_string())?;
    let synth = DriveSynthesizer::at_fraction(&p, &pulse, s).map_err(|e| e.to_string())?;
    let grid = quad::linspace(0.0, duration, samples.clamp(2, 4001));
    let omega: Vec<_> = grid.iter().map(|&t| synth.omega(t)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    Ok(json!({
        "t": grid,
        "f": grid.iter().map(|&t| pulse.amplitude(t)[0]).collect::<Vec<_>>(),
        "abs": omega.iter().map(|o| o.norm()).collect::<Vec<_>>(),
        "arg": omega.iter().map(|o| o.arg()).collect::<Vec<_>>(),
        "E": synth.efficiency(),
        "E_max": synth.e_max(),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn depletion(gamma1_frac: f64, gamma2_frac: f64, duration: f64, samples: usize) -> Result<String, JsValue> {
    depletion_json(gamma1_frac, gamma2_frac, duration, samples).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sweep(gamma1_frac: f64, gamma2_frac: f64, t_lo: f64, t_hi: f64, samples: usize) -> Result<String, JsValue> {
    sweep_json(gamma1_frac, gamma2_frac, t_lo, t_hi, samples).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn drive(gamma1_frac: f64, gamma2_frac: f64, duration: f64, s: f64, samples: usize) -> Result<String, JsValue> {
    drive_json(gamma1_frac, gamma2_frac, duration, s, samples).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn depletion_curve_ends_at_its_bound() {
        let v = parse(&depletion_json(0.1, 0.1, 0.44, 101).unwrap());
        assert_eq!(v["t"].as_array().unwrap().len(), 101);
        let e = v["bound"]["E_max"].as_f64().unwrap();
        assert!((e - 0.9877).abs() < 1e-3);
    }

    #[test]
    fn sweep_stays_below_long_pulse_limit() {
        let v = parse(&sweep_json(0.0, 0.0, 0.1, 50.0, 40).unwrap());
        let exact = v["exact"].as_array().unwrap();
        let slow = v["slow"].as_array().unwrap();
        assert!(exact.iter().zip(slow).all(|(a, b)| a.as_f64() < b.as_f64()));
    }

    #[test]
    fn drive_rejects_unreachable_targets() {
        assert!(drive_json(0.1, 0.1, 0.44, 1.2, 11).is_err());
        let v = parse(&drive_json(0.1, 0.1, 0.44, 0.9, 11).unwrap());
        assert_eq!(v["abs"].as_array().unwrap().len(), 11);
    }
}
