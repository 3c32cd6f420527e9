//! Adaptive Dormand–Prince 5(4) integrator for real state vectors.
//!
//! Complex systems pack (re, im) pairs into the vector.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step as a fraction of the first output interval.
    pub first_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, max_steps: 2_000_000, first_step: 1e-3 }
    }
}

/// Solution sampled at the requested output times.
#[derive(Debug, Clone)]
pub struct OdeOutput {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Largest accepted scaled error estimate within each output interval
    /// (zero for the initial point).
    pub local_error: Vec<f64>,
    pub steps: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo(y: &[f64], h: f64, terms: &[(f64, &[f64])], out: &mut [f64]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// Integrates `dy/dt = rhs(t, y)` from `times[0]` through every entry of
/// `times` (which must be sorted). `observer` sees every accepted step and
/// may abort the integration by returning an error.
pub fn integrate<R, O>(mut rhs: R, y0: &[f64], times: &[f64], opts: &OdeOptions, mut observer: O) -> Result<OdeOutput>
where
    R: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]) -> Result<()>,
{
    if times.is_empty() {
        return Err(Error::validation("no output times"));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::validation("output times must be non-decreasing"));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = times[0];
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let span = times[times.len() - 1] - times[0];
    let h_min = span.abs().max(1e-300) * 1e-15;
    let mut h = if times.len() > 1 {
        ((times[1] - times[0]).max(span / times.len() as f64) * opts.first_step).max(h_min * 10.0)
    } else {
        0.0
    };

    let mut out = OdeOutput { times: vec![t], states: vec![y.clone()], local_error: vec![0.0], steps: 0 };
    rhs(t, &y, &mut k[0]);
    for &target in &times[1..] {
        let mut interval_err: f64 = 0.0;
        while t < target {
            if out.steps >= opts.max_steps {
                return Err(Error::numeric(format!("step budget of {} exhausted at t = {t}", opts.max_steps)));
            }
            let mut step = h.min(target - t);
            let last = step >= target - t;
            if last {
                step = target - t;
            }
            let (k1, rest) = k.split_at_mut(1);
            let k1 = &k1[0];
            let [k2, k3, k4, k5, k6, k7] = rest else { unreachable!() };
            combo(&y, step, &[(A21, k1)], &mut tmp);
            rhs(t + C2 * step, &tmp, k2);
            combo(&y, step, &[(A31, k1), (A32, k2)], &mut tmp);
            rhs(t + C3 * step, &tmp, k3);
            combo(&y, step, &[(A41, k1), (A42, k2), (A43, k3)], &mut tmp);
            rhs(t + C4 * step, &tmp, k4);
            combo(&y, step, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], &mut tmp);
            rhs(t + C5 * step, &tmp, k5);
            combo(&y, step, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], &mut tmp);
            rhs(t + step, &tmp, k6);
            combo(&y, step, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)], &mut y_new);
            rhs(t + step, &y_new, k7);

            let mut err_sq = 0.0;
            for i in 0..n {
                let e = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                err_sq += (e / sc) * (e / sc);
            }
            let err = (err_sq / n as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::numeric(format!("non-finite derivative near t = {t}")));
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                out.steps += 1;
                interval_err = interval_err.max(err);
                observer(t, &y)?;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    h = step * fac;
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).max(0.2);
                if h < h_min {
                    return Err(Error::numeric(format!("step size collapsed to {h:e} at t = {t}")));
                }
            }
        }
        out.times.push(t);
        out.states.push(y.clone());
        out.local_error.push(interval_err);
    }
    Ok(out)
}
