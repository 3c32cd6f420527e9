//! Reference optimization results for the SiV parameter set, used by `--check`.

use flyqubit::optimize::OptimizationResult;

pub struct ReferenceRow {
    pub order: usize,
    pub constrained: bool,
    pub e_max: f64,
    pub duration: f64,
    pub coeffs: &'static [f64],
}

pub const ROWS: [ReferenceRow; 6] = [
    ReferenceRow { order: 1, constrained: true, e_max: 0.987, duration: 0.50, coeffs: &[1.35, -0.34] },
    ReferenceRow { order: 2, constrained: true, e_max: 0.987, duration: 0.38, coeffs: &[1.5, -0.38, 0.16, -0.09] },
    ReferenceRow {
        order: 3,
        constrained: true,
        e_max: 0.988,
        duration: 0.38,
        coeffs: &[1.44, -0.36, 0.27, -0.15, 0.08, -0.06],
    },
    ReferenceRow { order: 1, constrained: false, e_max: 0.988, duration: 0.44, coeffs: &[1.23] },
    ReferenceRow { order: 2, constrained: false, e_max: 0.988, duration: 0.44, coeffs: &[1.28, -0.07] },
    ReferenceRow { order: 3, constrained: false, e_max: 0.988, duration: 0.34, coeffs: &[1.46, -0.30, 0.17] },
];

pub const E_MAX_TOL: f64 = 1e-3;
pub const COEFF_TOL: f64 = 0.02;

pub fn row(order: usize, constrained: bool) -> Option<&'static ReferenceRow> {
    ROWS.iter().find(|r| r.order == order && r.constrained == constrained)
}

/// Spacing of the duration grid around the reported optimum.
pub fn t_step(res: &OptimizationResult) -> f64 {
    let g = &res.t_grid;
    if g.len() < 2 {
        return 0.0;
    }
    let i = res.t_index.min(g.len() - 2);
    let lo = if i > 0 { g[i] - g[i - 1] } else { 0.0 };
    (g[i + 1] - g[i]).max(lo)
}

/// Mismatches between `res` and the reference row, if one exists.
pub fn compare(res: &OptimizationResult) -> Option<Vec<String>> {
    let r = row(res.order, res.constrained)?;
    let mut out = Vec::new();
    let tag = format!("L={} {}", r.order, if r.constrained { "constrained" } else { "free" });
    if (res.e_max - r.e_max).abs() > E_MAX_TOL {
        out.push(format!("{tag}: E_max {:.4} vs {}", res.e_max, r.e_max));
    }
    let step = t_step(res);
    if (res.duration - r.duration).abs() > step {
        out.push(format!("{tag}: T {:.4} vs {} (grid step {step:.4})", res.duration, r.duration));
    }
    for (i, (&a, &b)) in res.coeffs.iter().zip(r.coeffs).enumerate() {
        if (a - b).abs() > COEFF_TOL {
            out.push(format!("{tag}: v{} {a:.4} vs {b}", i + 1));
        }
    }
    Some(out)
}
