//! Duration and shape optimization of cosine-series pulses.
//!
//! The objective is the worst-case fidelity 1/(e^{Γ₂T} max_t G(t)). For a
//! fixed T, G(t) is a quadratic form in the coefficients, so the grid search
//! precomputes the pair kernels once per duration and screens every ratio
//! combination with one quadratic form per time node. The best screened
//! candidates are then re-scored with the refined maximum.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds;
use crate::depletion::{self, analytic, AnalyticG, RateCoefficients, MAX_SCAN_POINTS};
use crate::error::{Error, Result};
use crate::model::EmitterParams;
use crate::pulse::{constrained_series, sin2_pulse, CosineSeriesPulse, Envelope};
use crate::quad;

/// Search-space description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationConfig {
    /// Number of free coefficients (v₁…v_L, or the odd ones when constrained).
    #[serde(rename = "L")]
    pub order: usize,
    /// Enforce f̈(0) = f̈(T) = 0 through [`constrained_series`].
    pub constrained: bool,
    /// Defaults to [max(1/κ, 1/g), min(1/Γ₁, 1/Γ₂)].
    pub t_range: Option<(f64, f64)>,
    pub t_samples: usize,
    pub log_t: bool,
    pub ratio_range: (f64, f64),
    pub ratio_samples: usize,
    pub refine: bool,
    /// Screened candidates re-scored with the refined maximum.
    pub top_k: usize,
    /// Upper bound on screened candidates; excess durations are skipped.
    pub max_candidates: Option<usize>,
}

impl OptimizationConfig {
    /// The exhaustive grid: 500 durations and 201 ratio samples.
    pub fn full(order: usize, constrained: bool) -> Self {
        OptimizationConfig {
            order,
            constrained,
            t_range: None,
            t_samples: 500,
            log_t: false,
            ratio_range: (-1.0, 1.0),
            ratio_samples: 201,
            refine: false,
            top_k: 32,
            max_candidates: None,
        }
    }

    /// Desk-scale grid: the full grid up to two free coefficients, a coarse
    /// log-spaced 50 × 51 × 51 pass plus local refinement beyond.
    pub fn desk(order: usize, constrained: bool) -> Self {
        if order <= 2 {
            return Self::full(order, constrained);
        }
        OptimizationConfig {
            t_samples: 50,
            log_t: true,
            ratio_samples: 51,
            refine: true,
            ..Self::full(order, constrained)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::validation("series order L must be at least 1"));
        }
        if self.t_samples < 2 || (self.order > 1 && self.ratio_samples < 2) {
            return Err(Error::validation("grids need at least 2 samples"));
        }
        if let Some((lo, hi)) = self.t_range {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::validation(format!("invalid duration range [{lo}, {hi}]")));
            }
        }
        let (a, b) = self.ratio_range;
        if !(a < b && a.is_finite() && b.is_finite()) {
            return Err(Error::validation("invalid ratio range"));
        }
        if self.top_k == 0 {
            return Err(Error::validation("top_k must be positive"));
        }
        Ok(())
    }
}

/// One accepted step of the local refinement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementStep {
    #[serde(rename = "T")]
    pub duration: f64,
    pub ratios: Vec<f64>,
    pub objective: f64,
}

/// Best pulse found and its figures of merit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    #[serde(rename = "L")]
    pub order: usize,
    pub constrained: bool,
    #[serde(rename = "T")]
    pub duration: f64,
    /// Normalized series coefficients in ns^{-1/2}.
    pub coeffs: Vec<f64>,
    /// Free-coefficient ratios relative to the first.
    pub ratios: Vec<f64>,
    #[serde(rename = "E_max")]
    pub e_max: f64,
    #[serde(rename = "F_worst")]
    pub f_worst: f64,
    #[serde(rename = "F_avg")]
    pub f_avg: f64,
    pub objective: f64,
    pub argmax_t: f64,
    pub t_grid: Vec<f64>,
    /// Grid position of the optimum before refinement.
    pub t_index: usize,
    pub ratio_indices: Vec<usize>,
    pub refinement: Vec<RefinementStep>,
    pub evaluations: usize,
    /// Set when `max_candidates` cut the grid short.
    pub partial: bool,
}

impl OptimizationResult {
    pub fn pulse(&self) -> CosineSeriesPulse {
        CosineSeriesPulse::new(self.duration, self.coeffs.clone()).expect("optimizer emits valid pulses")
    }
}

/// 1/(e^{Γ₂T} max_t G(t)) for `pulse` after normalization.
pub fn objective(p: &EmitterParams, pulse: &CosineSeriesPulse) -> Result<f64> {
    Ok(score(p, &pulse.normalize()?)?.0)
}

// (objective, G_max, argmax_t) for a normalized real pulse
fn score(p: &EmitterParams, pulse: &CosineSeriesPulse) -> Result<(f64, f64, f64)> {
    let eval = AnalyticG::new(p, pulse)?;
    let (g_max, t) = depletion::max_integrated(&eval)?;
    if !(g_max > 0.0) {
        return Err(Error::domain(format!("G_max = {g_max} is not positive")));
    }
    Ok(((-p.gamma2 * pulse.duration()).exp() / g_max, g_max, t))
}

/// Default duration range [max(1/κ, 1/g), min(1/Γ₁, 1/Γ₂)].
pub fn default_t_range(p: &EmitterParams) -> Result<(f64, f64)> {
    if !(p.gamma1 > 0.0 && p.gamma2 > 0.0) {
        return Err(Error::validation("default duration range needs Gamma1, Gamma2 > 0; supply T_range explicitly"));
    }
    let lo = (1.0 / p.kappa).max(1.0 / p.g);
    let hi = (1.0 / p.gamma1).min(1.0 / p.gamma2);
    if !(hi > lo) {
        return Err(Error::validation(format!("empty default duration range [{lo}, {hi}]")));
    }
    Ok((lo, hi))
}

fn t_grid(lo: f64, hi: f64, n: usize, log: bool) -> Vec<f64> {
    if log {
        quad::linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
    } else {
        quad::linspace(lo, hi, n)
    }
}

/// Expansion of free coefficients into series coefficients.
fn expansion(order: usize, constrained: bool) -> (usize, Vec<f64>) {
    if !constrained {
        let mut e = vec![0.0; order * order];
        for k in 0..order {
            e[k * order + k] = 1.0;
        }
        return (order, e);
    }
    let full = 2 * order;
    let mut e = vec![0.0; full * order];
    for k in 0..order {
        let odd = (2 * k + 1) as f64;
        e[(2 * k) * order + k] = 1.0;
        e[(2 * k + 1) * order + k] = -(odd * odd) / ((odd + 1.0) * (odd + 1.0));
    }
    (full, e)
}

fn series_for(order: usize, constrained: bool, duration: f64, free: &[f64]) -> Result<CosineSeriesPulse> {
    debug_assert_eq!(free.len(), order);
    if constrained {
        constrained_series(free, duration)
    } else {
        CosineSeriesPulse::new(duration, free.to_vec())
    }
}

// one row-major L×L matrix per scan node, plus the norm matrix
struct KernelStack {
    order: usize,
    nodes: Vec<f64>,
    norm: Vec<f64>,
}

impl KernelStack {
    fn new(
        rc: &RateCoefficients,
        gamma: f64,
        duration: f64,
        order: usize,
        full: usize,
        e: &[f64],
        scan: usize,
    ) -> Self {
        let base = 2.0 * std::f64::consts::PI / duration;
        let project = |k: &[f64]| -> Vec<f64> {
            // Eᵀ K E
            let mut tmp = vec![0.0; full * order];
            for i in 0..full {
                for j in 0..order {
                    let mut acc = 0.0;
                    for l in 0..full {
                        acc += k[i * full + l] * e[l * order + j];
                    }
                    tmp[i * order + j] = acc;
                }
            }
            let mut out = vec![0.0; order * order];
            for a in 0..order {
                for b in 0..order {
                    let mut acc = 0.0;
                    for i in 0..full {
                        acc += e[i * order + a] * tmp[i * order + b];
                    }
                    out[a * order + b] = acc;
                }
            }
            // symmetrize: only vᵀKv enters
            for a in 0..order {
                for b in 0..a {
                    let s = 0.5 * (out[a * order + b] + out[b * order + a]);
                    out[a * order + b] = s;
                    out[b * order + a] = s;
                }
            }
            out
        };
        let mut norm_full = vec![0.0; full * full];
        for n in 0..full {
            for m in 0..full {
                norm_full[n * full + m] = analytic::ff_integral(n + 1, m + 1, base, 0.0, duration);
            }
        }
        let norm = project(&norm_full);
        let grid = quad::linspace(0.0, duration, scan);
        let mut nodes = Vec::with_capacity(scan * order * order);
        for &t in &grid {
            nodes.extend(project(&analytic::pair_kernel(rc, full, base, gamma, t)));
        }
        KernelStack { order, nodes, norm }
    }

    fn quad_form(m: &[f64], w: &[f64]) -> f64 {
        let n = w.len();
        let mut acc = 0.0;
        for a in 0..n {
            let mut row = 0.0;
            for b in 0..n {
                row += m[a * n + b] * w[b];
            }
            acc += w[a] * row;
        }
        acc
    }

    // grid maximum of G for free coefficients w
    fn g_max(&self, w: &[f64]) -> f64 {
        let nn = self.order * self.order;
        let norm = Self::quad_form(&self.norm, w);
        let mut best = f64::NEG_INFINITY;
        for chunk in self.nodes.chunks_exact(nn) {
            best = best.max(Self::quad_form(chunk, w));
        }
        best / norm
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    screen: f64,
    t_index: usize,
    ratio_indices: Vec<usize>,
}

// better first: larger score, then smaller T, then smaller ratios
fn rank(a: &Candidate, b: &Candidate, ratios: &[f64]) -> Ordering {
    b.screen.total_cmp(&a.screen).then(a.t_index.cmp(&b.t_index)).then_with(|| {
        let ra = a.ratio_indices.iter().map(|&i| ratios[i]);
        let rb = b.ratio_indices.iter().map(|&i| ratios[i]);
        ra.zip(rb).map(|(x, y)| x.total_cmp(&y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    })
}

fn push_top(list: &mut Vec<Candidate>, c: Candidate, k: usize, ratios: &[f64]) {
    if list.len() == k && rank(&c, list.last().expect("k > 0"), ratios) != Ordering::Less {
        return;
    }
    let pos = list.partition_point(|x| rank(x, &c, ratios) != Ordering::Greater);
    list.insert(pos, c);
    list.truncate(k);
}

fn decode(mut index: usize, free: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; free];
    for slot in (0..free).rev() {
        out[slot] = index % n;
        index /= n;
    }
    out
}

/// Grid search over durations and coefficient ratios.
pub fn optimize_shape(p: &EmitterParams, cfg: &OptimizationConfig) -> Result<OptimizationResult> {
    cfg.validate()?;
    p.validate()?;
    let (lo, hi) = match cfg.t_range {
        Some(r) => r,
        None => default_t_range(p)?,
    };
    let durations = t_grid(lo, hi, cfg.t_samples, cfg.log_t);
    let free = cfg.order - 1;
    let ratio_values =
        if free == 0 { vec![] } else { quad::linspace(cfg.ratio_range.0, cfg.ratio_range.1, cfg.ratio_samples) };
    let per_t = ratio_values.len().max(1).pow(free as u32);
    let mut t_count = durations.len();
    let mut partial = false;
    if let Some(budget) = cfg.max_candidates {
        let allowed = budget / per_t;
        if allowed < t_count {
            t_count = allowed;
            partial = true;
        }
        if t_count == 0 {
            return Err(Error::validation(format!(
                "candidate budget {budget} is below one duration's {per_t} ratio combinations"
            )));
        }
    }

    let rc = RateCoefficients::new(p);
    let gamma = p.gamma_diff();
    let (full, e) = expansion(cfg.order, cfg.constrained);
    let k = cfg.top_k;

    let lists: Vec<Vec<Candidate>> = (0..t_count)
        .into_par_iter()
        .map(|ti| {
            let big_t = durations[ti];
            let stack = KernelStack::new(&rc, gamma, big_t, cfg.order, full, &e, MAX_SCAN_POINTS);
            let weight = (-p.gamma2 * big_t).exp();
            let mut top = Vec::with_capacity(k + 1);
            let mut w = vec![1.0; cfg.order];
            for idx in 0..per_t {
                let ri = decode(idx, free, ratio_values.len().max(1));
                for (slot, &r) in ri.iter().enumerate() {
                    w[slot + 1] = ratio_values[r];
                }
                let g = stack.g_max(&w);
                let screen = if g > 0.0 && g.is_finite() { weight / g } else { f64::NEG_INFINITY };
                push_top(&mut top, Candidate { screen, t_index: ti, ratio_indices: ri }, k, &ratio_values);
            }
            top
        })
        .collect();
    let mut merged = Vec::with_capacity(k + 1);
    for c in lists.into_iter().flatten() {
        push_top(&mut merged, c, k, &ratio_values);
    }

    let mut best: Option<(f64, f64, Candidate, CosineSeriesPulse)> = None;
    for cand in merged {
        if !cand.screen.is_finite() {
            continue;
        }
        let mut w = vec![1.0; cfg.order];
        for (slot, &r) in cand.ratio_indices.iter().enumerate() {
            w[slot + 1] = ratio_values[r];
        }
        let pulse = series_for(cfg.order, cfg.constrained, durations[cand.t_index], &w)?.normalize()?;
        let (obj, _, t_arg) = score(p, &pulse)?;
        let better = match &best {
            None => true,
            Some((b, _, bc, _)) => {
                obj > *b
                    || (obj == *b
                        && rank(
                            &Candidate { screen: obj, ..cand.clone() },
                            &Candidate { screen: *b, ..bc.clone() },
                            &ratio_values,
                        ) == Ordering::Less)
            }
        };
        if better {
            best = Some((obj, t_arg, cand, pulse));
        }
    }
    let (obj, mut argmax_t, cand, mut pulse) =
        best.ok_or_else(|| Error::numeric("no admissible candidate on the grid"))?;
    let mut objective_value = obj;
    let mut ratios: Vec<f64> = cand.ratio_indices.iter().map(|&i| ratio_values[i]).collect();
    let mut refinement = Vec::new();
    let mut evaluations = t_count * per_t;

    if cfg.refine {
        let t_step = if t_count > 1 {
            let i = cand.t_index.min(durations.len() - 2);
            durations[i + 1] - durations[i]
        } else {
            0.1 * durations[0]
        };
        let r_step = if free > 0 { ratio_values[1] - ratio_values[0] } else { 0.0 };
        let (res, evals) = refine(p, cfg, durations[cand.t_index], &ratios, t_step, r_step)?;
        evaluations += evals;
        if res.objective > objective_value {
            let w: Vec<f64> = std::iter::once(1.0).chain(res.ratios.iter().copied()).collect();
            pulse = series_for(cfg.order, cfg.constrained, res.duration, &w)?.normalize()?;
            let (o, _, ta) = score(p, &pulse)?;
            objective_value = o;
            argmax_t = ta;
            ratios = res.ratios.clone();
        }
        refinement = res.trace;
    }

    let big_t = pulse.duration();
    let eval = AnalyticG::new(p, &pulse)?;
    let b = bounds::summarize(p, &eval)?;
    Ok(OptimizationResult {
        order: cfg.order,
        constrained: cfg.constrained,
        duration: big_t,
        coeffs: pulse.coeffs().to_vec(),
        ratios,
        e_max: b.e_max,
        f_worst: b.f_worst,
        f_avg: b.f_avg,
        objective: objective_value,
        argmax_t,
        t_grid: durations,
        t_index: cand.t_index,
        ratio_indices: cand.ratio_indices,
        refinement,
        evaluations,
        partial,
    })
}

struct Refined {
    duration: f64,
    ratios: Vec<f64>,
    objective: f64,
    trace: Vec<RefinementStep>,
}

// compass search on (T, ratios) with halving steps
fn refine(
    p: &EmitterParams,
    cfg: &OptimizationConfig,
    t0: f64,
    r0: &[f64],
    mut t_step: f64,
    r_step0: f64,
) -> Result<(Refined, usize)> {
    let eval = |t: f64, r: &[f64]| -> Result<f64> {
        if !(t > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        let w: Vec<f64> = std::iter::once(1.0).chain(r.iter().copied()).collect();
        Ok(score(p, &series_for(cfg.order, cfg.constrained, t, &w)?.normalize()?)?.0)
    };
    let mut r_step = r_step0;
    let mut t = t0;
    let mut r = r0.to_vec();
    let mut best = eval(t, &r)?;
    let mut evals = 1;
    let mut trace = vec![RefinementStep { duration: t, ratios: r.clone(), objective: best }];
    let t_floor = 1e-7 * t_step.max(1e-12);
    let r_floor = 1e-7 * r_step.max(1e-12);
    for _ in 0..400 {
        let mut improved = false;
        for dir in [-1.0, 1.0] {
            let tt = t + dir * t_step;
            let v = eval(tt, &r)?;
            evals += 1;
            if v > best {
                best = v;
                t = tt;
                improved = true;
            }
        }
        for slot in 0..r.len() {
            for dir in [-1.0, 1.0] {
                let mut rr = r.clone();
                rr[slot] += dir * r_step;
                let v = eval(t, &rr)?;
                evals += 1;
                if v > best {
                    best = v;
                    r = rr;
                    improved = true;
                }
            }
        }
        if improved {
            trace.push(RefinementStep { duration: t, ratios: r.clone(), objective: best });
        } else {
            t_step *= 0.5;
            r_step *= 0.5;
            if t_step < t_floor && (r.is_empty() || r_step < r_floor) {
                break;
            }
        }
    }
    Ok((Refined { duration: t, ratios: r, objective: best, trace }, evals))
}

/// Settings of the two-stage sin² duration search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DurationConfig {
    pub t_range: Option<(f64, f64)>,
    pub stage1: usize,
    pub stage2: usize,
    pub log_spaced: bool,
}

impl Default for DurationConfig {
    fn default() -> Self {
        DurationConfig { t_range: None, stage1: 200, stage2: 200, log_spaced: false }
    }
}

/// Optimal sin² duration: a coarse grid, then a second grid between the
/// neighbours of the coarse optimum.
pub fn optimize_duration(p: &EmitterParams, cfg: &DurationConfig) -> Result<OptimizationResult> {
    p.validate()?;
    if cfg.stage1 < 3 || cfg.stage2 < 2 {
        return Err(Error::validation("duration stages need at least 3 and 2 points"));
    }
    let (lo, hi) = match cfg.t_range {
        Some((a, b)) if a > 0.0 && b > a => (a, b),
        Some((a, b)) => return Err(Error::validation(format!("invalid duration range [{a}, {b}]"))),
        None => default_t_range(p)?,
    };
    let eval_t = |t: f64| -> Result<f64> { objective(p, &sin2_pulse(t)?) };
    let argbest = |grid: &[f64]| -> Result<(usize, f64)> {
        let vals: Vec<f64> = grid.par_iter().map(|&t| eval_t(t)).collect::<Result<_>>()?;
        let mut bi = 0;
        for i in 1..vals.len() {
            if vals[i] > vals[bi] {
                bi = i;
            }
        }
        Ok((bi, vals[bi]))
    };
    let g1 = t_grid(lo, hi, cfg.stage1, cfg.log_spaced);
    let (i1, _) = argbest(&g1)?;
    let a = g1[i1.saturating_sub(1)];
    let b = g1[(i1 + 1).min(g1.len() - 1)];
    let g2 = quad::linspace(a, b, cfg.stage2);
    let (i2, obj) = argbest(&g2)?;
    let big_t = g2[i2];
    let pulse = sin2_pulse(big_t)?;
    let eval = AnalyticG::new(p, &pulse)?;
    let bnd = bounds::summarize(p, &eval)?;
    let mut t_grid_all = g1;
    t_grid_all.extend_from_slice(&g2);
    Ok(OptimizationResult {
        order: 1,
        constrained: false,
        duration: big_t,
        coeffs: pulse.coeffs().to_vec(),
        ratios: vec![],
        e_max: bnd.e_max,
        f_worst: bnd.f_worst,
        f_avg: bnd.f_avg,
        objective: obj,
        argmax_t: bnd.argmax_t,
        t_index: cfg.stage1 + i2,
        t_grid: t_grid_all,
        ratio_indices: vec![],
        refinement: vec![],
        evaluations: cfg.stage1 + cfg.stage2,
        partial: false,
    })
}

/// Stage-two spacing of [`optimize_duration`] around its optimum.
pub fn stage2_step(res: &OptimizationResult, cfg: &DurationConfig) -> f64 {
    let g2 = &res.t_grid[cfg.stage1..];
    g2[1] - g2[0]
}
