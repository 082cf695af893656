//! Moduli of convexity and smoothness of finite-dimensional ℓ^p, and the
//! continuity inequality of the duality map on the unit sphere:
//! `‖j(v̂) − j(û)‖_q ≤ 2ρ(2s)/s` with `s = ‖v̂ − û‖_p`.
//!
//! Infima are estimated from above and suprema from below by multi-start
//! adaptive random search over pairs of sphere points.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::CurveRow;
use crate::lp;

/// Search settings shared by both moduli.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ModulusOptions {
    pub seed: u64,
    pub starts: usize,
    /// Proposals per start.
    pub iters: usize,
}

impl Default for ModulusOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            starts: 256,
            iters: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusKind {
    Convexity,
    Smoothness,
}

/// Estimated modulus on a grid of arguments.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModulusCurve {
    pub kind: ModulusKind,
    pub p: f64,
    pub dim: usize,
    pub arguments: Vec<f64>,
    /// Best value per argument after the monotone envelope (a running
    /// minimum from the right for `δ`, a running maximum from the left for `ρ`).
    pub estimates: Vec<f64>,
    /// Best value found at each argument itself.
    pub raw: Vec<f64>,
    /// Spread of the per-start values at each argument.
    pub spread: Vec<f64>,
    /// Pair `(u, v)` attaining each raw value.
    pub witnesses: Vec<(Vec<f64>, Vec<f64>)>,
    /// Adjacent-pair decreases of the envelope exceeding `1e−6`.
    pub monotone_violations: usize,
    /// Second differences of the envelope below `−1e−6` (smoothness only).
    pub convexity_violations: usize,
    pub options: ModulusOptions,
}

impl ModulusCurve {
    pub fn rows(&self) -> Vec<CurveRow> {
        self.arguments
            .iter()
            .zip(&self.estimates)
            .zip(&self.spread)
            .map(|((a, e), s)| CurveRow {
                argument: *a,
                estimate: *e,
                starts: self.options.starts,
                spread: *s,
            })
            .collect()
    }

    /// Envelope value at any `τ ≥ 0` by linear interpolation through `(0, 0)`
    /// and the grid; beyond the grid `ρ` grows at most linearly.
    pub fn interpolate(&self, t: f64) -> f64 {
        let (xs, ys) = (&self.arguments, &self.estimates);
        if xs.is_empty() || t <= 0.0 {
            return 0.0;
        }
        if t <= xs[0] {
            return ys[0] * t / xs[0];
        }
        for i in 1..xs.len() {
            if t <= xs[i] {
                let w = (t - xs[i - 1]) / (xs[i] - xs[i - 1]);
                return ys[i - 1] + w * (ys[i] - ys[i - 1]);
            }
        }
        ys[ys.len() - 1] + (t - xs[xs.len() - 1])
    }
}

/// `δ(ε) = 1 − √(1 − ε²/4)` on a Hilbert space.
pub fn hilbert_convexity(eps: f64) -> f64 {
    1.0 - (1.0 - eps * eps / 4.0).sqrt()
}

/// `ρ(τ) = √(1 + τ²) − 1` on a Hilbert space.
pub fn hilbert_smoothness(tau: f64) -> f64 {
    (1.0 + tau * tau).sqrt() - 1.0
}

fn check_setup(p: f64, dim: usize) -> Result<()> {
    lp::check_exponent(p)?;
    if dim < 2 {
        return Err(Error::InvalidSpec(format!("moduli need dimension at least 2, got {dim}")));
    }
    Ok(())
}

fn unit(x: &[f64], p: f64) -> Option<Vec<f64>> {
    let n = lp::norm(x, p);
    (n > 0.0 && n.is_finite()).then(|| x.iter().map(|v| v / n).collect())
}

fn combine(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// `1 − ‖u + v‖/2` where `v` is the first point with `‖u − v‖ = ε` on the
/// arc from `û` through `ŵ` to `−û`.
fn convexity_value(u: &[f64], w: &[f64], eps: f64, p: f64) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let u = unit(u, p)?;
    let w = unit(w, p)?;
    let arc = |theta: f64| unit(&combine(&u.iter().map(|x| x * theta.cos()).collect::<Vec<_>>(), theta.sin(), &w), p);
    let dist = |v: &[f64]| lp::norm(&combine(&u, -1.0, v), p);
    let (mut lo, mut hi) = (0.0f64, std::f64::consts::PI);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match arc(mid) {
            Some(v) if dist(&v) < eps => lo = mid,
            _ => hi = mid,
        }
    }
    let v = arc(hi)?;
    if dist(&v) < eps {
        return None;
    }
    let value = 1.0 - lp::norm(&combine(&u, 1.0, &v), p) / 2.0;
    Some((value, u, v))
}

fn smoothness_value(u: &[f64], v: &[f64], tau: f64, p: f64) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let u = unit(u, p)?;
    let v: Vec<f64> = unit(v, p)?.into_iter().map(|x| x * tau).collect();
    let value = lp::norm(&combine(&u, 1.0, &v), p) / 2.0 + lp::norm(&combine(&u, -1.0, &v), p) / 2.0 - 1.0;
    Some((value, u, v))
}

type Objective<'a> = dyn Fn(&[f64], &[f64]) -> Option<(f64, Vec<f64>, Vec<f64>)> + Sync + 'a;

/// Adaptive random search maximizing `sign · value`; returns the best value
/// and its witness.
fn search(
    objective: &Objective<'_>,
    start: (Vec<f64>, Vec<f64>),
    sign: f64,
    iters: usize,
    rng: &mut ChaCha8Rng,
) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let (mut a, mut b) = start;
    let (mut best, mut wu, mut wv) = objective(&a, &b)?;
    let mut sigma = 0.3;
    for _ in 0..iters {
        let na: Vec<f64> = a.iter().map(|x| x + sigma * gauss(rng)).collect();
        let nb: Vec<f64> = b.iter().map(|x| x + sigma * gauss(rng)).collect();
        match objective(&na, &nb) {
            Some((val, u, v)) if sign * val > sign * best => {
                best = val;
                wu = u;
                wv = v;
                a = na;
                b = nb;
                sigma *= 1.5;
            }
            _ => sigma *= 0.85,
        }
        sigma = sigma.min(2.0);
        if sigma < 1e-10 {
            break;
        }
    }
    Some((best, wu, wv))
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_pair(dim: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let a = (0..dim).map(|_| gauss(rng)).collect();
    let b = (0..dim).map(|_| gauss(rng)).collect();
    (a, b)
}

/// Embeds a witness of a lower dimension by zero padding.
fn pad(x: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    let n = x.len().min(dim);
    out[..n].copy_from_slice(&x[..n]);
    out
}

struct Point {
    best: f64,
    spread: f64,
    witness: (Vec<f64>, Vec<f64>),
}

fn estimate_point(
    objective: &Objective<'_>,
    dim: usize,
    sign: f64,
    grid_index: usize,
    seeds: &[(Vec<f64>, Vec<f64>)],
    options: &ModulusOptions,
) -> Option<Point> {
    let results: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..options.starts + seeds.len())
        .into_par_iter()
        .filter_map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ ((grid_index as u64) << 32));
            rng.set_stream(s as u64);
            let start = if s < seeds.len() {
                (pad(&seeds[s].0, dim), pad(&seeds[s].1, dim))
            } else {
                random_pair(dim, &mut rng)
            };
            search(objective, start, sign, options.iters, &mut rng)
        })
        .collect();
    let mut best: Option<&(f64, Vec<f64>, Vec<f64>)> = None;
    for r in &results {
        if best.is_none_or(|b| sign * r.0 > sign * b.0) {
            best = Some(r);
        }
    }
    let best = best?;
    let lo = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let hi = results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    Some(Point {
        best: best.0,
        spread: hi - lo,
        witness: (best.1.clone(), best.2.clone()),
    })
}

fn count_violations(values: &[f64], args: &[f64], kind: ModulusKind) -> (usize, usize) {
    let monotone = values.windows(2).filter(|w| w[1] < w[0] - 1e-6).count();
    let convex = match kind {
        ModulusKind::Convexity => 0,
        ModulusKind::Smoothness => (1..values.len().saturating_sub(1))
            .filter(|&i| {
                let left = (values[i] - values[i - 1]) / (args[i] - args[i - 1]);
                let right = (values[i + 1] - values[i]) / (args[i + 1] - args[i]);
                right - left < -1e-6
            })
            .count(),
    };
    (monotone, convex)
}

fn sorted_grid(grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Upper-bound estimate of `δ(ε)` on each grid point.
pub fn modulus_convexity(p: f64, dim: usize, eps: &[f64], options: &ModulusOptions) -> Result<ModulusCurve> {
    modulus_convexity_seeded(p, dim, eps, options, None)
}

/// [`modulus_convexity`] with the witnesses of `prior` (same grid, any lower
/// dimension) as extra starts.
pub fn modulus_convexity_seeded(
    p: f64,
    dim: usize,
    eps: &[f64],
    options: &ModulusOptions,
    prior: Option<&ModulusCurve>,
) -> Result<ModulusCurve> {
    check_setup(p, dim)?;
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e <= 2.0)) {
        return Err(Error::BadEpsilon(*e));
    }
    let grid = sorted_grid(eps);
    let mut raw = Vec::with_capacity(grid.len());
    let mut spread = Vec::with_capacity(grid.len());
    let mut witnesses = Vec::with_capacity(grid.len());
    for (i, &e) in grid.iter().enumerate() {
        let objective = move |u: &[f64], w: &[f64]| convexity_value(u, w, e, p);
        let seeds: Vec<(Vec<f64>, Vec<f64>)> = prior
            .and_then(|c| c.arguments.iter().position(|a| *a == e).map(|j| vec![c.witnesses[j].clone()]))
            .unwrap_or_default();
        let point = estimate_point(&objective, dim, -1.0, i, &seeds, options)
            .ok_or_else(|| Error::InvalidSpec(format!("no admissible pair at eps = {e}")))?;
        raw.push(point.best);
        spread.push(point.spread);
        witnesses.push(point.witness);
    }
    let mut estimates = raw.clone();
    for i in (0..estimates.len().saturating_sub(1)).rev() {
        estimates[i] = estimates[i].min(estimates[i + 1]);
    }
    let (monotone_violations, convexity_violations) = count_violations(&estimates, &grid, ModulusKind::Convexity);
    Ok(ModulusCurve {
        kind: ModulusKind::Convexity,
        p,
        dim,
        arguments: grid,
        estimates,
        raw,
        spread,
        witnesses,
        monotone_violations,
        convexity_violations,
        options: options.clone(),
    })
}

/// Lower-bound estimate of `ρ(τ)` on each grid point.
pub fn modulus_smoothness(p: f64, dim: usize, tau: &[f64], options: &ModulusOptions) -> Result<ModulusCurve> {
    check_setup(p, dim)?;
    if let Some(t) = tau.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidSpec(format!("tau must be positive, got {t}")));
    }
    let grid = sorted_grid(tau);
    let mut raw = Vec::with_capacity(grid.len());
    let mut spread = Vec::with_capacity(grid.len());
    let mut witnesses = Vec::with_capacity(grid.len());
    for (i, &t) in grid.iter().enumerate() {
        let objective = move |u: &[f64], v: &[f64]| smoothness_value(u, v, t, p);
        let point = estimate_point(&objective, dim, 1.0, i, &[], options)
            .ok_or_else(|| Error::InvalidSpec(format!("no admissible pair at tau = {t}")))?;
        raw.push(point.best);
        spread.push(point.spread);
        witnesses.push(point.witness);
    }
    let mut estimates = raw.clone();
    for i in 1..estimates.len() {
        estimates[i] = estimates[i].max(estimates[i - 1]);
    }
    let (monotone_violations, convexity_violations) = count_violations(&estimates, &grid, ModulusKind::Smoothness);
    Ok(ModulusCurve {
        kind: ModulusKind::Smoothness,
        p,
        dim,
        arguments: grid,
        estimates,
        raw,
        spread,
        witnesses,
        monotone_violations,
        convexity_violations,
        options: options.clone(),
    })
}

/// Settings of [`duality_continuity_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct DualityOptions {
    pub seed: u64,
    /// Inflation applied to the estimated `ρ`.
    pub envelope: f64,
    pub slack: f64,
    /// Grid of `τ` values; must reach 4 since `2s ≤ 4`.
    pub tau_grid: Vec<f64>,
    /// Violations kept in the report.
    pub max_dump: usize,
    pub modulus: ModulusOptions,
}

impl Default for DualityOptions {
    fn default() -> Self {
        let tau_grid = (0..=40).map(|i| 4.0 * 10f64.powf(-3.0 * (40 - i) as f64 / 40.0)).collect();
        Self {
            seed: 0,
            envelope: 1.05,
            slack: 1e-6,
            tau_grid,
            max_dump: 100,
            modulus: ModulusOptions {
                starts: 32,
                iters: 300,
                ..ModulusOptions::default()
            },
        }
    }
}

/// A pair where the continuity inequality failed.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DualityViolation {
    pub trial: usize,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DualityReport {
    pub p: f64,
    pub dim: usize,
    pub trials: usize,
    pub checked: usize,
    /// Pairs with `v̂ = û`, outside the hypothesis.
    pub skipped: usize,
    pub violations: usize,
    pub violation_rate: f64,
    /// Smallest `rhs − lhs` over checked pairs.
    pub worst_margin: f64,
    pub dumped: Vec<DualityViolation>,
    pub smoothness: ModulusCurve,
}

/// `(s, ‖j(v̂) − j(û)‖_q)`, or `None` when `v̂ = û` or either vector vanishes.
pub fn duality_gap(v: &[f64], u: &[f64], p: f64) -> Option<(f64, f64)> {
    let v = unit(v, p)?;
    let u = unit(u, p)?;
    let s = lp::norm(&combine(&v, -1.0, &u), p);
    if s == 0.0 {
        return None;
    }
    let jv = lp::duality_values(&v, p);
    let ju = lp::duality_values(&u, p);
    Some((s, lp::norm(&combine(&jv, -1.0, &ju), lp::conjugate(p))))
}

/// Checks `‖j(v̂) − j(û)‖_q ≤ 2·envelope·ρ̂(2s)/s + slack` on random pairs.
///
/// Trial 0 uses `u = v` (skipped) and trial 1 the antipodal pair `u = −v`.
pub fn duality_continuity_check(p: f64, dim: usize, trials: usize, options: &DualityOptions) -> Result<DualityReport> {
    check_setup(p, dim)?;
    let smoothness = modulus_smoothness(p, dim, &options.tau_grid, &options.modulus)?;
    duality_check_against(smoothness, trials, options)
}

/// [`duality_continuity_check`] against a precomputed smoothness curve;
/// `tau_grid` and `modulus` of `options` are unused.
pub fn duality_check_against(smoothness: ModulusCurve, trials: usize, options: &DualityOptions) -> Result<DualityReport> {
    if smoothness.kind != ModulusKind::Smoothness {
        return Err(Error::InvalidSpec("the duality check needs a smoothness curve".into()));
    }
    let (p, dim) = (smoothness.p, smoothness.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let (mut checked, mut skipped, mut violations) = (0, 0, 0);
    let mut worst_margin = f64::INFINITY;
    let mut dumped = Vec::new();
    for trial in 0..trials {
        let (v, mut u) = random_pair(dim, &mut rng);
        match trial {
            0 => u.clone_from(&v),
            1 => u = v.iter().map(|x| -x).collect(),
            _ => {}
        }
        let Some((s, lhs)) = duality_gap(&v, &u, p) else {
            skipped += 1;
            continue;
        };
        checked += 1;
        let rhs = 2.0 * options.envelope * smoothness.interpolate(2.0 * s) / s + options.slack;
        worst_margin = worst_margin.min(rhs - lhs);
        if lhs > rhs {
            violations += 1;
            if dumped.len() < options.max_dump {
                dumped.push(DualityViolation { trial, v, u, s, lhs, rhs });
            }
        }
    }
    Ok(DualityReport {
        p,
        dim,
        trials,
        checked,
        skipped,
        violations,
        violation_rate: if checked > 0 { violations as f64 / checked as f64 } else { 0.0 },
        worst_margin,
        dumped,
        smoothness,
    })
}
