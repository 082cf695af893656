//! Absolute gradient of the displacement energy `F_{α,p}`: the closed form
//! through duality maps, a sampling lower bound, directional derivatives,
//! and steepest descent toward fixed points.
//!
//! With `S = Σ_γ ‖Dv(γ)‖^{p−1} m(γ) j(Dv(γ)) = G_{α,p}(v)`, the descent slope
//! of `F` along `u` is `2⟨S, u⟩ / F(v)^{p−1}` whenever `K` and `m` are
//! symmetric, so `|∇₋F|(v) = 2‖S‖_q / F(v)^{p−1}` and the steepest direction
//! is the norming vector of `S`. On mean-zero domains `S` is first shifted by
//! its nearest constant in ℓ^q.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::energy::{self, EnergyParams};
use crate::error::{Error, Result};
use crate::group::check_symmetry;
use crate::lp::{self, DualVector, LpVector};
use crate::rep::{self, AffineAction, Domain, Representation};

/// Closed-form absolute gradient at a point with `F > 0`.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GradientResult {
    /// `2‖G_{α,p}(v)‖_q / F(v)^{p−1}`.
    pub value: f64,
    /// The same quantity assembled from duality maps of each `Dv(γ)`.
    pub dual_form_value: f64,
    /// Steepest slope over directions in the representation's domain.
    pub admissible_value: f64,
    pub energy: f64,
    pub dual_element: DualVector,
    /// Unit admissible direction attaining `admissible_value`.
    pub steepest_direction: LpVector,
}

pub(crate) fn require_symmetric(rep: &Representation) -> Result<()> {
    let report = check_symmetry(rep.group());
    if report.passed {
        Ok(())
    } else {
        Err(Error::AsymmetricSetup(format!(
            "missing inverses {:?}, asymmetric pairs {}, weight sum {}",
            report.missing_inverses,
            report.asymmetric_pairs.len(),
            report.weight_sum
        )))
    }
}

pub fn absgrad_closed(alpha: &AffineAction, v: &LpVector) -> Result<GradientResult> {
    let rep = alpha.rep();
    require_symmetric(rep)?;
    rep.check_admissible(v.values())?;
    let p = rep.p();
    let q = lp::conjugate(p);
    let disp = alpha.displacement_raw(v.values());
    let norms: Vec<f64> = disp.iter().map(|d| lp::norm(d, p)).collect();
    let f = energy::weighted_mean(&norms, rep.weights(), p);
    if f == 0.0 {
        return Err(Error::AtFixedPoint);
    }
    let scale = 2.0 / f.powf(p - 1.0);

    let field = energy::g_field(alpha, v)?;
    let value = scale * field.norm();

    let mut dual = vec![0.0; rep.dim()];
    for ((d, n), m) in disp.iter().zip(&norms).zip(rep.weights()) {
        if *n == 0.0 {
            continue;
        }
        let j = lp::duality_values(d, p);
        let c = m * n.powf(p - 1.0);
        for (o, x) in dual.iter_mut().zip(&j) {
            *o += c * x;
        }
    }
    let dual_form_value = scale * lp::norm(&dual, q);

    let mut restricted = field.values().to_vec();
    restricted[rep.support_len()..].iter_mut().for_each(|x| *x = 0.0);
    let mean_zero = rep.domain() == Domain::MeanZero;
    if mean_zero {
        // The dual of the mean-zero subspace is ℓ^q modulo constants.
        let c = nearest_constant(&restricted, q);
        restricted.iter_mut().for_each(|x| *x -= c);
    }
    let admissible_value = scale * lp::norm(&restricted, q);
    let steepest_direction = match lp::norming_vector(&DualVector::new(q, restricted)?) {
        Ok(mut u) if mean_zero => {
            // Already mean-zero up to rounding of the constant.
            rep::mean_zero_in_place(u.values_mut());
            let n = u.norm();
            u.scaled(1.0 / n)
        }
        Ok(u) => u,
        Err(Error::ZeroFunctional) => LpVector::zeros(p, rep.dim())?,
        Err(e) => return Err(e),
    };
    Ok(GradientResult {
        value,
        dual_form_value,
        admissible_value,
        energy: f,
        dual_element: field,
        steepest_direction,
    })
}

/// The constant `c` minimizing `‖g − c‖_q`: the root of the decreasing
/// map `c ↦ Σ sign(g_i − c)|g_i − c|^{q−1}`, where `norming(g − c)` has
/// zero mean.
fn nearest_constant(g: &[f64], q: f64) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    if q == 2.0 {
        return g.iter().sum::<f64>() / g.len() as f64;
    }
    let phi = |c: f64| -> f64 { g.iter().map(|x| (x - c).signum() * (x - c).abs().powf(q - 1.0)).sum() };
    let mut lo = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Which evaluation produced a directional derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeBranch {
    ClosedForm,
    /// Some `Dv(γ)` vanished; a one-sided difference was used instead.
    OneSidedDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DirectionalDerivative {
    pub value: f64,
    pub branch: DerivativeBranch,
}

/// Step used by the one-sided fallback.
const FALLBACK_STEP: f64 = 1e-7;

/// `lim_{ε→0⁺} (F(v) − F(v + εu)) / ε`, the descent rate of `F_{α,p}`
/// along `u`.
pub fn directional_derivative(alpha: &AffineAction, v: &LpVector, u: &LpVector) -> Result<DirectionalDerivative> {
    let rep = alpha.rep();
    rep.check_admissible(v.values())?;
    rep.check_admissible(u.values())?;
    let p = rep.p();
    let disp = alpha.displacement_raw(v.values());
    let norms: Vec<f64> = disp.iter().map(|d| lp::norm(d, p)).collect();
    let f = energy::weighted_mean(&norms, rep.weights(), p);
    if f == 0.0 {
        return Err(Error::AtFixedPoint);
    }
    if norms.contains(&0.0) {
        let params = EnergyParams::matched(p)?;
        let h = FALLBACK_STEP * v.norm().max(1.0);
        let moved = v.axpy(h, u)?;
        let value = (f - energy::energy(alpha, params, &moved)?) / h;
        return Ok(DirectionalDerivative {
            value,
            branch: DerivativeBranch::OneSidedDifference,
        });
    }
    let du = rep.d_raw(u.values());
    let mut sum = 0.0;
    for ((d, dk), m) in disp.iter().zip(&du).zip(rep.weights()) {
        let pairing: f64 = d.iter().zip(dk).map(|(x, y)| lp::signed_power(*x, p) * y).sum();
        sum += m * pairing;
    }
    Ok(DirectionalDerivative {
        value: -sum / f.powf(p - 1.0),
        branch: DerivativeBranch::ClosedForm,
    })
}

/// Options for [`absgrad_sampled`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct SamplerOptions {
    pub seed: u64,
    /// Radii of random probes, as multiples of `max(‖v‖, 1e−300)` (or 1 at the origin).
    pub radii: Vec<f64>,
    /// Extra radii used along the closed-form steepest direction.
    pub steepest_radii: Vec<f64>,
    pub include_steepest: bool,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            radii: vec![1e-3, 1e-2, 0.1, 1.0],
            steepest_radii: vec![1e-4, 1e-3, 1e-2, 0.1, 1.0],
            include_steepest: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SampledGradient {
    /// `max(sup over probes of (F(v) − F(u)) / ‖v − u‖, 0)`.
    pub value: f64,
    pub probes: usize,
}

/// Seeded random unit vector in the domain of `rep`.
pub fn random_unit_vector(rep: &Representation, seed: u64) -> LpVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LpVector::new(rep.p(), random_unit(rep, &mut rng)).expect("finite vector")
}

/// Random unit vector in the domain of `rep`.
pub(crate) fn random_unit(rep: &Representation, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = rep.support_len();
    let mut x = vec![0.0; rep.dim()];
    for xi in x[..m].iter_mut() {
        *xi = StandardNormal.sample(rng);
    }
    if rep.domain() == Domain::MeanZero {
        rep::mean_zero_in_place(&mut x);
    }
    let n = lp::norm(&x, rep.p());
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    x
}

/// Lower bound for `|∇₋F_{α,r}|(v)` from difference quotients.
///
/// `budget` random directions are probed, cycling through the radii; the ray
/// toward `fixed_point` and (for `r = p`) the closed-form steepest direction
/// are probed as well.
pub fn absgrad_sampled(
    alpha: &AffineAction,
    params: EnergyParams,
    v: &LpVector,
    budget: usize,
    fixed_point: Option<&LpVector>,
    options: &SamplerOptions,
) -> Result<SampledGradient> {
    let rep = alpha.rep();
    rep.check_admissible(v.values())?;
    let f0 = energy::energy(alpha, params, v)?;
    let vn = v.norm();
    let scale = if vn > 0.0 { vn } else { 1.0 };
    let mut best = 0.0f64;
    let mut probes = 0;
    let mut probe = |dir: &[f64], dist: f64, best: &mut f64| -> Result<()> {
        let moved: Vec<f64> = v.values().iter().zip(dir).map(|(a, b)| a + dist * b).collect();
        let moved = LpVector::new(v.p(), moved)?;
        let step = moved.axpy(-1.0, v)?.norm();
        if step > 0.0 {
            let q = (f0 - energy::energy(alpha, params, &moved)?) / step;
            *best = best.max(q);
        }
        probes += 1;
        Ok(())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for s in 0..budget {
        let dir = random_unit(rep, &mut rng);
        let radius = options.radii[s % options.radii.len()] * scale;
        probe(&dir, radius, &mut best)?;
    }
    if let Some(fp) = fixed_point {
        let diff = fp.axpy(-1.0, v)?;
        let dist = diff.norm();
        if dist > 0.0 {
            let dir: Vec<f64> = diff.values().iter().map(|x| x / dist).collect();
            for r in &options.radii {
                probe(&dir, (r * scale).min(dist), &mut best)?;
            }
            probe(&dir, dist, &mut best)?;
        }
    }
    if options.include_steepest && params.r == params.p && f0 > 0.0 {
        if let Ok(grad) = absgrad_closed(alpha, v) {
            let dir = grad.steepest_direction.values().to_vec();
            for r in &options.steepest_radii {
                probe(&dir, r * scale, &mut best)?;
            }
        }
    }
    Ok(SampledGradient { value: best, probes })
}

/// Stopping rules and line-search constants for [`descend`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct DescentOptions {
    pub abs_tol: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Sufficient-decrease factor of the Armijo test.
    pub armijo: f64,
    pub shrink: f64,
    pub max_halvings: usize,
    /// The first trial step is `initial_step · F(v_k)`.
    pub initial_step: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            grad_tol: 1e-6,
            max_iters: 10_000,
            armijo: 0.5,
            shrink: 0.5,
            max_halvings: 60,
            initial_step: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `F ≤ abs_tol`.
    Converged,
    /// Admissible slope `≤ grad_tol`.
    Stationary,
    MaxIters,
    /// The line search failed `max_halvings` times in a row.
    Stalled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub gradient: f64,
    pub step: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DescentTrace {
    pub rows: Vec<TraceRow>,
    pub terminal: LpVector,
    pub terminal_energy: f64,
    pub initial_energy: f64,
    pub reason: Termination,
}

impl DescentTrace {
    pub fn converged(&self) -> bool {
        self.reason == Termination::Converged
    }
}

/// Steepest descent on `F_{α,p}` with Armijo backtracking.
pub fn descend(alpha: &AffineAction, v0: &LpVector, options: &DescentOptions) -> Result<DescentTrace> {
    descend_observed(alpha, v0, options, &mut |_, _| {})
}

/// [`descend`], calling `observer` with every iterate at which a gradient
/// was evaluated.
pub fn descend_observed(
    alpha: &AffineAction,
    v0: &LpVector,
    options: &DescentOptions,
    observer: &mut dyn FnMut(&LpVector, &GradientResult),
) -> Result<DescentTrace> {
    let rep = alpha.rep();
    require_symmetric(rep)?;
    rep.check_admissible(v0.values())?;
    let params = EnergyParams::matched(rep.p())?;
    let mut v = v0.clone();
    let mut f = energy::energy(alpha, params, &v)?;
    let initial_energy = f;
    let mut rows = Vec::new();
    let mut reason = Termination::MaxIters;
    for iter in 0..=options.max_iters {
        if f <= options.abs_tol {
            rows.push(TraceRow { iter, energy: f, gradient: 0.0, step: 0.0 });
            reason = Termination::Converged;
            break;
        }
        let grad = absgrad_closed(alpha, &v)?;
        observer(&v, &grad);
        let slope = grad.admissible_value;
        if slope <= options.grad_tol {
            rows.push(TraceRow { iter, energy: f, gradient: slope, step: 0.0 });
            reason = Termination::Stationary;
            break;
        }
        if iter == options.max_iters {
            rows.push(TraceRow { iter, energy: f, gradient: slope, step: 0.0 });
            break;
        }
        let mut t = options.initial_step * f;
        let mut accepted = None;
        for _ in 0..options.max_halvings {
            let trial = v.axpy(t, &grad.steepest_direction)?;
            let ft = energy::energy(alpha, params, &trial)?;
            if ft <= f - options.armijo * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= options.shrink;
        }
        match accepted {
            Some((next, fnext)) => {
                rows.push(TraceRow { iter, energy: f, gradient: slope, step: t });
                v = next;
                f = fnext;
            }
            None => {
                rows.push(TraceRow { iter, energy: f, gradient: slope, step: 0.0 });
                reason = Termination::Stalled;
                break;
            }
        }
    }
    Ok(DescentTrace {
        rows,
        terminal: v,
        terminal_energy: f,
        initial_energy,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{build_group, Element, Family, GroupHandle, GroupSpec};
    use std::sync::Arc;

    fn rep(spec: GroupSpec, p: f64, domain: Domain, radius: usize) -> Representation {
        Representation::regular(build_group(&spec).unwrap(), p, domain, radius).unwrap()
    }

    fn alternating(r: &Representation) -> LpVector {
        let v = (0..r.dim())
            .map(|i| if r.ball().element(i).key()[0] % 2 == 0 { 0.5 } else { -0.5 })
            .collect();
        r.vector(v).unwrap()
    }

    #[test]
    fn saturates_bound_on_alternating_vector() {
        let r = rep(GroupSpec::cyclic(4), 2.0, Domain::MeanZero, 0);
        let v = alternating(&r);
        let alpha = AffineAction::linear(r);
        let g = absgrad_closed(&alpha, &v).unwrap();
        assert!((g.value - 2.0).abs() < 1e-14);
        assert!((g.dual_form_value - 2.0).abs() < 1e-14);
        let params = EnergyParams::matched(2.0).unwrap();
        let s = absgrad_sampled(&alpha, params, &v, 10_000, None, &SamplerOptions::default()).unwrap();
        assert!(s.value >= 2.0 - 1e-3, "{}", s.value);
        assert!(s.value <= 2.0 + 1e-12);
    }

    #[test]
    fn fixed_point_errors_and_zero_sampled_gradient() {
        let r = rep(GroupSpec::cyclic(5), 2.0, Domain::Full, 0);
        let f0 = r.vector(vec![1.0, 0.0, -1.0, 0.5, -0.5]).unwrap();
        let alpha = AffineAction::coboundary(r, &f0).unwrap();
        let fixed = f0.scaled(-1.0);
        assert!(matches!(absgrad_closed(&alpha, &fixed), Err(Error::AtFixedPoint)));
        let params = EnergyParams::matched(2.0).unwrap();
        let s = absgrad_sampled(&alpha, params, &fixed, 500, None, &SamplerOptions::default()).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn asymmetric_setup_is_rejected() {
        let h = GroupHandle::from_parts(Family::Cyclic(4), vec![Element(vec![1]), Element(vec![3])], vec![0.7, 0.3]).unwrap();
        let b = crate::group::full_group(&h).unwrap();
        let r = Representation::new(Arc::new(h), Arc::new(b), 2.0, Domain::Full).unwrap();
        let v = r.vector(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let alpha = AffineAction::linear(r);
        assert!(matches!(absgrad_closed(&alpha, &v), Err(Error::AsymmetricSetup(_))));
    }

    #[test]
    fn derivative_toward_origin_is_scaling_quotient() {
        let r = rep(GroupSpec::dihedral(3), 3.0, Domain::MeanZero, 0);
        let v = rep::mean_zero_project(&r.vector(vec![0.3, -1.2, 0.8, 0.1, 0.9, -0.4]).unwrap());
        let alpha = AffineAction::linear(r);
        let u = v.scaled(-1.0 / v.norm());
        let d = directional_derivative(&alpha, &v, &u).unwrap();
        let f = energy::energy(&alpha, EnergyParams::matched(3.0).unwrap(), &v).unwrap();
        assert_eq!(d.branch, DerivativeBranch::ClosedForm);
        assert!((d.value - f / v.norm()).abs() < 1e-12);
    }

    #[test]
    fn nonsmooth_point_falls_back() {
        let spec = GroupSpec::cyclic(4).with_generators(["s", "s^3", "s^2"]);
        let r = rep(spec, 1.5, Domain::Full, 0);
        // Period-two vector: Dv(s^2) = 0 while Dv(s) ≠ 0.
        let v: Vec<f64> = (0..4).map(|i| if r.ball().element(i).key()[0] % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let v = r.vector(v).unwrap();
        let alpha = AffineAction::linear(r.clone());
        let u = r.vector(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let d = directional_derivative(&alpha, &v, &u).unwrap();
        assert_eq!(d.branch, DerivativeBranch::OneSidedDifference);
        assert!(d.value.is_finite());
        let ones = r.vector(vec![1.0; 4]).unwrap();
        assert!(matches!(directional_derivative(&alpha, &ones, &u), Err(Error::AtFixedPoint)));
    }

    #[test]
    fn mean_zero_steepest_direction_stays_in_domain() {
        let r = rep(GroupSpec::cyclic(3), 3.0, Domain::MeanZero, 0);
        let v = rep::mean_zero_project(&r.vector(vec![1.0, -0.2, 0.4]).unwrap());
        let alpha = AffineAction::linear(r.clone());
        let g = absgrad_closed(&alpha, &v).unwrap();
        let u = &g.steepest_direction;
        assert!(u.values().iter().sum::<f64>().abs() < 1e-15);
        assert!((u.norm() - 1.0).abs() < 1e-14);
        let d = directional_derivative(&alpha, &v, u).unwrap();
        assert!((d.value - g.admissible_value).abs() < 1e-12);
        // Brute force over the unit circle of the two-dimensional domain.
        let (a, b) = ([1.0, -1.0, 0.0], [1.0, 1.0, -2.0]);
        let best = (0..200_000)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 200_000.0;
                let w: Vec<f64> = (0..3).map(|i| t.cos() * a[i] + t.sin() * b[i]).collect();
                let w = r.vector(w).unwrap();
                let w = w.scaled(1.0 / w.norm());
                directional_derivative(&alpha, &v, &w).unwrap().value
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(best <= g.admissible_value + 1e-12);
        assert!(best >= g.admissible_value - 1e-8, "{best} vs {}", g.admissible_value);
        assert!(g.admissible_value < g.value);
    }

    #[test]
    fn descent_from_fixed_point_stops_immediately() {
        let r = rep(GroupSpec::cyclic(6), 2.0, Domain::Full, 0);
        let alpha = AffineAction::linear(r.clone());
        let trace = descend(&alpha, &r.zeros(), &DescentOptions::default()).unwrap();
        assert_eq!(trace.reason, Termination::Converged);
        assert_eq!(trace.terminal_energy, 0.0);
        assert_eq!(trace.rows.len(), 1);
    }
}
