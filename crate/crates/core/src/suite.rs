//! Invariant suites run by `pgap verify` on one configured instance.
//!
//! Every check records its worst observed residual and, on failure, a JSON
//! counterexample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::absgrad::{self, absgrad_closed, absgrad_sampled, SamplerOptions};
use crate::energy::{self, EnergyParams};
use crate::error::Error;
use crate::gap::{self, GapOptions};
use crate::group::{check_symmetry, GroupHandle};
use crate::lp::{self, DualVector, LpVector};
use crate::moduli::{self, DualityOptions, ModulusOptions};
use crate::rep::{AffineAction, Domain, Representation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Ball,
    Lp,
    Rep,
    Energy,
    Absgrad,
    Gap,
    Moduli,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Ball,
        Suite::Lp,
        Suite::Rep,
        Suite::Energy,
        Suite::Absgrad,
        Suite::Gap,
        Suite::Moduli,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Random instances per check and exponent.
    pub trials: usize,
    /// Exponents every module suite is run at.
    pub ps: Vec<f64>,
    /// Absolute tolerance of the exact identities.
    pub tolerance: f64,
    /// Multi-start budget of the gap suite.
    pub gap_starts: usize,
    /// Trials of the duality continuity check.
    pub duality_trials: usize,
    pub moduli_dim: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 20,
            ps: vec![1.5, 2.0, 3.0],
            tolerance: 1e-10,
            gap_starts: 8,
            duality_trials: 2000,
            moduli_dim: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckResult {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    /// Largest residual seen (or smallest margin, per check).
    pub worst: f64,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Value>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub suites: Vec<Suite>,
    pub checks: Vec<CheckResult>,
    pub failures: usize,
    pub passed: bool,
    /// Suites not run, with the reason.
    pub skipped: Vec<String>,
}

/// Accumulates the worst residual of one check over many cases.
struct Tally {
    suite: Suite,
    name: String,
    limit: f64,
    worst: f64,
    cases: usize,
    counterexample: Option<Value>,
}

impl Tally {
    fn new(suite: Suite, name: impl Into<String>, limit: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            limit,
            worst: 0.0,
            cases: 0,
            counterexample: None,
        }
    }

    fn record(&mut self, residual: f64, witness: impl FnOnce() -> Value) {
        self.cases += 1;
        let bad = residual.is_nan() || residual > self.limit;
        if bad && self.counterexample.is_none() {
            self.counterexample = Some(json!({ "residual": residual, "case": witness() }));
        }
        if residual > self.worst || residual.is_nan() {
            self.worst = residual;
        }
    }

    fn finish(self) -> CheckResult {
        let passed = self.counterexample.is_none();
        CheckResult {
            suite: self.suite,
            name: self.name,
            passed,
            worst: self.worst,
            detail: format!("{} cases, limit {:e}", self.cases, self.limit),
            counterexample: self.counterexample,
        }
    }
}

fn failure(suite: Suite, name: &str, e: &Error) -> CheckResult {
    CheckResult {
        suite,
        name: name.to_string(),
        passed: false,
        worst: f64::NAN,
        detail: format!("error: {e}"),
        counterexample: None,
    }
}

fn random_vector(rep: &Representation, rng: &mut ChaCha8Rng) -> LpVector {
    let scale = rng.random_range(0.2..3.0);
    let x = absgrad::random_unit(rep, rng).into_iter().map(|v| v * scale).collect();
    LpVector::new(rep.p(), x).expect("finite vector")
}

/// A vector of the ambient space, ignoring the domain.
fn random_raw(len: usize, p: f64, rng: &mut ChaCha8Rng) -> LpVector {
    let x = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    LpVector::new(p, x).expect("finite vector")
}

fn diff_norm(a: &[f64], b: &[f64], p: f64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    lp::norm(&d, p)
}

/// Runs the selected suites on the regular representation `rep` (its
/// exponent is replaced by each of `options.ps`). An empty selection passes.
pub fn run_suites(rep: &Representation, selection: &[Suite], options: &SuiteOptions) -> VerifyReport {
    let mut suites = selection.to_vec();
    suites.sort();
    suites.dedup();
    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    let mut ball_ok = true;
    for (i, suite) in suites.iter().enumerate() {
        let seed = options.seed.wrapping_add(1000 * i as u64);
        if *suite != Suite::Ball && *suite != Suite::Moduli && !ball_ok {
            skipped.push(format!("{suite:?}: ball invariants failed"));
            continue;
        }
        let out = match suite {
            Suite::Ball => ball_suite(rep),
            Suite::Lp => lp_suite(rep.dim(), options, seed),
            Suite::Rep => per_exponent(rep, options, |r| rep_suite(r, options, seed)),
            Suite::Energy => per_exponent(rep, options, |r| energy_suite(r, options, seed)),
            Suite::Absgrad => per_exponent(rep, options, |r| absgrad_suite(r, options, seed)),
            Suite::Gap => per_exponent(rep, options, |r| gap_suite(r, options, seed)),
            Suite::Moduli => moduli_suite(options, seed),
        };
        if *suite == Suite::Ball {
            ball_ok = out.iter().all(|c| c.passed);
        }
        checks.extend(out);
    }
    let failures = checks.iter().filter(|c| !c.passed).count();
    VerifyReport {
        suites,
        checks,
        failures,
        passed: failures == 0,
        skipped,
    }
}

fn per_exponent(
    rep: &Representation,
    options: &SuiteOptions,
    run: impl Fn(&Representation) -> Vec<CheckResult>,
) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for &p in &options.ps {
        match rep.with_p(p) {
            Ok(r) => out.extend(run(&r).into_iter().map(|mut c| {
                c.name = format!("{} [p={}]", c.name, lp_label(p));
                c
            })),
            Err(e) => out.push(failure(Suite::Lp, &format!("exponent {p}"), &e)),
        }
    }
    out
}

fn lp_label(p: f64) -> String {
    crate::io::format_float(p)
}

fn ball_suite(rep: &Representation) -> Vec<CheckResult> {
    let group: &GroupHandle = rep.group();
    let problems = rep.ball().check_invariants(group);
    let symmetry = check_symmetry(group);
    vec![
        CheckResult {
            suite: Suite::Ball,
            name: "ball invariants".into(),
            passed: problems.is_empty(),
            worst: problems.len() as f64,
            detail: format!("{} elements, radius {}", rep.dim(), rep.ball().radius()),
            counterexample: (!problems.is_empty()).then(|| json!(problems.iter().take(20).collect::<Vec<_>>())),
        },
        CheckResult {
            suite: Suite::Ball,
            name: "symmetric weighted generating set".into(),
            passed: symmetry.passed,
            worst: (symmetry.weight_sum - 1.0).abs(),
            detail: format!("{} generators", group.len()),
            counterexample: (!symmetry.passed).then(|| serde_json::to_value(&symmetry).unwrap_or(Value::Null)),
        },
    ]
}

fn lp_suite(len: usize, options: &SuiteOptions, seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for &p in &options.ps {
        let label = lp_label(p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut support = Tally::new(Suite::Lp, format!("duality map is a support functional [p={label}]"), options.tolerance);
        let mut norming = Tally::new(Suite::Lp, format!("norming vector attains the dual norm [p={label}]"), 1e-8);
        let mut holder = Tally::new(Suite::Lp, format!("Hölder inequality [p={label}]"), options.tolerance);
        for _ in 0..options.trials {
            let f = random_raw(len.max(1), p, &mut rng);
            let j = lp::duality_map(&f);
            let n = f.norm();
            let residual = (j.pair(&f).unwrap_or(f64::NAN) - n).abs().max((j.norm() - 1.0).abs());
            support.record(residual, || json!({ "f": f.values() }));
            let g = random_raw(len.max(1), p, &mut rng).into_values();
            let g = DualVector::new(lp::conjugate(p), g).expect("finite vector");
            match lp::norming_vector(&g) {
                Ok(u) => {
                    let r = (g.pair(&u).unwrap_or(f64::NAN) - g.norm()).abs() + (u.norm() - 1.0).abs();
                    norming.record(r, || json!({ "g": g.values() }));
                }
                Err(_) => norming.record(0.0, || Value::Null),
            }
            let slack = g.pair(&f).unwrap_or(f64::NAN).abs() - g.norm() * n;
            holder.record(slack.max(0.0), || json!({ "f": f.values(), "g": g.values() }));
        }
        out.extend([support.finish(), norming.finish(), holder.finish()]);
    }
    out
}

fn rep_suite(rep: &Representation, options: &SuiteOptions, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rep.p();
    let tol = options.tolerance;
    let mut isometry = Tally::new(Suite::Rep, "apply_pi is an isometry", tol);
    let mut inverse = Tally::new(Suite::Rep, "pi(g^-1) pi(g) = id", 0.0);
    let mut mean = Tally::new(Suite::Rep, "mean-zero subspace is invariant", tol);
    let mut inverse_law = Tally::new(Suite::Rep, "cocycle inverse law on coboundaries", 0.0);
    let group = rep.group();
    for _ in 0..options.trials {
        let v = random_vector(rep, &mut rng);
        for k in 0..rep.generator_count() {
            let Ok(w) = rep.apply_generator(k, &v) else {
                isometry.record(f64::INFINITY, || json!({ "generator": k, "v": v.values() }));
                continue;
            };
            isometry.record((w.norm() - v.norm()).abs(), || json!({ "generator": k, "v": v.values() }));
            if rep.domain() == Domain::MeanZero {
                mean.record(w.values().iter().sum::<f64>().abs(), || json!({ "generator": k, "v": v.values() }));
            }
            if let Some(kinv) = group.inverse_of(k) {
                let back = rep.apply_generator(kinv, &w).map(|b| diff_norm(b.values(), v.values(), p));
                inverse.record(back.unwrap_or(f64::INFINITY), || json!({ "generator": k, "v": v.values() }));
            }
        }
        if let Ok(c) = rep.d(&v) {
            for k in 0..rep.generator_count() {
                let Some(kinv) = group.inverse_of(k) else { continue };
                let ck = LpVector::new(p, c.value(k).to_vec()).expect("finite vector");
                let moved = rep.apply_generator(kinv, &ck).map(|m| {
                    let neg: Vec<f64> = m.values().iter().map(|x| -x).collect();
                    diff_norm(c.value(kinv), &neg, p)
                });
                inverse_law.record(moved.unwrap_or(f64::INFINITY), || json!({ "generator": k, "v": v.values() }));
            }
        }
    }
    let mut out = vec![isometry.finish(), inverse.finish(), inverse_law.finish()];
    if rep.domain() == Domain::MeanZero {
        out.push(mean.finish());
    }
    if rep.domain().is_full() {
        let mut recover = Tally::new(Suite::Rep, "coboundary potentials are recovered", 1e-9);
        for _ in 0..options.trials.min(5) {
            let v = random_vector(rep, &mut rng);
            let result = rep.d(&v).and_then(|c| {
                let residual = rep.cocycle_residual(&c)?;
                let (f, fit) = rep.recover_potential(&c)?;
                let mut target = v.clone();
                crate::rep::mean_zero_in_place(target.values_mut());
                Ok(residual.max(fit).max(diff_norm(f.values(), target.values(), p)))
            });
            recover.record(result.unwrap_or(f64::INFINITY), || json!({ "v": v.values() }));
        }
        out.push(recover.finish());
    }
    out
}

fn energy_suite(rep: &Representation, options: &SuiteOptions, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rep.p();
    let m_min = rep.group().min_weight();
    let linear = AffineAction::linear(rep.clone());
    let f0 = random_vector(rep, &mut rng);
    let affine = match AffineAction::coboundary(rep.clone(), &f0) {
        Ok(a) => a,
        Err(e) => return vec![failure(Suite::Energy, "coboundary action", &e)],
    };
    let mut convex = Tally::new(Suite::Energy, "F is convex", 1e-12);
    let mut sandwich = Tally::new(Suite::Energy, "m_min^(1/r) F_inf <= F_r <= F_inf", 1e-12);
    let mut lipschitz = Tally::new(Suite::Energy, "F is 2-Lipschitz", 1e-12);
    let mut homogeneous = Tally::new(Suite::Energy, "F(tv) = |t| F(v) for linear actions", options.tolerance);
    let mut field = Tally::new(Suite::Energy, "G field of a coboundary action is the p-Laplacian", 1e-12);
    let mut dirichlet = Tally::new(Suite::Energy, "Dirichlet identity |f|_D^2 = -2<Lf, f>", options.tolerance);
    let energy = |a: &AffineAction, r: f64, v: &LpVector| energy::energy(a, EnergyParams::new(p, r)?, v);
    for _ in 0..options.trials {
        let v = random_vector(rep, &mut rng);
        let u = random_vector(rep, &mut rng);
        let case = || json!({ "v": v.values(), "u": u.values() });
        for r in [1.0, 2.0, p, f64::INFINITY] {
            let (Ok(fv), Ok(fu)) = (energy(&affine, r, &v), energy(&affine, r, &u)) else {
                convex.record(f64::INFINITY, case);
                continue;
            };
            for t in [0.25, 0.5, 0.75] {
                let w = LpVector::new(p, v.values().iter().zip(u.values()).map(|(a, b)| t * a + (1.0 - t) * b).collect())
                    .expect("finite vector");
                let fw = energy(&affine, r, &w).unwrap_or(f64::INFINITY);
                convex.record(fw - t * fv - (1.0 - t) * fu, case);
            }
            lipschitz.record(((fv - fu).abs() - 2.0 * diff_norm(v.values(), u.values(), p)).max(0.0), case);
        }
        for r in [1.0, 2.0, p] {
            let (Ok(fr), Ok(finf)) = (energy(&affine, r, &v), energy(&affine, f64::INFINITY, &v)) else {
                sandwich.record(f64::INFINITY, case);
                continue;
            };
            sandwich.record((m_min.powf(1.0 / r) * finf - fr).max(fr - finf), case);
        }
        let t = rng.random_range(-3.0..3.0);
        let fv = energy(&linear, p, &v).unwrap_or(f64::NAN);
        let ft = energy(&linear, p, &v.scaled(t)).unwrap_or(f64::NAN);
        homogeneous.record((ft - t.abs() * fv).abs(), case);
        let shifted = v.axpy(1.0, &f0).expect("same length");
        match (energy::g_field(&affine, &v), energy::p_laplacian(rep, &shifted)) {
            (Ok(g), Ok(l)) => field.record(diff_norm(g.values(), l.values(), 2.0), case),
            _ => field.record(f64::INFINITY, case),
        }
    }
    let mut out = vec![
        convex.finish(),
        sandwich.finish(),
        lipschitz.finish(),
        homogeneous.finish(),
        field.finish(),
    ];
    if p == 2.0 {
        for _ in 0..options.trials {
            let f = random_vector(rep, &mut rng);
            let residual = energy::dp_norm(rep, &f).and_then(|d| {
                let l = energy::p_laplacian(rep, &f)?;
                Ok((d * d + 2.0 * l.pair(&f)?).abs())
            });
            dirichlet.record(residual.unwrap_or(f64::INFINITY), || json!({ "f": f.values() }));
        }
        out.push(dirichlet.finish());
    }
    out
}

fn absgrad_suite(rep: &Representation, options: &SuiteOptions, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rep.p();
    let params = match EnergyParams::matched(p) {
        Ok(x) => x,
        Err(e) => return vec![failure(Suite::Absgrad, "energy parameters", &e)],
    };
    let linear = AffineAction::linear(rep.clone());
    let f0 = random_vector(rep, &mut rng);
    let affine = match AffineAction::coboundary(rep.clone(), &f0) {
        Ok(a) => a,
        Err(e) => return vec![failure(Suite::Absgrad, "coboundary action", &e)],
    };
    let mut bound = Tally::new(Suite::Absgrad, "closed-form gradient <= 2", 1e-12);
    let mut forms = Tally::new(Suite::Absgrad, "field and duality-map forms agree", options.tolerance);
    let mut sampled = Tally::new(Suite::Absgrad, "closed form dominates the sampler", 1e-9);
    let mut scaling = Tally::new(Suite::Absgrad, "scaling bound |grad F|(v) >= F(v)/|v|", 1e-9);
    let mut identity = Tally::new(Suite::Absgrad, "gradient equals 2|L(v+f)|/|v+f|_D^(p-1)", options.tolerance);
    let sampler = SamplerOptions::default();
    for trial in 0..options.trials {
        let v = random_vector(rep, &mut rng);
        let case = || json!({ "v": v.values(), "potential": f0.values() });
        for (alpha, is_linear) in [(&linear, true), (&affine, false)] {
            let grad = match absgrad_closed(alpha, &v) {
                Ok(g) => g,
                Err(Error::AtFixedPoint) => continue,
                Err(_) => {
                    bound.record(f64::INFINITY, case);
                    continue;
                }
            };
            bound.record(grad.value - 2.0, case);
            forms.record((grad.value - grad.dual_form_value).abs(), case);
            let s = absgrad_sampled(
                alpha,
                params,
                &v,
                50,
                None,
                &SamplerOptions {
                    seed: seed ^ trial as u64,
                    ..sampler.clone()
                },
            );
            sampled.record(s.map_or(f64::INFINITY, |s| s.value - grad.value), case);
            if is_linear {
                scaling.record(grad.energy / v.norm() - grad.value, case);
            } else {
                let shifted = v.axpy(1.0, &f0).expect("same length");
                let expected = energy::p_laplacian(rep, &shifted).and_then(|l| {
                    let d = energy::dp_norm(rep, &shifted)?;
                    Ok(2.0 * l.norm() / d.powf(p - 1.0))
                });
                identity.record(expected.map_or(f64::INFINITY, |e| (grad.value - e).abs()), case);
            }
        }
    }
    vec![bound.finish(), forms.finish(), sampled.finish(), scaling.finish(), identity.finish()]
}

fn gap_suite(rep: &Representation, options: &SuiteOptions, seed: u64) -> Vec<CheckResult> {
    let rep = if rep.domain() == Domain::Full {
        match rep.with_domain(Domain::MeanZero) {
            Ok(r) => r,
            Err(e) => return vec![failure(Suite::Gap, "mean-zero domain", &e)],
        }
    } else {
        rep.clone()
    };
    let opts = GapOptions {
        seed,
        starts: options.gap_starts,
        battery: 2,
        ..GapOptions::default()
    };
    match gap::equivalence_report(&rep, rep.p(), &opts) {
        Ok(report) => report
            .chain
            .iter()
            .map(|c| CheckResult {
                suite: Suite::Gap,
                name: c.name.clone(),
                passed: c.holds,
                worst: c.lhs - c.rhs,
                detail: format!("lhs {:e}, rhs {:e}, tolerance {:e}", c.lhs, c.rhs, c.tolerance),
                counterexample: (!c.holds).then(|| json!({ "lhs": c.lhs, "rhs": c.rhs })),
            })
            .collect(),
        Err(e) => vec![failure(Suite::Gap, "equivalence report", &e)],
    }
}

fn moduli_suite(options: &SuiteOptions, seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let modulus = ModulusOptions {
        seed,
        starts: 32,
        iters: 200,
    };
    let dim = options.moduli_dim.max(2);
    let hilbert = moduli::modulus_convexity(2.0, dim, &[1.0], &modulus)
        .and_then(|d| Ok((d, moduli::modulus_smoothness(2.0, dim, &[1.0], &modulus)?)));
    match hilbert {
        Ok((d, r)) => {
            let mut t = Tally::new(Suite::Moduli, "Hilbert closed forms", 1e-3);
            t.record((d.estimates[0] - moduli::hilbert_convexity(1.0)).abs(), || json!({ "delta": d.estimates[0] }));
            t.record((r.estimates[0] - moduli::hilbert_smoothness(1.0)).abs(), || json!({ "rho": r.estimates[0] }));
            out.push(t.finish());
        }
        Err(e) => out.push(failure(Suite::Moduli, "Hilbert closed forms", &e)),
    }
    for &p in &options.ps {
        let name = format!("duality map continuity [p={}]", lp_label(p));
        let duality = DualityOptions {
            seed,
            modulus: ModulusOptions {
                seed,
                ..DualityOptions::default().modulus
            },
            ..DualityOptions::default()
        };
        match moduli::duality_continuity_check(p, dim, options.duality_trials, &duality) {
            Ok(r) => {
                let limit = if p == 2.0 { 0.0 } else { 1e-3 };
                out.push(CheckResult {
                    suite: Suite::Moduli,
                    name,
                    passed: r.violation_rate <= limit && r.smoothness.monotone_violations == 0,
                    worst: r.violation_rate,
                    detail: format!("{} violations in {} pairs", r.violations, r.checked),
                    counterexample: r.dumped.first().map(|v| serde_json::to_value(v).unwrap_or(Value::Null)),
                });
            }
            Err(e) => out.push(failure(Suite::Moduli, &name, &e)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{build_group, GroupSpec};

    fn cyclic6() -> Representation {
        Representation::regular(build_group(&GroupSpec::cyclic(6)).unwrap(), 2.0, Domain::MeanZero, 0).unwrap()
    }

    #[test]
    fn empty_selection_passes() {
        let report = run_suites(&cyclic6(), &[], &SuiteOptions::default());
        assert!(report.passed);
        assert!(report.checks.is_empty());
    }

    #[test]
    fn default_suites_pass_on_cyclic_six() {
        let options = SuiteOptions {
            duality_trials: 500,
            ..SuiteOptions::default()
        };
        let report = run_suites(&cyclic6(), &Suite::ALL, &options);
        for c in report.checks.iter().filter(|c| !c.passed) {
            eprintln!("{c:?}");
        }
        assert!(report.passed);
    }

    #[test]
    fn corrupted_translation_fails_the_ball_suite() {
        let group = build_group(&GroupSpec::cyclic(6)).unwrap();
        let mut ball = crate::group::full_group(&group).unwrap();
        ball.corrupt_translation(0, 2, 1);
        let rep = Representation::new(
            std::sync::Arc::new(group),
            std::sync::Arc::new(ball),
            2.0,
            Domain::MeanZero,
        )
        .unwrap();
        let report = run_suites(&rep, &[Suite::Ball, Suite::Energy], &SuiteOptions::default());
        assert!(!report.passed);
        let ball = &report.checks[0];
        assert!(!ball.passed);
        assert!(ball.counterexample.is_some());
        assert_eq!(report.skipped.len(), 1);
    }
}
