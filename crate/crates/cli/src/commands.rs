//! The five subcommands. Each writes its reports under the output directory
//! and returns the JSON path written first.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use pgap_core::absgrad::{self, descend_observed, Termination};
use pgap_core::group::{self, check_symmetry, CayleyBall, GroupHandle};
use pgap_core::io::{self, write_atomic, write_json};
use pgap_core::moduli::{self, DualityReport, ModulusCurve};
use pgap_core::{
    build_group, gap, run_suites, AffineAction, Cocycle, Domain, EnergyParams, LpVector, Representation,
    VerifyReport, VERSION,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CocycleInput, RunConfig};
use crate::failure::{Failure, Kind};

/// Outcome of a command: the files written and an optional failure that
/// still lets every output be written first.
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub summary: Vec<String>,
    pub failure: Option<Failure>,
}

fn envelope<T: Serialize>(config: &RunConfig, key: &str, value: &T) -> Result<Value, Failure> {
    let mut map = serde_json::Map::new();
    map.insert("version".into(), json!(VERSION));
    map.insert("config".into(), serde_json::to_value(config).map_err(|e| Failure::validation(e.to_string()))?);
    map.insert(key.into(), serde_json::to_value(value).map_err(|e| Failure::validation(e.to_string()))?);
    Ok(Value::Object(map))
}

fn write_report(path: &Path, value: &Value) -> Result<(), Failure> {
    write_json(path, value).map_err(Failure::from)
}

fn group_of(config: &mut RunConfig) -> Result<GroupHandle, Failure> {
    let handle = build_group(config.spec()?)?;
    if config.domain.is_none() {
        config.domain = Some(if handle.is_finite() { Domain::MeanZero } else { Domain::Dirichlet });
    }
    Ok(handle)
}

fn domain(config: &RunConfig) -> Domain {
    config.domain.unwrap_or(Domain::MeanZero)
}

fn radius_for(config: &RunConfig, handle: &GroupHandle) -> Result<usize, Failure> {
    match (config.radius, domain(config)) {
        (Some(r), _) => Ok(r),
        (None, d) if d.is_full() => Ok(0),
        (None, _) => Err(Failure::validation(format!(
            "{} needs a radius for the dirichlet domain",
            handle.name()
        ))),
    }
}

fn representation(config: &RunConfig, handle: &GroupHandle) -> Result<Representation, Failure> {
    let radius = radius_for(config, handle)?;
    Ok(Representation::regular(handle.clone(), config.p, domain(config), radius)?)
}

fn read_vector(path: &Path) -> Result<Vec<f64>, Failure> {
    let values = if path.extension().is_some_and(|e| e == "bin") {
        io::read_vector_bin(path)
    } else {
        io::read_vector_csv(path)
    };
    values.map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct BallSummary {
    group: String,
    generators: Vec<String>,
    weights: Vec<f64>,
    radius: usize,
    size: usize,
    inner_size: usize,
    per_depth: Vec<usize>,
    /// Element labels in index order, the order of every vector file.
    elements: Vec<String>,
    saturated: bool,
    symmetry: group::SymmetryReport,
}

pub fn ball(mut config: RunConfig) -> Result<Outcome, Failure> {
    let handle = group_of(&mut config)?;
    let b: CayleyBall = match config.radius {
        Some(r) => group::ball(&handle, r)?,
        None if handle.is_finite() => group::full_group(&handle)?,
        None => return Err(Failure::validation(format!("{} needs a radius", handle.name()))),
    };
    let summary = BallSummary {
        group: handle.name(),
        generators: handle.generator_labels().to_vec(),
        weights: handle.weights().to_vec(),
        radius: b.radius(),
        size: b.len(),
        inner_size: b.inner_len(),
        per_depth: b.per_depth(),
        elements: b.elements().iter().map(|e| handle.label(e)).collect(),
        saturated: b.is_saturated(),
        symmetry: check_symmetry(&handle),
    };
    let path = config.out_dir().join("ball.json");
    write_report(&path, &envelope(&config, "ball", &summary)?)?;
    Ok(Outcome {
        written: vec![path],
        summary: vec![format!(
            "{}: |B_{}| = {}, per depth {:?}",
            summary.group, summary.radius, summary.size, summary.per_depth
        )],
        failure: None,
    })
}

pub fn gap(mut config: RunConfig) -> Result<Outcome, Failure> {
    let handle = group_of(&mut config)?;
    let out = config.out_dir().to_path_buf();
    let (json_value, rows, chain_ok, summary) = match (&config.radii, domain(&config)) {
        (Some(radii), Domain::Dirichlet) => {
            let reports = gap::gap_sweep(&handle, config.p, config.r(), Domain::Dirichlet, radii, &config.gap)?;
            let monotonicity = gap::sweep_monotonicity(&reports);
            let ok = reports.iter().all(|r| r.chain_holds()) && monotonicity.iter().all(|c| c.holds);
            let summary = reports
                .iter()
                .map(|r| {
                    format!(
                        "R={}: C_disp={:.6} C_r={:.6} C_grad={:.6} C_lap={:.6}",
                        r.radius.unwrap_or(0),
                        r.c_disp.value,
                        r.c_r.value,
                        r.c_grad.value,
                        r.c_lap.value
                    )
                })
                .collect();
            let rows = gap::sweep_rows(&reports);
            let mut v = envelope(&config, "reports", &reports)?;
            v["monotonicity"] = serde_json::to_value(&monotonicity).map_err(|e| Failure::validation(e.to_string()))?;
            v["passed"] = json!(ok);
            (v, rows, ok, summary)
        }
        (Some(_), _) => return Err(Failure::validation("radius sweeps need the dirichlet domain")),
        (None, _) => {
            let rep = representation(&config, &handle)?;
            let report = gap::equivalence_report(&rep, config.r(), &config.gap)?;
            let ok = report.chain_holds();
            let summary = vec![format!(
                "{}: C_disp={:.6} C_r={:.6} C_grad={:.6} C_lap={:.6}",
                report.group, report.c_disp.value, report.c_r.value, report.c_grad.value, report.c_lap.value
            )];
            let rows = gap::sweep_rows(std::slice::from_ref(&report));
            let mut v = envelope(&config, "report", &report)?;
            v["passed"] = json!(ok);
            (v, rows, ok, summary)
        }
    };
    let json_path = out.join("gap.json");
    let csv_path = out.join("sweep.csv");
    write_report(&json_path, &json_value)?;
    write_atomic(&csv_path, &io::sweep_csv(&rows)?)?;
    Ok(Outcome {
        written: vec![json_path, csv_path],
        summary,
        failure: (!chain_ok).then(|| Failure::new(Kind::Property, "a chain inequality failed")),
    })
}

/// An action, its potential when known, and the potential's residual.
type PreparedAction = (AffineAction, Option<Vec<f64>>, Option<f64>);

/// The action to descend and, when known, its potential `f₀` (fixed points
/// are `−f₀` plus invariant vectors).
fn action(config: &RunConfig, rep: &Representation) -> Result<PreparedAction, Failure> {
    let project = |mut f: Vec<f64>| -> Result<LpVector, Failure> {
        if f.len() != rep.dim() {
            return Err(Failure::validation(format!(
                "potential has {} entries, the ball has {}",
                f.len(),
                rep.dim()
            )));
        }
        if rep.domain() == Domain::MeanZero {
            let mean = f.iter().sum::<f64>() / f.len() as f64;
            f.iter_mut().for_each(|x| *x -= mean);
        }
        Ok(LpVector::new(rep.p(), f)?)
    };
    match &config.descend.cocycle {
        CocycleInput::Zero => Ok((AffineAction::linear(rep.clone()), Some(vec![0.0; rep.dim()]), None)),
        CocycleInput::Potential { path } => {
            let f0 = project(read_vector(path)?)?;
            let a = AffineAction::coboundary(rep.clone(), &f0)?;
            Ok((a, Some(f0.into_values()), None))
        }
        CocycleInput::RandomPotential { scale } => {
            let f0 = absgrad::random_unit_vector(rep, config.seed).scaled(*scale);
            let a = AffineAction::coboundary(rep.clone(), &f0)?;
            Ok((a, Some(f0.into_values()), None))
        }
        CocycleInput::Generators { values } => {
            let group = rep.group();
            let mut columns = vec![None; group.len()];
            for (label, path) in values {
                let k = group
                    .generator_index(label)
                    .ok_or_else(|| Failure::validation(format!("unknown generator {label:?}")))?;
                columns[k] = Some(read_vector(path)?);
            }
            let columns = columns
                .into_iter()
                .enumerate()
                .map(|(k, c)| {
                    c.ok_or_else(|| {
                        Failure::validation(format!("no value for generator {}", group.generator_labels()[k]))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let a = AffineAction::new(rep.clone(), Cocycle::from_values(columns))?;
            let (a, residual) = a.with_recovered_potential(config.descend.potential_tol)?;
            let f0 = a.potential().map(<[f64]>::to_vec);
            Ok((a, f0, Some(residual)))
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DescendSummary {
    reason: Termination,
    iterations: usize,
    initial_energy: f64,
    terminal_energy: f64,
    terminal_norm: f64,
    /// Largest difference quotient of `F` at the terminus over the sampler's
    /// radii; small exactly when the terminus is stationary at that resolution.
    sampled_gradient: f64,
    /// Closed-form slope at the terminus; absent when `F` vanishes there.
    closed_gradient: Option<f64>,
    /// Distance from the terminus to the nearest fixed point `−f₀ + const`.
    fixed_point_error: Option<f64>,
    /// Least-squares residual of `df = c` for generator-value cocycles.
    potential_residual: Option<f64>,
    potential_known: bool,
}

pub fn descend(mut config: RunConfig) -> Result<Outcome, Failure> {
    let handle = group_of(&mut config)?;
    let rep = representation(&config, &handle)?;
    let (alpha, f0, potential_residual) = action(&config, &rep)?;
    let v0 = match &config.descend.initial {
        Some(path) => rep.vector(read_vector(path)?)?,
        None => rep.zeros(),
    };
    let trace = descend_observed(&alpha, &v0, &config.descend.options, &mut |_, _| {})?;
    let p = rep.p();
    let terminal = &trace.terminal;
    let fixed_point = f0.as_ref().map(|f0| {
        let mut fp: Vec<f64> = f0.iter().map(|x| -x).collect();
        if rep.domain().is_full() {
            let shift = terminal.values().iter().zip(f0).map(|(a, b)| a + b).sum::<f64>() / rep.dim() as f64;
            fp.iter_mut().for_each(|x| *x += shift);
        }
        LpVector::new(p, fp).expect("finite vector")
    });
    let fixed_point_error = fixed_point
        .as_ref()
        .map(|fp| terminal.axpy(-1.0, fp).map(|d| d.norm()))
        .transpose()?;
    let params = EnergyParams::matched(p)?;
    let sampled = absgrad::absgrad_sampled(
        &alpha,
        params,
        terminal,
        config.descend.sampler_budget,
        None,
        &config.descend.sampler,
    )?;
    let closed_gradient = match absgrad::absgrad_closed(&alpha, terminal) {
        Ok(g) => Some(g.admissible_value),
        Err(pgap_core::Error::AtFixedPoint) => None,
        Err(e) => return Err(e.into()),
    };
    let summary = DescendSummary {
        reason: trace.reason,
        iterations: trace.rows.len().saturating_sub(1),
        initial_energy: trace.initial_energy,
        terminal_energy: trace.terminal_energy,
        terminal_norm: terminal.norm(),
        sampled_gradient: sampled.value,
        closed_gradient,
        fixed_point_error,
        potential_residual,
        potential_known: f0.is_some(),
    };

    let out = config.out_dir().to_path_buf();
    let json_path = out.join("descend.json");
    let trace_path = out.join("trace.csv");
    let terminal_path = out.join("terminal.csv");
    write_report(&json_path, &envelope(&config, "descent", &summary)?)?;
    write_atomic(&trace_path, &io::trace_csv(&trace)?)?;
    io::write_vector_csv(&terminal_path, terminal.values())?;
    let failure = (trace.reason == Termination::Stalled)
        .then(|| Failure::new(Kind::Stall, "line search stalled"));
    Ok(Outcome {
        written: vec![json_path, trace_path, terminal_path],
        summary: vec![format!(
            "{:?} after {} iterations: F {:.3e} -> {:.3e}, sampled gradient {:.3e}",
            summary.reason, summary.iterations, summary.initial_energy, summary.terminal_energy, summary.sampled_gradient
        )],
        failure,
    })
}

pub fn verify(mut config: RunConfig) -> Result<Outcome, Failure> {
    let handle = group_of(&mut config)?;
    let d = domain(&config);
    let mut b = if d.is_full() {
        group::full_group(&handle)?
    } else {
        group::ball(&handle, radius_for(&config, &handle)?)?
    };
    if let Some(c) = &config.verify.corrupt {
        if c.generator >= b.generator_count() || c.index >= b.len() || c.target >= b.len() {
            return Err(Failure::validation("corruption indices are out of range"));
        }
        b.corrupt_translation(c.generator, c.index, c.target);
    }
    let rep = Representation::new(Arc::new(handle), Arc::new(b), config.p, d)?;
    let report: VerifyReport = run_suites(&rep, &config.verify.suites, &config.verify.options);
    let path = config.out_dir().join("verify.json");
    write_report(&path, &envelope(&config, "verify", &report)?)?;
    let mut summary: Vec<String> = report
        .checks
        .iter()
        .map(|c| format!("{} {:?}: {} (worst {:.3e})", if c.passed { "PASS" } else { "FAIL" }, c.suite, c.name, c.worst))
        .collect();
    summary.extend(report.skipped.iter().map(|s| format!("SKIP {s}")));
    summary.push(format!("{} checks, {} failed", report.checks.len(), report.failures));
    Ok(Outcome {
        written: vec![path],
        summary,
        failure: (!report.passed).then(|| Failure::new(Kind::Property, format!("{} checks failed", report.failures))),
    })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ModuliReport {
    convexity: ModulusCurve,
    smoothness: ModulusCurve,
    duality: DualitySummary,
    passed: bool,
}

/// [`DualityReport`] without its copy of the smoothness curve.
#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DualitySummary {
    trials: usize,
    checked: usize,
    skipped: usize,
    violations: usize,
    violation_rate: f64,
    worst_margin: f64,
    dumped: Vec<moduli::DualityViolation>,
}

impl From<DualityReport> for DualitySummary {
    fn from(r: DualityReport) -> Self {
        Self {
            trials: r.trials,
            checked: r.checked,
            skipped: r.skipped,
            violations: r.violations,
            violation_rate: r.violation_rate,
            worst_margin: r.worst_margin,
            dumped: r.dumped,
        }
    }
}

pub fn moduli(config: RunConfig) -> Result<Outcome, Failure> {
    let m = &config.moduli;
    let convexity = moduli::modulus_convexity(config.p, m.dim, &m.eps_grid, &m.options)?;
    let smoothness = moduli::modulus_smoothness(config.p, m.dim, &m.tau_grid, &m.options)?;
    let duality = moduli::duality_check_against(smoothness.clone(), m.trials, &m.duality_options(config.seed))?;
    let passed = convexity.monotone_violations == 0
        && smoothness.monotone_violations == 0
        && smoothness.convexity_violations == 0
        && duality.violation_rate <= m.max_violation_rate;
    let summary = vec![
        format!("convexity: {} points, {} monotonicity violations", convexity.arguments.len(), convexity.monotone_violations),
        format!(
            "smoothness: {} points, {} monotonicity and {} convexity violations",
            smoothness.arguments.len(),
            smoothness.monotone_violations,
            smoothness.convexity_violations
        ),
        format!("duality continuity: {} violations in {} pairs", duality.violations, duality.checked),
    ];
    let out = config.out_dir().to_path_buf();
    let json_path = out.join("moduli.json");
    let conv_path = out.join("convexity.csv");
    let smooth_path = out.join("smoothness.csv");
    write_atomic(&conv_path, &io::curve_csv(&convexity.rows())?)?;
    write_atomic(&smooth_path, &io::curve_csv(&smoothness.rows())?)?;
    let report = ModuliReport {
        convexity,
        smoothness,
        duality: duality.into(),
        passed,
    };
    write_report(&json_path, &envelope(&config, "moduli", &report)?)?;
    Ok(Outcome {
        written: vec![json_path, conv_path, smooth_path],
        summary,
        failure: (!passed).then(|| Failure::new(Kind::Property, "a moduli property failed")),
    })
}
