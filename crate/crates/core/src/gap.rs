//! Gap constants of the regular representation on a fixed-vector-free
//! domain, equivalence reports and radius sweeps.
//!
//! Every constant is an infimum over the unit sphere of the domain:
//!
//! * `C_disp = inf max_γ ‖λ(γ)v − v‖`,
//! * `C_r = inf F_{λ,r}(v)`,
//! * `C_grad = inf |∇₋F_{λ,p}|(v)`,
//! * `C_lap = inf ‖Δ_p f‖_q / ‖f‖_{D_p}^{p−1}`.
//!
//! All of them are estimated over one shared pool of candidate vectors
//! (optimizer terminals, structured starts, exact eigenvectors, warm starts
//! and descent iterates). Each estimate is the smallest value of its
//! objective over the pool, so it is attained by a stored certificate and is
//! an upper bound for the infimum.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::absgrad::{self, DescentOptions, Termination};
use crate::energy::{self, EnergyParams};
use crate::error::{Error, Result};
use crate::group::{Family, GroupHandle};
use crate::lp::{self, LpVector};
use crate::rep::{self, AffineAction, Domain, Representation};

/// Slack of the chain inequalities.
pub const CHAIN_TOL: f64 = 1e-9;
/// Allowed gap between `C_lap` and `C_grad / 2`.
pub const LAP_GRAD_TOL: f64 = 2e-3;
/// Slack of the battery bound `min observed slope ≥ C_grad`.
pub const BATTERY_TOL: f64 = 1e-6;

/// Optimizer and battery settings of the gap estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct GapOptions {
    pub seed: u64,
    pub starts: usize,
    pub max_iters: usize,
    /// Mean exponent of the smooth proxy for the max-displacement.
    pub proxy_r: f64,
    /// Exponents of the continuation polishing the proxy minimizers.
    pub polish_r: Vec<f64>,
    /// Random coboundary actions descended in an equivalence report.
    pub battery: usize,
    /// Largest domain dimension for the dense `p = 2` eigen-solutions.
    pub exact_limit: usize,
    pub descent: DescentOptions,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            starts: 32,
            max_iters: 10_000,
            proxy_r: 64.0,
            polish_r: vec![256.0, 1024.0],
            battery: 8,
            exact_limit: 1600,
            descent: DescentOptions::default(),
        }
    }
}

/// How the value of a constant is backed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Character diagonalization on a cyclic group.
    ExactFourier,
    /// Dense eigen-solution of the quadratic `p = 2` problem.
    ExactQuadratic,
    /// Multi-start local minimization only.
    Multistart,
}

/// Where a pooled candidate came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    /// Local minimization from a random start.
    Random,
    /// A tent, warm or exact vector, or a local minimization started there.
    Structured,
    /// An exact eigenvector or character.
    Exact,
    /// A point visited by a descent of the cocycle battery.
    Battery,
}

/// Estimate of one infimum.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Estimate {
    /// Smallest objective value over the pool.
    pub value: f64,
    /// Smallest value over minimizations from random starts alone.
    pub multistart: f64,
    /// The infimum in closed form, when one applies.
    pub exact: Option<f64>,
    pub method: Method,
    pub origin: Origin,
    /// Unit vector attaining `value`.
    pub certificate: Vec<f64>,
}

/// One verified inequality `lhs ≤ rhs + tolerance`.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChainCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub holds: bool,
}

impl ChainCheck {
    fn new(name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            tolerance,
            holds: lhs <= rhs + tolerance,
        }
    }
}

/// Descent on one random coboundary action `λ + df₀`.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BatteryEntry {
    pub index: usize,
    pub initial_energy: f64,
    pub terminal_energy: f64,
    pub reason: Termination,
    pub iterations: usize,
    /// `‖v_T + f₀‖_p`, the distance to the constructed fixed point `−f₀`.
    pub fixed_point_error: f64,
    /// Smallest `|∇₋F|` seen along the trajectory.
    pub min_gradient: f64,
}

/// Constants, certificates and verdicts for one representation.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GapReport {
    pub group: String,
    pub generators: Vec<String>,
    pub weights: Vec<f64>,
    pub p: f64,
    #[serde(with = "crate::io::exponent")]
    pub r: f64,
    pub domain: Domain,
    pub radius: Option<usize>,
    pub ball_size: usize,
    pub domain_dim: usize,
    pub min_weight: f64,
    pub c_disp: Estimate,
    pub c_r: Estimate,
    pub c_p: Estimate,
    pub c_grad: Estimate,
    pub c_lap: Estimate,
    /// `‖Δ_p f_R‖_q / ‖f_R‖_{D_p}^{p−1}` for the tent `f_R = max(0, 1 − |x|/R)`.
    pub tent_bound: Option<f64>,
    pub chain: Vec<ChainCheck>,
    /// Largest `| |∇₋F|(v) − 2‖Δ_p v‖_q/‖v‖_{D_p}^{p−1} |` over the pool.
    pub lap_grad_residual: f64,
    pub battery: Vec<BatteryEntry>,
    pub battery_min_gradient: Option<f64>,
    pub candidates: usize,
    pub options: GapOptions,
}

impl GapReport {
    pub fn chain_holds(&self) -> bool {
        self.chain.iter().all(|c| c.holds)
    }
}

/// `C_disp` and `C_r` with certificates.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DisplacementConstant {
    pub c_disp: Estimate,
    pub c_r: Estimate,
}

/// `C_lap` together with the cross-check against `C_grad / 2`.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LaplacianCheck {
    pub c_lap: Estimate,
    pub c_grad: Estimate,
    pub agreement: f64,
    pub holds: bool,
}

/// Fails with `FixedVectorPresent` when the domain contains a nonzero
/// invariant vector.
///
/// Invariant vectors of a connected Cayley graph are constant, so the domain
/// has one exactly when the domain part of the constant function is fixed.
pub fn check_fixed_vectors(rep: &Representation) -> Result<()> {
    let mut v = vec![1.0; rep.dim()];
    v[rep.support_len()..].iter_mut().for_each(|x| *x = 0.0);
    if rep.domain() == Domain::MeanZero {
        rep::mean_zero_in_place(&mut v);
    }
    if v.iter().all(|x| x.abs() < 1e-12) {
        return Ok(());
    }
    if rep.d_raw(&v).iter().flatten().all(|x| x.abs() < 1e-12) {
        return Err(Error::FixedVectorPresent);
    }
    Ok(())
}

/// Dimension of the domain as a vector space.
pub fn domain_dim(rep: &Representation) -> usize {
    match rep.domain() {
        Domain::MeanZero => rep.dim().saturating_sub(1),
        _ => rep.support_len(),
    }
}

/// The tent `max(0, 1 − |x|/R)` on a Dirichlet ball, supported at depth `≤ R − 1`.
pub fn tent_function(rep: &Representation) -> Option<Vec<f64>> {
    if rep.domain() != Domain::Dirichlet || rep.ball().radius() == 0 {
        return None;
    }
    let r = rep.ball().radius() as f64;
    Some(
        (0..rep.dim())
            .map(|i| (1.0 - rep.ball().depth(i) as f64 / r).max(0.0))
            .collect(),
    )
}

/// `‖Δ_p f‖_q / ‖f‖_{D_p}^{p−1}`; constants are not in the quotient by
/// constants and fail with `AtFixedPoint`.
pub fn laplacian_ratio(rep: &Representation, f: &LpVector) -> Result<f64> {
    let dp = energy::dp_norm(rep, f)?;
    if dp == 0.0 {
        return Err(Error::AtFixedPoint);
    }
    Ok(energy::p_laplacian(rep, f)?.norm() / dp.powf(rep.p() - 1.0))
}

// ---------------------------------------------------------------------------
// Local minimization of scale-invariant objectives.

#[derive(Clone, Copy, Debug, PartialEq)]
enum Target {
    /// `log F_r(v) − log ‖v‖_p`.
    Ratio(f64),
    /// `log ‖G(v)‖_q − (p − 1) log F_p(v)`.
    Gradient,
}

struct Kernel<'a> {
    rep: &'a Representation,
    p: f64,
    q: f64,
    m: usize,
    mean_zero: bool,
}

impl<'a> Kernel<'a> {
    fn new(rep: &'a Representation) -> Self {
        Self {
            rep,
            p: rep.p(),
            q: lp::conjugate(rep.p()),
            m: rep.support_len(),
            mean_zero: rep.domain() == Domain::MeanZero,
        }
    }

    fn project(&self, x: &mut [f64]) {
        x[self.m..].iter_mut().for_each(|v| *v = 0.0);
        if self.mean_zero {
            rep::mean_zero_in_place(x);
        }
    }

    /// Scales to unit `p`-norm; false for zero or non-finite input.
    fn normalize(&self, x: &mut [f64]) -> bool {
        let n = lp::norm(x, self.p);
        if !(n > 0.0 && n.is_finite()) {
            return false;
        }
        x.iter_mut().for_each(|v| *v /= n);
        true
    }

    /// `out += c · D_kᵀ w` on the domain coordinates.
    fn adjoint_add(&self, k: usize, w: &[f64], c: f64, out: &mut [f64]) {
        let t = self.rep.ball().translate(k);
        for i in 0..self.m {
            out[i] += c * (w[t[i]] - w[i]);
        }
    }

    fn eval(&self, target: Target, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let p = self.p;
        let weights = self.rep.weights();
        let d = self.rep.d_raw(x);
        let a: Vec<f64> = d.iter().map(|dk| lp::norm(dk, p)).collect();
        let mut g = vec![0.0; x.len()];
        let value = match target {
            Target::Ratio(r) => {
                let f = energy::weighted_mean(&a, weights, r);
                let nx = lp::norm(x, p);
                if !(f > 0.0 && nx > 0.0) {
                    return None;
                }
                for (k, dk) in d.iter().enumerate() {
                    if a[k] == 0.0 {
                        continue;
                    }
                    let c = weights[k] * (a[k] / f).powf(r - 1.0) / (f * a[k].powf(p - 1.0));
                    let phi: Vec<f64> = dk.iter().map(|y| lp::signed_power(*y, p)).collect();
                    self.adjoint_add(k, &phi, c, &mut g);
                }
                let cx = nx.powf(-p);
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi -= cx * lp::signed_power(*xi, p);
                }
                f.ln() - nx.ln()
            }
            Target::Gradient => {
                let f = energy::weighted_mean(&a, weights, p);
                let mut field = vec![0.0; x.len()];
                let phis: Vec<Vec<f64>> = d
                    .iter()
                    .map(|dk| dk.iter().map(|y| lp::signed_power(*y, p)).collect())
                    .collect();
                for (phi, m) in phis.iter().zip(weights) {
                    for (o, y) in field.iter_mut().zip(phi) {
                        *o += m * y;
                    }
                }
                let gq = lp::norm(&field, self.q);
                if !(f > 0.0 && gq > 0.0) {
                    return None;
                }
                let jq: Vec<f64> = field
                    .iter()
                    .map(|y| lp::signed_power(*y / gq, self.q) / gq)
                    .collect();
                for (k, dk) in d.iter().enumerate() {
                    let w: Vec<f64> = dk
                        .iter()
                        .zip(&jq)
                        .map(|(y, j)| if *y == 0.0 { 0.0 } else { (p - 1.0) * y.abs().powf(p - 2.0) * j })
                        .collect();
                    self.adjoint_add(k, &w, weights[k], &mut g);
                    self.adjoint_add(k, &phis[k], -(p - 1.0) * weights[k] / f.powf(p), &mut g);
                }
                gq.ln() - (p - 1.0) * f.ln()
            }
        };
        self.project(&mut g);
        if !value.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((value, g))
    }

    /// Projected gradient descent on the sphere with Barzilai–Borwein steps
    /// and Armijo backtracking.
    fn minimize(&self, target: Target, x0: &[f64], max_iters: usize) -> Option<Vec<f64>> {
        let mut x = x0.to_vec();
        self.project(&mut x);
        if !self.normalize(&mut x) {
            return None;
        }
        let (mut f, mut g) = self.eval(target, &x)?;
        let mut alpha = 0.1 / lp::norm(&g, 2.0).max(1e-300);
        let mut quiet = 0;
        for _ in 0..max_iters {
            let gn2 = lp::dot(&g, &g);
            if gn2.sqrt() < 1e-14 {
                break;
            }
            let mut t = alpha;
            let mut next = None;
            for _ in 0..40 {
                let mut y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - t * b).collect();
                if self.normalize(&mut y) {
                    if let Some((fy, gy)) = self.eval(target, &y) {
                        if fy <= f - 1e-4 * t * gn2 {
                            next = Some((y, fy, gy));
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            let Some((y, fy, gy)) = next else { break };
            let s: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let dg: Vec<f64> = gy.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = lp::dot(&s, &dg);
            alpha = if sy > 0.0 { (lp::dot(&s, &s) / sy).clamp(1e-10, 1e10) } else { 4.0 * t };
            quiet = if f - fy < 1e-14 { quiet + 1 } else { 0 };
            x = y;
            f = fy;
            g = gy;
            if quiet >= 20 {
                break;
            }
        }
        Some(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Run {
    Ratio(f64),
    /// Proxy mean exponent followed by the polishing continuation.
    Disp,
    Gradient,
}

// ---------------------------------------------------------------------------
// Exact p = 2 solutions.

#[derive(Default)]
struct Exact {
    method: Option<Method>,
    c_disp: Option<f64>,
    c_r: Option<f64>,
    c_p: Option<f64>,
    c_grad: Option<f64>,
    c_lap: Option<f64>,
    candidates: Vec<Vec<f64>>,
}

fn exact_solutions(rep: &Representation, r: f64, options: &GapOptions) -> Result<Exact> {
    if rep.p() != 2.0 {
        return Ok(Exact::default());
    }
    if let (Family::Cyclic(n), Domain::MeanZero) = (rep.group().family(), rep.domain()) {
        return Ok(fourier(rep, *n, r));
    }
    if domain_dim(rep) == 0 || domain_dim(rep) > options.exact_limit {
        return Ok(Exact::default());
    }
    quadratic(rep, r)
}

/// Characters of `ℤ/n`: mode `j` displaces by `|1 − ω^{j g}|` under `s^g`.
fn fourier(rep: &Representation, n: usize, r: f64) -> Exact {
    let weights = rep.weights();
    let shifts: Vec<f64> = rep.group().generators().iter().map(|g| g.key()[0] as f64).collect();
    let nf = n as f64;
    let mode_norms = |j: usize| -> Vec<f64> {
        shifts
            .iter()
            .map(|g| 2.0 * (std::f64::consts::PI * j as f64 * g / nf).sin().abs())
            .collect()
    };
    // With equal norms on every mode, every vector displaces all generators
    // equally and every mean coincides.
    let equal = (1..n).all(|j| {
        let a = mode_norms(j);
        a.iter().all(|x| (x - a[0]).abs() <= 1e-14)
    });
    let min_mean = |r: f64| -> Option<f64> {
        if r <= 2.0 || equal {
            (1..n)
                .map(|j| energy::weighted_mean(&mode_norms(j), weights, r))
                .reduce(f64::min)
        } else {
            None
        }
    };
    let mu = (1..n)
        .map(|j| {
            shifts
                .iter()
                .zip(weights)
                .map(|(g, m)| m * (1.0 - (2.0 * std::f64::consts::PI * j as f64 * g / nf).cos()))
                .sum::<f64>()
        })
        .reduce(f64::min);
    let c_grad = mu.map(|m| (2.0 * m).sqrt());
    let mut candidates = Vec::new();
    for j in 1..=n / 2 {
        let phase = |i: usize| 2.0 * std::f64::consts::PI * j as f64 * rep.ball().element(i).key()[0] as f64 / nf;
        candidates.push((0..rep.dim()).map(|i| phase(i).cos()).collect());
        candidates.push((0..rep.dim()).map(|i| phase(i).sin()).collect());
    }
    Exact {
        method: Some(Method::ExactFourier),
        c_disp: min_mean(f64::INFINITY),
        c_r: min_mean(r),
        c_p: min_mean(2.0),
        c_grad,
        c_lap: c_grad.map(|c| c / 2.0),
        candidates,
    }
}

/// Orthonormal basis of the zero-sum subspace of `ℝⁿ` (Helmert columns).
fn helmert(n: usize) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(n, n - 1);
    for j in 1..n {
        let s = ((j * (j + 1)) as f64).sqrt();
        for i in 0..j {
            u[(i, j - 1)] = 1.0 / s;
        }
        u[(j, j - 1)] = -(j as f64) / s;
    }
    u
}

/// `F_2(v)² = vᵀQv` and `Δ₂ = A`; `C_2² = λ_min(Q)` and `C_lap² = λ_min(AᵀA, Q)`.
fn quadratic(rep: &Representation, r: f64) -> Result<Exact> {
    let n = rep.dim();
    let m = rep.support_len();
    let weights = rep.weights();
    let mut q = DMatrix::<f64>::zeros(m, m);
    // Rows of A = Σ m_k (T_k − I) on the domain columns, as sparse lists.
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (k, w) in weights.iter().enumerate() {
        let t = rep.ball().translate(k);
        for i in 0..m {
            q[(i, i)] += 2.0 * w;
            if t[i] < m {
                q[(t[i], i)] -= w;
                q[(i, t[i])] -= w;
            }
            rows[t[i]].push((i, *w));
            rows[i].push((i, -w));
        }
    }
    let mut ata = DMatrix::<f64>::zeros(m, m);
    for row in &rows {
        for &(a, x) in row {
            for &(b, y) in row {
                ata[(a, b)] += x * y;
            }
        }
    }
    let basis = (rep.domain() == Domain::MeanZero).then(|| helmert(n));
    let (q, ata) = match &basis {
        Some(u) => (u.transpose() * &q * u, u.transpose() * &ata * u),
        None => (q, ata),
    };
    let lift = |y: &DVector<f64>| -> Vec<f64> {
        let mut v = vec![0.0; n];
        match &basis {
            Some(u) => v.copy_from_slice((u * y).as_slice()),
            None => v[..m].copy_from_slice(y.as_slice()),
        }
        v
    };

    let eig = q.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let lambda_min = eig.eigenvalues[order[0]].max(0.0);
    let mut candidates: Vec<Vec<f64>> = order
        .iter()
        .take(3)
        .map(|&i| lift(&eig.eigenvectors.column(i).into_owned()))
        .collect();

    let chol = nalgebra::Cholesky::new(q).ok_or(Error::FixedVectorPresent)?;
    let l = chol.l();
    let half = l
        .solve_lower_triangular(&ata)
        .ok_or_else(|| Error::Parse("singular Cholesky factor".into()))?;
    let h = l
        .solve_lower_triangular(&half.transpose())
        .ok_or_else(|| Error::Parse("singular Cholesky factor".into()))?;
    let h = (&h + h.transpose()) * 0.5;
    let geig = h.symmetric_eigen();
    let mut gorder: Vec<usize> = (0..geig.eigenvalues.len()).collect();
    gorder.sort_by(|a, b| geig.eigenvalues[*a].total_cmp(&geig.eigenvalues[*b]));
    let mu_min = geig.eigenvalues[gorder[0]].max(0.0);
    let lt = l.transpose();
    for &i in gorder.iter().take(3) {
        let z = geig.eigenvectors.column(i).into_owned();
        if let Some(y) = lt.solve_upper_triangular(&z) {
            candidates.push(lift(&y));
        }
    }
    let c2 = lambda_min.sqrt();
    let c_lap = mu_min.sqrt();
    Ok(Exact {
        method: Some(Method::ExactQuadratic),
        c_disp: None,
        c_r: (r == 2.0).then_some(c2),
        c_p: Some(c2),
        c_grad: Some(2.0 * c_lap),
        c_lap: Some(c_lap),
        candidates,
    })
}

// ---------------------------------------------------------------------------
// The candidate pool.

struct Candidate {
    values: Vec<f64>,
    origin: Origin,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Measure {
    Ratio(f64),
    Gradient,
    Laplacian,
}

struct Pool<'a> {
    rep: &'a Representation,
    kernel: Kernel<'a>,
    linear: AffineAction,
    candidates: Vec<Candidate>,
}

impl<'a> Pool<'a> {
    fn new(rep: &'a Representation) -> Self {
        Self {
            rep,
            kernel: Kernel::new(rep),
            linear: AffineAction::linear(rep.clone()),
            candidates: Vec::new(),
        }
    }

    fn push(&mut self, mut values: Vec<f64>, origin: Origin) {
        if values.len() != self.rep.dim() {
            return;
        }
        self.kernel.project(&mut values);
        if self.kernel.normalize(&mut values) {
            self.candidates.push(Candidate { values, origin });
        }
    }

    fn random_starts(&self, options: &GapOptions) -> Vec<Vec<f64>> {
        (0..options.starts)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
                rng.set_stream(s as u64);
                let mut x: Vec<f64> = (0..self.rep.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
                self.kernel.project(&mut x);
                x
            })
            .collect()
    }

    /// Local minimizations of every run from every start, in parallel with
    /// results collected in job order.
    fn optimize(&mut self, runs: &[Run], starts: &[(Vec<f64>, Origin)], options: &GapOptions) {
        let jobs: Vec<(Run, usize)> = runs
            .iter()
            .flat_map(|run| (0..starts.len()).map(move |s| (*run, s)))
            .collect();
        let kernel = &self.kernel;
        let results: Vec<Option<(Vec<f64>, Origin)>> = jobs
            .par_iter()
            .map(|(run, s)| {
                let (x0, origin) = &starts[*s];
                let x = match run {
                    Run::Ratio(r) => kernel.minimize(Target::Ratio(*r), x0, options.max_iters)?,
                    Run::Gradient => kernel.minimize(Target::Gradient, x0, options.max_iters)?,
                    Run::Disp => {
                        let mut x = kernel.minimize(Target::Ratio(options.proxy_r), x0, options.max_iters)?;
                        for r in &options.polish_r {
                            x = kernel.minimize(Target::Ratio(*r), &x, options.max_iters)?;
                        }
                        x
                    }
                };
                let origin = if *origin == Origin::Random { Origin::Random } else { Origin::Structured };
                Some((x, origin))
            })
            .collect();
        for (x, origin) in results.into_iter().flatten() {
            self.push(x, origin);
        }
    }

    fn measure(&self, what: Measure, v: &[f64]) -> Option<f64> {
        let v = LpVector::new(self.rep.p(), v.to_vec()).ok()?;
        let value = match what {
            Measure::Ratio(r) => {
                let params = EnergyParams::new(self.rep.p(), r).ok()?;
                energy::energy(&self.linear, params, &v).ok()? / v.norm()
            }
            Measure::Gradient => absgrad::absgrad_closed(&self.linear, &v).ok()?.value,
            Measure::Laplacian => laplacian_ratio(self.rep, &v).ok()?,
        };
        value.is_finite().then_some(value)
    }

    fn evaluate(&self, what: Measure) -> Vec<Option<f64>> {
        self.candidates.par_iter().map(|c| self.measure(what, &c.values)).collect()
    }

    fn estimate(&self, values: &[Option<f64>], exact: Option<f64>, method: Option<Method>) -> Result<Estimate> {
        let best = |filter: &dyn Fn(&Candidate) -> bool| -> Option<(usize, f64)> {
            let mut best: Option<(usize, f64)> = None;
            for (i, (c, v)) in self.candidates.iter().zip(values).enumerate() {
                if let (true, Some(v)) = (filter(c), v) {
                    if best.is_none_or(|(_, b)| *v < b) {
                        best = Some((i, *v));
                    }
                }
            }
            best
        };
        let (i, value) = best(&|_| true).ok_or_else(|| Error::InvalidSpec("the domain is {0}".into()))?;
        let multistart = best(&|c| c.origin == Origin::Random).map_or(f64::NAN, |(_, v)| v);
        Ok(Estimate {
            value,
            multistart,
            exact,
            method: if exact.is_some() { method.unwrap_or(Method::Multistart) } else { Method::Multistart },
            origin: self.candidates[i].origin,
            certificate: self.candidates[i].values.clone(),
        })
    }
}

fn validate(rep: &Representation, r: f64) -> Result<()> {
    EnergyParams::new(rep.p(), r)?;
    absgrad::require_symmetric(rep)?;
    check_fixed_vectors(rep)?;
    if domain_dim(rep) == 0 {
        return Err(Error::InvalidSpec("the domain is {0}".into()));
    }
    Ok(())
}

/// Pool seeded with structured vectors and optimized by `runs`.
fn seeded_pool<'a>(
    rep: &'a Representation,
    runs: &[Run],
    exact: &Exact,
    warm: &[Vec<f64>],
    options: &GapOptions,
) -> Pool<'a> {
    let mut pool = Pool::new(rep);
    let mut starts: Vec<(Vec<f64>, Origin)> = pool
        .random_starts(options)
        .into_iter()
        .map(|x| (x, Origin::Random))
        .collect();
    let mut structured: Vec<Vec<f64>> = Vec::new();
    structured.extend(tent_function(rep));
    structured.extend(warm.iter().cloned());
    for x in &structured {
        pool.push(x.clone(), Origin::Structured);
        starts.push((x.clone(), Origin::Structured));
    }
    for x in &exact.candidates {
        pool.push(x.clone(), Origin::Exact);
        starts.push((x.clone(), Origin::Exact));
    }
    pool.optimize(runs, &starts, options);
    pool
}

fn runs_for(rep: &Representation, r: f64, options: &GapOptions) -> Vec<Run> {
    let mut runs = vec![Run::Disp, Run::Gradient];
    let mut ratio = |x: f64| {
        let covered = x.is_infinite() || x == options.proxy_r || options.polish_r.contains(&x);
        if !covered && !runs.contains(&Run::Ratio(x)) {
            runs.push(Run::Ratio(x));
        }
    };
    ratio(r);
    ratio(rep.p());
    runs
}

/// `C_disp` and `C_r` by multi-start minimization (exact on cyclic groups at `p = 2`).
pub fn displacement_constant(rep: &Representation, r: f64, options: &GapOptions) -> Result<DisplacementConstant> {
    validate(rep, r)?;
    let exact = exact_solutions(rep, r, options)?;
    let mut runs = vec![Run::Disp];
    if r.is_finite() {
        runs.push(Run::Ratio(r));
    }
    let pool = seeded_pool(rep, &runs, &exact, &[], options);
    let disp = pool.evaluate(Measure::Ratio(f64::INFINITY));
    let ratio = pool.evaluate(Measure::Ratio(r));
    Ok(DisplacementConstant {
        c_disp: pool.estimate(&disp, exact.c_disp, exact.method)?,
        c_r: pool.estimate(&ratio, exact.c_r, exact.method)?,
    })
}

/// `C_grad` by multi-start minimization of the closed-form gradient.
pub fn grad_inf_constant(rep: &Representation, options: &GapOptions) -> Result<Estimate> {
    validate(rep, rep.p())?;
    let exact = exact_solutions(rep, rep.p(), options)?;
    let pool = seeded_pool(rep, &[Run::Gradient], &exact, &[], options);
    pool.estimate(&pool.evaluate(Measure::Gradient), exact.c_grad, exact.method)
}

/// `C_lap` over the pool, cross-checked against `C_grad / 2`.
pub fn laplacian_inequality_check(rep: &Representation, options: &GapOptions) -> Result<LaplacianCheck> {
    validate(rep, rep.p())?;
    let exact = exact_solutions(rep, rep.p(), options)?;
    let pool = seeded_pool(rep, &[Run::Gradient], &exact, &[], options);
    let c_lap = pool.estimate(&pool.evaluate(Measure::Laplacian), exact.c_lap, exact.method)?;
    let c_grad = pool.estimate(&pool.evaluate(Measure::Gradient), exact.c_grad, exact.method)?;
    let agreement = (c_lap.value - c_grad.value / 2.0).abs();
    Ok(LaplacianCheck {
        holds: agreement <= LAP_GRAD_TOL,
        c_lap,
        c_grad,
        agreement,
    })
}

/// Descends random coboundary actions and records the points where the
/// gradient was smallest.
fn run_battery(rep: &Representation, options: &GapOptions, pool: &mut Pool<'_>) -> Result<Vec<BatteryEntry>> {
    let kernel = Kernel::new(rep);
    let mut entries = Vec::with_capacity(options.battery);
    for b in 0..options.battery {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x9e37_79b9_7f4a_7c15);
        rng.set_stream(b as u64);
        let mut f0: Vec<f64> = (0..rep.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        kernel.project(&mut f0);
        kernel.normalize(&mut f0);
        let f0 = LpVector::new(rep.p(), f0)?;
        let alpha = AffineAction::coboundary(rep.clone(), &f0)?;
        let mut best: Option<(f64, Vec<f64>)> = None;
        let trace = absgrad::descend_observed(&alpha, &rep.zeros(), &options.descent, &mut |v, g| {
            if best.as_ref().is_none_or(|(b, _)| g.value < *b) {
                let w: Vec<f64> = v.values().iter().zip(f0.values()).map(|(a, b)| a + b).collect();
                best = Some((g.value, w));
            }
        })?;
        let mut err: Vec<f64> = trace
            .terminal
            .values()
            .iter()
            .zip(f0.values())
            .map(|(a, b)| a + b)
            .collect();
        kernel.project(&mut err);
        let min_gradient = best.as_ref().map_or(f64::NAN, |(g, _)| *g);
        if let Some((_, w)) = best {
            pool.push(w, Origin::Battery);
        }
        entries.push(BatteryEntry {
            index: b,
            initial_energy: trace.initial_energy,
            terminal_energy: trace.terminal_energy,
            reason: trace.reason,
            iterations: trace.rows.len().saturating_sub(1),
            fixed_point_error: lp::norm(&err, rep.p()),
            min_gradient,
        });
    }
    Ok(entries)
}

/// All constants, the chain of inequalities between them and the
/// fixed-point battery for one representation.
pub fn equivalence_report(rep: &Representation, r: f64, options: &GapOptions) -> Result<GapReport> {
    equivalence_report_warm(rep, r, options, &[])
}

/// [`equivalence_report`] with extra start vectors, which also join the pool.
pub fn equivalence_report_warm(rep: &Representation, r: f64, options: &GapOptions, warm: &[Vec<f64>]) -> Result<GapReport> {
    validate(rep, r)?;
    let p = rep.p();
    let exact = exact_solutions(rep, r, options)?;
    let runs = runs_for(rep, r, options);
    let mut pool = seeded_pool(rep, &runs, &exact, warm, options);
    let battery = run_battery(rep, options, &mut pool)?;

    let disp_vals = pool.evaluate(Measure::Ratio(f64::INFINITY));
    let r_vals = pool.evaluate(Measure::Ratio(r));
    let p_vals = pool.evaluate(Measure::Ratio(p));
    let grad_vals = pool.evaluate(Measure::Gradient);
    let lap_vals = pool.evaluate(Measure::Laplacian);
    let c_disp = pool.estimate(&disp_vals, exact.c_disp, exact.method)?;
    let c_r = pool.estimate(&r_vals, exact.c_r, exact.method)?;
    let c_p = pool.estimate(&p_vals, exact.c_p, exact.method)?;
    let c_grad = pool.estimate(&grad_vals, exact.c_grad, exact.method)?;
    let c_lap = pool.estimate(&lap_vals, exact.c_lap, exact.method)?;
    let lap_grad_residual = grad_vals
        .iter()
        .zip(&lap_vals)
        .filter_map(|(g, l)| Some((g.as_ref()? - 2.0 * l.as_ref()?).abs()))
        .fold(0.0, f64::max);
    let tent_bound = tent_function(rep).and_then(|t| laplacian_ratio(rep, &LpVector::new(p, t).ok()?).ok());

    let m_min = rep.group().min_weight();
    let sandwich = if r.is_infinite() { 1.0 } else { m_min.powf(1.0 / r) };
    let mut chain = vec![
        ChainCheck::new("m_min^(1/r) C_disp <= C_r", sandwich * c_disp.value, c_r.value, CHAIN_TOL),
        ChainCheck::new("C_r <= C_disp", c_r.value, c_disp.value, CHAIN_TOL),
        ChainCheck::new("C_p <= C_grad", c_p.value, c_grad.value, CHAIN_TOL),
        ChainCheck::new("|C_lap - C_grad/2| <= tol", (c_lap.value - c_grad.value / 2.0).abs(), 0.0, LAP_GRAD_TOL),
        ChainCheck::new("C_grad <= 2", c_grad.value, 2.0, 1e-12),
    ];
    for (name, e) in [("C_disp", &c_disp), ("C_r", &c_r), ("C_p", &c_p), ("C_grad", &c_grad), ("C_lap", &c_lap)] {
        if let Some(x) = e.exact {
            chain.push(ChainCheck::new(&format!("{name} matches closed form"), (e.value - x).abs(), 0.0, 1e-6));
        }
    }
    let battery_min_gradient = battery.iter().map(|b| b.min_gradient).filter(|g| g.is_finite()).reduce(f64::min);
    if let Some(g) = battery_min_gradient {
        chain.push(ChainCheck::new("C_grad <= battery min gradient", c_grad.value, g, BATTERY_TOL));
    }

    Ok(GapReport {
        group: rep.group().name(),
        generators: rep.group().generator_labels().to_vec(),
        weights: rep.weights().to_vec(),
        p,
        r,
        domain: rep.domain(),
        radius: (rep.domain() == Domain::Dirichlet).then(|| rep.ball().radius()),
        ball_size: rep.dim(),
        domain_dim: domain_dim(rep),
        min_weight: m_min,
        c_disp,
        c_r,
        c_p,
        c_grad,
        c_lap,
        tent_bound,
        chain,
        lap_grad_residual,
        battery,
        battery_min_gradient,
        candidates: pool.candidates.len(),
        options: options.clone(),
    })
}

/// Reports for increasing radii; certificates of each radius seed the next.
///
/// Radii are processed in increasing order. Dirichlet domains grow with the
/// radius, so each estimate is a minimum over a superset of the previous
/// pool and the constants are nonincreasing.
pub fn gap_sweep(
    group: &GroupHandle,
    p: f64,
    r: f64,
    domain: Domain,
    radii: &[usize],
    options: &GapOptions,
) -> Result<Vec<GapReport>> {
    let mut radii = radii.to_vec();
    radii.sort_unstable();
    radii.dedup();
    let mut reports: Vec<GapReport> = Vec::new();
    let mut previous: Option<Representation> = None;
    for radius in radii {
        let rep = Representation::regular(group.clone(), p, domain, radius)?;
        let warm: Vec<Vec<f64>> = match (&previous, reports.last()) {
            (Some(old), Some(last)) => [&last.c_disp, &last.c_r, &last.c_p, &last.c_grad, &last.c_lap]
                .iter()
                .map(|e| {
                    let mut v = vec![0.0; rep.dim()];
                    for (i, x) in e.certificate.iter().enumerate() {
                        if let Some(j) = rep.ball().index_of(old.ball().element(i)) {
                            v[j] = *x;
                        }
                    }
                    v
                })
                .collect(),
            _ => Vec::new(),
        };
        reports.push(equivalence_report_warm(&rep, r, options, &warm)?);
        previous = Some(rep);
    }
    Ok(reports)
}

/// Nonincreasing-in-`R` verdicts for every constant of a sweep.
pub fn sweep_monotonicity(reports: &[GapReport]) -> Vec<ChainCheck> {
    let mut checks = Vec::new();
    for pair in reports.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let label = |name: &str| format!("{name}(R={}) <= {name}(R={})", b.radius.unwrap_or(0), a.radius.unwrap_or(0));
        for (name, x, y) in [
            ("C_disp", a.c_disp.value, b.c_disp.value),
            ("C_r", a.c_r.value, b.c_r.value),
            ("C_grad", a.c_grad.value, b.c_grad.value),
            ("C_lap", a.c_lap.value, b.c_lap.value),
        ] {
            checks.push(ChainCheck::new(&label(name), y, x, CHAIN_TOL));
        }
    }
    checks
}

/// Sweep table rows.
pub fn sweep_rows(reports: &[GapReport]) -> Vec<crate::io::SweepRow> {
    reports
        .iter()
        .map(|r| crate::io::SweepRow {
            radius: r.radius.unwrap_or(0),
            c_disp: r.c_disp.value,
            c_r: r.c_r.value,
            c_grad: r.c_grad.value,
            c_lap: r.c_lap.value,
        })
        .collect()
}
