//! Displacement energies, `Z¹` norms, the Dirichlet norm on `D_p`, the
//! p-Laplacian and the field `G_{α,p}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{self, DualVector, LpVector};
use crate::rep::{AffineAction, Cocycle, Representation};

/// Exponents of an energy evaluation: ambient `p ∈ (1, ∞)` and mean
/// exponent `r ∈ [1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyParams {
    pub p: f64,
    pub r: f64,
}

impl EnergyParams {
    pub fn new(p: f64, r: f64) -> Result<Self> {
        lp::check_exponent(p)?;
        if r.is_nan() || r < 1.0 {
            return Err(Error::BadExponent(r));
        }
        Ok(Self { p, r })
    }

    /// `r = p`, the setting of the closed-form gradient.
    pub fn matched(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    pub fn for_rep(rep: &Representation, r: f64) -> Result<Self> {
        Self::new(rep.p(), r)
    }
}

/// `(Σ m_k x_k^r)^{1/r}`, or `max_k x_k` for `r = ∞`.
pub fn weighted_mean(values: &[f64], weights: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        return values.iter().cloned().fold(0.0, f64::max);
    }
    let scale = values.iter().cloned().fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    if r == 1.0 {
        return values.iter().zip(weights).map(|(x, m)| m * x).sum();
    }
    let s: f64 = values.iter().zip(weights).map(|(x, m)| m * (x / scale).powf(r)).sum();
    scale * s.powf(1.0 / r)
}

fn check_vector(rep: &Representation, v: &LpVector) -> Result<()> {
    rep.check_admissible(v.values())
}

/// `‖Dv(γ)‖_p` for every generator, `Dv(γ) = α(γ)v − v`.
pub fn displacement_norms(alpha: &AffineAction, p: f64, v: &LpVector) -> Result<Vec<f64>> {
    check_vector(alpha.rep(), v)?;
    Ok(alpha.displacement_raw(v.values()).iter().map(|d| lp::norm(d, p)).collect())
}

/// `F_{α,r}(v) = ‖dv + c‖_r`.
pub fn energy(alpha: &AffineAction, params: EnergyParams, v: &LpVector) -> Result<f64> {
    let norms = displacement_norms(alpha, params.p, v)?;
    Ok(weighted_mean(&norms, alpha.rep().weights(), params.r))
}

/// `‖c‖_r = (Σ ‖c(γ)‖_p^r m(γ))^{1/r}`.
pub fn z1_norm(c: &Cocycle, weights: &[f64], params: EnergyParams) -> f64 {
    let norms: Vec<f64> = c.values().iter().map(|x| lp::norm(x, params.p)).collect();
    weighted_mean(&norms, weights, params.r)
}

/// `‖f‖_{D_p} = (Σ ‖df(γ)‖_p^p m(γ))^{1/p}`.
pub fn dp_norm(rep: &Representation, f: &LpVector) -> Result<f64> {
    let df = rep.d(f)?;
    Ok(z1_norm(&df, rep.weights(), EnergyParams::matched(rep.p())?))
}

fn pointwise_field(fields: &[Vec<f64>], weights: &[f64], p: f64) -> Vec<f64> {
    let n = fields.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (d, m) in fields.iter().zip(weights) {
        for (o, x) in out.iter_mut().zip(d) {
            *o += m * lp::signed_power(*x, p);
        }
    }
    out
}

/// `Δ_p f(x) = Σ_γ |df(γ)(x)|^{p−2} df(γ)(x) m(γ)`.
pub fn p_laplacian(rep: &Representation, f: &LpVector) -> Result<DualVector> {
    check_vector(rep, f)?;
    let df = rep.d_raw(f.values());
    DualVector::new(lp::conjugate(rep.p()), pointwise_field(&df, rep.weights(), rep.p()))
}

/// `G_{α,p}(f)(x) = Σ_γ |α(γ)f(x) − f(x)|^{p−2} (α(γ)f(x) − f(x)) m(γ)`.
pub fn g_field(alpha: &AffineAction, f: &LpVector) -> Result<DualVector> {
    let rep = alpha.rep();
    check_vector(rep, f)?;
    let disp = alpha.displacement_raw(f.values());
    DualVector::new(lp::conjugate(rep.p()), pointwise_field(&disp, rep.weights(), rep.p()))
}
