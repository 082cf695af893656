//! Real ℓ^p vectors on a ball: norms, dual norms, duality maps and norming
//! vectors.

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on `q = p/(p−1)` when pairing a primal and a dual vector.
pub const CONJUGATE_TOL: f64 = 1e-14;

/// Conjugate exponent `p/(p−1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Accepts `p ∈ (1, ∞)`.
pub fn check_exponent(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::BadExponent(p))
    }
}

/// ℓ^r norm of a slice for any `r ∈ [1, ∞]`, rescaled by the largest entry
/// so large exponents do not overflow.
pub fn norm(values: &[f64], r: f64) -> f64 {
    let scale = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    if r.is_infinite() {
        return scale;
    }
    if r == 2.0 {
        return scale * values.iter().map(|x| (x / scale) * (x / scale)).sum::<f64>().sqrt();
    }
    if r == 1.0 {
        return values.iter().map(|x| x.abs()).sum();
    }
    scale * values.iter().map(|x| (x.abs() / scale).powf(r)).sum::<f64>().powf(1.0 / r)
}

/// `|x|^{p−2} x`, extended by 0 at the origin.
#[inline]
pub fn signed_power(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if p == 2.0 {
        x
    } else {
        x.abs().powf(p - 1.0).copysign(x)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A real function on a ball, viewed in ℓ^p.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpVector {
    p: f64,
    values: Vec<f64>,
}

/// A functional on ℓ^p represented in ℓ^q, `q = p/(p−1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualVector {
    q: f64,
    values: Vec<f64>,
}

impl LpVector {
    pub fn new(p: f64, values: Vec<f64>) -> Result<Self> {
        check_exponent(p)?;
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Parse(format!("non-finite entry at index {i}")));
        }
        Ok(Self { p, values })
    }

    pub fn zeros(p: f64, len: usize) -> Result<Self> {
        Self::new(p, vec![0.0; len])
    }

    /// Indicator of index `i`.
    pub fn delta(p: f64, len: usize, i: usize) -> Result<Self> {
        let mut values = vec![0.0; len];
        values[i] = 1.0;
        Self::new(p, values)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values, self.p)
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            p: self.p,
            values: self.values.iter().map(|x| t * x).collect(),
        }
    }

    /// `self + t·other`.
    pub fn axpy(&self, t: f64, other: &LpVector) -> Result<Self> {
        same_len(self.len(), other.len())?;
        Ok(Self {
            p: self.p,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + t * b).collect(),
        })
    }
}

impl DualVector {
    pub fn new(q: f64, values: Vec<f64>) -> Result<Self> {
        check_exponent(q)?;
        Ok(Self { q, values })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Primal exponent this functional pairs with.
    pub fn p(&self) -> f64 {
        conjugate(self.q)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values, self.q)
    }

    /// Evaluates the functional on `f`.
    pub fn pair(&self, f: &LpVector) -> Result<f64> {
        same_len(self.len(), f.len())?;
        let q = conjugate(f.p);
        if (q - self.q).abs() > CONJUGATE_TOL * q.max(1.0) {
            return Err(Error::BadExponent(self.q));
        }
        Ok(dot(&self.values, &f.values))
    }
}

fn same_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub fn norm_p(f: &LpVector) -> f64 {
    f.norm()
}

pub fn dual_norm_q(g: &DualVector) -> f64 {
    g.norm()
}

/// Support functional `|f|^{p−2} f / ‖f‖_p^{p−1}`; zero for `f = 0`.
pub fn duality_map(f: &LpVector) -> DualVector {
    DualVector {
        q: conjugate(f.p),
        values: duality_values(&f.values, f.p),
    }
}

pub(crate) fn duality_values(values: &[f64], p: f64) -> Vec<f64> {
    let n = norm(values, p);
    if n == 0.0 {
        return vec![0.0; values.len()];
    }
    // Normalize first: j(f) = j(f/‖f‖).
    values.iter().map(|x| signed_power(x / n, p)).collect()
}

/// Unit vector `u*` with `⟨g, u*⟩ = ‖g‖_q`, namely `|g|^{q−2} g / ‖g‖_q^{q−1}`.
pub fn norming_vector(g: &DualVector) -> Result<LpVector> {
    if g.values.iter().all(|x| *x == 0.0) {
        return Err(Error::ZeroFunctional);
    }
    Ok(LpVector {
        p: conjugate(g.q),
        values: duality_values(&g.values, g.q),
    })
}
