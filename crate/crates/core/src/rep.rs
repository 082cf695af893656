//! The left regular representation on ball truncations, cocycles,
//! coboundaries, affine actions and first-cohomology dimensions.
//!
//! `λ(γ)f(x) = f(γ⁻¹x)`, so on ball indices `λ(γ_k)` moves the value at `i`
//! to `translate(k)[i]`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{self, CayleyBall, Element, GroupHandle, OUTSIDE};
use crate::lp::{self, LpVector};

/// Singular values below `RANK_TOL · σ_max` count as zero.
const RANK_TOL: f64 = 1e-9;

/// Which vectors a representation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// All functions on a finite group.
    Full,
    /// Zero-sum functions on a finite group (the complement of constants).
    MeanZero,
    /// Functions supported at depth at most `R − 1` of an `R`-ball.
    Dirichlet,
}

impl Domain {
    pub fn is_full(self) -> bool {
        matches!(self, Domain::Full | Domain::MeanZero)
    }
}

/// `λ` restricted to a ball, with its domain convention and exponent.
#[derive(Clone, Debug)]
pub struct Representation {
    group: Arc<GroupHandle>,
    ball: Arc<CayleyBall>,
    p: f64,
    domain: Domain,
}

impl Representation {
    pub fn new(group: Arc<GroupHandle>, ball: Arc<CayleyBall>, p: f64, domain: Domain) -> Result<Self> {
        lp::check_exponent(p)?;
        if ball.generator_count() != group.len() {
            return Err(Error::DimensionMismatch {
                expected: group.len(),
                got: ball.generator_count(),
            });
        }
        if domain.is_full() {
            if !group.is_finite() {
                return Err(Error::InfiniteGroup);
            }
            if !ball.is_saturated() {
                return Err(Error::InvalidSpec(format!(
                    "{} elements reached, but the group has order {}; K does not generate",
                    ball.len(),
                    group.order().unwrap_or(0)
                )));
            }
        }
        Ok(Self { group, ball, p, domain })
    }

    /// Regular representation on the whole group (finite) or on `B_R`
    /// with the Dirichlet convention (infinite).
    pub fn regular(group: GroupHandle, p: f64, domain: Domain, radius: usize) -> Result<Self> {
        let ball = if domain.is_full() {
            group::full_group(&group)?
        } else {
            group::ball(&group, radius)?
        };
        Self::new(Arc::new(group), Arc::new(ball), p, domain)
    }

    pub fn group(&self) -> &GroupHandle {
        &self.group
    }

    pub fn group_arc(&self) -> Arc<GroupHandle> {
        self.group.clone()
    }

    pub fn ball(&self) -> &CayleyBall {
        &self.ball
    }

    pub fn ball_arc(&self) -> Arc<CayleyBall> {
        self.ball.clone()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Same ball and domain with another exponent.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        lp::check_exponent(p)?;
        Ok(Self { p, ..self.clone() })
    }

    pub fn with_domain(&self, domain: Domain) -> Result<Self> {
        Self::new(self.group.clone(), self.ball.clone(), self.p, domain)
    }

    /// Number of ball indices (the length of every vector).
    pub fn dim(&self) -> usize {
        self.ball.len()
    }

    /// Length of the index prefix vectors in the domain may be supported on.
    pub fn support_len(&self) -> usize {
        match self.domain {
            Domain::Dirichlet => self.ball.inner_len(),
            _ => self.ball.len(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        self.group.weights()
    }

    pub fn generator_count(&self) -> usize {
        self.group.len()
    }

    pub fn zeros(&self) -> LpVector {
        LpVector::new(self.p, vec![0.0; self.dim()]).expect("exponent validated")
    }

    pub fn vector(&self, values: Vec<f64>) -> Result<LpVector> {
        if values.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: values.len(),
            });
        }
        LpVector::new(self.p, values)
    }

    /// Checks length and, in Dirichlet mode, the support condition.
    pub fn check_admissible(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let start = self.support_len();
        if let Some(i) = (start..v.len()).find(|&i| v[i] != 0.0) {
            return Err(Error::SupportViolation(format!(
                "value {} at index {i} of depth {} (radius {})",
                v[i],
                self.ball.depth(i),
                self.ball.radius()
            )));
        }
        Ok(())
    }

    /// `out += λ(γ_k) v`, reading only the admissible prefix of `v`.
    pub(crate) fn add_translate(&self, k: usize, v: &[f64], out: &mut [f64]) {
        let t = self.ball.translate(k);
        for i in 0..self.support_len() {
            out[t[i]] += v[i];
        }
    }

    /// `λ(γ_k) v` for the `k`-th generator.
    pub fn apply_generator(&self, k: usize, v: &LpVector) -> Result<LpVector> {
        self.check_admissible(v.values())?;
        let mut out = vec![0.0; self.dim()];
        self.add_translate(k, v.values(), &mut out);
        LpVector::new(v.p(), out)
    }

    /// `λ(γ) v` for an arbitrary element.
    pub fn apply_pi(&self, gamma: &Element, v: &LpVector) -> Result<LpVector> {
        self.check_admissible(v.values())?;
        if let Some(k) = self.group.generators().iter().position(|g| g == gamma) {
            return self.apply_generator(k, v);
        }
        let mut out = vec![0.0; self.dim()];
        for (i, &x) in v.values().iter().enumerate() {
            if x == 0.0 && !self.domain.is_full() {
                continue;
            }
            let target = self.group.multiply(gamma, self.ball.element(i));
            let j = self.ball.index_of(&target).ok_or_else(|| {
                Error::SupportViolation(format!(
                    "{}·{} leaves the ball",
                    self.group.label(gamma),
                    self.group.label(self.ball.element(i))
                ))
            })?;
            out[j] += x;
        }
        LpVector::new(v.p(), out)
    }

    /// The coboundary `dv(γ) = λ(γ)v − v`.
    pub fn d(&self, v: &LpVector) -> Result<Cocycle> {
        self.check_admissible(v.values())?;
        Ok(Cocycle::from_values(self.d_raw(v.values())))
    }

    pub(crate) fn d_raw(&self, v: &[f64]) -> Vec<Vec<f64>> {
        (0..self.generator_count())
            .map(|k| {
                let mut out: Vec<f64> = v.iter().map(|x| -x).collect();
                self.add_translate(k, v, &mut out);
                out
            })
            .collect()
    }

    /// Value of a cocycle on the product of a word of generator indices,
    /// using `c(γw) = c(γ) + λ(γ)c(w)`.
    pub fn cocycle_extend(&self, c: &Cocycle, word: &[usize]) -> Result<LpVector> {
        let mut value = vec![0.0; self.dim()];
        for &k in word.iter().rev() {
            if k >= self.generator_count() {
                return Err(Error::InvalidSpec(format!("generator index {k} out of range")));
            }
            self.check_admissible(&value)?;
            let mut next = c.value(k).to_vec();
            self.add_translate(k, &value, &mut next);
            value = next;
        }
        LpVector::new(self.p, value)
    }

    /// BFS spanning tree: `(parent, generator)` for every non-root index.
    fn spanning_tree(&self) -> Vec<Option<(usize, usize)>> {
        let n = self.dim();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        seen[0] = true;
        for j in 0..n {
            for k in 0..self.generator_count() {
                let t = self.ball.translate(k)[j];
                if t != OUTSIDE && !seen[t] {
                    seen[t] = true;
                    parent[t] = Some((j, k));
                }
            }
        }
        parent
    }

    /// Extends a cocycle from generators to every element of a finite group
    /// along the BFS tree.
    pub fn cocycle_on_group(&self, c: &Cocycle) -> Result<Vec<Vec<f64>>> {
        if !self.domain.is_full() {
            return Err(Error::InfiniteGroup);
        }
        let n = self.dim();
        let mut values = vec![vec![0.0; n]; n];
        for (i, edge) in self.spanning_tree().into_iter().enumerate() {
            if let Some((j, k)) = edge {
                let mut v = c.value(k).to_vec();
                self.add_translate(k, &values[j].clone(), &mut v);
                values[i] = v;
            }
        }
        Ok(values)
    }

    /// Largest violation of `c(γx) = λ(γ)c(x) + c(γ)` over every Cayley-graph
    /// edge of a finite group. Generator pairs are among these edges.
    pub fn cocycle_residual(&self, c: &Cocycle) -> Result<f64> {
        self.check_cocycle_shape(c)?;
        let on_group = self.cocycle_on_group(c)?;
        let mut worst = 0.0f64;
        for (j, cx) in on_group.iter().enumerate() {
            for k in 0..self.generator_count() {
                let target = self.ball.translate(k)[j];
                let mut expected = c.value(k).to_vec();
                self.add_translate(k, cx, &mut expected);
                let diff = on_group[target].iter().zip(&expected).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                worst = worst.max(diff);
            }
        }
        Ok(worst)
    }

    fn check_cocycle_shape(&self, c: &Cocycle) -> Result<()> {
        if c.len() != self.generator_count() {
            return Err(Error::DimensionMismatch {
                expected: self.generator_count(),
                got: c.len(),
            });
        }
        for k in 0..c.len() {
            if c.value(k).len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got: c.value(k).len(),
                });
            }
        }
        Ok(())
    }

    /// Validates a generator assignment as a cocycle.
    ///
    /// Finite groups: every Cayley-graph edge, tolerance `1e−9·max(1, scale)`.
    /// Dirichlet balls: the inverse law wherever `λ(γ⁻¹)c(γ)` stays inside
    /// the ball; nothing else is checkable on a truncation.
    pub fn validate_cocycle(&self, c: &Cocycle) -> Result<f64> {
        self.check_cocycle_shape(c)?;
        let scale = c.values.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
        let tol = 1e-9 * scale;
        let residual = if self.domain.is_full() {
            self.cocycle_residual(c)?
        } else {
            let mut worst = 0.0f64;
            for k in 0..c.len() {
                let Some(kinv) = self.group.inverse_of(k) else {
                    return Err(Error::AsymmetricSetup(format!(
                        "generator {} has no inverse in K",
                        self.group.generator_labels()[k]
                    )));
                };
                if self.check_admissible(c.value(k)).is_err() {
                    continue;
                }
                let mut sum = c.value(kinv).to_vec();
                self.add_translate(kinv, c.value(k), &mut sum);
                worst = worst.max(sum.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            }
            worst
        };
        if residual > tol {
            return Err(Error::InvalidCocycle(format!("cocycle law violated by {residual:e}")));
        }
        Ok(residual)
    }

    /// Matrix of `f ↦ (λ(γ_k)f − f)_k` on the domain coordinates.
    fn d_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let m = self.support_len();
        let kk = self.generator_count();
        let mut a = DMatrix::zeros(kk * n, m);
        for k in 0..kk {
            let t = self.ball.translate(k);
            for i in 0..m {
                a[(k * n + t[i], i)] += 1.0;
                a[(k * n + i, i)] -= 1.0;
            }
        }
        a
    }

    /// Least-squares potential `f` with `df ≈ c` and the max-norm residual.
    /// On finite groups the minimum-norm (mean-zero) solution is returned.
    pub fn recover_potential(&self, c: &Cocycle) -> Result<(LpVector, f64)> {
        self.check_cocycle_shape(c)?;
        let a = self.d_matrix();
        let b = DVector::from_iterator(a.nrows(), c.values.iter().flatten().copied());
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let x = svd
            .solve(&b, RANK_TOL * smax.max(1.0))
            .map_err(|e| Error::Parse(format!("least squares failed: {e}")))?;
        let residual = (&a * &x - &b).amax();
        let mut values = vec![0.0; self.dim()];
        values[..x.len()].copy_from_slice(x.as_slice());
        Ok((LpVector::new(self.p, values)?, residual))
    }

    /// Linear constraints cutting `Z¹` out of the generator assignments
    /// (unknown `k·n + i` is `c(γ_k)(x_i)`), one block per non-tree edge.
    fn cocycle_constraints(&self) -> DMatrix<f64> {
        let n = self.dim();
        let kk = self.generator_count();
        let unknowns = kk * n;
        // c(x_i) as an n × unknowns matrix, built along the BFS tree.
        let mut on_group: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, unknowns); n];
        let tree = self.spanning_tree();
        let push = |k: usize, from: &DMatrix<f64>| -> DMatrix<f64> {
            let t = self.ball.translate(k);
            let mut out = DMatrix::zeros(n, unknowns);
            for (i, &ti) in t.iter().enumerate().take(n) {
                out.set_row(ti, &from.row(i));
            }
            for i in 0..n {
                out[(i, k * n + i)] += 1.0;
            }
            out
        };
        for i in 0..n {
            if let Some((j, k)) = tree[i] {
                on_group[i] = push(k, &on_group[j]);
            }
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for j in 0..n {
            for k in 0..kk {
                let target = self.ball.translate(k)[j];
                if tree[target] == Some((j, k)) {
                    continue;
                }
                let expected = push(k, &on_group[j]);
                let diff = &on_group[target] - expected;
                for r in 0..n {
                    let row: Vec<f64> = diff.row(r).iter().copied().collect();
                    if row.iter().any(|x| *x != 0.0) {
                        rows.push(row);
                    }
                }
            }
        }
        DMatrix::from_fn(rows.len(), unknowns, |r, c| rows[r][c])
    }

    /// Basis of `Z¹` on a finite group, as generator assignments.
    pub fn cocycle_basis(&self) -> Result<Vec<Cocycle>> {
        if !self.domain.is_full() {
            return Err(Error::InfiniteGroup);
        }
        let n = self.dim();
        let kk = self.generator_count();
        let unknowns = kk * n;
        let constraints = self.cocycle_constraints();
        let null = null_space(&constraints, unknowns);
        Ok(null
            .into_iter()
            .map(|col| Cocycle::from_values((0..kk).map(|k| col[k * n..(k + 1) * n].to_vec()).collect()))
            .collect())
    }

    /// `(dim Z¹, dim B¹, dim H¹)` by rank computations.
    pub fn cohomology_dims(&self) -> Result<CohomologyReport> {
        if !self.domain.is_full() {
            return Err(Error::InfiniteGroup);
        }
        let n = self.dim();
        let kk = self.generator_count();
        let unknowns = kk * n;
        let constraints = self.cocycle_constraints();
        let z_rank = rank(&constraints);
        let dim_z1 = unknowns - z_rank;
        let full = self.with_domain(Domain::Full)?;
        let dim_b1 = rank(&full.d_matrix());
        // Every coboundary must satisfy the constraints.
        let mut b_residual = 0.0f64;
        for i in 0..n {
            let delta = LpVector::delta(self.p, n, i)?;
            let c = full.d(&delta)?;
            b_residual = b_residual.max(full.cocycle_residual(&c)?);
        }
        Ok(CohomologyReport {
            dim_z1,
            dim_b1,
            dim_h1: dim_z1 - dim_b1.min(dim_z1),
            coboundary_residual: b_residual,
        })
    }
}

fn rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
}

/// Orthonormal basis of the null space of `a` (with `cols` columns).
fn null_space(a: &DMatrix<f64>, cols: usize) -> Vec<Vec<f64>> {
    if a.nrows() == 0 {
        return (0..cols)
            .map(|i| {
                let mut e = vec![0.0; cols];
                e[i] = 1.0;
                e
            })
            .collect();
    }
    // Work with the square Gram matrix so V is complete even when rows < cols.
    let gram = a.transpose() * a;
    let eig = gram.symmetric_eigen();
    let emax = eig.eigenvalues.amax();
    let tol = 1e-10 * emax.max(1.0);
    (0..cols)
        .filter(|&i| eig.eigenvalues[i].abs() <= tol)
        .map(|i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect()
}

/// Dimensions of `Z¹`, `B¹` and `H¹ = Z¹/B¹`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CohomologyReport {
    #[serde(rename = "dimZ1")]
    pub dim_z1: usize,
    #[serde(rename = "dimB1")]
    pub dim_b1: usize,
    #[serde(rename = "dimH1")]
    pub dim_h1: usize,
    /// Largest cocycle-law violation among the images `dδ_x`.
    pub coboundary_residual: f64,
}

/// Generator values `c(γ_k)` of a cocycle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cocycle {
    values: Vec<Vec<f64>>,
}

impl Cocycle {
    pub fn from_values(values: Vec<Vec<f64>>) -> Self {
        Self { values }
    }

    pub fn zero(generators: usize, dim: usize) -> Self {
        Self {
            values: vec![vec![0.0; dim]; generators],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Cocycle, b: f64) -> Cocycle {
        Cocycle {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect())
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// JSON object `{generator label → values}`.
    pub fn to_json(&self, group: &GroupHandle) -> serde_json::Value {
        let map = group
            .generator_labels()
            .iter()
            .zip(&self.values)
            .map(|(label, v)| (label.clone(), serde_json::json!(v)))
            .collect::<serde_json::Map<_, _>>();
        serde_json::Value::Object(map)
    }
}

/// `α(γ)v = λ(γ)v + c(γ)`, optionally with a potential `f_α`, `c = df_α`.
#[derive(Clone, Debug)]
pub struct AffineAction {
    rep: Representation,
    cocycle: Cocycle,
    potential: Option<Vec<f64>>,
}

impl AffineAction {
    /// The linear action (zero cocycle).
    pub fn linear(rep: Representation) -> Self {
        let cocycle = Cocycle::zero(rep.generator_count(), rep.dim());
        Self {
            potential: Some(vec![0.0; rep.dim()]),
            rep,
            cocycle,
        }
    }

    /// `λ + df₀`; its fixed points are `−f₀` plus invariant vectors.
    pub fn coboundary(rep: Representation, potential: &LpVector) -> Result<Self> {
        let cocycle = rep.d(potential)?;
        Ok(Self {
            rep,
            cocycle,
            potential: Some(potential.values().to_vec()),
        })
    }

    /// An action with a validated cocycle part.
    pub fn new(rep: Representation, cocycle: Cocycle) -> Result<Self> {
        rep.validate_cocycle(&cocycle)?;
        Ok(Self {
            rep,
            cocycle,
            potential: None,
        })
    }

    /// Recovers `f_α` by least squares and attaches it when the residual
    /// is at most `tol`.
    pub fn with_recovered_potential(mut self, tol: f64) -> Result<(Self, f64)> {
        let (f, residual) = self.rep.recover_potential(&self.cocycle)?;
        if residual <= tol {
            self.potential = Some(f.into_values());
        }
        Ok((self, residual))
    }

    pub fn rep(&self) -> &Representation {
        &self.rep
    }

    pub fn cocycle(&self) -> &Cocycle {
        &self.cocycle
    }

    pub fn potential(&self) -> Option<&[f64]> {
        self.potential.as_deref()
    }

    pub fn is_linear(&self) -> bool {
        self.cocycle.max_abs() == 0.0
    }

    /// `α(γ_k) v`.
    pub fn apply(&self, k: usize, v: &LpVector) -> Result<LpVector> {
        let mut out = self.rep.apply_generator(k, v)?;
        for (x, c) in out.values_mut().iter_mut().zip(self.cocycle.value(k)) {
            *x += c;
        }
        Ok(out)
    }

    /// `Dv(γ_k) = α(γ_k)v − v` for every generator (no admissibility check).
    pub(crate) fn displacement_raw(&self, v: &[f64]) -> Vec<Vec<f64>> {
        let mut d = self.rep.d_raw(v);
        for (dk, ck) in d.iter_mut().zip(self.cocycle.values()) {
            for (x, c) in dk.iter_mut().zip(ck) {
                *x += c;
            }
        }
        d
    }
}

/// Subtracts the mean.
pub fn mean_zero_project(v: &LpVector) -> LpVector {
    let mut out = v.clone();
    mean_zero_in_place(out.values_mut());
    out
}

pub(crate) fn mean_zero_in_place(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{build_group, GroupSpec};

    fn rep(spec: GroupSpec, p: f64, domain: Domain, radius: usize) -> Representation {
        Representation::regular(build_group(&spec).unwrap(), p, domain, radius).unwrap()
    }

    #[test]
    fn regular_representation_shifts_deltas() {
        let r = rep(GroupSpec::cyclic(3), 2.0, Domain::Full, 0);
        let e = LpVector::delta(2.0, 3, 0).unwrap();
        let s = r.group().generators()[0].clone();
        let out = r.apply_pi(&s, &e).unwrap();
        let expected = r.ball().index_of(&s).unwrap();
        assert_eq!(out.values()[expected], 1.0);
        assert_eq!(out.values().iter().sum::<f64>(), 1.0);
        let id = r.group().identity();
        assert_eq!(r.apply_pi(&id, &e).unwrap(), e);
    }

    #[test]
    fn dirichlet_shift_preserves_norm() {
        let r = rep(GroupSpec::free(2), 2.0, Domain::Dirichlet, 3);
        let e = LpVector::delta(2.0, r.dim(), 0).unwrap();
        let out = r.apply_generator(0, &e).unwrap();
        let a = r.ball().index_of(&r.group().generators()[0]).unwrap();
        assert_eq!(out.values()[a], 1.0);
        assert_eq!(out.norm(), 1.0);
    }

    #[test]
    fn dirichlet_support_violation() {
        let r = rep(GroupSpec::free(2), 2.0, Domain::Dirichlet, 2);
        let last = r.dim() - 1;
        let v = LpVector::delta(2.0, r.dim(), last).unwrap();
        assert!(matches!(r.apply_generator(0, &v), Err(Error::SupportViolation(_))));
        assert!(matches!(r.d(&v), Err(Error::SupportViolation(_))));
    }

    #[test]
    fn coboundary_of_delta_and_constants() {
        let r = rep(GroupSpec::cyclic(3), 2.0, Domain::Full, 0);
        let e = LpVector::delta(2.0, 3, 0).unwrap();
        let de = r.d(&e).unwrap();
        let s_idx = r.ball().index_of(&r.group().generators()[0]).unwrap();
        let mut expected = vec![0.0; 3];
        expected[s_idx] = 1.0;
        expected[0] = -1.0;
        assert_eq!(de.value(0), expected.as_slice());

        let ones = LpVector::new(2.0, vec![1.0; 3]).unwrap();
        assert_eq!(r.d(&ones).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn extension_over_words() {
        let r = rep(GroupSpec::symmetric(3), 2.0, Domain::Full, 0);
        let v = r.vector(vec![0.3, -1.0, 2.0, 0.5, 0.0, 1.5]).unwrap();
        let c = r.d(&v).unwrap();
        assert_eq!(r.cocycle_extend(&c, &[]).unwrap().norm(), 0.0);
        for k in 0..r.generator_count() {
            let kinv = r.group().inverse_of(k).unwrap();
            assert!(r.cocycle_extend(&c, &[k, kinv]).unwrap().norm() < 1e-14);
        }
        // c = dv: extension over w equals λ(w)v − v.
        let word = [0, 1, 1, 0, 1];
        let mut w = r.group().identity();
        for &k in &word {
            w = r.group().multiply(&w, &r.group().generators()[k]);
        }
        let direct = r.apply_pi(&w, &v).unwrap().axpy(-1.0, &v).unwrap();
        let ext = r.cocycle_extend(&c, &word).unwrap();
        for (a, b) in ext.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cohomology_of_cyclic_three() {
        let r = rep(GroupSpec::cyclic(3), 2.0, Domain::Full, 0);
        let rep = r.cohomology_dims().unwrap();
        assert_eq!((rep.dim_z1, rep.dim_b1, rep.dim_h1), (2, 2, 0));
    }

    #[test]
    fn cohomology_of_trivial_group() {
        let r = rep(GroupSpec::cyclic(1), 2.0, Domain::Full, 0);
        let rep = r.cohomology_dims().unwrap();
        assert_eq!((rep.dim_z1, rep.dim_b1, rep.dim_h1), (0, 0, 0));
    }

    #[test]
    fn cohomology_rejects_dirichlet() {
        let r = rep(GroupSpec::free(2), 2.0, Domain::Dirichlet, 2);
        assert!(matches!(r.cohomology_dims(), Err(Error::InfiniteGroup)));
    }

    #[test]
    fn invalid_cocycle_is_rejected() {
        let r = rep(GroupSpec::cyclic(4), 2.0, Domain::Full, 0);
        let mut vals = vec![vec![0.0; 4]; 2];
        vals[0][1] = 1.0;
        let c = Cocycle::from_values(vals);
        assert!(matches!(AffineAction::new(r, c), Err(Error::InvalidCocycle(_))));
    }

    #[test]
    fn potential_recovery_on_cyclic() {
        let r = rep(GroupSpec::cyclic(5), 2.0, Domain::Full, 0);
        let f = r.vector(vec![1.0, -2.0, 0.5, 0.0, 0.5]).unwrap();
        let c = r.d(&f).unwrap();
        let (g, residual) = r.recover_potential(&c).unwrap();
        assert!(residual < 1e-12);
        let expected = mean_zero_project(&f);
        for (a, b) in g.values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn mean_zero_examples() {
        let c = LpVector::new(2.0, vec![2.0; 4]).unwrap();
        assert!(mean_zero_project(&c).values().iter().all(|x| x.abs() < 1e-15));
        let e = LpVector::delta(2.0, 4, 0).unwrap();
        assert_eq!(mean_zero_project(&e).values(), &[0.75, -0.25, -0.25, -0.25]);
        let z = LpVector::new(2.0, vec![1.0, -1.0, 2.0, -2.0]).unwrap();
        assert_eq!(mean_zero_project(&z), z);
    }
}
