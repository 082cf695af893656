//! Finitely generated groups as element oracles, symmetric weighted
//! generating sets, and word-metric balls of the Cayley graph.
//!
//! Elements are stored by canonical key. Each family fixes one normal form:
//! residues for cyclic groups, `(rotation, flip)` pairs for dihedral groups,
//! 0-based image lists for permutations, integer tuples for lattices, freely
//! reduced signed-letter words for free groups, and row indices for groups
//! given by a multiplication table.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel stored in translation tables when `γ·x` leaves the ball.
pub const OUTSIDE: usize = usize::MAX;

/// Default cap on the number of ball elements.
pub const DEFAULT_BALL_CAP: usize = 1_000_000;

const WEIGHT_TOL: f64 = 1e-12;

/// Canonical key of a group element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Element(pub Vec<i64>);

impl Element {
    pub fn key(&self) -> &[i64] {
        &self.0
    }
}

/// A validated multiplication table. Row `i`, column `j` holds the index of
/// `g_i · g_j`; index 0 is the identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MulTable {
    rows: Vec<Vec<usize>>,
    inverse: Vec<usize>,
    abelian: bool,
}

impl MulTable {
    pub fn new(rows: Vec<Vec<usize>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::NotAGroup("empty table".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotAGroup(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&x| x >= n) {
                return Err(Error::NotAGroup(format!("entry {bad} in row {i} out of range")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if rows[0][i] != i || row[0] != i {
                return Err(Error::NotAGroup(format!(
                    "index 0 is not a two-sided identity (row/column {i})"
                )));
            }
        }
        // Latin square: every row and column is a permutation.
        let mut seen = vec![usize::MAX; n];
        for (i, row) in rows.iter().enumerate() {
            for &x in row {
                if seen[x] == i {
                    return Err(Error::NotAGroup(format!("row {i} repeats {x}")));
                }
                seen[x] = i;
            }
        }
        let mut seen = vec![usize::MAX; n];
        for j in 0..n {
            for row in &rows {
                let x = row[j];
                if seen[x] == j {
                    return Err(Error::NotAGroup(format!("column {j} repeats {x}")));
                }
                seen[x] = j;
            }
        }
        for a in 0..n {
            for b in 0..n {
                let ab = rows[a][b];
                for c in 0..n {
                    if rows[ab][c] != rows[a][rows[b][c]] {
                        return Err(Error::NotAGroup(format!(
                            "associativity fails for ({a}, {b}, {c})"
                        )));
                    }
                }
            }
        }
        let inverse = (0..n)
            .map(|a| rows[a].iter().position(|&x| x == 0).expect("latin row contains identity"))
            .collect();
        let abelian = (0..n).all(|a| (0..a).all(|b| rows[a][b] == rows[b][a]));
        Ok(Self {
            rows,
            inverse,
            abelian,
        })
    }

    /// Reads a headerless CSV of 0-based indices.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|e| Error::Parse(format!("table entry {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }

    pub fn order(&self) -> usize {
        self.rows.len()
    }

    pub fn product(&self, a: usize, b: usize) -> usize {
        self.rows[a][b]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }
}

/// The supported group families.
#[derive(Clone, Debug)]
pub enum Family {
    Cyclic(usize),
    Dihedral(usize),
    Symmetric(usize),
    IntegerLattice(usize),
    Free(usize),
    Table(Arc<MulTable>),
}

impl Family {
    pub fn name(&self) -> String {
        match self {
            Family::Cyclic(n) => format!("cyclic({n})"),
            Family::Dihedral(n) => format!("dihedral({n})"),
            Family::Symmetric(n) => format!("symmetric({n})"),
            Family::IntegerLattice(d) => format!("integer_lattice({d})"),
            Family::Free(k) => format!("free({k})"),
            Family::Table(t) => format!("table({})", t.order()),
        }
    }

    /// Group order, `None` for infinite families.
    pub fn order(&self) -> Option<usize> {
        match self {
            Family::Cyclic(n) => Some(*n),
            Family::Dihedral(n) => Some(2 * n),
            Family::Symmetric(n) => Some((1..=*n).product()),
            Family::Table(t) => Some(t.order()),
            Family::IntegerLattice(_) => None,
            Family::Free(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.order().is_some()
    }

    pub fn is_abelian(&self) -> bool {
        match self {
            Family::Cyclic(_) | Family::IntegerLattice(_) => true,
            Family::Dihedral(n) => *n <= 2,
            Family::Symmetric(n) => *n <= 2,
            Family::Free(k) => *k <= 1,
            Family::Table(t) => t.abelian,
        }
    }

    pub fn identity(&self) -> Element {
        Element(match self {
            Family::Cyclic(_) => vec![0],
            Family::Dihedral(_) => vec![0, 0],
            Family::Symmetric(n) => (0..*n as i64).collect(),
            Family::IntegerLattice(d) => vec![0; *d],
            Family::Free(_) => Vec::new(),
            Family::Table(_) => vec![0],
        })
    }

    pub fn multiply(&self, a: &Element, b: &Element) -> Element {
        let (x, y) = (&a.0, &b.0);
        Element(match self {
            Family::Cyclic(n) => vec![(x[0] + y[0]).rem_euclid(*n as i64)],
            Family::Dihedral(n) => {
                // r^a s^b · r^c s^d = r^(a + (-1)^b c) s^(b + d)
                let sign = if x[1] == 0 { 1 } else { -1 };
                vec![(x[0] + sign * y[0]).rem_euclid(*n as i64), (x[1] + y[1]) % 2]
            }
            // (στ)(i) = σ(τ(i))
            Family::Symmetric(_) => y.iter().map(|&i| x[i as usize]).collect(),
            Family::IntegerLattice(_) => x.iter().zip(y).map(|(a, b)| a + b).collect(),
            Family::Free(_) => {
                let mut word = x.clone();
                for &letter in y {
                    if word.last() == Some(&-letter) {
                        word.pop();
                    } else {
                        word.push(letter);
                    }
                }
                word
            }
            Family::Table(t) => vec![t.product(x[0] as usize, y[0] as usize) as i64],
        })
    }

    pub fn invert(&self, a: &Element) -> Element {
        let x = &a.0;
        Element(match self {
            Family::Cyclic(n) => vec![(-x[0]).rem_euclid(*n as i64)],
            Family::Dihedral(n) => {
                if x[1] == 0 {
                    vec![(-x[0]).rem_euclid(*n as i64), 0]
                } else {
                    x.clone()
                }
            }
            Family::Symmetric(_) => {
                let mut inv = vec![0; x.len()];
                for (i, &image) in x.iter().enumerate() {
                    inv[image as usize] = i as i64;
                }
                inv
            }
            Family::IntegerLattice(_) => x.iter().map(|a| -a).collect(),
            Family::Free(_) => x.iter().rev().map(|a| -a).collect(),
            Family::Table(t) => vec![t.inverse[x[0] as usize] as i64],
        })
    }

    /// Validates a raw key and brings it to normal form.
    pub fn canonicalize(&self, raw: &[i64]) -> Result<Element> {
        let bad = |msg: String| Error::InvalidSpec(format!("{}: {msg}", self.name()));
        match self {
            Family::Cyclic(n) => {
                if raw.len() != 1 {
                    return Err(bad(format!("expected a residue, got {raw:?}")));
                }
                Ok(Element(vec![raw[0].rem_euclid(*n as i64)]))
            }
            Family::Dihedral(n) => {
                if raw.len() != 2 {
                    return Err(bad(format!("expected [rotation, flip], got {raw:?}")));
                }
                Ok(Element(vec![raw[0].rem_euclid(*n as i64), raw[1].rem_euclid(2)]))
            }
            Family::Symmetric(n) => {
                let mut seen = vec![false; *n];
                if raw.len() != *n {
                    return Err(bad(format!("permutation must list {n} images")));
                }
                for &image in raw {
                    if image < 0 || image as usize >= *n || seen[image as usize] {
                        return Err(bad(format!("{raw:?} is not a permutation of 0..{n}")));
                    }
                    seen[image as usize] = true;
                }
                Ok(Element(raw.to_vec()))
            }
            Family::IntegerLattice(d) => {
                if raw.len() != *d {
                    return Err(bad(format!("expected a {d}-tuple, got {raw:?}")));
                }
                Ok(Element(raw.to_vec()))
            }
            Family::Free(k) => {
                if let Some(l) = raw.iter().find(|l| **l == 0 || l.unsigned_abs() as usize > *k) {
                    return Err(bad(format!("letter {l} out of range")));
                }
                Ok(self.multiply(&Element(Vec::new()), &Element(raw.to_vec())))
            }
            Family::Table(t) => {
                if raw.len() != 1 || raw[0] < 0 || raw[0] as usize >= t.order() {
                    return Err(bad(format!("expected a row index, got {raw:?}")));
                }
                Ok(Element(raw.to_vec()))
            }
        }
    }

    /// Standard symmetric generating set.
    pub fn default_generators(&self) -> Vec<Element> {
        let e = self.identity();
        let mut gens: Vec<Element> = match self {
            Family::Cyclic(_) => vec![Element(vec![1]), Element(vec![-1])],
            Family::Dihedral(_) => vec![Element(vec![1, 0]), Element(vec![-1, 0]), Element(vec![0, 1])],
            Family::Symmetric(n) => (0..n.saturating_sub(1))
                .map(|i| {
                    let mut perm: Vec<i64> = (0..*n as i64).collect();
                    perm.swap(i, i + 1);
                    Element(perm)
                })
                .collect(),
            Family::IntegerLattice(d) => (0..*d)
                .flat_map(|i| {
                    [1i64, -1].map(|s| {
                        let mut v = vec![0; *d];
                        v[i] = s;
                        Element(v)
                    })
                })
                .collect(),
            Family::Free(k) => (1..=*k as i64).flat_map(|l| [Element(vec![l]), Element(vec![-l])]).collect(),
            Family::Table(t) => (1..t.order() as i64).map(|i| Element(vec![i])).collect(),
        };
        gens = gens
            .into_iter()
            .map(|g| self.canonicalize(&g.0).expect("default generator is well formed"))
            .collect();
        let mut out: Vec<Element> = Vec::new();
        for g in gens {
            if g != e && !out.contains(&g) {
                out.push(g);
            }
        }
        if out.is_empty() {
            out.push(e);
        }
        out
    }

    /// Human-readable label of an element.
    pub fn label(&self, a: &Element) -> String {
        if *a == self.identity() {
            return "e".into();
        }
        let x = &a.0;
        let power = |name: &str, k: i64| {
            if k == 1 {
                name.to_string()
            } else {
                format!("{name}^{k}")
            }
        };
        match self {
            Family::Cyclic(_) => power("s", x[0]),
            Family::Dihedral(_) => match (x[0], x[1]) {
                (0, _) => "s".into(),
                (r, 0) => power("r", r),
                (r, _) => format!("{} s", power("r", r)),
            },
            Family::Symmetric(_) => {
                let mut done = vec![false; x.len()];
                let mut out = String::new();
                for start in 0..x.len() {
                    if done[start] || x[start] as usize == start {
                        continue;
                    }
                    let mut cycle = Vec::new();
                    let mut i = start;
                    while !done[i] {
                        done[i] = true;
                        cycle.push((i + 1).to_string());
                        i = x[i] as usize;
                    }
                    out.push_str(&format!("({})", cycle.join(" ")));
                }
                out
            }
            Family::IntegerLattice(_) => {
                let parts: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                format!("({})", parts.join(","))
            }
            Family::Free(_) => x
                .iter()
                .map(|&l| {
                    let c = (b'a' + (l.unsigned_abs() as u8 - 1)) as char;
                    if l > 0 {
                        c
                    } else {
                        c.to_ascii_uppercase()
                    }
                })
                .collect(),
            Family::Table(_) => format!("g{}", x[0]),
        }
    }

    /// Parses a word such as `s^3`, `r^-1 s`, `aB`, `(1 2)(3 4)`, `e2`, `g5`.
    pub fn parse_word(&self, text: &str) -> Result<Element> {
        let err = |msg: &str| Error::InvalidSpec(format!("{}: cannot parse {text:?}: {msg}", self.name()));
        let chars: Vec<char> = text.chars().collect();
        let mut acc = self.identity();
        let mut i = 0;
        let read_int = |i: &mut usize| -> Option<i64> {
            let start = *i;
            if *i < chars.len() && (chars[*i] == '-' || chars[*i] == '+') {
                *i += 1;
            }
            while *i < chars.len() && chars[*i].is_ascii_digit() {
                *i += 1;
            }
            chars[start..*i].iter().collect::<String>().parse().ok()
        };
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() || c == '*' || c == '.' || c == '·' {
                i += 1;
                continue;
            }
            let atom = if c == '(' {
                let Family::Symmetric(n) = self else {
                    return Err(err("cycle notation needs a symmetric group"));
                };
                let close = chars[i..].iter().position(|&x| x == ')').ok_or_else(|| err("unclosed cycle"))? + i;
                let body: String = chars[i + 1..close].iter().collect();
                let points = body
                    .split(|x: char| x.is_whitespace() || x == ',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<usize>().map_err(|_| err("bad cycle entry")))
                    .collect::<Result<Vec<_>>>()?;
                let mut perm: Vec<i64> = (0..*n as i64).collect();
                for (j, &pt) in points.iter().enumerate() {
                    let next = points[(j + 1) % points.len()];
                    if pt == 0 || pt > *n || next == 0 || next > *n {
                        return Err(err("cycle entry out of range"));
                    }
                    perm[pt - 1] = next as i64 - 1;
                }
                i = close + 1;
                self.canonicalize(&perm)?
            } else if c.is_ascii_alphabetic() {
                i += 1;
                self.letter(c, &chars, &mut i, &read_int).ok_or_else(|| err("unknown generator name"))?
            } else {
                return Err(err("unexpected character"));
            };
            let mut exponent = 1;
            if i < chars.len() && chars[i] == '^' {
                i += 1;
                exponent = read_int(&mut i).ok_or_else(|| err("bad exponent"))?;
            }
            let base = if exponent < 0 { self.invert(&atom) } else { atom };
            for _ in 0..exponent.unsigned_abs() {
                acc = self.multiply(&acc, &base);
            }
        }
        Ok(acc)
    }

    fn letter(
        &self,
        c: char,
        chars: &[char],
        i: &mut usize,
        read_int: &dyn Fn(&mut usize) -> Option<i64>,
    ) -> Option<Element> {
        let indexed = |i: &mut usize| -> Option<i64> {
            if *i < chars.len() && chars[*i].is_ascii_digit() {
                read_int(i)
            } else {
                None
            }
        };
        match self {
            Family::Free(k) => {
                let l = (c.to_ascii_lowercase() as u8).checked_sub(b'a')? as usize + 1;
                if l > *k {
                    return (c == 'e').then(|| self.identity());
                }
                let sign = if c.is_ascii_uppercase() { -1 } else { 1 };
                Some(Element(vec![sign * l as i64]))
            }
            Family::Cyclic(_) => match c {
                's' => Some(Element(vec![1])),
                'e' => Some(self.identity()),
                _ => None,
            },
            Family::Dihedral(n) => match c {
                'r' => self.canonicalize(&[1, 0]).ok(),
                's' => Some(Element(vec![0, 1])),
                'e' => Some(self.identity()),
                _ => None,
            }
            .filter(|_| *n > 0),
            Family::IntegerLattice(d) => match (c, indexed(i)) {
                ('e', Some(j)) if j >= 1 && j as usize <= *d => {
                    let mut v = vec![0; *d];
                    v[j as usize - 1] = 1;
                    Some(Element(v))
                }
                ('e', None) => Some(self.identity()),
                _ => None,
            },
            Family::Table(_) => match (c, indexed(i)) {
                ('g', Some(j)) => self.canonicalize(&[j]).ok(),
                ('e', None) => Some(self.identity()),
                _ => None,
            },
            Family::Symmetric(_) => (c == 'e').then(|| self.identity()),
        }
    }
}

/// Serialized family selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Cyclic,
    Dihedral,
    Symmetric,
    IntegerLattice,
    Free,
    Table,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

/// A generator given as a residue/row index, a raw key, or a word.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorDesc {
    Index(i64),
    Key(Vec<i64>),
    Word(String),
}

/// A weight given as a number or as a fraction string such as `"1/4"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightDesc {
    Value(f64),
    Text(String),
}

impl WeightDesc {
    pub fn value(&self) -> Result<f64> {
        match self {
            WeightDesc::Value(v) => Ok(*v),
            WeightDesc::Text(s) => {
                let parse = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::BadWeights(format!("cannot parse weight {s:?}")))
                };
                match s.split_once('/') {
                    Some((a, b)) => Ok(parse(a)? / parse(b)?),
                    None => parse(s),
                }
            }
        }
    }
}

/// Declarative description of a group and its weighted generating set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub family: FamilyKind,
    #[serde(default)]
    pub params: FamilyParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<GeneratorDesc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<WeightDesc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
    /// Append missing inverses (with the weight of the listed generator)
    /// instead of rejecting a non-symmetric set.
    #[serde(default)]
    pub auto_close: bool,
}

impl GroupSpec {
    pub fn new(family: FamilyKind, params: FamilyParams) -> Self {
        Self {
            family,
            params,
            generators: None,
            weights: None,
            radius: None,
            auto_close: false,
        }
    }

    pub fn cyclic(n: usize) -> Self {
        Self::new(FamilyKind::Cyclic, FamilyParams { n: Some(n), ..Default::default() })
    }

    pub fn dihedral(n: usize) -> Self {
        Self::new(FamilyKind::Dihedral, FamilyParams { n: Some(n), ..Default::default() })
    }

    pub fn symmetric(n: usize) -> Self {
        Self::new(FamilyKind::Symmetric, FamilyParams { n: Some(n), ..Default::default() })
    }

    pub fn integer_lattice(d: usize) -> Self {
        Self::new(FamilyKind::IntegerLattice, FamilyParams { d: Some(d), ..Default::default() })
    }

    pub fn free(k: usize) -> Self {
        Self::new(FamilyKind::Free, FamilyParams { k: Some(k), ..Default::default() })
    }

    pub fn table(path: impl Into<PathBuf>) -> Self {
        Self::new(FamilyKind::Table, FamilyParams { path: Some(path.into()), ..Default::default() })
    }

    pub fn with_generators<I, G>(mut self, gens: I) -> Self
    where
        I: IntoIterator<Item = G>,
        G: Into<GeneratorDesc>,
    {
        self.generators = Some(gens.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_weights<I: IntoIterator<Item = f64>>(mut self, weights: I) -> Self {
        self.weights = Some(weights.into_iter().map(WeightDesc::Value).collect());
        self
    }

    /// Resolves a relative table path against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(p) = &self.params.path {
            if p.is_relative() {
                self.params.path = Some(base.join(p));
            }
        }
    }

    fn family(&self) -> Result<Family> {
        let need = |v: Option<usize>, name: &str, min: usize| -> Result<usize> {
            match v {
                Some(x) if x >= min => Ok(x),
                Some(x) => Err(Error::InvalidSpec(format!("parameter {name} = {x} must be at least {min}"))),
                None => Err(Error::InvalidSpec(format!("missing parameter {name}"))),
            }
        };
        Ok(match self.family {
            FamilyKind::Cyclic => Family::Cyclic(need(self.params.n, "n", 1)?),
            FamilyKind::Dihedral => Family::Dihedral(need(self.params.n, "n", 1)?),
            FamilyKind::Symmetric => {
                let n = need(self.params.n, "n", 1)?;
                if n > 10 {
                    return Err(Error::InvalidSpec("symmetric groups are limited to n <= 10".into()));
                }
                Family::Symmetric(n)
            }
            FamilyKind::IntegerLattice => Family::IntegerLattice(need(self.params.d, "d", 1)?),
            FamilyKind::Free => {
                let k = need(self.params.k, "k", 1)?;
                if k > 26 {
                    return Err(Error::InvalidSpec("free groups are limited to 26 letters".into()));
                }
                Family::Free(k)
            }
            FamilyKind::Table => {
                let path = self
                    .params
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::InvalidSpec("missing parameter path".into()))?;
                Family::Table(Arc::new(MulTable::from_csv_path(path)?))
            }
        })
    }
}

impl From<i64> for GeneratorDesc {
    fn from(v: i64) -> Self {
        GeneratorDesc::Index(v)
    }
}

impl From<&str> for GeneratorDesc {
    fn from(v: &str) -> Self {
        GeneratorDesc::Word(v.to_string())
    }
}

impl From<Vec<i64>> for GeneratorDesc {
    fn from(v: Vec<i64>) -> Self {
        GeneratorDesc::Key(v)
    }
}

/// A group oracle together with a weighted generating set `(K, m)`.
#[derive(Clone, Debug)]
pub struct GroupHandle {
    family: Family,
    generators: Vec<Element>,
    labels: Vec<String>,
    weights: Vec<f64>,
    inverse: Vec<Option<usize>>,
}

impl GroupHandle {
    /// Assembles a handle without symmetry or weight validation.
    pub fn from_parts(family: Family, generators: Vec<Element>, weights: Vec<f64>) -> Result<Self> {
        if generators.len() != weights.len() {
            return Err(Error::BadWeights(format!(
                "{} weights for {} generators",
                weights.len(),
                generators.len()
            )));
        }
        let labels = generators.iter().map(|g| family.label(g)).collect();
        let inverse = generators
            .iter()
            .map(|g| {
                let inv = family.invert(g);
                generators.iter().position(|h| *h == inv)
            })
            .collect();
        Ok(Self {
            family,
            generators,
            labels,
            weights,
            inverse,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn name(&self) -> String {
        self.family.name()
    }

    pub fn identity(&self) -> Element {
        self.family.identity()
    }

    pub fn multiply(&self, a: &Element, b: &Element) -> Element {
        self.family.multiply(a, b)
    }

    pub fn invert(&self, a: &Element) -> Element {
        self.family.invert(a)
    }

    pub fn canonicalize(&self, raw: &[i64]) -> Result<Element> {
        self.family.canonicalize(raw)
    }

    pub fn label(&self, a: &Element) -> String {
        self.family.label(a)
    }

    pub fn generators(&self) -> &[Element] {
        &self.generators
    }

    pub fn generator_labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Position of `γ⁻¹` in the generating set.
    pub fn inverse_of(&self, k: usize) -> Option<usize> {
        self.inverse[k]
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn order(&self) -> Option<usize> {
        self.family.order()
    }

    pub fn is_finite(&self) -> bool {
        self.family.is_finite()
    }

    pub fn generator_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label).or_else(|| {
            let e = self.family.parse_word(label).ok()?;
            self.generators.iter().position(|g| *g == e)
        })
    }
}

impl fmt::Display for GroupHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} K={{{}}}", self.name(), self.labels.join(", "))
    }
}

/// Builds a validated group handle from its specification.
pub fn build_group(spec: &GroupSpec) -> Result<GroupHandle> {
    let family = spec.family()?;
    let mut generators = match &spec.generators {
        None => family.default_generators(),
        Some(list) => list
            .iter()
            .map(|desc| match desc {
                GeneratorDesc::Index(i) => family.canonicalize(&[*i]),
                GeneratorDesc::Key(k) => family.canonicalize(k),
                GeneratorDesc::Word(w) => family.parse_word(w),
            })
            .collect::<Result<Vec<_>>>()?,
    };
    if generators.is_empty() {
        return Err(Error::InvalidSpec("empty generating set".into()));
    }
    for (i, g) in generators.iter().enumerate() {
        if generators[..i].contains(g) {
            return Err(Error::InvalidSpec(format!("duplicate generator {}", family.label(g))));
        }
    }
    let mut weights = match &spec.weights {
        None => vec![1.0 / generators.len() as f64; generators.len()],
        Some(w) => w.iter().map(WeightDesc::value).collect::<Result<Vec<_>>>()?,
    };
    if weights.len() != generators.len() {
        return Err(Error::BadWeights(format!(
            "{} weights for {} generators",
            weights.len(),
            generators.len()
        )));
    }
    if let Some((g, w)) = generators.iter().zip(&weights).find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::BadWeights(format!(
            "weight {w} of {} is not strictly positive",
            family.label(g)
        )));
    }

    let listed = generators.len();
    for i in 0..listed {
        let inv = family.invert(&generators[i]);
        if !generators.contains(&inv) {
            if spec.auto_close {
                log::warn!("adding missing inverse {} to the generating set", family.label(&inv));
                generators.push(inv);
                weights.push(weights[i]);
            } else {
                return Err(Error::NonSymmetricGenerators(format!(
                    "inverse of {} is missing",
                    family.label(&generators[i])
                )));
            }
        }
    }

    let mut handle = GroupHandle::from_parts(family, generators, weights)?;
    let report = check_symmetry(&handle);
    if let Some(pair) = report.asymmetric_pairs.first() {
        return Err(Error::BadWeights(format!(
            "m({}) = {} differs from m({}) = {}",
            pair.generator, pair.weight, pair.inverse, pair.inverse_weight
        )));
    }
    let total: f64 = handle.weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        log::warn!("weights sum to {total}; normalizing");
        for w in &mut handle.weights {
            *w /= total;
        }
    }
    Ok(handle)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AsymmetricPair {
    pub generator: String,
    pub inverse: String,
    pub weight: f64,
    pub inverse_weight: f64,
}

/// Outcome of [`check_symmetry`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SymmetryReport {
    pub passed: bool,
    pub missing_inverses: Vec<String>,
    pub asymmetric_pairs: Vec<AsymmetricPair>,
    pub weight_sum: f64,
}

/// Checks `K = K⁻¹`, `m(γ) = m(γ⁻¹)` and `Σ m = 1`.
pub fn check_symmetry(handle: &GroupHandle) -> SymmetryReport {
    let mut missing_inverses = Vec::new();
    let mut asymmetric_pairs = Vec::new();
    for k in 0..handle.len() {
        match handle.inverse_of(k) {
            None => missing_inverses.push(handle.labels[k].clone()),
            Some(j) if j >= k => {
                let (a, b) = (handle.weights[k], handle.weights[j]);
                if (a - b).abs() > WEIGHT_TOL * a.abs().max(b.abs()).max(1.0) {
                    asymmetric_pairs.push(AsymmetricPair {
                        generator: handle.labels[k].clone(),
                        inverse: handle.labels[j].clone(),
                        weight: a,
                        inverse_weight: b,
                    });
                }
            }
            Some(_) => {}
        }
    }
    let weight_sum: f64 = handle.weights.iter().sum();
    let passed = missing_inverses.is_empty() && asymmetric_pairs.is_empty() && (weight_sum - 1.0).abs() <= WEIGHT_TOL;
    SymmetryReport {
        passed,
        missing_inverses,
        asymmetric_pairs,
        weight_sum,
    }
}

/// Word-metric ball `B_R` with left-translation tables.
///
/// `translate(k)[i]` is the index of `γ_k · x_i`, or [`OUTSIDE`]. Elements
/// appear in BFS order (generator order breaks ties), so indices of depth at
/// most `R − 1` form the prefix `0..inner_len()`.
#[derive(Clone, Debug)]
pub struct CayleyBall {
    radius: usize,
    elements: Vec<Element>,
    index: HashMap<Element, usize>,
    depth: Vec<usize>,
    translate: Vec<Vec<usize>>,
    inner_len: usize,
    saturated: bool,
}

/// Builds `B_R` with the default element cap.
pub fn ball(handle: &GroupHandle, radius: usize) -> Result<CayleyBall> {
    ball_with_cap(handle, radius, DEFAULT_BALL_CAP)
}

pub fn ball_with_cap(handle: &GroupHandle, radius: usize, cap: usize) -> Result<CayleyBall> {
    let e = handle.identity();
    let mut elements = vec![e.clone()];
    let mut index = HashMap::from([(e, 0usize)]);
    let mut depth = vec![0usize];
    let mut head = 0;
    while head < elements.len() {
        if depth[head] >= radius {
            break;
        }
        let x = elements[head].clone();
        for g in handle.generators() {
            let y = handle.multiply(g, &x);
            if !index.contains_key(&y) {
                if elements.len() >= cap {
                    return Err(Error::BallTooLarge { radius, cap });
                }
                index.insert(y.clone(), elements.len());
                elements.push(y);
                depth.push(depth[head] + 1);
            }
        }
        head += 1;
    }
    let translate = handle
        .generators()
        .iter()
        .map(|g| {
            elements
                .iter()
                .map(|x| index.get(&handle.multiply(g, x)).copied().unwrap_or(OUTSIDE))
                .collect()
        })
        .collect();
    let inner_len = if radius == 0 { 0 } else { depth.partition_point(|&d| d < radius) };
    let saturated = handle.order() == Some(elements.len());
    Ok(CayleyBall {
        radius,
        elements,
        index,
        depth,
        translate,
        inner_len,
        saturated,
    })
}

/// Builds the whole group when it is finite (the ball of radius `|Γ|`).
pub fn full_group(handle: &GroupHandle) -> Result<CayleyBall> {
    let order = handle.order().ok_or(Error::InfiniteGroup)?;
    ball(handle, order)
}

impl CayleyBall {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &Element {
        &self.elements[i]
    }

    pub fn index_of(&self, e: &Element) -> Option<usize> {
        self.index.get(e).copied()
    }

    pub fn depth(&self, i: usize) -> usize {
        self.depth[i]
    }

    pub fn depths(&self) -> &[usize] {
        &self.depth
    }

    pub fn translate(&self, k: usize) -> &[usize] {
        &self.translate[k]
    }

    pub fn generator_count(&self) -> usize {
        self.translate.len()
    }

    /// Number of indices of depth at most `R − 1`.
    pub fn inner_len(&self) -> usize {
        self.inner_len
    }

    /// True when the ball is a whole finite group.
    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    /// Element counts per word length.
    pub fn per_depth(&self) -> Vec<usize> {
        let max = self.depth.last().copied().unwrap_or(0);
        let mut counts = vec![0; max + 1];
        for &d in &self.depth {
            counts[d] += 1;
        }
        counts
    }

    /// Overwrites one translation entry. Used for fault injection.
    #[doc(hidden)]
    pub fn corrupt_translation(&mut self, generator: usize, index: usize, target: usize) {
        self.translate[generator][index] = target;
    }

    /// Checks every structural invariant against the oracle and returns
    /// human-readable counterexamples.
    pub fn check_invariants(&self, handle: &GroupHandle) -> Vec<String> {
        let mut out = Vec::new();
        if self.elements.first() != Some(&handle.identity()) || self.depth.first() != Some(&0) {
            out.push("index 0 is not the identity at depth 0".to_string());
        }
        if let Some(i) = (1..self.depth.len()).find(|&i| self.depth[i] < self.depth[i - 1]) {
            out.push(format!("depth decreases at index {i}"));
        }
        for (k, table) in self.translate.iter().enumerate() {
            let g = &handle.generators()[k];
            for (i, &t) in table.iter().enumerate() {
                let expected = self.index_of(&handle.multiply(g, &self.elements[i])).unwrap_or(OUTSIDE);
                if t != expected {
                    out.push(format!(
                        "translate({})[{i}] = {} but {}·{} has index {}",
                        handle.generator_labels()[k],
                        show(t),
                        handle.generator_labels()[k],
                        handle.label(&self.elements[i]),
                        show(expected)
                    ));
                }
                if i < self.inner_len && t == OUTSIDE {
                    out.push(format!(
                        "translate({})[{i}] leaves the ball from depth {}",
                        handle.generator_labels()[k],
                        self.depth[i]
                    ));
                }
            }
            if let Some(kinv) = handle.inverse_of(k) {
                let back = &self.translate[kinv];
                for (i, &t) in table.iter().enumerate().take(self.inner_len) {
                    if t == OUTSIDE || t >= back.len() || back[t] != i {
                        out.push(format!(
                            "translate({}) does not undo translate({}) at index {i}",
                            handle.generator_labels()[kinv],
                            handle.generator_labels()[k]
                        ));
                    }
                }
            }
        }
        out
    }
}

fn show(i: usize) -> String {
    if i == OUTSIDE {
        "outside".into()
    } else {
        i.to_string()
    }
}
