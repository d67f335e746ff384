//! Coefficient fields, spec files and the Friedrichs axiom checks.
//!
//! A spec describes the pair of first-order operators
//!
//! ```text
//! T0 u  =  A u' + C u
//! T~0 u = -A u' + (C* - A') u
//! ```
//!
//! on an interval `(a, b)`. Their sum is multiplication by `2S` with
//! `S = (C + C* - A') / 2`, and the remainder `A u' + (C - S) u` is the
//! skew-symmetric part.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::linalg::{self, CMatrix};
use crate::tolerance::ToleranceConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarField {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Format(format!("interval [{a}, {b}] must satisfy a < b")));
        }
        Ok(Self { a, b })
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn endpoint(&self, e: Endpoint) -> f64 {
        match e {
            Endpoint::Left => self.a,
            Endpoint::Right => self.b,
        }
    }

    /// `count` equispaced points including both endpoints.
    pub fn grid(&self, count: usize) -> Vec<f64> {
        let count = count.max(2);
        let h = self.length() / (count - 1) as f64;
        (0..count)
            .map(|k| if k == count - 1 { self.b } else { self.a + h * k as f64 })
            .collect()
    }
}

/// One complex-valued matrix entry `re(x) + i im(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub re: Expr,
    pub im: Expr,
}

impl Entry {
    pub fn zero() -> Self {
        Self {
            re: Expr::Num(0.0),
            im: Expr::Num(0.0),
        }
    }

    pub fn real(re: Expr) -> Self {
        Self {
            re,
            im: Expr::Num(0.0),
        }
    }

    pub fn parse(re: &str, im: &str) -> Result<Self> {
        Ok(Self {
            re: expr::parse(re)?,
            im: expr::parse(im)?,
        })
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let re = self.re.eval(x);
        if self.im.is_zero() {
            return re;
        }
        re + Complex64::i() * self.im.eval(x)
    }

    pub fn derivative(&self) -> Self {
        Self {
            re: self.re.derivative(),
            im: self.im.derivative(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: expr::neg(self.im.clone()),
        }
    }

    pub fn add(&self, other: &Entry) -> Self {
        Self {
            re: expr::add(self.re.clone(), other.re.clone()),
            im: expr::add(self.im.clone(), other.im.clone()),
        }
    }

    pub fn sub(&self, other: &Entry) -> Self {
        Self {
            re: expr::sub(self.re.clone(), other.re.clone()),
            im: expr::sub(self.im.clone(), other.im.clone()),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            re: expr::mul(Expr::Num(s), self.re.clone()),
            im: expr::mul(Expr::Num(s), self.im.clone()),
        }
    }

    /// Multiply by the imaginary unit.
    pub fn times_i(&self) -> Self {
        Self {
            re: expr::neg(self.im.clone()),
            im: self.re.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

/// An `n x n` matrix of closed-form entries, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    n: usize,
    entries: Vec<Entry>,
}

impl CoefficientField {
    pub fn new(n: usize, entries: Vec<Entry>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::Format(format!(
                "coefficient field needs {} entries for n = {n}, got {}",
                n * n,
                entries.len()
            )));
        }
        Ok(Self { n, entries })
    }

    /// Build from row-major real expression strings.
    pub fn from_strs(n: usize, srcs: &[&str]) -> Result<Self> {
        let entries = srcs
            .iter()
            .map(|s| Ok(Entry::real(expr::parse(s)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, entries)
    }

    /// Diagonal field from real expression strings.
    pub fn diagonal(srcs: &[&str]) -> Result<Self> {
        let n = srcs.len();
        let mut entries = vec![Entry::zero(); n * n];
        for (k, s) in srcs.iter().enumerate() {
            entries[k * n + k] = Entry::real(expr::parse(s)?);
        }
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Entry {
        &self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn eval(&self, x: f64) -> CMatrix {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).eval(x))
    }

    pub fn derivative(&self) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(Entry::derivative).collect(),
        }
    }

    pub fn map2(&self, other: &Self, f: impl Fn(&Entry, &Entry) -> Entry) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let entries = (0..n * n).map(|k| self.get(k % n, k / n).conj()).collect();
        Self { n, entries }
    }

    /// Principal submatrix on the given indices.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let m = indices.len();
        let entries = (0..m * m)
            .map(|k| self.get(indices[k / m], indices[k % m]).clone())
            .collect();
        Self { n: m, entries }
    }

    /// Expression strings `[[re, im], ...]` row-major, for reports.
    pub fn render(&self) -> Vec<Vec<String>> {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| {
                        let e = self.get(i, j);
                        if e.im.is_zero() {
                            e.re.to_string()
                        } else {
                            format!("{} + i*({})", e.re, e.im)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub block: usize,
    pub endpoint: Endpoint,
}

/// Which maximal operator a computation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `T1 u = A u' + C u`.
    Maximal,
    /// `T~1 u = -A u' + (C* - A') u`.
    MaximalAdjoint,
}

#[derive(Debug, Clone)]
pub struct FriedrichsSpec {
    pub field: ScalarField,
    pub interval: Interval,
    pub a: CoefficientField,
    pub c: CoefficientField,
    a_prime: CoefficientField,
    pub degeneracy: Vec<Degeneracy>,
    pub tolerances: ToleranceConfig,
}

impl FriedrichsSpec {
    pub fn new(
        field: ScalarField,
        interval: Interval,
        a: CoefficientField,
        c: CoefficientField,
        degeneracy: Vec<Degeneracy>,
        tolerances: ToleranceConfig,
    ) -> Result<Self> {
        if a.n() != c.n() {
            return Err(Error::Format(format!(
                "A is {0}x{0} but C is {1}x{1}",
                a.n(),
                c.n()
            )));
        }
        let n = a.n();
        let mut seen = Vec::new();
        for d in &degeneracy {
            if d.block >= n {
                return Err(Error::InvalidDegeneracy(format!(
                    "block {} out of range for n = {n}",
                    d.block
                )));
            }
            if seen.contains(&d.block) {
                return Err(Error::InvalidDegeneracy(format!(
                    "block {} flagged more than once",
                    d.block
                )));
            }
            seen.push(d.block);
        }
        let a_prime = a.derivative();
        Ok(Self {
            field,
            interval,
            a,
            c,
            a_prime,
            degeneracy,
            tolerances,
        })
    }

    /// Scalar real spec `u' + beta u` with `A = 1`.
    pub fn scalar(a: &str, c: &str, interval: (f64, f64)) -> Result<Self> {
        Self::new(
            ScalarField::Real,
            Interval::new(interval.0, interval.1)?,
            CoefficientField::from_strs(1, &[a])?,
            CoefficientField::from_strs(1, &[c])?,
            Vec::new(),
            ToleranceConfig::default(),
        )
    }

    pub fn with_field(mut self, field: ScalarField) -> Self {
        self.field = field;
        self
    }

    pub fn with_c(&self, c: CoefficientField) -> Result<Self> {
        Self::new(
            self.field,
            self.interval,
            self.a.clone(),
            c,
            self.degeneracy.clone(),
            self.tolerances,
        )
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn a_prime(&self) -> &CoefficientField {
        &self.a_prime
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degeneracy.is_empty()
    }

    pub fn a_at(&self, x: f64) -> CMatrix {
        self.a.eval(x)
    }

    pub fn c_at(&self, x: f64) -> CMatrix {
        self.c.eval(x)
    }

    pub fn a_prime_at(&self, x: f64) -> CMatrix {
        self.a_prime.eval(x)
    }

    /// Symmetric part `S(x) = (C + C* - A')/2`, Hermitian by construction.
    pub fn s_at(&self, x: f64) -> CMatrix {
        let m = self.c_at(x) - self.a_prime_at(x).scale(0.5);
        linalg::hermitian_part(&m)
    }

    /// Bounded part of the skew-symmetric operator, `C - S`.
    pub fn skew_at(&self, x: f64) -> CMatrix {
        self.c_at(x) - self.s_at(x)
    }

    /// Zeroth-order coefficient of the chosen maximal operator.
    pub fn zeroth_order_at(&self, x: f64, variant: Variant) -> CMatrix {
        match variant {
            Variant::Maximal => self.c_at(x),
            Variant::MaximalAdjoint => self.c_at(x).adjoint() - self.a_prime_at(x),
        }
    }

    /// Apply the chosen maximal operator to a pointwise value/derivative pair.
    pub fn apply_at(&self, x: f64, variant: Variant, u: &CMatrix, du: &CMatrix) -> CMatrix {
        let a = self.a_at(x);
        let lead = match variant {
            Variant::Maximal => &a * du,
            Variant::MaximalAdjoint => -(&a * du),
        };
        lead + self.zeroth_order_at(x, variant) * u
    }

    /// Matrix `G(x)` with kernel elements solving `u' = G(x) u`.
    pub fn kernel_generator(&self, x: f64, variant: Variant) -> Result<CMatrix> {
        let a = self.a_at(x);
        let lu = a.lu();
        let rhs = match variant {
            Variant::Maximal => -self.c_at(x),
            Variant::MaximalAdjoint => self.zeroth_order_at(x, variant),
        };
        lu.solve(&rhs)
            .filter(|g| g.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
            .ok_or(Error::SingularA { x })
    }

    /// Indices not flagged as degenerate.
    pub fn regular_indices(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|k| !self.degeneracy.iter().any(|d| d.block == *k))
            .collect()
    }

    /// Sub-system on the given indices, without degeneracy flags.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            self.field,
            self.interval,
            self.a.restrict(indices),
            self.c.restrict(indices),
            Vec::new(),
            self.tolerances,
        )
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let file: SpecFile =
            serde_json::from_str(src).map_err(|e| Error::Format(e.to_string()))?;
        file.into_spec()
    }
}

/// On-disk spec representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub field: ScalarField,
    pub interval: [f64; 2],
    pub dimension: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<EntrySource>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<EntrySource>>,
    #[serde(default)]
    pub degeneracy: Vec<Degeneracy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntrySource {
    Expr(String),
    Number(f64),
    Complex(ComplexEntrySource),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexEntrySource {
    #[serde(default = "zero_src")]
    pub re: String,
    #[serde(default = "zero_src")]
    pub im: String,
}

fn zero_src() -> String {
    "0".to_string()
}

impl EntrySource {
    fn to_entry(&self) -> Result<Entry> {
        match self {
            EntrySource::Expr(s) => Ok(Entry::real(expr::parse(s)?)),
            EntrySource::Number(v) => Ok(Entry::real(Expr::Num(*v))),
            EntrySource::Complex(c) => Entry::parse(&c.re, &c.im),
        }
    }
}

/// Build an `n x n` field from rows of file entries; `name` labels errors.
pub fn field_from_rows(name: &str, n: usize, rows: &[Vec<EntrySource>]) -> Result<CoefficientField> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Format(format!("{name} must be a {n}x{n} array")));
    }
    let entries = rows
        .iter()
        .flatten()
        .map(EntrySource::to_entry)
        .collect::<Result<Vec<_>>>()?;
    CoefficientField::new(n, entries)
}

impl SpecFile {
    pub fn into_spec(self) -> Result<FriedrichsSpec> {
        if self.dimension == 0 {
            return Err(Error::Format("dimension must be positive".into()));
        }
        let a = field_from_rows("A", self.dimension, &self.a)?;
        let c = field_from_rows("C", self.dimension, &self.c)?;
        let tolerances = self.tolerances.unwrap_or_default();
        if tolerances.rank_tol <= 0.0 || tolerances.psd_tol <= 0.0 || tolerances.ode_rtol <= 0.0 {
            return Err(Error::Format("tolerances must be positive".into()));
        }
        FriedrichsSpec::new(
            self.field,
            Interval::new(self.interval[0], self.interval[1])?,
            a,
            c,
            self.degeneracy,
            tolerances,
        )
    }
}

/// Skew/symmetric split of `T0` with the certified bounds of the symmetric part.
#[derive(Debug, Clone)]
pub struct PartsDecomposition {
    /// `(C + C* - A')/2`.
    pub s: CoefficientField,
    /// `(C - C* + A')/2`.
    pub skew_bounded: CoefficientField,
    /// Certified lower bound of `S` (grid minimum less a Lipschitz margin).
    pub mu: f64,
    /// Certified upper bound of `|S|`.
    pub lambda: f64,
    /// Smallest eigenvalue of `S` seen on the grid, and where.
    pub mu_grid: f64,
    pub mu_argmin: f64,
    pub grid_points: usize,
    pub grid_step: f64,
}

fn finite_matrix(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Check the Friedrichs axioms on the sample grid and return the split.
pub fn validate_spec(spec: &FriedrichsSpec) -> Result<PartsDecomposition> {
    let tol = &spec.tolerances;
    let iv = spec.interval;
    let count = tol.grid_points(iv.length());
    let xs = iv.grid(count);
    let h = iv.length() / (count - 1) as f64;
    let n = spec.n();

    let flagged_endpoints: Vec<f64> = spec.degeneracy.iter().map(|d| iv.endpoint(d.endpoint)).collect();

    let mut min_eigs = Vec::with_capacity(xs.len());
    let mut max_norms = Vec::with_capacity(xs.len());

    for &x in &xs {
        let a = spec.a_at(x);
        let c = spec.c_at(x);
        let ap = spec.a_prime_at(x);
        for (which, m) in [("A", &a), ("C", &c), ("A'", &ap)] {
            if !finite_matrix(m) {
                return Err(Error::Unbounded { which, x });
            }
        }
        if spec.field == ScalarField::Real {
            for (which, m) in [("A", &a), ("C", &c)] {
                let scale = 1.0 + max_abs(m);
                if m.iter().any(|z| z.im.abs() > 1e-14 * scale) {
                    return Err(Error::NotReal { which, x });
                }
            }
        }
        let scale = 1.0 + max_abs(&a);
        let deviation = linalg::hermitian_defect(&a);
        if deviation > 1e-12 * scale {
            return Err(Error::NotHermitian {
                which: "A",
                x,
                deviation,
            });
        }

        if !flagged_endpoints.contains(&x) {
            let det = a.clone().lu().determinant().norm();
            if det <= 1e-10 * scale.powi(n as i32) {
                return Err(Error::DegenerateOutsideFlags { x, det });
            }
        }

        let s = spec.s_at(x);
        debug_assert_eq!(linalg::hermitian_defect(&s), 0.0);
        let ev = linalg::hermitian_eigenvalues(&s);
        min_eigs.push(ev[0]);
        max_norms.push(ev.iter().map(|v| v.abs()).fold(0.0, f64::max));
    }

    check_degeneracy_structure(spec, &xs)?;

    let (argmin, mu_grid) = min_eigs
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty grid");
    let lambda_grid = max_norms.iter().copied().fold(0.0, f64::max);

    // Between samples the extreme eigenvalue can move by at most L h / 2.
    let lip = |v: &[f64]| {
        v.windows(2)
            .map(|w| (w[1] - w[0]).abs() / h)
            .fold(0.0, f64::max)
    };
    let mu = mu_grid - 0.5 * h * lip(&min_eigs);
    let lambda = lambda_grid + 0.5 * h * lip(&max_norms);

    if mu_grid <= 0.0 || mu <= 0.0 {
        return Err(Error::NotStrictlyPositive {
            x: xs[argmin],
            min_eigenvalue: mu_grid,
        });
    }

    Ok(PartsDecomposition {
        s: symmetric_field(spec),
        skew_bounded: skew_field(spec),
        mu,
        lambda,
        mu_grid,
        mu_argmin: xs[argmin],
        grid_points: count,
        grid_step: h,
    })
}

/// Same as [`validate_spec`]; the split is a pure function of `(A, C)`.
pub fn split_parts(spec: &FriedrichsSpec) -> Result<PartsDecomposition> {
    validate_spec(spec)
}

fn symmetric_field(spec: &FriedrichsSpec) -> CoefficientField {
    let c_adj = spec.c.adjoint();
    let sum = spec.c.map2(&c_adj, |p, q| p.add(q));
    sum.map2(spec.a_prime(), |p, q| p.sub(q).scale(0.5))
}

fn skew_field(spec: &FriedrichsSpec) -> CoefficientField {
    let c_adj = spec.c.adjoint();
    let diff = spec.c.map2(&c_adj, |p, q| p.sub(q));
    diff.map2(spec.a_prime(), |p, q| p.add(q).scale(0.5))
}

fn check_degeneracy_structure(spec: &FriedrichsSpec, xs: &[f64]) -> Result<()> {
    if spec.degeneracy.is_empty() {
        return Ok(());
    }
    let n = spec.n();
    let regular = spec.regular_indices();
    for d in &spec.degeneracy {
        let k = d.block;
        for &x in xs {
            let a = spec.a_at(x);
            let c = spec.c_at(x);
            let scale = 1.0 + max_abs(&a) + max_abs(&c);
            for j in (0..n).filter(|&j| j != k) {
                let off = a[(k, j)].norm() + a[(j, k)].norm() + c[(k, j)].norm() + c[(j, k)].norm();
                if off > 1e-14 * scale {
                    return Err(Error::InvalidDegeneracy(format!(
                        "block {k} is coupled to component {j} at x = {x}; degenerate blocks must be decoupled scalars"
                    )));
                }
            }
        }
        let e = spec.interval.endpoint(d.endpoint);
        let a_end = spec.a.get(k, k).eval(e);
        if a_end.norm() > 1e-12 {
            return Err(Error::InvalidDegeneracy(format!(
                "block {k} does not vanish at x = {e} (value {a_end})"
            )));
        }
        let other = spec.interval.endpoint(match d.endpoint {
            Endpoint::Left => Endpoint::Right,
            Endpoint::Right => Endpoint::Left,
        });
        if spec.a.get(k, k).eval(other).norm() <= 1e-12 {
            return Err(Error::InvalidDegeneracy(format!(
                "block {k} vanishes at both endpoints"
            )));
        }
    }
    if !regular.is_empty() {
        for d in &spec.degeneracy {
            let e = spec.interval.endpoint(d.endpoint);
            let sub = spec.a.restrict(&regular).eval(e);
            let det = sub.lu().determinant().norm();
            if det <= 1e-10 {
                return Err(Error::DegenerateOutsideFlags { x: e, det });
            }
        }
    }
    Ok(())
}
