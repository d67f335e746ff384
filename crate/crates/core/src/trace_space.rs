//! Boundary traces `(u(a), u(b))` and the indefinite boundary form on them.
//!
//! Every subspace between the minimal and the maximal domain is determined by
//! its traces, so all statements about realisations reduce to linear algebra
//! in the effective trace space with the Hermitian form
//! `Q = blockdiag(-A(a), A(b))`. Coordinates belonging to a degenerate scalar
//! block at its vanishing endpoint are deleted.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::{Endpoint, FriedrichsSpec, ScalarField, Variant};
use crate::defect::{self, SingularBlockReport};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::ode;
use crate::tolerance::ToleranceConfig;

/// Hermitian matrix of the boundary form on the effective trace space.
#[derive(Debug, Clone)]
pub struct TraceForm {
    q: CMatrix,
    n: usize,
    /// Full-trace index (`0..2n`, left block first) of each effective coordinate.
    kept: Vec<usize>,
    pub field: ScalarField,
    pub tol: ToleranceConfig,
}

impl TraceForm {
    pub fn q(&self) -> &CMatrix {
        &self.q
    }

    /// Effective trace dimension.
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn q_norm(&self) -> f64 {
        linalg::spectral_norm(&self.q)
    }

    fn psd_threshold(&self) -> f64 {
        self.tol.psd_tol * self.q_norm().max(f64::MIN_POSITIVE)
    }

    /// `[[t|s]] = s* Q t`.
    pub fn form(&self, t: &CMatrix, s: &CMatrix) -> Complex64 {
        (s.adjoint() * &self.q * t)[(0, 0)]
    }

    /// Counts of positive, negative and zero eigenvalues of `Q`.
    pub fn signature(&self) -> (usize, usize, usize) {
        let thr = self.psd_threshold();
        let ev = linalg::hermitian_eigenvalues(&self.q);
        let pos = ev.iter().filter(|&&v| v > thr).count();
        let neg = ev.iter().filter(|&&v| v < -thr).count();
        (pos, neg, ev.len() - pos - neg)
    }

    /// Map a full trace vector of length `2n` to effective coordinates.
    /// Deleted coordinates must be zero.
    pub fn restrict_vector(&self, full: &[Complex64]) -> Result<CMatrix> {
        if full.len() != 2 * self.n {
            return Err(Error::InvalidSubspace(format!(
                "trace vectors must have length {}, got {}",
                2 * self.n,
                full.len()
            )));
        }
        for (idx, v) in full.iter().enumerate() {
            if !self.kept.contains(&idx) && v.norm() != 0.0 {
                return Err(Error::InvalidSubspace(format!(
                    "trace coordinate {idx} is not defined at a degenerate endpoint"
                )));
            }
        }
        Ok(DMatrix::from_fn(self.dim(), 1, |i, _| full[self.kept[i]]))
    }

    /// Inverse of [`restrict_vector`](Self::restrict_vector), deleted coordinates set to zero.
    pub fn expand_vector(&self, eff: &[Complex64]) -> Vec<Complex64> {
        let mut full = vec![Complex64::new(0.0, 0.0); 2 * self.n];
        for (i, &idx) in self.kept.iter().enumerate() {
            full[idx] = eff[i];
        }
        full
    }
}

pub fn build_trace_form(spec: &FriedrichsSpec) -> TraceForm {
    let n = spec.n();
    let (a, b) = (spec.interval.a, spec.interval.b);
    let mut full = linalg::zeros(2 * n, 2 * n);
    full.view_mut((0, 0), (n, n)).copy_from(&(-spec.a_at(a)));
    full.view_mut((n, n), (n, n)).copy_from(&spec.a_at(b));
    let deleted: Vec<usize> = spec
        .degeneracy
        .iter()
        .map(|d| match d.endpoint {
            Endpoint::Left => d.block,
            Endpoint::Right => n + d.block,
        })
        .collect();
    let kept: Vec<usize> = (0..2 * n).filter(|i| !deleted.contains(i)).collect();
    let q = DMatrix::from_fn(kept.len(), kept.len(), |i, j| full[(kept[i], kept[j])]);
    TraceForm {
        q: linalg::hermitian_part(&q),
        n,
        kept,
        field: spec.field,
        tol: spec.tolerances,
    }
}

/// A subspace of the effective trace space, stored by an orthonormal basis.
#[derive(Debug, Clone)]
pub struct TraceSubspace {
    basis: CMatrix,
}

impl TraceSubspace {
    /// Column span of `vectors`, rank decided at `rank_tol * sigma_max`.
    pub fn span(vectors: &CMatrix, rank_tol: f64) -> Self {
        Self {
            basis: linalg::orthonormal_basis(vectors, rank_tol),
        }
    }

    pub fn from_orthonormal(basis: CMatrix) -> Self {
        Self { basis }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            basis: linalg::zeros(dim, 0),
        }
    }

    pub fn full(dim: usize) -> Self {
        Self {
            basis: linalg::identity(dim),
        }
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Largest principal angle to `other`.
    pub fn distance(&self, other: &TraceSubspace) -> f64 {
        linalg::subspace_distance(&self.basis, &other.basis)
    }

    /// Relative distance of a trace vector to this subspace.
    pub fn distance_of(&self, t: &CMatrix) -> f64 {
        linalg::relative_distance_to_span(t, &self.basis)
    }

    /// `self ⊆ other` up to `tol` (largest relative residual of basis vectors).
    pub fn is_subset_of(&self, other: &TraceSubspace, tol: f64) -> bool {
        (0..self.dim()).all(|j| other.distance_of(&self.basis.columns(j, 1).into_owned()) <= tol)
    }
}

/// Traces of `ker T1` and `ker T~1` with the deficiency indices.
#[derive(Debug, Clone)]
pub struct KernelBases {
    pub k: TraceSubspace,
    pub k_tilde: TraceSubspace,
    /// Raw trace vectors (columns) before orthonormalization.
    pub k_raw: CMatrix,
    pub k_tilde_raw: CMatrix,
    /// `dim ker T1`.
    pub d_plus: usize,
    /// `dim ker T~1`.
    pub d_minus: usize,
    pub singular_blocks: Vec<SingularBlockReport>,
}

pub fn kernel_traces(spec: &FriedrichsSpec, form: &TraceForm) -> Result<KernelBases> {
    let n = spec.n();
    let regular = spec.regular_indices();
    let mut k_cols: Vec<Vec<Complex64>> = Vec::new();
    let mut kt_cols: Vec<Vec<Complex64>> = Vec::new();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);

    if !regular.is_empty() {
        let sub = if spec.is_degenerate() {
            spec.restrict(&regular)?
        } else {
            spec.clone()
        };
        for (variant, cols) in [(Variant::Maximal, &mut k_cols), (Variant::MaximalAdjoint, &mut kt_cols)] {
            let phi = ode::fundamental_matrix(&sub, variant)?;
            let end = phi.eval(spec.interval.b);
            for j in 0..regular.len() {
                let mut full = vec![zero; 2 * n];
                full[regular[j]] = one;
                for (i, &ri) in regular.iter().enumerate() {
                    full[n + ri] = end[(i, j)];
                }
                cols.push(full);
            }
        }
    }

    let mut singular_blocks = Vec::new();
    for d in &spec.degeneracy {
        let report = defect::analyze_block(spec, d.block, d.endpoint)?;
        let kept_idx = match d.endpoint {
            Endpoint::Right => d.block,
            Endpoint::Left => n + d.block,
        };
        let mut unit = vec![zero; 2 * n];
        unit[kept_idx] = one;
        if report.maximal_in_l2 {
            k_cols.push(unit.clone());
        }
        if report.adjoint_in_l2 {
            kt_cols.push(unit);
        }
        singular_blocks.push(report);
    }

    let to_matrix = |cols: &[Vec<Complex64>]| -> Result<CMatrix> {
        let mut m = linalg::zeros(form.dim(), cols.len());
        for (j, col) in cols.iter().enumerate() {
            m.set_column(j, &form.restrict_vector(col)?.column(0));
        }
        Ok(m)
    };
    let k_raw = to_matrix(&k_cols)?;
    let k_tilde_raw = to_matrix(&kt_cols)?;

    let k = TraceSubspace::span(&k_raw, form.tol.rank_tol);
    let k_tilde = TraceSubspace::span(&k_tilde_raw, form.tol.rank_tol);
    let both = linalg::hstack(k.basis(), k_tilde.basis());
    let rank = linalg::rank(&both, form.tol.rank_tol);
    if k.dim() + k_tilde.dim() != form.dim() || rank != form.dim() {
        return Err(Error::DecompositionDefect {
            rank,
            expected: form.dim(),
        });
    }
    Ok(KernelBases {
        d_plus: k.dim(),
        d_minus: k_tilde.dim(),
        k,
        k_tilde,
        k_raw,
        k_tilde_raw,
        singular_blocks,
    })
}

/// `V^[⊥] = { t : [[t|v]] = 0 for all v in V }`.
pub fn ortho_complement(v: &TraceSubspace, form: &TraceForm) -> TraceSubspace {
    if v.dim() == 0 {
        return TraceSubspace::full(form.dim());
    }
    let m = v.basis().adjoint() * form.q();
    TraceSubspace::from_orthonormal(linalg::null_space(&m, form.tol.rank_tol))
}

/// Sign behaviour of the boundary form restricted to a subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cone {
    Nonneg,
    Nonpos,
    /// The form vanishes identically on the subspace.
    Neutral,
    Neither,
}

impl Cone {
    /// `V ⊆ W+`.
    pub fn is_nonneg(self) -> bool {
        matches!(self, Cone::Nonneg | Cone::Neutral)
    }

    /// `V ⊆ W-`.
    pub fn is_nonpos(self) -> bool {
        matches!(self, Cone::Nonpos | Cone::Neutral)
    }
}

/// Eigenvalues of the compressed form `B* Q B` on an orthonormal basis.
pub fn compressed_spectrum(v: &TraceSubspace, form: &TraceForm) -> Vec<f64> {
    let b = v.basis();
    linalg::hermitian_eigenvalues(&(b.adjoint() * form.q() * b))
}

pub fn cone_test(v: &TraceSubspace, form: &TraceForm) -> Cone {
    let thr = form.psd_threshold();
    let ev = compressed_spectrum(v, form);
    let nonneg = ev.iter().all(|&e| e >= -thr);
    let nonpos = ev.iter().all(|&e| e <= thr);
    match (nonneg, nonpos) {
        (true, true) => Cone::Neutral,
        (true, false) => Cone::Nonneg,
        (false, true) => Cone::Nonpos,
        (false, false) => Cone::Neither,
    }
}

/// Split a trace vector as `t = k + k~` with `k` in `ker T1` and `k~` in `ker T~1`.
pub fn project_kernels(t: &CMatrix, kb: &KernelBases, rank_tol: f64) -> Result<(CMatrix, CMatrix)> {
    let kmat = kb.k.basis();
    let ktmat = kb.k_tilde.basis();
    let both = linalg::hstack(kmat, ktmat);
    let dim = both.nrows();
    let rank = linalg::rank(&both, rank_tol);
    if both.ncols() != dim || rank != dim {
        return Err(Error::DecompositionDefect { rank, expected: dim });
    }
    let coeffs = both
        .clone()
        .lu()
        .solve(t)
        .ok_or(Error::DecompositionDefect { rank, expected: dim })?;
    let dk = kmat.ncols();
    let k = kmat * coeffs.rows(0, dk);
    let kt = ktmat * coeffs.rows(dk, dim - dk);
    let resid = (t - &k - &kt).norm();
    if resid > 1e-10 * t.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::DecompositionDefect { rank, expected: dim });
    }
    Ok((k, kt))
}

/// Scalar boundary parameter in `u(b) = alpha u(a)`; `Infinity` means `u(a) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Finite(Complex64),
    Infinity,
}

impl Alpha {
    pub fn real(v: f64) -> Self {
        Alpha::Finite(Complex64::new(v, 0.0))
    }

    /// `1 / conj(alpha)` with `1/0 = inf` and `1/inf = 0`: the parameter of
    /// the boundary-form complement.
    pub fn adjoint_partner(self) -> Alpha {
        match self {
            Alpha::Infinity => Alpha::real(0.0),
            Alpha::Finite(z) if z.norm() == 0.0 => Alpha::Infinity,
            Alpha::Finite(z) => Alpha::Finite(z.conj().inv()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Alpha::Infinity => "inf".to_string(),
            Alpha::Finite(z) if z.im == 0.0 => format!("{}", z.re),
            Alpha::Finite(z) => format!("{}{:+}i", z.re, z.im),
        }
    }
}

impl std::str::FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s, "inf" | "infinity" | "∞") {
            return Ok(Alpha::Infinity);
        }
        let z: Complex64 = s
            .parse()
            .map_err(|_| Error::Format(format!("invalid alpha `{s}`")))?;
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Format(format!("invalid alpha `{s}`")));
        }
        Ok(Alpha::Finite(z))
    }
}

/// `V_alpha = { u(b) = alpha u(a) }` for a scalar, non-degenerate spec.
pub fn alpha_subspace(form: &TraceForm, alpha: Alpha) -> Result<TraceSubspace> {
    if form.n() != 1 || form.dim() != 2 {
        return Err(Error::NotScalar(form.n()));
    }
    let v = match alpha {
        Alpha::Finite(z) => DMatrix::from_column_slice(2, 1, &[Complex64::new(1.0, 0.0), z]),
        Alpha::Infinity => DMatrix::from_column_slice(2, 1, &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]),
    };
    Ok(TraceSubspace::span(&v, form.tol.rank_tol))
}

/// A complex number in JSON: either a plain number or `{"re": .., "im": ..}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Complex {
        #[serde(default)]
        re: f64,
        #[serde(default)]
        im: f64,
    },
}

impl ComplexValue {
    pub fn value(self) -> Complex64 {
        match self {
            ComplexValue::Real(v) => Complex64::new(v, 0.0),
            ComplexValue::Complex { re, im } => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaValue {
    Token(String),
    Number(ComplexValue),
}

/// Boundary-condition block as it appears in input files and on the command line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BoundaryCondition {
    /// Span of full trace vectors `(u(a), u(b))` of length `2n`.
    Span { vectors: Vec<Vec<ComplexValue>> },
    /// `{ t : Ma t_a + Mb t_b = 0 }`.
    Matrices {
        #[serde(rename = "Ma")]
        ma: Vec<Vec<ComplexValue>>,
        #[serde(rename = "Mb")]
        mb: Vec<Vec<ComplexValue>>,
    },
    /// Scalar shorthand `u(b) = alpha u(a)`.
    Alpha { alpha: AlphaValue },
}

impl BoundaryCondition {
    pub fn from_json(src: &str) -> Result<Self> {
        serde_json::from_str(src).map_err(|e| Error::InvalidSubspace(e.to_string()))
    }

    pub fn alpha(&self) -> Result<Option<Alpha>> {
        match self {
            BoundaryCondition::Alpha { alpha } => Ok(Some(match alpha {
                AlphaValue::Token(s) => s.parse()?,
                AlphaValue::Number(z) => Alpha::Finite(z.value()),
            })),
            _ => Ok(None),
        }
    }

    pub fn to_subspace(&self, form: &TraceForm) -> Result<TraceSubspace> {
        let n = form.n();
        match self {
            BoundaryCondition::Span { vectors } => {
                let mut m = linalg::zeros(form.dim(), vectors.len());
                for (j, v) in vectors.iter().enumerate() {
                    let full: Vec<Complex64> = v.iter().map(|z| z.value()).collect();
                    m.set_column(j, &form.restrict_vector(&full)?.column(0));
                }
                Ok(TraceSubspace::span(&m, form.tol.rank_tol))
            }
            BoundaryCondition::Matrices { ma, mb } => {
                if ma.len() != mb.len() || ma.iter().chain(mb).any(|row| row.len() != n) {
                    return Err(Error::InvalidSubspace(format!(
                        "Ma and Mb must both be r x {n} with the same r"
                    )));
                }
                let rows = ma.len();
                let full = DMatrix::from_fn(rows, 2 * n, |i, j| {
                    if j < n {
                        ma[i][j].value()
                    } else {
                        mb[i][j - n].value()
                    }
                });
                let eff = DMatrix::from_fn(rows, form.dim(), |i, j| full[(i, form.kept()[j])]);
                if rows == 0 {
                    return Ok(TraceSubspace::full(form.dim()));
                }
                Ok(TraceSubspace::from_orthonormal(linalg::null_space(&eff, form.tol.rank_tol)))
            }
            BoundaryCondition::Alpha { .. } => alpha_subspace(form, self.alpha()?.expect("alpha kind")),
        }
    }
}
