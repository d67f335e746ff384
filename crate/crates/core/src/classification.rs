//! Realisations between the minimal and maximal operators, described by
//! their trace subspaces `V`.
//!
//! Every `V` with `V ∩ K = {0}` determines a linear map `U : G~ -> K` through
//! `U(p_k~(t)) = p_k(t)`, where `G~ = p_k~(V)` and `K`, `K~` are the kernel
//! traces of `T1`, `T~1`. The categories of `V` are decided twice: once from
//! the geometry of `V` against the boundary form, once from properties of
//! `U` in the Hilbert norms `sqrt([[.|.]])` on `K~` and `sqrt(-[[.|.]])` on
//! `K`. Disagreement between the two routes is reported as an error.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::{
    validate_spec, CoefficientField, FriedrichsSpec, Interval, ScalarField, Variant,
};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::ode;
use crate::tolerance::ToleranceConfig;
use crate::trace_space::{
    alpha_subspace, build_trace_form, compressed_spectrum, cone_test, kernel_traces,
    ortho_complement, project_kernels, Alpha, Cone, KernelBases, TraceForm, TraceSubspace,
};

/// Tolerance for subspace inclusions, isometry defects and the contraction
/// bound `|U| <= 1 + tol`.
pub const GEOMETRY_TOL: f64 = 1e-8;

/// `dim (V ∩ K)`.
pub fn kernel_intersection(v: &TraceSubspace, kb: &KernelBases, form: &TraceForm) -> usize {
    let stacked = linalg::hstack(v.basis(), kb.k.basis());
    let rank = linalg::rank(&stacked, form.tol.rank_tol);
    (v.dim() + kb.k.dim()).saturating_sub(rank)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BijectivityCheck {
    pub bijective: bool,
    /// Rank of `[V | K]`.
    pub stacked_rank: usize,
    pub dim_v: usize,
    pub d_plus: usize,
    pub effective_dim: usize,
}

/// `T1|_V` is bijective iff `V` and `K` are complementary in the trace space.
pub fn is_bijective(v: &TraceSubspace, kb: &KernelBases, form: &TraceForm) -> BijectivityCheck {
    let stacked = linalg::hstack(v.basis(), kb.k.basis());
    let stacked_rank = linalg::rank(&stacked, form.tol.rank_tol);
    let dim = form.dim();
    BijectivityCheck {
        bijective: stacked_rank == dim && v.dim() + kb.k.dim() == dim,
        stacked_rank,
        dim_v: v.dim(),
        d_plus: kb.k.dim(),
        effective_dim: dim,
    }
}

/// Basis of `basis`'s span that is orthonormal for `sign * [[.|.]]`.
/// Fails unless the form is definite with that sign on the span.
fn form_orthonormal(basis: &CMatrix, form: &TraceForm, sign: f64) -> Option<CMatrix> {
    if basis.ncols() == 0 {
        return Some(basis.clone());
    }
    let gram = (basis.adjoint() * form.q() * basis).scale(sign);
    let l = linalg::cholesky_lower(&gram)?;
    // basis * L^{-*}
    Some(linalg::solve_lower(&l, &basis.adjoint()).adjoint())
}

fn kernel_frame(kb: &KernelBases, form: &TraceForm) -> Result<CMatrix> {
    form_orthonormal(kb.k.basis(), form, -1.0).ok_or(Error::DecompositionDefect {
        rank: kb.k.dim(),
        expected: form.dim(),
    })
}

fn adjoint_kernel_frame(kb: &KernelBases, form: &TraceForm) -> Result<CMatrix> {
    form_orthonormal(kb.k_tilde.basis(), form, 1.0).ok_or(Error::DecompositionDefect {
        rank: kb.k_tilde.dim(),
        expected: form.dim(),
    })
}

/// The map `U : G~ -> K` in coordinates.
///
/// `domain_basis` is `[[.|.]]`-orthonormal and spans `G~`, `codomain_basis`
/// is `(-[[.|.]])`-orthonormal and spans `K`, so the Hilbert-space operator
/// norm of `U` is the spectral norm of `matrix`.
#[derive(Debug, Clone)]
pub struct ClassifyingMap {
    domain_basis: CMatrix,
    codomain_basis: CMatrix,
    matrix: CMatrix,
    pub norm_indefinite: f64,
}

impl ClassifyingMap {
    fn from_parts(domain_basis: CMatrix, codomain_basis: CMatrix, matrix: CMatrix) -> Self {
        let norm_indefinite = linalg::spectral_norm(&matrix);
        Self {
            domain_basis,
            codomain_basis,
            matrix,
            norm_indefinite,
        }
    }

    /// Map defined on the coordinates `domain` (orthonormal columns, size
    /// `d_minus x r`) with respect to an orthonormal frame of `K~`.
    /// `matrix` has size `d_plus x r`.
    pub fn from_frames(kb: &KernelBases, form: &TraceForm, domain: &CMatrix, matrix: CMatrix) -> Result<Self> {
        let f = kernel_frame(kb, form)?;
        let e_full = adjoint_kernel_frame(kb, form)?;
        let r = domain.ncols();
        if domain.nrows() != kb.k_tilde.dim() || matrix.nrows() != kb.k.dim() || matrix.ncols() != r {
            return Err(Error::InvalidSubspace(format!(
                "classifying map of shape {}x{} on a {}-dimensional domain does not fit d = ({}, {})",
                matrix.nrows(),
                matrix.ncols(),
                r,
                kb.d_plus,
                kb.d_minus
            )));
        }
        if (domain.adjoint() * domain - linalg::identity(r)).norm() > 1e-10 {
            return Err(Error::InvalidSubspace("domain coordinates are not orthonormal".into()));
        }
        Ok(Self::from_parts(&e_full * domain, f, matrix))
    }

    /// Dimension of `G~`.
    pub fn domain_dim(&self) -> usize {
        self.domain_basis.ncols()
    }

    pub fn domain_basis(&self) -> &CMatrix {
        &self.domain_basis
    }

    pub fn codomain_basis(&self) -> &CMatrix {
        &self.codomain_basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `|M* M - I|`, zero exactly when `U` is an isometry.
    pub fn isometry_defect(&self) -> f64 {
        let r = self.domain_dim();
        if r == 0 {
            return 0.0;
        }
        linalg::spectral_norm(&(self.matrix.adjoint() * &self.matrix - linalg::identity(r)))
    }

    pub fn is_isometry(&self) -> bool {
        self.isometry_defect() <= GEOMETRY_TOL
    }

    /// `dim U(G~)`.
    pub fn range_rank(&self, rank_tol: f64) -> usize {
        if self.domain_dim() == 0 {
            return 0;
        }
        // Absolute threshold: the matrix is in unit-scaled coordinates.
        linalg::singular_values(&self.matrix)
            .iter()
            .filter(|&&s| s > rank_tol)
            .count()
    }
}

/// Build `U` from `V`. Requires `V ∩ K = {0}`.
pub fn build_u(v: &TraceSubspace, kb: &KernelBases, form: &TraceForm) -> Result<ClassifyingMap> {
    let intersection = kernel_intersection(v, kb, form);
    if intersection > 0 {
        return Err(Error::WellDefinedness { intersection });
    }
    let f = kernel_frame(kb, form)?;
    let dim = form.dim();
    let r = v.dim();
    if r == 0 {
        return Ok(ClassifyingMap::from_parts(
            linalg::zeros(dim, 0),
            f,
            linalg::zeros(kb.k.dim(), 0),
        ));
    }
    let mut d = linalg::zeros(dim, r);
    let mut kout = linalg::zeros(dim, r);
    for j in 0..r {
        let t = v.basis().columns(j, 1).into_owned();
        let (k, kt) = project_kernels(&t, kb, form.tol.rank_tol)?;
        kout.set_column(j, &k.column(0));
        d.set_column(j, &kt.column(0));
    }
    let gram = d.adjoint() * form.q() * &d;
    let l = linalg::cholesky_lower(&gram).ok_or(Error::WellDefinedness {
        intersection: r - linalg::rank(&d, form.tol.rank_tol),
    })?;
    let e = linalg::solve_lower(&l, &d.adjoint()).adjoint();
    let ue = linalg::solve_lower(&l, &kout.adjoint()).adjoint();
    let matrix = f.adjoint() * (-form.q()) * ue;
    Ok(ClassifyingMap::from_parts(e, f, matrix))
}

/// `V_U = { U nu + nu : nu in G~ }` (traces of `W0` vanish).
pub fn build_v_from_u(u: &ClassifyingMap, form: &TraceForm) -> TraceSubspace {
    if u.domain_dim() == 0 {
        return TraceSubspace::zero(form.dim());
    }
    let graph = &u.codomain_basis * &u.matrix + &u.domain_basis;
    TraceSubspace::span(&graph, form.tol.rank_tol)
}

/// A self-adjoint-type realisation exists iff `d_plus = d_minus`; this builds
/// one from the identity between orthonormal frames of `K~` and `K`.
pub fn unitary_realisation(kb: &KernelBases, form: &TraceForm) -> Result<Option<(ClassifyingMap, TraceSubspace)>> {
    if kb.d_plus != kb.d_minus {
        return Ok(None);
    }
    let d = kb.d_minus;
    let u = ClassifyingMap::from_frames(kb, form, &linalg::identity(d), linalg::identity(d))?;
    let v = build_v_from_u(&u, form);
    Ok(Some((u, v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Categories {
    pub bijective: bool,
    pub in_w_plus: bool,
    pub signed_boundary_map: bool,
    /// `V ⊆ V^[⊥]`.
    pub symmetric: bool,
    /// `V = V^[⊥]`.
    pub selfadjoint_type: bool,
}

impl Categories {
    fn mismatch(&self, other: &Categories) -> Option<(&'static str, bool, bool)> {
        let pairs = [
            ("bijective", self.bijective, other.bijective),
            ("in_w_plus", self.in_w_plus, other.in_w_plus),
            ("signed_boundary_map", self.signed_boundary_map, other.signed_boundary_map),
            ("symmetric", self.symmetric, other.symmetric),
            ("selfadjoint_type", self.selfadjoint_type, other.selfadjoint_type),
        ];
        pairs.into_iter().find(|(_, a, b)| a != b)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub dim_v: usize,
    pub dim_v_perp: usize,
    pub kernel_intersection: usize,
    pub stacked_rank: usize,
    pub cone_v: Cone,
    pub cone_v_perp: Cone,
    /// Eigenvalues of the boundary form compressed to `V`.
    pub spectrum_v: Vec<f64>,
    pub spectrum_v_perp: Vec<f64>,
    /// Largest relative residual of `V`'s basis against `V^[⊥]`.
    pub symmetry_residual: f64,
    pub norm_indefinite: Option<f64>,
    pub isometry_defect: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RealisationReport {
    pub v: TraceSubspace,
    pub v_perp: TraceSubspace,
    pub categories: Categories,
    pub u: Option<ClassifyingMap>,
    pub diagnostics: Diagnostics,
}

fn subspace_route(v: &TraceSubspace, v_perp: &TraceSubspace, form: &TraceForm, bijective: bool) -> (Categories, Cone, Cone, f64) {
    let cone_v = cone_test(v, form);
    let cone_p = cone_test(v_perp, form);
    let residual = (0..v.dim())
        .map(|j| v_perp.distance_of(&v.basis().columns(j, 1).into_owned()))
        .fold(0.0, f64::max);
    let symmetric = residual <= GEOMETRY_TOL;
    let cats = Categories {
        bijective,
        in_w_plus: cone_v.is_nonneg(),
        signed_boundary_map: cone_v.is_nonneg() && cone_p.is_nonpos(),
        symmetric,
        selfadjoint_type: symmetric && v.dim() == v_perp.dim(),
    };
    (cats, cone_v, cone_p, residual)
}

fn operator_route(u: Option<&ClassifyingMap>, kb: &KernelBases, form: &TraceForm) -> Categories {
    let Some(u) = u else {
        return Categories {
            bijective: false,
            in_w_plus: false,
            signed_boundary_map: false,
            symmetric: false,
            selfadjoint_type: false,
        };
    };
    let full_domain = u.domain_dim() == kb.d_minus;
    let contraction = u.norm_indefinite <= 1.0 + GEOMETRY_TOL;
    let isometry = u.is_isometry();
    Categories {
        bijective: full_domain,
        in_w_plus: contraction,
        signed_boundary_map: full_domain && contraction,
        symmetric: isometry,
        selfadjoint_type: isometry && full_domain && u.range_rank(form.tol.rank_tol) == kb.d_plus,
    }
}

/// Decide the categories of the realisation with trace subspace `v`.
pub fn classify(v: &TraceSubspace, kb: &KernelBases, form: &TraceForm) -> Result<RealisationReport> {
    let v_perp = ortho_complement(v, form);
    let bij = is_bijective(v, kb, form);
    let (cats, cone_v, cone_v_perp, symmetry_residual) = subspace_route(v, &v_perp, form, bij.bijective);
    let intersection = kernel_intersection(v, kb, form);
    let u = if intersection == 0 { Some(build_u(v, kb, form)?) } else { None };
    let via_u = operator_route(u.as_ref(), kb, form);
    if let Some((flag, subspace, operator)) = cats.mismatch(&via_u) {
        return Err(Error::InternalInconsistency {
            flag,
            subspace,
            operator,
        });
    }
    let diagnostics = Diagnostics {
        dim_v: v.dim(),
        dim_v_perp: v_perp.dim(),
        kernel_intersection: intersection,
        stacked_rank: bij.stacked_rank,
        cone_v,
        cone_v_perp,
        spectrum_v: compressed_spectrum(v, form),
        spectrum_v_perp: compressed_spectrum(&v_perp, form),
        symmetry_residual,
        norm_indefinite: u.as_ref().map(|u| u.norm_indefinite),
        isometry_defect: u.as_ref().map(|u| u.isometry_defect()),
    };
    Ok(RealisationReport {
        v: v.clone(),
        v_perp,
        categories: cats,
        u,
        diagnostics,
    })
}

/// Number of subspaces `V` with `V = V^[⊥]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MCount {
    Zero,
    One,
    Two,
    Infinite,
}

impl MCount {
    pub fn as_str(self) -> &'static str {
        match self {
            MCount::Zero => "0",
            MCount::One => "1",
            MCount::Two => "2",
            MCount::Infinite => "infinite",
        }
    }
}

impl std::fmt::Display for MCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for MCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// Unitary maps between `K~` and `K`: none for unequal dimensions, the empty
/// map in dimension zero, `±1` for real lines and a circle otherwise.
pub fn count_mutually_adjoint(d_plus: usize, d_minus: usize, field: ScalarField) -> MCount {
    match (d_plus, d_minus) {
        (p, m) if p != m => MCount::Zero,
        (0, 0) => MCount::One,
        (1, 1) if field == ScalarField::Real => MCount::Two,
        _ => MCount::Infinite,
    }
}

#[derive(Debug, Clone)]
pub struct AlphaRow {
    pub alpha: Alpha,
    pub report: RealisationReport,
}

#[derive(Debug, Clone)]
pub struct AlphaSweep {
    /// `u(b) / u(a)` for the kernel of `T1`, read off the fundamental solution.
    pub alpha_beta: Complex64,
    /// The same quantity from `exp(-int c/a)` by quadrature.
    pub alpha_beta_quadrature: Complex64,
    pub rows: Vec<AlphaRow>,
}

impl AlphaSweep {
    /// Grid points whose realisation is not bijective.
    pub fn non_bijective(&self) -> Vec<Alpha> {
        self.rows
            .iter()
            .filter(|r| !r.report.categories.bijective)
            .map(|r| r.alpha)
            .collect()
    }
}

/// Classify `V_alpha = { u(b) = alpha u(a) }` over a grid of parameters.
pub fn sweep_alpha(spec: &FriedrichsSpec, alphas: &[Alpha]) -> Result<AlphaSweep> {
    if spec.n() != 1 || spec.is_degenerate() {
        return Err(Error::NotScalar(spec.n()));
    }
    let form = build_trace_form(spec);
    let kb = kernel_traces(spec, &form)?;
    let b = spec.interval.b;
    let alpha_beta = ode::fundamental_matrix(spec, Variant::Maximal)?.eval(b)[(0, 0)];

    let breaks = spec.interval.grid(65);
    let exponent = ode::integrate_piecewise(
        |x| spec.c_at(x)[(0, 0)] / spec.a_at(x)[(0, 0)],
        &breaks,
        1e-13,
    );
    let alpha_beta_quadrature = (-exponent.value).exp();
    let scale = alpha_beta.norm().max(1.0);
    if (alpha_beta - alpha_beta_quadrature).norm() > 1e-8 * scale {
        return Err(Error::CrossCheck {
            quantity: "alpha_beta",
            primary: alpha_beta.norm(),
            secondary: alpha_beta_quadrature.norm(),
        });
    }
    let rows = alphas
        .par_iter()
        .map(|&alpha| {
            let v = alpha_subspace(&form, alpha)?;
            Ok(AlphaRow {
                alpha,
                report: classify(&v, &kb, &form)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AlphaSweep {
        alpha_beta,
        alpha_beta_quadrature,
        rows,
    })
}

/// A formally symmetric first-order operator
/// `L u = -i (M u' + M' u / 2) + R u` with Hermitian `M`, `R`.
#[derive(Debug, Clone)]
pub struct SymmetricOperator {
    pub interval: Interval,
    pub m: CoefficientField,
    pub r: CoefficientField,
}

fn check_hermitian(which: &'static str, field: &CoefficientField, interval: Interval, grid: usize) -> Result<()> {
    for x in interval.grid(grid) {
        let m = field.eval(x);
        let deviation = linalg::hermitian_defect(&m);
        let scale = 1.0 + m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if deviation > 1e-12 * scale {
            return Err(Error::NotHermitian { which, x, deviation });
        }
    }
    Ok(())
}

/// Friedrichs system `T0 = iL - iS1 + S2`: `A = M`, `C = M'/2 + S2 + i(R - S1)`.
///
/// Its kernel dimensions are the deficiency indices of `L` and its
/// self-adjoint-type realisations are the self-adjoint realisations of `L`.
pub fn symmetric_adapter(op: &SymmetricOperator, s1: &CoefficientField, s2: &CoefficientField) -> Result<FriedrichsSpec> {
    let n = op.m.n();
    if op.r.n() != n || s1.n() != n || s2.n() != n {
        return Err(Error::Format("M, R, S1 and S2 must have the same size".into()));
    }
    let tol = ToleranceConfig::default();
    let grid = tol.grid_points(op.interval.length());
    for (which, f) in [("M", &op.m), ("R", &op.r), ("S1", s1), ("S2", s2)] {
        check_hermitian(which, f, op.interval, grid)?;
    }
    let skew = op.r.map2(s1, |r, s| r.sub(s).times_i());
    let c = op
        .m
        .derivative()
        .map2(s2, |dm, s| dm.scale(0.5).add(s))
        .map2(&skew, |p, q| p.add(q));
    let spec = FriedrichsSpec::new(ScalarField::Complex, op.interval, op.m.clone(), c, Vec::new(), tol)?;
    validate_spec(&spec)?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn setup(spec: &FriedrichsSpec) -> (TraceForm, KernelBases) {
        let form = build_trace_form(spec);
        let kb = kernel_traces(spec, &form).unwrap();
        (form, kb)
    }

    fn beta_one() -> FriedrichsSpec {
        FriedrichsSpec::scalar("1", "1", (0.0, 1.0)).unwrap()
    }

    fn classify_alpha(spec: &FriedrichsSpec, alpha: Alpha) -> RealisationReport {
        let (form, kb) = setup(spec);
        classify(&alpha_subspace(&form, alpha).unwrap(), &kb, &form).unwrap()
    }

    #[test]
    fn bijectivity_on_alpha_lines() {
        let spec = beta_one();
        let (form, kb) = setup(&spec);
        let e_inv = (-1.0f64).exp();
        assert!(is_bijective(&alpha_subspace(&form, Alpha::real(2.0)).unwrap(), &kb, &form).bijective);
        assert!(!is_bijective(&alpha_subspace(&form, Alpha::real(e_inv)).unwrap(), &kb, &form).bijective);
        assert!(!is_bijective(&kb.k, &kb, &form).bijective);
        assert!(is_bijective(&kb.k_tilde, &kb, &form).bijective);
    }

    #[test]
    fn u_for_special_subspaces() {
        let spec = beta_one();
        let (form, kb) = setup(&spec);
        // V = K~: U vanishes on all of K~.
        let u = build_u(&kb.k_tilde, &kb, &form).unwrap();
        assert_eq!(u.domain_dim(), 1);
        assert!(u.matrix().norm() < 1e-12);
        assert!(build_v_from_u(&u, &form).distance(&kb.k_tilde) < 1e-10);
        // V = {0}: empty map.
        let u = build_u(&TraceSubspace::zero(2), &kb, &form).unwrap();
        assert_eq!(u.domain_dim(), 0);
        assert_eq!(build_v_from_u(&u, &form).dim(), 0);
        // V = K: not defined.
        assert!(matches!(build_u(&kb.k, &kb, &form), Err(Error::WellDefinedness { intersection: 1 })));
    }

    #[test]
    fn u_for_alpha_one_by_hand() {
        // Kernels: k = (1, 1/e), k~ = (1, e); write (1, 1) = s k + r k~.
        let spec = beta_one();
        let (form, kb) = setup(&spec);
        let e = 1f64.exp();
        // s + r = 1, s/e + r e = 1
        let r = (1.0 - 1.0 / e) / (e - 1.0 / e);
        let s = 1.0 - r;
        // Form norms: -[[k|k]] = 1 - e^-2, [[k~|k~]] = e^2 - 1.
        let nk = (1.0 - e.powi(-2)).sqrt();
        let nkt = (e * e - 1.0).sqrt();
        let expected = (s * nk) / (r * nkt);
        let u = build_u(&alpha_subspace(&form, Alpha::real(1.0)).unwrap(), &kb, &form).unwrap();
        assert!((u.norm_indefinite - expected).abs() < 1e-9);
        assert!((u.norm_indefinite - 1.0).abs() < 1e-9);
        let v = build_v_from_u(&u, &form);
        let target = TraceSubspace::span(&CMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(1.0, 0.0)]), 1e-10);
        assert!(v.distance(&target) < 1e-10);
    }

    #[test]
    fn alpha_categories() {
        let spec = beta_one();
        let r = classify_alpha(&spec, Alpha::real(-1.0));
        assert!(r.categories.selfadjoint_type && r.categories.signed_boundary_map);
        let r = classify_alpha(&spec, Alpha::real(0.5));
        assert!(r.categories.bijective && !r.categories.signed_boundary_map && !r.categories.in_w_plus);
        let r = classify_alpha(&spec, Alpha::Infinity);
        assert!(r.categories.bijective && r.categories.signed_boundary_map && !r.categories.symmetric);
        let r = classify_alpha(&spec, Alpha::Finite(c(0.0, 1.0)));
        // Real field still admits complex traces in the trace model; only the
        // counting distinguishes fields.
        assert!(r.categories.selfadjoint_type);
    }

    #[test]
    fn counting_table() {
        use ScalarField::*;
        assert_eq!(count_mutually_adjoint(1, 1, Real), MCount::Two);
        assert_eq!(count_mutually_adjoint(1, 1, Complex), MCount::Infinite);
        assert_eq!(count_mutually_adjoint(0, 0, Real), MCount::One);
        assert_eq!(count_mutually_adjoint(2, 1, Real), MCount::Zero);
        assert_eq!(count_mutually_adjoint(3, 3, Real), MCount::Infinite);
        assert_eq!(serde_json::to_string(&MCount::Infinite).unwrap(), "\"infinite\"");
    }

    #[test]
    fn sweep_reports_alpha_beta() {
        let spec = beta_one();
        let e_inv = (-1.0f64).exp();
        let sweep = sweep_alpha(&spec, &[Alpha::real(2.0), Alpha::real(e_inv), Alpha::Infinity]).unwrap();
        assert!((sweep.alpha_beta.re - e_inv).abs() < 1e-8);
        assert_eq!(sweep.non_bijective(), vec![Alpha::real(e_inv)]);

        let spec = FriedrichsSpec::scalar("1", "1 + x", (0.0, 1.0)).unwrap();
        let sweep = sweep_alpha(&spec, &[]).unwrap();
        assert!((sweep.alpha_beta.re - (-1.5f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn unitary_existence() {
        let spec = beta_one();
        let (form, kb) = setup(&spec);
        let (_, v) = unitary_realisation(&kb, &form).unwrap().unwrap();
        assert!(classify(&v, &kb, &form).unwrap().categories.selfadjoint_type);
    }

    #[test]
    fn adapter_for_minus_i_d_dx() {
        let op = SymmetricOperator {
            interval: Interval::new(0.0, 1.0).unwrap(),
            m: CoefficientField::from_strs(1, &["1"]).unwrap(),
            r: CoefficientField::from_strs(1, &["0"]).unwrap(),
        };
        let s1 = CoefficientField::from_strs(1, &["0"]).unwrap();
        let s2 = CoefficientField::from_strs(1, &["1"]).unwrap();
        let spec = symmetric_adapter(&op, &s1, &s2).unwrap();
        assert_eq!(spec.field, ScalarField::Complex);
        assert!((spec.c_at(0.3)[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        let (_, kb) = setup(&spec);
        assert_eq!((kb.d_plus, kb.d_minus), (1, 1));
        assert_eq!(count_mutually_adjoint(kb.d_plus, kb.d_minus, spec.field), MCount::Infinite);

        let bad = CoefficientField::from_strs(1, &["x - 0.5"]).unwrap();
        assert!(matches!(symmetric_adapter(&op, &s1, &bad), Err(Error::NotStrictlyPositive { .. })));
    }
}
