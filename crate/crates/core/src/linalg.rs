//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Thin SVD `m = U diag(s) V*` with `s` in descending order.
///
/// Computed by one-sided (Hestenes) Jacobi rotations. nalgebra's complex
/// SVD loses orthogonality on exactly rank-deficient inputs such as
/// projectors, which are routine here. Left singular vectors belonging to
/// zero singular values are left as zero columns.
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 60;

pub fn svd(m: &CMatrix) -> Svd {
    if m.ncols() > m.nrows() {
        let t = svd(&m.adjoint());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let mut v = identity(cols);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                // Rotate the pair (a_p, a_q e^{-i phi}), which has a real inner product.
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let xp = mat[(i, p)];
                        let xq = mat[(i, q)] * phase.conj();
                        mat[(i, p)] = xp * cs - xq * sn;
                        mat[(i, q)] = (xp * sn + xq * cs) * phase;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(usize, f64)> = (0..cols).map(|j| (j, a.column(j).norm())).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let mut u = zeros(rows, cols);
    let mut vs = zeros(cols, cols);
    let mut s = Vec::with_capacity(cols);
    for (k, &(j, sigma)) in order.iter().enumerate() {
        if sigma > 0.0 {
            u.set_column(k, &a.column(j).unscale(sigma));
        }
        vs.set_column(k, &v.column(j));
        s.push(sigma);
    }
    Svd { u, s, v: vs }
}

/// Singular values in descending order. Empty matrices have none.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    svd(m).s
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Numerical rank with threshold `rel_tol * sigma_max`.
pub fn rank(m: &CMatrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        None => 0,
        Some(&smax) if smax <= f64::MIN_POSITIVE => 0,
        Some(&smax) => s.iter().filter(|&&v| v > rel_tol * smax).count(),
    }
}

/// Orthonormal basis of the column space of `m`.
pub fn orthonormal_basis(m: &CMatrix, rel_tol: f64) -> CMatrix {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return zeros(rows, 0);
    }
    let Svd { u, s, .. } = svd(m);
    let smax = s[0];
    if smax <= f64::MIN_POSITIVE {
        return zeros(rows, 0);
    }
    let keep: Vec<usize> = (0..s.len()).filter(|&k| s[k] > rel_tol * smax).collect();
    let mut out = zeros(rows, keep.len());
    for (j, &k) in keep.iter().enumerate() {
        out.set_column(j, &u.column(k));
    }
    out
}

/// Orthonormal basis of the orthogonal complement (standard inner product)
/// of the column space of the orthonormal matrix `basis`.
pub fn orthogonal_complement(basis: &CMatrix, dim: usize) -> CMatrix {
    if basis.ncols() == 0 {
        return identity(dim);
    }
    let proj = identity(dim) - basis * basis.adjoint();
    let Svd { u, s, .. } = svd(&proj);
    let keep: Vec<usize> = (0..s.len()).filter(|&k| s[k] > 0.5).collect();
    let mut out = zeros(dim, keep.len());
    for (j, &k) in keep.iter().enumerate() {
        out.set_column(j, &u.column(k));
    }
    out
}

/// Orthonormal basis of `{ t : m t = 0 }`.
pub fn null_space(m: &CMatrix, rel_tol: f64) -> CMatrix {
    let row_space = orthonormal_basis(&m.adjoint(), rel_tol);
    orthogonal_complement(&row_space, m.ncols())
}

/// Eigenvalues of a Hermitian matrix in ascending order. The input is
/// symmetrized first.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    if h.nrows() == 0 {
        return Vec::new();
    }
    let sym = hermitian_part(h);
    let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest deviation `|m - m*|` entrywise.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest principal angle between two subspaces given by orthonormal
/// bases. Subspaces of different dimension are at angle pi/2.
pub fn subspace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    // sin(theta_max) = |(I - B B*) A|, accurate for small angles.
    let resid = a - b * (b.adjoint() * a);
    spectral_norm(&resid).min(1.0).asin()
}

/// Distance of a vector to the column space of an orthonormal basis,
/// relative to the vector's norm.
pub fn relative_distance_to_span(v: &CMatrix, basis: &CMatrix) -> f64 {
    let norm = v.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let resid = if basis.ncols() == 0 {
        v.clone()
    } else {
        v - basis * (basis.adjoint() * v)
    };
    resid.norm() / norm
}

/// 2-norm condition number of a square matrix.
pub fn condition_number(m: &CMatrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

pub fn hstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    out
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky_lower(h: &CMatrix) -> Option<CMatrix> {
    hermitian_part(h).cholesky().map(|ch| ch.l())
}

/// Solve `l x = rhs` for lower-triangular `l`.
pub fn solve_lower(l: &CMatrix, rhs: &CMatrix) -> CMatrix {
    l.solve_lower_triangular(rhs)
        .expect("nonsingular triangular factor")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_row_iterator(rows, cols, data.iter().map(|&v| c(v, 0.0)))
    }

    #[test]
    fn rank_and_null_space() {
        let m = real(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(rank(&m, 1e-10), 1);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-12);
        assert!((ns.adjoint() * &ns - identity(2)).norm() < 1e-12);
    }

    #[test]
    fn distances() {
        let a = orthonormal_basis(&real(2, 1, &[1.0, 0.0]), 1e-10);
        let b = orthonormal_basis(&real(2, 1, &[1.0, 1.0]), 1e-10);
        let d = subspace_distance(&a, &b);
        assert!((d - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert_eq!(subspace_distance(&a, &a), 0.0);
        assert!(relative_distance_to_span(&real(2, 1, &[3.0, 0.0]), &a) < 1e-15);
    }

    #[test]
    fn complement_dimensions() {
        let b = orthonormal_basis(&real(3, 1, &[1.0, 1.0, 0.0]), 1e-10);
        let comp = orthogonal_complement(&b, 3);
        assert_eq!(comp.ncols(), 2);
        assert!((b.adjoint() * &comp).norm() < 1e-12);
        assert_eq!(orthogonal_complement(&zeros(3, 0), 3).ncols(), 3);
    }

    #[test]
    fn svd_of_projectors() {
        // Rank-deficient Hermitian input where a naive complex SVD drifts.
        let v = CMatrix::from_column_slice(2, 1, &[c(0.2014, 0.6476), c(-0.1075, 0.7270)]);
        let b = orthonormal_basis(&v, 1e-10);
        let proj = identity(2) - &b * b.adjoint();
        let d = svd(&proj);
        assert!((d.s[0] - 1.0).abs() < 1e-14 && d.s[1] < 1e-14);
        let comp = orthogonal_complement(&b, 2);
        assert!((b.adjoint() * &comp).norm() < 1e-14);

        let m = CMatrix::from_fn(3, 5, |i, j| c((i + 2 * j) as f64, (i * j) as f64 - 1.0));
        let d = svd(&m);
        let s = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(3, d.s.iter().map(|&x| c(x, 0.0))));
        assert!((&d.u * s * d.v.adjoint() - &m).norm() < 1e-12 * m.norm());
        assert!((d.v.adjoint() * &d.v - identity(3)).norm() < 1e-13);
    }

    #[test]
    fn hermitian_spectrum() {
        let h = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let ev = hermitian_eigenvalues(&h);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }
}
