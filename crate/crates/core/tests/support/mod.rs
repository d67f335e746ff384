//! Seeded random specs and subspaces shared by the integration targets.
#![allow(dead_code)]

use friedrichs_core::coefficients::{CoefficientField, Entry, FriedrichsSpec, Interval, ScalarField};
use friedrichs_core::linalg::{self, CMatrix};
use friedrichs_core::tolerance::ToleranceConfig;
use num_complex::Complex64;
use rand::Rng;

fn num(v: f64) -> String {
    format!("({v})")
}

/// Non-degenerate spec with an `x`-dependent Hermitian `A` that is
/// diagonally dominant (hence invertible), `S ⪰ 0.4` and a random skew part.
pub fn random_spec(n: usize, field: ScalarField, rng: &mut impl Rng) -> FriedrichsSpec {
    let len = rng.gen_range(0.5..2.0);
    let complex = field == ScalarField::Complex;
    let mut a_re = vec![vec!["0".to_string(); n]; n];
    let mut a_im = vec![vec!["0".to_string(); n]; n];
    let mut c_re = vec![vec!["0".to_string(); n]; n];
    let mut c_im = vec![vec!["0".to_string(); n]; n];
    for i in 0..n {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let d = rng.gen_range(2.0..3.0);
        let e = rng.gen_range(-0.5..0.5);
        a_re[i][i] = format!("{} + {} * x", num(sign * d), num(sign * e / len));
        let s = rng.gen_range(1.0..2.0);
        // C_ii = S_ii + A'_ii / 2 (+ an imaginary skew part)
        c_re[i][i] = num(s + sign * e / (2.0 * len));
        if complex {
            c_im[i][i] = format!("{} * cos(x)", num(rng.gen_range(-1.0..1.0)));
        }
        for j in i + 1..n {
            let ar = rng.gen_range(-0.3..0.3);
            a_re[i][j] = num(ar);
            a_re[j][i] = num(ar);
            let sr = rng.gen_range(-0.2..0.2);
            let w = rng.gen_range(-1.0..1.0);
            let k = rng.gen_range(1..4);
            c_re[i][j] = format!("{} + {} * sin({k} * x)", num(sr), num(w));
            c_re[j][i] = format!("{} - {} * sin({k} * x)", num(sr), num(w));
            if complex {
                let ai = rng.gen_range(-0.3..0.3);
                a_im[i][j] = num(ai);
                a_im[j][i] = num(-ai);
                let si = rng.gen_range(-0.2..0.2);
                let wi = rng.gen_range(-1.0..1.0);
                // Hermitian part si, anti-Hermitian part i*wi on both sides.
                c_im[i][j] = format!("{} + {} * x", num(si), num(wi));
                c_im[j][i] = format!("{} + {} * x", num(-si), num(wi));
            }
        }
    }
    let field_of = |re: &[Vec<String>], im: &[Vec<String>]| {
        let entries = (0..n * n)
            .map(|k| Entry::parse(&re[k / n][k % n], &im[k / n][k % n]).unwrap())
            .collect();
        CoefficientField::new(n, entries).unwrap()
    };
    FriedrichsSpec::new(
        field,
        Interval::new(0.0, len).unwrap(),
        field_of(&a_re, &a_im),
        field_of(&c_re, &c_im),
        Vec::new(),
        ToleranceConfig::default(),
    )
    .unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// `rows x cols` matrix with orthonormal columns (`cols <= rows`).
pub fn random_isometry(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
    let m = random_matrix(rows, cols, rng);
    linalg::orthonormal_basis(&m, 1e-12)
}
