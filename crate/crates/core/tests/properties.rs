mod support;

use friedrichs_core::coefficients::ScalarField;
use friedrichs_core::expr::{self, BinOp, Expr, Func};
use friedrichs_core::linalg;
use friedrichs_core::trace_space::{build_trace_form, ortho_complement, TraceSubspace};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-50.0f64..50.0).prop_map(Expr::Num),
        (0u32..20).prop_map(|k| Expr::Num(k as f64)),
        Just(Expr::Var),
        Just(Expr::Imag),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow),
        ];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (proptest::sample::select(Func::ALL.to_vec()), inner.clone()).prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
            (op, inner.clone(), inner).prop_map(|(op, l, r)| Expr::Bin(op, Box::new(l), Box::new(r))),
        ]
    })
}

fn same_value(a: Complex64, b: Complex64) -> bool {
    let close = |x: f64, y: f64| {
        (x.is_nan() && y.is_nan()) || x == y || (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs()))
    };
    close(a.re, b.re) && close(a.im, b.im)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printed_expressions_parse_back(e in arb_expr()) {
        let printed = e.to_string();
        let back = expr::parse(&printed).map_err(|err| TestCaseError::fail(format!("{printed}: {err}")))?;
        // Negative literals come back as negations, after which printing is stable.
        let reprinted = back.to_string();
        prop_assert_eq!(expr::parse(&reprinted).unwrap().to_string(), reprinted);
        for x in [-1.3, 0.0, 0.4, 2.5] {
            prop_assert!(same_value(e.eval(x), back.eval(x)), "{} at {}: {} vs {}", printed, x, e.eval(x), back.eval(x));
        }
    }

    #[test]
    fn double_complement_is_identity(seed in any::<u64>(), n in 1usize..=3, complex in any::<bool>(), dim_frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = if complex { ScalarField::Complex } else { ScalarField::Real };
        let spec = support::random_spec(n, field, &mut rng);
        let form = build_trace_form(&spec);
        let r = ((dim_frac * (2 * n + 1) as f64) as usize).min(2 * n);
        let v = TraceSubspace::span(&support::random_matrix(2 * n, r, &mut rng), 1e-10);
        let v_perp = ortho_complement(&v, &form);
        prop_assert_eq!(v.dim() + v_perp.dim(), 2 * n);
        prop_assert!(ortho_complement(&v_perp, &form).distance(&v) <= 1e-8);
    }

    #[test]
    fn svd_reconstructs_rank_deficient_inputs(seed in any::<u64>(), rows in 1usize..7, cols in 1usize..7, rank in 0usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rank.min(rows).min(cols);
        let m = support::random_matrix(rows, k, &mut rng) * support::random_matrix(k, cols, &mut rng);
        let d = linalg::svd(&m);
        let s = linalg::CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d.s.len(),
            d.s.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        prop_assert!((&d.u * s * d.v.adjoint() - &m).norm() <= 1e-12 * (1.0 + m.norm()));
        prop_assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(linalg::rank(&m, 1e-10), k);
        let basis = linalg::orthonormal_basis(&m, 1e-10);
        prop_assert!((basis.adjoint() * &basis - linalg::identity(basis.ncols())).norm() <= 1e-12);
    }
}
