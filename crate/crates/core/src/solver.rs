//! Boundary-value problems `T1 u = f` with `t(u) in V`, and the adjoint
//! problems `T~1 v = g` with `t(v) in V^[⊥]`.
//!
//! Solutions are assembled by superposition `u = u_p + Phi xi`, where `u_p`
//! and the fundamental matrix `Phi` are integrated together from the left
//! endpoint. The trace condition is a square linear system for `xi`.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::classification::{classify, is_bijective};
use crate::coefficients::{validate_spec, FriedrichsSpec, ScalarField, Variant};
use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::linalg::{self, CMatrix};
use crate::ode::{self, Trajectory};
use crate::trace_space::{build_trace_form, kernel_traces, ortho_complement, TraceSubspace};

/// Trace systems worse than this are refused.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct BoundaryValueSolution {
    pub variant: Variant,
    pub trajectory: Trajectory,
    /// `|T u - f|` in `L^2`.
    pub residual_l2: f64,
    pub u_norm: f64,
    pub f_norm: f64,
    /// Full trace `(u(a), u(b))`.
    pub trace: Vec<Complex64>,
    /// Relative distance of the trace to the prescribed subspace.
    pub trace_distance: f64,
    pub condition: f64,
    /// Lower bound of the symmetric part used for the a priori estimate.
    pub mu: f64,
    /// `(|u| + |T u|) / |T u|`; absent for `f = 0`.
    pub bound_ratio: Option<f64>,
}

impl BoundaryValueSolution {
    /// `|u - exact|` in `L^2`.
    pub fn l2_error(&self, exact: &[Expr]) -> f64 {
        let traj = &self.trajectory;
        ode::l2_norm_fn(
            |x| {
                let u = traj.eval(x);
                DMatrix::from_fn(u.len(), 1, |i, _| u[i] - exact[i].eval(x))
            },
            traj.nodes(),
        )
    }

    /// CSV with columns `x, re(u_i), im(u_i), ...` at the integration nodes.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let n = self.trajectory.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["x".to_string()];
        for i in 0..n {
            header.push(format!("re_u{i}"));
            header.push(format!("im_u{i}"));
        }
        w.write_record(&header)?;
        for (k, x) in self.trajectory.nodes().iter().enumerate() {
            let mut row = vec![format!("{x:?}")];
            for z in self.trajectory.node_value(k) {
                row.push(format!("{:?}", z.re));
                row.push(format!("{:?}", z.im));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_rhs(spec: &FriedrichsSpec, f: &[Expr]) -> Result<()> {
    if f.len() != spec.n() {
        return Err(Error::Format(format!(
            "right-hand side has {} components, expected {}",
            f.len(),
            spec.n()
        )));
    }
    Ok(())
}

fn solve_variant(spec: &FriedrichsSpec, variant: Variant, w: &TraceSubspace, f: &[Expr], mu: f64) -> Result<BoundaryValueSolution> {
    let n = spec.n();
    let traj = ode::propagate(spec, variant, Some(f), spec.interval.a, spec.interval.b)?;
    let end = traj.eval(spec.interval.b);
    let phi_b = DMatrix::from_column_slice(n, n, &end[..n * n]);
    let up_b = DMatrix::from_column_slice(n, 1, &end[n * n..]);

    // Rows of p annihilate exactly the traces in w.
    let p = linalg::orthogonal_complement(w.basis(), 2 * n).adjoint();
    let mut lift = linalg::zeros(2 * n, n);
    lift.view_mut((0, 0), (n, n)).copy_from(&linalg::identity(n));
    lift.view_mut((n, 0), (n, n)).copy_from(&phi_b);
    let mut offset = linalg::zeros(2 * n, 1);
    offset.view_mut((n, 0), (n, 1)).copy_from(&up_b);
    let system = &p * &lift;
    // The columns of `lift` span the kernel traces; a small angle between
    // them and `w` makes the problem ill posed even when `system` is tiny.
    let angle = linalg::hstack(w.basis(), &linalg::orthonormal_basis(&lift, 0.0));
    let condition = linalg::condition_number(&system).max(linalg::condition_number(&angle));
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let xi = system
        .clone()
        .lu()
        .solve(&(-(&p * &offset)))
        .ok_or(Error::IllConditioned { condition })?;

    let solution = traj.map_linear(n, |y| {
        let phi = DMatrix::from_column_slice(n, n, &y[..n * n]);
        let up = DMatrix::from_column_slice(n, 1, &y[n * n..]);
        (up + phi * &xi).as_slice().to_vec()
    });

    let t = &lift * &xi + &offset;
    let trace: Vec<Complex64> = t.iter().copied().collect();
    let trace_distance = w.distance_of(&t);

    let nodes = solution.nodes().to_vec();
    let residual_l2 = ode::integrate_piecewise(
        |x| {
            let (u, du) = solution.eval_with_derivative(x);
            let u = CMatrix::from_column_slice(n, 1, &u);
            let du = CMatrix::from_column_slice(n, 1, &du);
            let r = spec.apply_at(x, variant, &u, &du) - ode::eval_vector(f, x);
            Complex64::new(r.norm_squared(), 0.0)
        },
        &nodes,
        1e-6,
    )
    .value
    .re
    .max(0.0)
    .sqrt();
    let u_norm = ode::l2_norm_fn(|x| CMatrix::from_column_slice(n, 1, &solution.eval(x)), &nodes);
    let f_norm = ode::l2_norm_fn(|x| ode::eval_vector(f, x), &nodes);
    let bound_ratio = (f_norm > 0.0).then(|| (u_norm + f_norm) / f_norm);

    Ok(BoundaryValueSolution {
        variant,
        trajectory: solution,
        residual_l2,
        u_norm,
        f_norm,
        trace,
        trace_distance,
        condition,
        mu,
        bound_ratio,
    })
}

fn require_regular(spec: &FriedrichsSpec) -> Result<()> {
    match spec.degeneracy.first() {
        Some(d) => Err(Error::SingularA {
            x: spec.interval.endpoint(d.endpoint),
        }),
        None => Ok(()),
    }
}

/// Solve `T1 u = f` with `t(u) in V`.
pub fn solve(spec: &FriedrichsSpec, v: &TraceSubspace, f: &[Expr]) -> Result<BoundaryValueSolution> {
    require_regular(spec)?;
    check_rhs(spec, f)?;
    let parts = validate_spec(spec)?;
    let form = build_trace_form(spec);
    let kb = kernel_traces(spec, &form)?;
    if !is_bijective(v, &kb, &form).bijective {
        return Err(Error::NotBijective);
    }
    solve_variant(spec, Variant::Maximal, v, f, parts.mu)
}

/// Solve `T~1 v = g` with `t(v) in V^[⊥]`.
pub fn adjoint_solve(spec: &FriedrichsSpec, v: &TraceSubspace, g: &[Expr]) -> Result<BoundaryValueSolution> {
    require_regular(spec)?;
    check_rhs(spec, g)?;
    let parts = validate_spec(spec)?;
    let form = build_trace_form(spec);
    let kb = kernel_traces(spec, &form)?;
    if !is_bijective(v, &kb, &form).bijective {
        return Err(Error::NotBijective);
    }
    let v_perp = ortho_complement(v, &form);
    let stacked = linalg::hstack(v_perp.basis(), kb.k_tilde.basis());
    if v_perp.dim() + kb.d_minus != form.dim() || linalg::rank(&stacked, form.tol.rank_tol) != form.dim() {
        return Err(Error::NotBijective);
    }
    solve_variant(spec, Variant::MaximalAdjoint, &v_perp, g, parts.mu)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DualityReport {
    /// `|<T1 u, v> - <u, T~1 v>|` relative to `|f| |v| + |u| |g|`.
    pub inner_residual: f64,
    /// `|[[u|v]]|` from the traces, relative to `|Q| |t(u)| |t(v)|`.
    pub boundary_form: f64,
}

/// Solve both problems and compare the two sides of Green's identity.
pub fn duality_check(spec: &FriedrichsSpec, v: &TraceSubspace, f: &[Expr], g: &[Expr]) -> Result<DualityReport> {
    let u = solve(spec, v, f)?;
    let w = adjoint_solve(spec, v, g)?;
    let n = spec.n();
    let mut nodes: Vec<f64> = u.trajectory.nodes().iter().chain(w.trajectory.nodes()).copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));
    nodes.dedup();
    let col = |t: &Trajectory, x: f64| CMatrix::from_column_slice(n, 1, &t.eval(x));
    let lhs = ode::l2_inner_fn(|x| ode::eval_vector(f, x), |x| col(&w.trajectory, x), &nodes).value;
    let rhs = ode::l2_inner_fn(|x| col(&u.trajectory, x), |x| ode::eval_vector(g, x), &nodes).value;
    let scale = (u.f_norm * w.u_norm + u.u_norm * w.f_norm).max(f64::MIN_POSITIVE);

    let tu = CMatrix::from_column_slice(2 * n, 1, &u.trace);
    let tv = CMatrix::from_column_slice(2 * n, 1, &w.trace);
    let form = build_trace_form(spec);
    let bf = form.form(&tu, &tv).norm() / (form.q_norm() * tu.norm() * tv.norm()).max(f64::MIN_POSITIVE);
    Ok(DualityReport {
        inner_residual: (lhs - rhs).norm() / scale,
        boundary_form: bf,
    })
}

/// Random right-hand side: per component a polynomial of degree at most 6
/// plus sines and cosines of frequency at most 6, with coefficients in
/// `[-1, 1]`. Complex fields get an independent imaginary part.
pub fn random_rhs(n: usize, field: ScalarField, rng: &mut impl Rng) -> Vec<Expr> {
    fn part(rng: &mut impl Rng) -> String {
        let mut terms = Vec::new();
        let coef = |rng: &mut dyn rand::RngCore| (rng.gen_range(-1.0..1.0f64) * 1e6).round() / 1e6;
        for k in 0..=rng.gen_range(0..=6usize) {
            terms.push(format!("({}) * x^{k}", coef(rng)));
        }
        for k in 1..=rng.gen_range(0..=6usize) {
            terms.push(format!("({}) * sin({k} * x)", coef(rng)));
            terms.push(format!("({}) * cos({k} * x)", coef(rng)));
        }
        terms.join(" + ")
    }
    (0..n)
        .map(|_| {
            let mut src = part(rng);
            if field == ScalarField::Complex {
                src = format!("{src} + i * ({})", part(rng));
            }
            expr::parse(&src).expect("generated expression parses")
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AprioriReport {
    pub trials: usize,
    pub skipped: usize,
    pub mu: f64,
    /// `1 + 1/mu`.
    pub bound: f64,
    /// Largest `(|u| + |T u|) / |T u|` observed.
    pub worst_bound_ratio: f64,
    /// Largest `mu |u| / |T u|` observed.
    pub worst_lower_ratio: f64,
    pub worst_residual: f64,
    pub violations: usize,
    pub pass: bool,
}

/// Solve `trials` problems with seeded random right-hand sides on a
/// realisation with signed boundary map and check
/// `|u| + |T u| <= (1 + 1/mu) |T u|` and `mu |u| <= |T u|`.
pub fn check_apriori(spec: &FriedrichsSpec, v: &TraceSubspace, trials: usize, seed: u64) -> Result<AprioriReport> {
    require_regular(spec)?;
    let parts = validate_spec(spec)?;
    let form = build_trace_form(spec);
    let kb = kernel_traces(spec, &form)?;
    if !classify(v, &kb, &form)?.categories.signed_boundary_map {
        return Err(Error::PreconditionNotSigned);
    }
    let mu = parts.mu;
    let bound = 1.0 + 1.0 / mu;
    let results = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let f = random_rhs(spec.n(), spec.field, &mut rng);
            solve_variant(spec, Variant::Maximal, v, &f, mu)
        })
        .collect::<Result<Vec<_>>>()?;

    const TOL: f64 = 1e-8;
    let mut report = AprioriReport {
        trials,
        skipped: 0,
        mu,
        bound,
        worst_bound_ratio: 0.0,
        worst_lower_ratio: 0.0,
        worst_residual: 0.0,
        violations: 0,
        pass: true,
    };
    for sol in &results {
        let Some(ratio) = sol.bound_ratio else {
            report.skipped += 1;
            continue;
        };
        let lower = mu * sol.u_norm / sol.f_norm;
        report.worst_bound_ratio = report.worst_bound_ratio.max(ratio);
        report.worst_lower_ratio = report.worst_lower_ratio.max(lower);
        report.worst_residual = report.worst_residual.max(sol.residual_l2 / sol.f_norm);
        if ratio > bound + TOL * bound || lower > 1.0 + TOL {
            report.violations += 1;
        }
    }
    report.pass = report.violations == 0;
    Ok(report)
}
