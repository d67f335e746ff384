//! Linear ODE integration and quadrature.
//!
//! Kernels of the maximal operators and particular solutions are obtained
//! from an explicit Dormand–Prince 5(4) pair with PI step control. Accepted
//! steps are kept with their derivatives so trajectories can be evaluated
//! anywhere by cubic Hermite interpolation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::coefficients::{FriedrichsSpec, Variant};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::CMatrix;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest admissible step. Bounds the Hermite interpolation error.
    pub h_max: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn for_span(rtol: f64, span: f64) -> Self {
        Self {
            rtol,
            atol: rtol,
            h_max: span.abs() / 256.0,
            max_steps: 1_000_000,
        }
    }
}

/// Accepted integration nodes with values and derivatives, sorted by `x`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<Vec<Complex64>>,
    dys: Vec<Vec<Complex64>>,
    /// Largest normalized local error estimate accepted, scaled by `rtol`.
    pub error_estimate: f64,
}

impl Trajectory {
    pub fn from_nodes(
        xs: Vec<f64>,
        ys: Vec<Vec<Complex64>>,
        dys: Vec<Vec<Complex64>>,
    ) -> Self {
        assert!(xs.len() >= 2 && xs.len() == ys.len() && ys.len() == dys.len());
        let dim = ys[0].len();
        Self {
            dim,
            xs,
            ys,
            dys,
            error_estimate: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn start(&self) -> f64 {
        self.xs[0]
    }

    pub fn end(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn node_value(&self, k: usize) -> &[Complex64] {
        &self.ys[k]
    }

    pub fn node_derivative(&self, k: usize) -> &[Complex64] {
        &self.dys[k]
    }

    fn segment(&self, x: f64) -> usize {
        let k = self.xs.partition_point(|&t| t <= x);
        k.clamp(1, self.xs.len() - 1) - 1
    }

    /// Hermite interpolant of the state and its derivative at `x`.
    pub fn eval_with_derivative(&self, x: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let k = self.segment(x);
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        let (y0, y1, f0, f1) = (&self.ys[k], &self.ys[k + 1], &self.dys[k], &self.dys[k + 1]);
        let mut val = vec![Complex64::new(0.0, 0.0); self.dim];
        let mut der = vec![Complex64::new(0.0, 0.0); self.dim];
        for i in 0..self.dim {
            val[i] = y0[i] * h00 + f0[i] * (h10 * h) + y1[i] * h01 + f1[i] * (h11 * h);
            der[i] = y0[i] * d00 + f0[i] * d10 + y1[i] * d01 + f1[i] * d11;
        }
        (val, der)
    }

    pub fn eval(&self, x: f64) -> Vec<Complex64> {
        self.eval_with_derivative(x).0
    }

    /// Pointwise affine combination `self * s + other * t` on the shared nodes.
    pub fn combine(&self, other: &Trajectory, s: Complex64, t: Complex64) -> Result<Trajectory> {
        if self.xs != other.xs || self.dim != other.dim {
            return Err(Error::IntervalMismatch);
        }
        let mix = |a: &Vec<Vec<Complex64>>, b: &Vec<Vec<Complex64>>| {
            a.iter()
                .zip(b)
                .map(|(p, q)| p.iter().zip(q).map(|(u, v)| u * s + v * t).collect())
                .collect()
        };
        Ok(Trajectory {
            dim: self.dim,
            xs: self.xs.clone(),
            ys: mix(&self.ys, &other.ys),
            dys: mix(&self.dys, &other.dys),
            error_estimate: self.error_estimate.max(other.error_estimate),
        })
    }

    /// Map each node's state (and derivative) through the same linear map.
    pub fn map_linear(&self, out_dim: usize, f: impl Fn(&[Complex64]) -> Vec<Complex64>) -> Trajectory {
        let ys: Vec<_> = self.ys.iter().map(|y| f(y)).collect();
        let dys: Vec<_> = self.dys.iter().map(|y| f(y)).collect();
        debug_assert!(ys.iter().all(|y| y.len() == out_dim));
        Trajectory {
            dim: out_dim,
            xs: self.xs.clone(),
            ys,
            dys,
            error_estimate: self.error_estimate,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller constants.
const BETA: f64 = 0.04;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn axpy(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for i in 0..out.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, k) in terms {
            acc += k[i] * *w;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Integrate `y' = f(x, y)` from `x0` to `x1` (either direction).
pub fn integrate<F>(mut f: F, x0: f64, x1: f64, y0: Vec<Complex64>, opts: &OdeOptions) -> Result<Trajectory>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]) -> Result<()>,
{
    let dim = y0.len();
    let span = x1 - x0;
    let dir = span.signum();
    let h_max = if opts.h_max > 0.0 { opts.h_max } else { span.abs() };

    let zero = Complex64::new(0.0, 0.0);
    let mut k: Vec<Vec<Complex64>> = vec![vec![zero; dim]; 7];
    let mut tmp = vec![zero; dim];
    let mut y_new = vec![zero; dim];

    let mut x = x0;
    let mut y = y0;
    f(x, &y, &mut k[0])?;

    let mut xs = vec![x];
    let mut ys = vec![y.clone()];
    let mut dys = vec![k[0].clone()];

    let scale = |a: &Complex64, b: &Complex64| opts.atol + opts.rtol * a.norm().max(b.norm());

    // Initial step guess from the size of the solution and its slope.
    let d0 = (y.iter().map(|v| (v.norm() / scale(v, v)).powi(2)).sum::<f64>() / dim as f64).sqrt();
    let d1 = (y.iter().zip(&k[0]).map(|(v, d)| (d.norm() / scale(v, v)).powi(2)).sum::<f64>() / dim as f64).sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(h_max).min(span.abs());

    let mut fac_old: f64 = 1e-4;
    let mut max_err: f64 = 0.0;
    let mut steps = 0usize;
    let mut rejected_last = false;

    while (x1 - x) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepSizeUnderflow { x, h });
        }
        let remaining = (x1 - x).abs();
        // Stretch slightly so no sliver of the interval is left behind.
        let last = h * 1.01 >= remaining;
        if last {
            h = remaining;
        }
        if !last && h < 1e-14 * x.abs().max(span.abs()) {
            return Err(Error::StepSizeUnderflow { x, h });
        }
        let hs = h * dir;

        {
            let (k1, rest) = k.split_at_mut(1);
            axpy(&mut tmp, &y, hs, &[(A21, &k1[0])]);
            f(x + C2 * hs, &tmp, &mut rest[0])?;
        }
        axpy(&mut tmp, &y, hs, &[(A31, &k[0]), (A32, &k[1])]);
        f(x + C3 * hs, &tmp, &mut k[2])?;
        axpy(&mut tmp, &y, hs, &[(A41, &k[0]), (A42, &k[1]), (A43, &k[2])]);
        f(x + C4 * hs, &tmp, &mut k[3])?;
        axpy(&mut tmp, &y, hs, &[(A51, &k[0]), (A52, &k[1]), (A53, &k[2]), (A54, &k[3])]);
        f(x + C5 * hs, &tmp, &mut k[4])?;
        axpy(&mut tmp, &y, hs, &[(A61, &k[0]), (A62, &k[1]), (A63, &k[2]), (A64, &k[3]), (A65, &k[4])]);
        f(x + hs, &tmp, &mut k[5])?;
        axpy(&mut y_new, &y, hs, &[(A71, &k[0]), (A73, &k[2]), (A74, &k[3]), (A75, &k[4]), (A76, &k[5])]);
        let x_new = if last { x1 } else { x + hs };
        f(x_new, &y_new, &mut k[6])?;

        let mut err = 0.0;
        for i in 0..dim {
            let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * hs;
            let sc = scale(&y[i], &y_new[i]);
            err += (e.norm() / sc).powi(2);
        }
        let err = (err / dim as f64).sqrt();
        if !err.is_finite() {
            h *= FAC_MIN;
            rejected_last = true;
            continue;
        }

        let fac11 = err.powf(0.2 - BETA * 0.75);
        if err <= 1.0 {
            max_err = max_err.max(err);
            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if rejected_last {
                h_new = h_new.min(h);
            }
            fac_old = err.max(1e-4);
            x = x_new;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            xs.push(x);
            ys.push(y.clone());
            dys.push(k[0].clone());
            h = h_new.min(h_max);
            rejected_last = false;
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            rejected_last = true;
        }
    }

    if dir < 0.0 {
        xs.reverse();
        ys.reverse();
        dys.reverse();
    }
    Ok(Trajectory {
        dim,
        xs,
        ys,
        dys,
        error_estimate: max_err * opts.rtol,
    })
}

/// Pointwise values of a vector of expressions.
pub fn eval_vector(f: &[Expr], x: f64) -> CMatrix {
    DMatrix::from_fn(f.len(), 1, |i, _| f[i].eval(x))
}

/// Integrate the homogeneous system of `variant` for all `n` unit initial
/// vectors at `from`, optionally with one extra forced column starting at zero.
///
/// The state is the column-major flattening of `[Phi | u_p]`.
pub fn propagate(
    spec: &FriedrichsSpec,
    variant: Variant,
    forcing: Option<&[Expr]>,
    from: f64,
    to: f64,
) -> Result<Trajectory> {
    let n = spec.n();
    let cols = n + usize::from(forcing.is_some());
    let mut y0 = vec![Complex64::new(0.0, 0.0); n * cols];
    for j in 0..n {
        y0[j * n + j] = Complex64::new(1.0, 0.0);
    }
    if let Some(f) = forcing {
        assert_eq!(f.len(), n, "forcing must have n components");
    }
    let rhs = |x: f64, y: &[Complex64], dy: &mut [Complex64]| -> Result<()> {
        let a = spec.a_at(x);
        let z = spec.zeroth_order_at(x, variant);
        let state = DMatrix::from_column_slice(n, cols, y);
        // A u' = -Z u + f  (T1)   or   A u' = Z u - f  (T~1)
        let mut m = &z * &state;
        if variant == Variant::Maximal {
            m.neg_mut();
        }
        if let Some(f) = forcing {
            let fx = eval_vector(f, x);
            let mut last = m.column_mut(n);
            match variant {
                Variant::Maximal => last += fx,
                Variant::MaximalAdjoint => last -= fx,
            }
        }
        let sol = a.lu().solve(&m).ok_or(Error::SingularA { x })?;
        if sol.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SingularA { x });
        }
        dy.copy_from_slice(sol.as_slice());
        Ok(())
    };
    let opts = OdeOptions::for_span(spec.tolerances.ode_rtol, spec.interval.length());
    integrate(rhs, from, to, y0, &opts)
}

/// `Phi(x)` with `Phi(anchor) = I` solving the kernel equation of `variant`.
#[derive(Debug, Clone)]
pub struct FundamentalMatrix {
    pub variant: Variant,
    pub anchor: f64,
    n: usize,
    traj: Trajectory,
}

impl FundamentalMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn error_estimate(&self) -> f64 {
        self.traj.error_estimate
    }

    pub fn eval(&self, x: f64) -> CMatrix {
        let v = self.traj.eval(x);
        DMatrix::from_column_slice(self.n, self.n, &v[..self.n * self.n])
    }

    pub fn eval_with_derivative(&self, x: f64) -> (CMatrix, CMatrix) {
        let (v, d) = self.traj.eval_with_derivative(x);
        (
            DMatrix::from_column_slice(self.n, self.n, &v[..self.n * self.n]),
            DMatrix::from_column_slice(self.n, self.n, &d[..self.n * self.n]),
        )
    }

    /// Largest relative residual of the kernel equation at the midpoints of
    /// the accepted steps, where the interpolant is least accurate.
    pub fn residual(&self, spec: &FriedrichsSpec) -> f64 {
        self.traj
            .nodes()
            .windows(2)
            .map(|w| {
                let x = 0.5 * (w[0] + w[1]);
                let (phi, dphi) = self.eval_with_derivative(x);
                let r = spec.apply_at(x, self.variant, &phi, &dphi);
                r.norm() / phi.norm().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

pub fn fundamental_matrix(spec: &FriedrichsSpec, variant: Variant) -> Result<FundamentalMatrix> {
    fundamental_matrix_between(spec, variant, spec.interval.a, spec.interval.b)
}

pub fn fundamental_matrix_between(
    spec: &FriedrichsSpec,
    variant: Variant,
    anchor: f64,
    to: f64,
) -> Result<FundamentalMatrix> {
    let traj = propagate(spec, variant, None, anchor, to)?;
    let fm = FundamentalMatrix {
        variant,
        anchor,
        n: spec.n(),
        traj,
    };
    let det = fm.eval(to).lu().determinant().norm();
    if !(det > 1e-12) {
        return Err(Error::SingularA { x: to });
    }
    Ok(fm)
}

/// `u_p` with `u_p(a) = 0` solving `T u_p = f` for the chosen maximal operator.
pub fn particular_solution(spec: &FriedrichsSpec, f: &[Expr], variant: Variant) -> Result<Trajectory> {
    let n = spec.n();
    let traj = propagate(spec, variant, Some(f), spec.interval.a, spec.interval.b)?;
    Ok(traj.map_linear(n, |y| y[n * n..].to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub error_estimate: f64,
}

const SIMPSON_MAX_DEPTH: usize = 40;
/// Integrand evaluations allowed per call before refinement stops; the
/// shortfall shows up in the error estimate.
const SIMPSON_MAX_EVALS: usize = 100_000;
const QUAD_ABS_FLOOR: f64 = 1e-14;

fn simpson(fa: Complex64, fm: Complex64, fb: Complex64, h: f64) -> Complex64 {
    (fa + fm * 4.0 + fb) * (h / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    whole: Complex64,
    eps: f64,
    depth: usize,
    budget: &mut usize,
    err: &mut f64,
) -> Complex64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *budget = budget.saturating_sub(2);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || *budget == 0 || delta.norm() <= 15.0 * eps {
        *err += delta.norm() / 15.0;
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1, budget, err)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1, budget, err)
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`
/// (never below 1e-14).
pub fn adaptive_simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, tol: f64) -> QuadratureResult {
    if a == b {
        return QuadratureResult {
            value: Complex64::new(0.0, 0.0),
            error_estimate: 0.0,
        };
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, b - a);
    let mut err = 0.0;
    let mut budget = SIMPSON_MAX_EVALS;
    let value = simpson_rec(
        &f,
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        tol.max(QUAD_ABS_FLOOR),
        SIMPSON_MAX_DEPTH,
        &mut budget,
        &mut err,
    );
    QuadratureResult {
        value,
        error_estimate: err,
    }
}

/// Quadrature over consecutive breakpoints with a tolerance relative to the
/// magnitude of the integral.
pub fn integrate_piecewise<F: Fn(f64) -> Complex64>(f: F, breakpoints: &[f64], rel_tol: f64) -> QuadratureResult {
    let total: f64 = breakpoints.windows(2).map(|w| w[1] - w[0]).sum();
    // Coarse magnitude estimate to turn the relative tolerance into an absolute one.
    let mut magnitude = 0.0;
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        magnitude += simpson(f(a), f(0.5 * (a + b)), f(b), b - a).norm();
    }
    let abs_tol = (rel_tol * magnitude).max(QUAD_ABS_FLOOR);
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for w in breakpoints.windows(2) {
        let share = if total > 0.0 { (w[1] - w[0]) / total } else { 1.0 };
        let piece = adaptive_simpson(&f, w[0], w[1], abs_tol * share);
        value += piece.value;
        err += piece.error_estimate;
    }
    QuadratureResult {
        value,
        error_estimate: err,
    }
}

const INNER_REL_TOL: f64 = 1e-12;

fn merged_nodes(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(|p, q| p.total_cmp(q));
    all.dedup_by(|p, q| (*p - *q).abs() <= 1e-15 * p.abs().max(1.0));
    all
}

/// `<u, v> = int sum_i u_i conj(v_i) dx`, anti-linear in the second slot.
pub fn l2_inner(u: &Trajectory, v: &Trajectory) -> Result<QuadratureResult> {
    let same = |p: f64, q: f64| (p - q).abs() <= 1e-12 * p.abs().max(q.abs()).max(1.0);
    if !same(u.start(), v.start()) || !same(u.end(), v.end()) || u.dim() != v.dim() {
        return Err(Error::IntervalMismatch);
    }
    let nodes = merged_nodes(u.nodes(), v.nodes());
    Ok(integrate_piecewise(
        |x| {
            let a = u.eval(x);
            let b = v.eval(x);
            a.iter().zip(&b).map(|(p, q)| p * q.conj()).sum()
        },
        &nodes,
        INNER_REL_TOL,
    ))
}

/// Inner product of two pointwise-defined vector functions on `breakpoints`.
pub fn l2_inner_fn(
    u: impl Fn(f64) -> CMatrix,
    v: impl Fn(f64) -> CMatrix,
    breakpoints: &[f64],
) -> QuadratureResult {
    integrate_piecewise(|x| (v(x).adjoint() * u(x))[(0, 0)], breakpoints, INNER_REL_TOL)
}

pub fn l2_norm_fn(u: impl Fn(f64) -> CMatrix, breakpoints: &[f64]) -> f64 {
    integrate_piecewise(|x| Complex64::new(u(x).norm_squared(), 0.0), breakpoints, INNER_REL_TOL)
        .value
        .re
        .max(0.0)
        .sqrt()
}

fn uniform_breaks(spec: &FriedrichsSpec, pieces: usize) -> Vec<f64> {
    spec.interval.grid(pieces + 1)
}

/// Boundary form `[[u|v]] = <A(b)u(b), v(b)> - <A(a)u(a), v(a)>` of two
/// smooth vector functions.
pub fn boundary_form_fn(spec: &FriedrichsSpec, u: &[Expr], v: &[Expr]) -> Complex64 {
    let (a, b) = (spec.interval.a, spec.interval.b);
    let at = |x: f64| {
        let ux = eval_vector(u, x);
        let vx = eval_vector(v, x);
        (vx.adjoint() * spec.a_at(x) * ux)[(0, 0)]
    };
    at(b) - at(a)
}

/// `|<T1 u, v> - <u, T~1 v> - [[u|v]]|` for smooth vector functions.
pub fn green_identity_residual(spec: &FriedrichsSpec, u: &[Expr], v: &[Expr]) -> f64 {
    let du: Vec<Expr> = u.iter().map(Expr::derivative).collect();
    let dv: Vec<Expr> = v.iter().map(Expr::derivative).collect();
    let breaks = uniform_breaks(spec, 64);
    let t1u = |x: f64| spec.apply_at(x, Variant::Maximal, &eval_vector(u, x), &eval_vector(&du, x));
    let t1v = |x: f64| spec.apply_at(x, Variant::MaximalAdjoint, &eval_vector(v, x), &eval_vector(&dv, x));
    let lhs = l2_inner_fn(t1u, |x| eval_vector(v, x), &breaks).value
        - l2_inner_fn(|x| eval_vector(u, x), t1v, &breaks).value;
    (lhs - boundary_form_fn(spec, u, v)).norm()
}

/// `|2 Re<T1 u, u> - 2 <S u, u> - [[u|u]]|` for a smooth vector function.
pub fn accretivity_residual(spec: &FriedrichsSpec, u: &[Expr]) -> f64 {
    let du: Vec<Expr> = u.iter().map(Expr::derivative).collect();
    let breaks = uniform_breaks(spec, 64);
    let uu = |x: f64| eval_vector(u, x);
    let t1u = |x: f64| spec.apply_at(x, Variant::Maximal, &eval_vector(u, x), &eval_vector(&du, x));
    let su = |x: f64| spec.s_at(x) * eval_vector(u, x);
    let lhs = 2.0 * l2_inner_fn(t1u, uu, &breaks).value.re - 2.0 * l2_inner_fn(su, uu, &breaks).value.re;
    (lhs - boundary_form_fn(spec, u, u).re).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn exprs(srcs: &[&str]) -> Vec<Expr> {
        srcs.iter().map(|s| parse(s).unwrap()).collect()
    }

    #[test]
    fn scalar_fundamental_matrices() {
        let spec = FriedrichsSpec::scalar("1", "1", (0.0, 1.0)).unwrap();
        let phi = fundamental_matrix(&spec, Variant::Maximal).unwrap();
        assert_eq!(phi.eval(0.0)[(0, 0)], Complex64::new(1.0, 0.0));
        assert!((phi.eval(1.0)[(0, 0)].re - (-1.0f64).exp()).abs() < 1e-10);
        assert!((phi.eval(1.0)[(0, 0)].re - 0.3678794412).abs() < 1e-10);
        let psi = fundamental_matrix(&spec, Variant::MaximalAdjoint).unwrap();
        assert!((psi.eval(1.0)[(0, 0)].re - 1.0f64.exp()).abs() < 1e-9);

        // exact antiderivative: int_0^1 (1 + y) dy = 3/2
        let spec = FriedrichsSpec::scalar("1", "1 + x", (0.0, 1.0)).unwrap();
        let phi = fundamental_matrix(&spec, Variant::Maximal).unwrap();
        assert!((phi.eval(1.0)[(0, 0)].re - (-1.5f64).exp()).abs() < 1e-10);
        assert!((phi.eval(1.0)[(0, 0)].re - 0.2231301601).abs() < 1e-10);
        for &x in &[0.13f64, 0.5, 0.77] {
            let exact = (-(x + 0.5 * x * x)).exp();
            assert!((phi.eval(x)[(0, 0)].re - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_residual_is_small() {
        let spec = FriedrichsSpec::new(
            crate::coefficients::ScalarField::Real,
            crate::coefficients::Interval::new(0.0, 1.0).unwrap(),
            crate::coefficients::CoefficientField::from_strs(2, &["2", "0.3*x", "0.3*x", "-1"]).unwrap(),
            crate::coefficients::CoefficientField::from_strs(2, &["1", "x", "-x", "2"]).unwrap(),
            vec![],
            Default::default(),
        )
        .unwrap();
        let phi = fundamental_matrix(&spec, Variant::Maximal).unwrap();
        assert!(phi.residual(&spec) < 1e-9, "{}", phi.residual(&spec));
    }

    #[test]
    fn particular_solutions() {
        let spec = FriedrichsSpec::scalar("1", "1", (0.0, 1.0)).unwrap();
        let zero = particular_solution(&spec, &exprs(&["0"]), Variant::Maximal).unwrap();
        assert!(zero.nodes().iter().all(|&x| zero.eval(x)[0].norm() == 0.0));

        let one = particular_solution(&spec, &exprs(&["1"]), Variant::Maximal).unwrap();
        let decay = particular_solution(&spec, &exprs(&["exp(-x)"]), Variant::Maximal).unwrap();
        for &x in &[0.1, 0.45, 0.9, 1.0] {
            assert!((one.eval(x)[0].re - (1.0 - (-x).exp())).abs() < 1e-10);
            assert!((decay.eval(x)[0].re - x * (-x).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn inner_products() {
        let spec = FriedrichsSpec::scalar("1", "1", (0.0, 1.0)).unwrap();
        let phi = fundamental_matrix(&spec, Variant::Maximal).unwrap();
        let e = phi.trajectory().clone();
        let ip = l2_inner(&e, &e).unwrap();
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((ip.value.re - exact).abs() < 1e-10);
        assert!((ip.value.re - 0.4323323584).abs() < 1e-10);

        let nodes = vec![0.0, 0.5, 1.0];
        let ones = Trajectory::from_nodes(
            nodes.clone(),
            vec![vec![Complex64::new(1.0, 0.0)]; 3],
            vec![vec![Complex64::new(0.0, 0.0)]; 3],
        );
        let imag = Trajectory::from_nodes(
            nodes,
            vec![vec![Complex64::new(0.0, 1.0)]; 3],
            vec![vec![Complex64::new(0.0, 0.0)]; 3],
        );
        assert!((l2_inner(&ones, &ones).unwrap().value - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((l2_inner(&ones, &imag).unwrap().value - Complex64::new(0.0, -1.0)).norm() < 1e-15);

        let other = Trajectory::from_nodes(
            vec![0.0, 2.0],
            vec![vec![Complex64::new(1.0, 0.0)]; 2],
            vec![vec![Complex64::new(0.0, 0.0)]; 2],
        );
        assert!(matches!(l2_inner(&ones, &other), Err(Error::IntervalMismatch)));
    }

    #[test]
    fn quadrature_error_estimate_is_honest() {
        let q = adaptive_simpson(|x| Complex64::new((3.0 * x).sin() * x.exp(), 0.0), 0.0, 2.0, 1e-6);
        let fine = adaptive_simpson(|x| Complex64::new((3.0 * x).sin() * x.exp(), 0.0), 0.0, 2.0, 5e-7);
        assert!((q.value - fine.value).norm() <= q.error_estimate + 1e-14);
    }

    #[test]
    fn cocycle_and_tolerance_monotonicity() {
        let spec = FriedrichsSpec::new(
            crate::coefficients::ScalarField::Real,
            crate::coefficients::Interval::new(0.0, 1.0).unwrap(),
            crate::coefficients::CoefficientField::from_strs(2, &["1", "0", "0", "-2"]).unwrap(),
            crate::coefficients::CoefficientField::from_strs(2, &["1 + x", "sin(x)", "0.5", "-3"]).unwrap(),
            vec![],
            Default::default(),
        )
        .unwrap();
        let phi = fundamental_matrix(&spec, Variant::Maximal).unwrap();
        let mid = 0.5;
        let phi2 = fundamental_matrix_between(&spec, Variant::Maximal, mid, 1.0).unwrap();
        for &x in &[0.6, 0.8, 1.0] {
            let lhs = phi.eval(x);
            let rhs = phi2.eval(x) * phi.eval(mid);
            assert!((&lhs - &rhs).norm() <= 1e-8 * lhs.norm());
        }

        let mut tight = spec.clone();
        tight.tolerances.ode_rtol /= 2.0;
        let coarse = phi.residual(&spec);
        let fine = fundamental_matrix(&tight, Variant::Maximal).unwrap().residual(&tight);
        assert!(fine <= coarse * (1.0 + 1e-6), "{fine} > {coarse}");
    }

    #[test]
    fn green_and_accretivity_identities() {
        let spec = FriedrichsSpec::new(
            crate::coefficients::ScalarField::Complex,
            crate::coefficients::Interval::new(0.0, 1.0).unwrap(),
            crate::coefficients::CoefficientField::from_strs(2, &["2 + x", "0.2", "0.2", "-1 - x^2"]).unwrap(),
            crate::coefficients::CoefficientField::new(
                2,
                vec![
                    crate::coefficients::Entry::parse("3", "0").unwrap(),
                    crate::coefficients::Entry::parse("x", "1").unwrap(),
                    crate::coefficients::Entry::parse("0", "0.5").unwrap(),
                    crate::coefficients::Entry::parse("4", "0").unwrap(),
                ],
            )
            .unwrap(),
            vec![],
            Default::default(),
        )
        .unwrap();
        let u = exprs(&["sin(3*x) + i*x", "exp(x)"]);
        let v = exprs(&["cos(x)", "x^2 - i"]);
        assert!(green_identity_residual(&spec, &u, &v) < 1e-10);
        assert!(accretivity_residual(&spec, &u) < 1e-10);
    }
}
