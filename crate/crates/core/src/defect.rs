//! Deficiency indices `(dim ker T1, dim ker T~1)`.
//!
//! Non-degenerate components contribute through their fundamental matrices.
//! A flagged scalar block whose leading coefficient vanishes at one endpoint
//! is decided numerically: the kernel ODE is integrated toward the singular
//! endpoint over dyadic collars and the partial `L^2` masses are inspected.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::{validate_spec, CoefficientField, Endpoint, FriedrichsSpec};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::ode::{self, OdeOptions};
use crate::trace_space::{build_trace_form, kernel_traces};

/// Dyadic levels examined before giving up.
pub const MAX_LEVELS: usize = 20;
/// Ratios of successive collar masses examined for a verdict.
const WINDOW: usize = 5;
/// Successive-increment ratio below which the masses are summable.
const DECAY_RATIO: f64 = 0.9;
/// Ratio above which the increments are bounded below (divergent).
const GROWTH_RATIO: f64 = 0.95;

#[derive(Debug, Clone, Serialize)]
pub struct DirectionReport {
    pub in_l2: bool,
    /// Fitted slope of `log|u|` against `log(distance to endpoint)`.
    pub growth_exponent: f64,
    /// `L^2` mass on each dyadic collar, outermost first.
    pub collar_masses: Vec<f64>,
    pub levels: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularBlockReport {
    pub block: usize,
    pub endpoint: Endpoint,
    /// Kernel of `a u' + c u` near the singular endpoint.
    pub maximal_in_l2: bool,
    /// Kernel of `-a u' + (conj(c) - a') u` near the singular endpoint.
    pub adjoint_in_l2: bool,
    pub maximal: DirectionReport,
    pub adjoint: DirectionReport,
}

/// Analyze the flagged scalar block `k` of a spec.
pub fn analyze_block(spec: &FriedrichsSpec, block: usize, endpoint: Endpoint) -> Result<SingularBlockReport> {
    let a = spec.a.get(block, block);
    let c = spec.c.get(block, block);
    analyze_singular_block(
        block,
        &a.re,
        (&c.re, &c.im),
        (spec.interval.a, spec.interval.b),
        endpoint,
        spec.tolerances.ode_rtol,
    )
}

/// Decide square-integrability of both scalar kernels near `endpoint`,
/// where the real coefficient `a` vanishes.
pub fn analyze_singular_block(
    block: usize,
    a: &Expr,
    c: (&Expr, &Expr),
    interval: (f64, f64),
    endpoint: Endpoint,
    rtol: f64,
) -> Result<SingularBlockReport> {
    let da = a.derivative();
    let c_at = |x: f64| c.0.eval(x) + Complex64::i() * c.1.eval(x);
    let maximal = dyadic_masses(block, "maximal", interval, endpoint, rtol, |x| -c_at(x) / a.eval(x))?;
    let adjoint = dyadic_masses(block, "adjoint", interval, endpoint, rtol, |x| {
        (c_at(x).conj() - da.eval(x)) / a.eval(x)
    })?;
    Ok(SingularBlockReport {
        block,
        endpoint,
        maximal_in_l2: maximal.in_l2,
        adjoint_in_l2: adjoint.in_l2,
        maximal,
        adjoint,
    })
}

/// Integrate `u' = g(x) u`, `u = 1` at the regular endpoint, toward the
/// singular one and classify the collar masses.
fn dyadic_masses(
    block: usize,
    direction: &'static str,
    (lo, hi): (f64, f64),
    endpoint: Endpoint,
    rtol: f64,
    g: impl Fn(f64) -> Complex64,
) -> Result<DirectionReport> {
    let len = hi - lo;
    let (start, sing, sign) = match endpoint {
        Endpoint::Right => (lo, hi, 1.0),
        Endpoint::Left => (hi, lo, -1.0),
    };
    // Collar boundary at dyadic level j.
    let boundary = |j: usize| sing - sign * len * 0.5f64.powi(j as i32);
    let rhs = |x: f64, y: &[Complex64], dy: &mut [Complex64]| -> Result<()> {
        let gx = g(x);
        if !(gx.re.is_finite() && gx.im.is_finite()) {
            return Err(Error::SingularA { x });
        }
        dy[0] = gx * y[0];
        dy[1] = Complex64::new(y[0].norm_sqr(), 0.0);
        Ok(())
    };

    let mut state = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let mut x = start;
    let mut masses = Vec::new();
    let mut log_dist = Vec::new();
    let mut log_abs = Vec::new();
    for j in 1..=MAX_LEVELS {
        let target = boundary(j);
        let opts = OdeOptions {
            rtol,
            atol: rtol * 1e-6,
            h_max: (target - x).abs() / 32.0,
            max_steps: 200_000,
        };
        let traj = ode::integrate(rhs, x, target, vec![state[0], Complex64::new(0.0, 0.0)], &opts)?;
        let end = traj.eval(target);
        let mass = end[1].re.abs();
        state = end;
        x = target;
        if j > 1 {
            // Mass of the collar between levels j-1 and j.
            masses.push(mass);
        }
        log_dist.push((sing - target).abs().ln());
        log_abs.push(state[0].norm().max(f64::MIN_POSITIVE).ln());

        if masses.len() > WINDOW {
            let tail = &masses[masses.len() - WINDOW - 1..];
            let ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0].max(f64::MIN_POSITIVE)).collect();
            let verdict = if ratios.iter().all(|&r| r <= DECAY_RATIO) {
                Some(true)
            } else if ratios.iter().all(|&r| r >= GROWTH_RATIO) {
                Some(false)
            } else {
                None
            };
            if let Some(in_l2) = verdict {
                return Ok(DirectionReport {
                    in_l2,
                    growth_exponent: slope(&log_dist[log_dist.len() - WINDOW..], &log_abs[log_abs.len() - WINDOW..]),
                    collar_masses: masses,
                    levels: j,
                });
            }
        }
    }
    Err(Error::UndecidableIntegrability {
        block,
        direction,
        levels: MAX_LEVELS,
    })
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `(d_plus, d_minus) = (dim ker T1, dim ker T~1)`.
pub fn deficiency_indices(spec: &FriedrichsSpec) -> Result<(usize, usize)> {
    let form = build_trace_form(spec);
    let kb = kernel_traces(spec, &form)?;
    Ok((kb.d_plus, kb.d_minus))
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnessRow {
    pub label: String,
    /// `None` when the sample failed validation and was excluded.
    pub indices: Option<(usize, usize)>,
    pub mu: Option<f64>,
    pub excluded_reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnessReport {
    pub rows: Vec<HarnessRow>,
    pub pass: bool,
}

/// Compute deficiency indices for each bounded part `C` on the fixed
/// principal part of `skeleton`; PASS iff all validated samples agree.
///
/// Samples failing validation are excluded. Numerical failures abort.
pub fn invariance_harness(
    skeleton: &FriedrichsSpec,
    samples: &[(String, CoefficientField)],
) -> Result<HarnessReport> {
    let rows = samples
        .par_iter()
        .map(|(label, c)| -> Result<HarnessRow> {
            let spec = skeleton.with_c(c.clone())?;
            match validate_spec(&spec) {
                Err(e) => Ok(HarnessRow {
                    label: label.clone(),
                    indices: None,
                    mu: None,
                    excluded_reason: Some(e.to_string()),
                }),
                Ok(parts) => Ok(HarnessRow {
                    label: label.clone(),
                    indices: Some(deficiency_indices(&spec)?),
                    mu: Some(parts.mu),
                    excluded_reason: None,
                }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut valid = rows.iter().filter_map(|r| r.indices);
    let pass = match valid.next() {
        None => false,
        Some(first) => valid.all(|d| d == first),
    };
    Ok(HarnessReport { rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Degeneracy, Interval, ScalarField};
    use crate::expr::parse;
    use crate::tolerance::ToleranceConfig;

    fn scalar_block(a: &str, c: &str, endpoint: Endpoint) -> Result<SingularBlockReport> {
        let zero = Expr::Num(0.0);
        analyze_singular_block(0, &parse(a).unwrap(), (&parse(c).unwrap(), &zero), (0.0, 1.0), endpoint, 1e-10)
    }

    #[test]
    fn one_minus_x_block() {
        // (a u)' + u = 0 with a = 1 - x has constant solutions; the adjoint
        // kernel is 1/(1 - x), whose square diverges.
        let r = scalar_block("1 - x", "0", Endpoint::Right).unwrap();
        assert!(r.maximal_in_l2);
        assert!(!r.adjoint_in_l2);
        assert!(r.maximal.growth_exponent.abs() < 1e-6);
        assert!((r.adjoint.growth_exponent + 1.0).abs() < 1e-6);
        // Collar masses of the constant solution halve exactly.
        let m = &r.maximal.collar_masses;
        assert!((m[1] / m[0] - 0.5).abs() < 1e-8);
        // int over [1 - 2^-j, 1 - 2^-(j+1)] of (1-x)^-2 dx = 2^j: ratio 2
        let m = &r.adjoint.collar_masses;
        assert!((m[1] / m[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn left_degenerate_block_swaps_roles() {
        // a = x vanishes at the left end; with c = 1 the symmetric part is 1/2.
        let r = scalar_block("x", "1", Endpoint::Left).unwrap();
        assert!(!r.maximal_in_l2);
        assert!(r.adjoint_in_l2);
    }

    #[test]
    fn power_law_exponents() {
        // u' = -u / (2(1 - x)) gives sqrt(1 - x); the adjoint kernel is
        // (1 - x)^(-3/2).
        let r = scalar_block("1 - x", "0.5", Endpoint::Right).unwrap();
        assert!(r.maximal_in_l2);
        assert!(!r.adjoint_in_l2);
        assert!((r.maximal.growth_exponent - 0.5).abs() < 1e-6);
        assert!((r.adjoint.growth_exponent + 1.5).abs() < 1e-6);
    }

    #[test]
    fn borderline_log_divergence() {
        // Both kernels are (1 - x)^(-1/2): equal collar masses, divergent sum.
        let r = scalar_block("1 - x", "-0.5", Endpoint::Right).unwrap();
        assert!(!r.maximal_in_l2);
        assert!(!r.adjoint_in_l2);
        let m = &r.maximal.collar_masses;
        assert!((m[2] / m[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scalar_indices_and_invariance() {
        let spec = FriedrichsSpec::scalar("1", "1", (0.0, 1.0)).unwrap();
        assert_eq!(deficiency_indices(&spec).unwrap(), (1, 1));
        let samples: Vec<(String, CoefficientField)> = ["1", "1 + x", "2 + sin(x)", "-1"]
            .iter()
            .map(|s| (s.to_string(), CoefficientField::from_strs(1, &[s]).unwrap()))
            .collect();
        let report = invariance_harness(&spec, &samples).unwrap();
        assert!(report.pass);
        assert_eq!(report.rows.iter().filter(|r| r.indices == Some((1, 1))).count(), 3);
        assert!(report.rows[3].indices.is_none());
        assert!(report.rows[3].excluded_reason.is_some());
    }

    #[test]
    fn block_example_and_regularization() {
        let make = |a2: &str, c2: &str, flags: Vec<Degeneracy>| {
            FriedrichsSpec::new(
                ScalarField::Real,
                Interval::new(0.0, 1.0).unwrap(),
                CoefficientField::diagonal(&["1", a2]).unwrap(),
                CoefficientField::diagonal(&["1", c2]).unwrap(),
                flags,
                ToleranceConfig::default(),
            )
            .unwrap()
        };
        let flag = vec![Degeneracy {
            block: 1,
            endpoint: Endpoint::Right,
        }];
        assert_eq!(deficiency_indices(&make("1 - x", "0", flag)).unwrap(), (2, 1));
        // a + 0.01 is invertible on [0, 1]; C = I + A' as before.
        let regular = make("1.01 - x", "0", vec![]);
        validate_spec(&regular).unwrap();
        assert_eq!(deficiency_indices(&regular).unwrap(), (2, 2));
    }
}
