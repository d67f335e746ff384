use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by every stage of the pipeline.
///
/// `rank_tol` and `psd_tol` are relative: rank decisions compare singular
/// values against `rank_tol * sigma_max`, definiteness decisions compare
/// eigenvalues against `psd_tol * |Q|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    /// Sample points used to certify the coefficient axioms.
    pub grid: usize,
    pub rank_tol: f64,
    pub psd_tol: f64,
    pub ode_rtol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            grid: 4096,
            rank_tol: 1e-8,
            psd_tol: 1e-8,
            ode_rtol: 1e-10,
        }
    }
}

impl ToleranceConfig {
    /// Number of sample points actually used on an interval of the given
    /// length: never fewer than 64 per unit length.
    pub fn grid_points(&self, length: f64) -> usize {
        let per_unit = (64.0 * length).ceil() as usize;
        self.grid.max(per_unit).max(2)
    }
}
