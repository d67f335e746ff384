//! Boundary-condition analysis for one-dimensional Friedrichs systems
//! `A u' + C u = f` on a bounded interval.
//!
//! The pipeline is: validate the coefficients ([`coefficients`]), integrate
//! kernels of the maximal operators ([`ode`]), pass to boundary traces
//! ([`trace_space`]), count deficiency indices ([`defect`]), classify
//! boundary-condition subspaces ([`classification`]) and solve the resulting
//! boundary-value problems ([`solver`]).

pub mod classification;
pub mod coefficients;
pub mod defect;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod ode;
pub mod solver;
pub mod tolerance;
pub mod trace_space;

pub use error::{Error, ErrorClass, Result};
