//! Numerical laboratory for multi-bump solutions of the fractional critical
//! equation (−Δ)^s u = K(|x|)|u|^{2*_s−2}u.
//!
//! The crate builds symmetric bubble configurations, evaluates every expansion
//! constant of the reduced energy by quadrature, runs the projected linear
//! solve and contraction for the correction, and locates critical points of
//! the reduced functional.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the formulas.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments,
    clippy::type_complexity
)]

pub mod config;
pub mod correction;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod norms;
pub mod params;
pub mod quadrature;
pub mod reduced;
pub mod report;
pub mod special;
pub mod suites;

pub use error::{Error, Result};
