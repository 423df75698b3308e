//! Radial continuous valuations on a discretized sphere.
//!
//! Star bodies are represented by their radial functions on a finite
//! [`DirectionGrid`]. On top of that sit valuations and their Jordan
//! decomposition, the control and representing measures, the extension to
//! simple star sets, and recovery of the representing kernel.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod extension;
pub mod jordan;
pub mod kernel_extract;
pub mod measures;
pub mod sphere_grid;
pub mod star_core;
pub mod valuation;

pub use error::{Error, Result};
pub use extension::{agreement_check, cauchy_check, extend_bounded, extend_simple, CauchyReport, Extension};
pub use jordan::{brute_force_sup, decompose, vplus_blackbox, vplus_kernel, DecompositionResult};
pub use kernel_extract::{extract_kernel, l1_modulus, nu_modulus, nu_modulus_sup, roundtrip_error};
pub use measures::{content, control_measure, normalized_control, radon_nikodym, representing_measure, GridMeasure};
pub use sphere_grid::{build_grid, distance, grid_mass, outer_band, DirectionGrid, GridSpec, GridSubset};
pub use star_core::{join, meet, quantize, radial_metric, radial_sum, to_radial, RadialFunction, SimpleStarSet};
pub use valuation::{
    bounded_diagnostic, check_additive, check_valuation_identity, eval_integral, min_functional, rim_decay,
    theta_recover, BlackBoxValuation, Kernel, KernelValuation, SharedValuation, ThetaFamily, Valuation,
};
