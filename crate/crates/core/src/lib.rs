//! Symbolic and numerical machinery for gradient almost Ricci solitons on
//! multiply warped products `I ×_{h₁} N₁^{r₁} × ⋯ ×_{h_k} N_k^{r_k}` with a
//! one-dimensional base.
//!
//! The crate is organised bottom-up:
//!
//! - [`expr`] — closed-form functions of one variable `s`: parsing,
//!   evaluation, symbolic differentiation, light simplification.
//! - [`numerics`] — uniform grids, sampled functions, finite-difference
//!   stencils and composite quadrature, and the [`numerics::FunctionHandle`]
//!   that unifies closed-form and sampled data.
//! - [`geometry`] — Ricci eigenvalues and scalar curvature of the warped
//!   product in terms of the warping functions.
//! - [`soliton`] — residuals of the almost-soliton system, the harmonic-Weyl
//!   conditions, and the drift quantities `B`, `C` with their quadratic
//!   constraints on `ξᵢ = hᵢ′/hᵢ`.
//! - [`constructors`] — explicit soliton families: one-fiber quadrature
//!   construction, the trigonometric multi-fiber family, rigid products, and
//!   Schouten-type one-fiber solitons.
//! - [`reduction`] — exact-rational coefficient pipeline for the degree-12
//!   polynomial obstructing nonconstant two-fiber potentials.
//!
//! The crate is `no_std`-compatible (`alloc` required); enable the `libm`
//! feature instead of `std` to route float transcendentals through libm.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("warpsol-core needs either the `std` or the `libm` feature for f64 math");

pub mod constructors;
pub mod expr;
pub mod geometry;
pub mod numerics;
pub mod reduction;
pub mod soliton;

mod float;

pub use expr::{DomainError, Expr, ParseError};
pub use geometry::{FiberSpec, ProductSpec};
pub use numerics::{FunctionHandle, Grid, SampledFunction};
pub use soliton::{ResidualReport, SolitonSpec};

/// Default number of grid points used by constructors and the CLI.
pub const DEFAULT_GRID_POINTS: usize = 1001;

/// Default residual tolerance when every function handle is closed-form.
pub const TOL_CLOSED: f64 = 1e-8;

/// Default residual tolerance when any function handle is sampled.
pub const TOL_SAMPLED: f64 = 1e-5;

/// Grid points with `|f′|` below this threshold are excluded from the drift
/// quantities `B`, `C` and listed in the report instead.
pub const CRITICAL_EPS: f64 = 1e-12;

/// Number of points trimmed from each end of a grid when taking sup-norms,
/// so that one-sided stencil noise does not dominate summaries.
pub const DEFAULT_TRIM: usize = 2;
