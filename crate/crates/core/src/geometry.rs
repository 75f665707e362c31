//! Ricci eigenvalues and scalar curvature of a multiply warped product
//! `I ×_{h₁} N₁^{r₁} × ⋯ ×_{h_k} N_k^{r_k}` over an interval.
//!
//! With `ξᵢ = hᵢ′/hᵢ` and `wᵢ = hᵢ″/hᵢ`, the Ricci tensor is diagonal in the
//! obvious frame and its eigenvalues depend only on `s`:
//!
//! - along the base:   `-Σ rᵢ wᵢ`
//! - along fiber `i`:  `μᵢ/hᵢ² - wᵢ - (rᵢ-1)ξᵢ² - ξᵢ Σ_{m≠i} r_m ξ_m`
//!
//! and the scalar curvature is the corresponding trace. `μᵢ` is the Einstein
//! constant of the unscaled fiber metric (`Ric_N = μ g_N`); every formula
//! divides by `hᵢ²` internally, so rescaling `hᵢ ↦ c hᵢ`, `μᵢ ↦ c²μᵢ` leaves
//! all curvature quantities unchanged.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::expr::DomainError;
use crate::numerics::{max_abs, NumericsError};
use crate::{Expr, FunctionHandle, Grid, SampledFunction};

/// A warping function `hᵢ` is nonpositive somewhere on the grid.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("warping function of fiber {fiber} is {value} at grid point {index} (s = {point}); it must be positive")]
pub struct PositivityError {
    pub fiber: usize,
    pub index: usize,
    pub point: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid product: {0}")]
    Invalid(String),
    #[error(transparent)]
    Positivity(#[from] PositivityError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// One fiber: dimension, Einstein constant of the unscaled fiber metric,
/// and warping function.
#[derive(Debug, Clone)]
pub struct FiberSpec {
    dim: usize,
    mu: f64,
    h: FunctionHandle,
}

impl FiberSpec {
    /// A fiber of dimension `dim ≥ 1`. One-dimensional fibers carry no
    /// curvature, so `dim == 1` forces `mu == 0`.
    pub fn new(dim: usize, mu: f64, h: FunctionHandle) -> Result<FiberSpec, GeometryError> {
        if dim < 1 {
            return Err(GeometryError::Invalid("fiber dimension must be ≥ 1".into()));
        }
        if dim == 1 && mu != 0.0 {
            return Err(GeometryError::Invalid(
                "a one-dimensional fiber must have mu = 0".into(),
            ));
        }
        if !mu.is_finite() {
            return Err(GeometryError::Invalid("mu must be finite".into()));
        }
        Ok(FiberSpec { dim, mu, h })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn h(&self) -> &FunctionHandle {
        &self.h
    }
}

/// The warped product: a grid on the base interval plus `k ≥ 1` fibers.
/// Validation scans every grid point eagerly and rejects nonpositive
/// warping functions.
#[derive(Debug, Clone)]
pub struct ProductSpec {
    grid: Grid,
    fibers: Vec<FiberSpec>,
    n: usize,
}

impl ProductSpec {
    pub fn new(grid: Grid, fibers: Vec<FiberSpec>) -> Result<ProductSpec, GeometryError> {
        if fibers.is_empty() {
            return Err(GeometryError::Invalid(
                "at least one fiber is required".into(),
            ));
        }
        let n = 1 + fibers.iter().map(FiberSpec::dim).sum::<usize>();
        if n < 3 {
            return Err(GeometryError::Invalid(format!(
                "total dimension n = {n} must be at least 3"
            )));
        }
        for (fiber_index, fiber) in fibers.iter().enumerate() {
            let samples = fiber.h.sample(&grid)?;
            for (index, &value) in samples.values().iter().enumerate() {
                if value <= 0.0 {
                    return Err(PositivityError {
                        fiber: fiber_index + 1,
                        index,
                        point: grid.point(index),
                        value,
                    }
                    .into());
                }
            }
        }
        Ok(ProductSpec { grid, fibers, n })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn fibers(&self) -> &[FiberSpec] {
        &self.fibers
    }

    pub fn fiber_count(&self) -> usize {
        self.fibers.len()
    }

    /// Total dimension `n = 1 + Σ rᵢ`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn all_closed(&self) -> bool {
        self.fibers.iter().all(|f| f.h.is_closed())
    }

    /// `h`, `h′`, …, up to `max_order`, sampled per fiber.
    pub(crate) fn fiber_derivatives(
        &self,
        max_order: usize,
    ) -> Result<Vec<Vec<SampledFunction>>, GeometryError> {
        let mut out = Vec::with_capacity(self.fibers.len());
        for fiber in &self.fibers {
            let mut per_fiber = Vec::with_capacity(max_order + 1);
            per_fiber.push(fiber.h.sample(&self.grid)?);
            for order in 1..=max_order {
                per_fiber.push(fiber.h.derivative(order, &self.grid)?);
            }
            out.push(per_fiber);
        }
        Ok(out)
    }
}

/// Ricci eigenvalue along the base direction: `-Σ rᵢ hᵢ″/hᵢ`.
pub fn ricci_base(p: &ProductSpec) -> Result<SampledFunction, GeometryError> {
    let d = p.fiber_derivatives(2)?;
    let n = p.grid().count();
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let mut acc = 0.0;
        for (fiber, der) in p.fibers().iter().zip(&d) {
            acc -= fiber.dim() as f64 * der[2].values()[j] / der[0].values()[j];
        }
        values.push(acc);
    }
    Ok(SampledFunction::new(*p.grid(), values)?)
}

/// Ricci eigenvalue along fiber `i` (1-based), with respect to unit vectors
/// of the product metric.
pub fn ricci_fiber(p: &ProductSpec, i: usize) -> Result<SampledFunction, GeometryError> {
    if i == 0 || i > p.fiber_count() {
        return Err(GeometryError::Invalid(format!(
            "fiber index {i} outside 1..={}",
            p.fiber_count()
        )));
    }
    let d = p.fiber_derivatives(2)?;
    let n = p.grid().count();
    let fiber = &p.fibers()[i - 1];
    let r_i = fiber.dim() as f64;
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let h = d[i - 1][0].values()[j];
        let xi = d[i - 1][1].values()[j] / h;
        let w = d[i - 1][2].values()[j] / h;
        let mut cross = 0.0;
        for (m, (other, der)) in p.fibers().iter().zip(&d).enumerate() {
            if m == i - 1 {
                continue;
            }
            cross += other.dim() as f64 * der[1].values()[j] / der[0].values()[j];
        }
        values.push(fiber.mu() / (h * h) - w - (r_i - 1.0) * xi * xi - xi * cross);
    }
    Ok(SampledFunction::new(*p.grid(), values)?)
}

/// Scalar curvature of the product.
pub fn scalar_curvature(p: &ProductSpec) -> Result<SampledFunction, GeometryError> {
    let d = p.fiber_derivatives(2)?;
    let n = p.grid().count();
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let mut acc = 0.0;
        for (fiber, der) in p.fibers().iter().zip(&d) {
            let r = fiber.dim() as f64;
            let h = der[0].values()[j];
            let xi = der[1].values()[j] / h;
            let w = der[2].values()[j] / h;
            acc += r * (-2.0 * w + fiber.mu() / (h * h) - (r - 1.0) * xi * xi);
        }
        for (i, (a, da)) in p.fibers().iter().zip(&d).enumerate() {
            for (m, (b, db)) in p.fibers().iter().zip(&d).enumerate() {
                if i == m {
                    continue;
                }
                let xa = da[1].values()[j] / da[0].values()[j];
                let xb = db[1].values()[j] / db[0].values()[j];
                acc -= (a.dim() * b.dim()) as f64 * xa * xb;
            }
        }
        values.push(acc);
    }
    Ok(SampledFunction::new(*p.grid(), values)?)
}

/// Logarithmic derivative `ξᵢ = hᵢ′/hᵢ` of fiber `i` (1-based).
pub fn xi(p: &ProductSpec, i: usize) -> Result<SampledFunction, GeometryError> {
    if i == 0 || i > p.fiber_count() {
        return Err(GeometryError::Invalid(format!(
            "fiber index {i} outside 1..={}",
            p.fiber_count()
        )));
    }
    let fiber = &p.fibers()[i - 1];
    let h = fiber.h().sample(p.grid())?;
    let dh = fiber.h().derivative(1, p.grid())?;
    Ok(dh.zip_with(&h, |a, b| a / b)?)
}

/// A group of Ricci eigenvalue functions that agree within a gap threshold.
#[derive(Debug, Clone)]
pub struct EigenvalueCluster {
    /// Total multiplicity (1 for the base direction, `rᵢ` per fiber).
    pub multiplicity: usize,
    /// Representative eigenvalue function (first member of the cluster).
    pub values: SampledFunction,
}

/// Cluster the `k + 1` eigenvalue functions by sup-distance: two are in the
/// same cluster when they differ by at most `gap` everywhere.
pub fn eigenvalue_clusters(
    p: &ProductSpec,
    gap: f64,
) -> Result<Vec<EigenvalueCluster>, GeometryError> {
    let mut functions = Vec::with_capacity(p.fiber_count() + 1);
    functions.push((1usize, ricci_base(p)?));
    for (i, fiber) in p.fibers().iter().enumerate() {
        functions.push((fiber.dim(), ricci_fiber(p, i + 1)?));
    }
    let mut clusters: Vec<EigenvalueCluster> = Vec::new();
    'outer: for (multiplicity, values) in functions {
        for cluster in clusters.iter_mut() {
            let diff = cluster.values.zip_with(&values, |a, b| a - b)?;
            if max_abs(&diff, 0)? <= gap {
                cluster.multiplicity += multiplicity;
                continue 'outer;
            }
        }
        clusters.push(EigenvalueCluster {
            multiplicity,
            values,
        });
    }
    Ok(clusters)
}

// ---------------------------------------------------------------------------
// Symbolic builders, available when every warping function is closed-form.
// ---------------------------------------------------------------------------

fn xi_expr_of(h: &Expr) -> Expr {
    Expr::div(h.differentiate(), h.clone())
}

fn w_expr_of(h: &Expr) -> Expr {
    Expr::div(h.differentiate_n(2), h.clone())
}

/// Symbolic `ricci_base` for all-closed products.
pub fn ricci_base_expr(p: &ProductSpec) -> Option<Expr> {
    let mut acc = Expr::lit(0.0);
    for fiber in p.fibers() {
        let h = fiber.h().closed_expr()?;
        acc = Expr::sub(acc, Expr::mul(Expr::int(fiber.dim() as i64), w_expr_of(h)));
    }
    Some(acc)
}

/// Symbolic scalar curvature for all-closed products.
pub fn scalar_curvature_expr(p: &ProductSpec) -> Option<Expr> {
    let mut acc = Expr::lit(0.0);
    for fiber in p.fibers() {
        let h = fiber.h().closed_expr()?;
        let r = Expr::int(fiber.dim() as i64);
        let xi = xi_expr_of(h);
        let term = Expr::add(
            Expr::add(
                Expr::mul(Expr::lit(-2.0), w_expr_of(h)),
                Expr::div(Expr::lit(fiber.mu()), Expr::pow(h.clone(), Expr::lit(2.0))),
            ),
            Expr::mul(
                Expr::lit(-(fiber.dim() as f64 - 1.0)),
                Expr::pow(xi, Expr::lit(2.0)),
            ),
        );
        acc = Expr::add(acc, Expr::mul(r, term));
    }
    for (i, a) in p.fibers().iter().enumerate() {
        for (m, b) in p.fibers().iter().enumerate() {
            if i == m {
                continue;
            }
            let ha = a.h().closed_expr()?;
            let hb = b.h().closed_expr()?;
            acc = Expr::sub(
                acc,
                Expr::mul(
                    Expr::int((a.dim() * b.dim()) as i64),
                    Expr::mul(xi_expr_of(ha), xi_expr_of(hb)),
                ),
            );
        }
    }
    Some(acc)
}
