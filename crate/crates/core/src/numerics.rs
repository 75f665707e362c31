//! Uniform grids, sampled functions, finite differences, and quadrature.
//!
//! Everything here is second-order accurate by design: central differences in
//! the interior, one-sided stencils of the same order at the boundary, and
//! composite trapezoid quadrature. One consistent accuracy budget keeps the
//! sampled fallback path predictable.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::DomainError;
use crate::float;
use crate::Expr;

/// Errors from grid construction, stencils, and quadrature.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("sampled function has {values} values for a grid of {points} points")]
    LengthMismatch { values: usize, points: usize },
    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },
    #[error("sampled input lives on a different grid than requested")]
    GridMismatch,
    #[error("derivative order {order} needs at least {needed} points, grid has {count}")]
    InsufficientStencil {
        order: usize,
        needed: usize,
        count: usize,
    },
    #[error("derivative order {0} is not supported for sampled data (max 3)")]
    UnsupportedOrder(usize),
    #[error("anchor index {index} outside grid of {count} points")]
    AnchorOutOfRange { index: usize, count: usize },
    #[error("trim {trim} leaves no interior points on a grid of {count}")]
    TrimTooLarge { trim: usize, count: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Uniform grid of `count ≥ 3` points on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    count: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, count: usize) -> Result<Grid, NumericsError> {
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(NumericsError::InvalidGrid(format!(
                "endpoints must be finite with a < b, got [{a}, {b}]"
            )));
        }
        if count < 3 {
            return Err(NumericsError::InvalidGrid(format!(
                "need at least 3 points, got {count}"
            )));
        }
        Ok(Grid { a, b, count })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / (self.count - 1) as f64
    }

    /// i-th point; endpoints are exact.
    pub fn point(&self, i: usize) -> f64 {
        let t = i as f64 / (self.count - 1) as f64;
        self.a * (1.0 - t) + self.b * t
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.point(i))
    }
}

/// Function known through its values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<SampledFunction, NumericsError> {
        if values.len() != grid.count() {
            return Err(NumericsError::LengthMismatch {
                values: values.len(),
                points: grid.count(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFiniteSample { index });
        }
        Ok(SampledFunction { grid, values })
    }

    /// Sample a closure over the grid.
    pub fn from_fn<F: FnMut(f64) -> f64>(grid: Grid, mut f: F) -> Result<Self, NumericsError> {
        let values = grid.points().map(&mut f).collect();
        SampledFunction::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with<F: FnMut(f64, f64) -> f64>(
        &self,
        other: &SampledFunction,
        mut f: F,
    ) -> Result<SampledFunction, NumericsError> {
        if self.grid != other.grid {
            return Err(NumericsError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| f(x, y))
            .collect();
        SampledFunction::new(self.grid, values)
    }
}

/// A function given either in closed form or as samples. Closed handles
/// report derivatives symbolically; sampled handles fall back to
/// second-order finite differences.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionHandle {
    Closed(Expr),
    Sampled(SampledFunction),
}

impl FunctionHandle {
    pub fn is_closed(&self) -> bool {
        matches!(self, FunctionHandle::Closed(_))
    }

    pub fn closed_expr(&self) -> Option<&Expr> {
        match self {
            FunctionHandle::Closed(e) => Some(e),
            FunctionHandle::Sampled(_) => None,
        }
    }

    /// Values on `grid`. Sampled handles must already live on `grid`.
    pub fn sample(&self, grid: &Grid) -> Result<SampledFunction, NumericsError> {
        match self {
            FunctionHandle::Closed(e) => {
                let mut values = Vec::with_capacity(grid.count());
                for s in grid.points() {
                    values.push(e.evaluate(s)?);
                }
                SampledFunction::new(*grid, values)
            }
            FunctionHandle::Sampled(f) => {
                if f.grid() != grid {
                    return Err(NumericsError::GridMismatch);
                }
                Ok(f.clone())
            }
        }
    }

    /// Derivative of the given order (1..=3) sampled on `grid`.
    pub fn derivative(&self, order: usize, grid: &Grid) -> Result<SampledFunction, NumericsError> {
        derivative(self, order, grid)
    }
}

impl From<Expr> for FunctionHandle {
    fn from(e: Expr) -> Self {
        FunctionHandle::Closed(e)
    }
}

impl From<SampledFunction> for FunctionHandle {
    fn from(f: SampledFunction) -> Self {
        FunctionHandle::Sampled(f)
    }
}

/// Derivative of order 1..=3 on `grid`: symbolic for closed handles,
/// second-order finite differences (one-sided at the ends) for sampled ones.
pub fn derivative(
    fh: &FunctionHandle,
    order: usize,
    grid: &Grid,
) -> Result<SampledFunction, NumericsError> {
    if order == 0 {
        return fh.sample(grid);
    }
    if !(1..=3).contains(&order) {
        return Err(NumericsError::UnsupportedOrder(order));
    }
    match fh {
        FunctionHandle::Closed(e) => {
            let d = e.differentiate_n(order);
            let mut values = Vec::with_capacity(grid.count());
            for s in grid.points() {
                values.push(d.evaluate(s)?);
            }
            SampledFunction::new(*grid, values)
        }
        FunctionHandle::Sampled(f) => {
            if f.grid() != grid {
                return Err(NumericsError::GridMismatch);
            }
            fd_derivative(f, order)
        }
    }
}

/// Finite-difference derivative of sampled data, second-order accurate
/// everywhere (central stencils inside, one-sided at the boundary).
pub fn fd_derivative(f: &SampledFunction, order: usize) -> Result<SampledFunction, NumericsError> {
    if !(1..=3).contains(&order) {
        return Err(NumericsError::UnsupportedOrder(order));
    }
    let n = f.grid().count();
    // Minimum points for a second-order stencil of each order.
    let needed = match order {
        1 => 3,
        2 => 4,
        _ => 5,
    };
    if n < needed {
        return Err(NumericsError::InsufficientStencil {
            order,
            needed,
            count: n,
        });
    }
    let h = f.grid().spacing();
    let v = f.values();
    let mut out = vec![0.0; n];
    // Symmetric interior windows get a free order of accuracy; boundary
    // windows are widened to stay second order.
    let (interior_half, boundary_width) = match order {
        1 => (1usize, 3usize),
        2 => (1, 4),
        _ => (2, 5),
    };
    for i in 0..n {
        let (lo, width) = if i >= interior_half && i + interior_half < n {
            (i - interior_half, 2 * interior_half + 1)
        } else if i < interior_half {
            (0, boundary_width)
        } else {
            (n - boundary_width, boundary_width)
        };
        let xs: Vec<f64> = (lo..lo + width)
            .map(|j| (j as f64 - i as f64) * h)
            .collect();
        let w = fd_weights(&xs, 0.0, order);
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            acc += wk * v[lo + k];
        }
        out[i] = acc;
    }
    SampledFunction::new(*f.grid(), out)
}

/// Fornberg weights for the `m`-th derivative at `z` from nodes `x`.
fn fd_weights(x: &[f64], z: f64, m: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Composite-trapezoid antiderivative `F` with `F(s_anchor) = constant`.
pub fn cumulative_integral(
    f: &SampledFunction,
    anchor_index: usize,
    constant: f64,
) -> Result<SampledFunction, NumericsError> {
    let n = f.grid().count();
    if anchor_index >= n {
        return Err(NumericsError::AnchorOutOfRange {
            index: anchor_index,
            count: n,
        });
    }
    let h = f.grid().spacing();
    let v = f.values();
    let mut acc = vec![0.0; n];
    for i in 1..n {
        acc[i] = acc[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
    }
    let shift = constant - acc[anchor_index];
    for value in acc.iter_mut() {
        *value += shift;
    }
    SampledFunction::new(*f.grid(), acc)
}

/// Sup-norm over indices `[trim, count-1-trim]`.
pub fn max_abs(f: &SampledFunction, trim: usize) -> Result<f64, NumericsError> {
    let n = f.grid().count();
    if 2 * trim >= n {
        return Err(NumericsError::TrimTooLarge { trim, count: n });
    }
    let mut best = 0.0f64;
    for &v in &f.values()[trim..n - trim] {
        best = best.max(float::abs(v));
    }
    Ok(best)
}

/// Sup-norm with trimming that also skips an explicit list of indices.
pub(crate) fn max_abs_excluding(f: &SampledFunction, trim: usize, excluded: &[usize]) -> f64 {
    let n = f.grid().count();
    let mut best = 0.0f64;
    for (i, &v) in f.values().iter().enumerate() {
        if i < trim || i >= n - trim || excluded.contains(&i) {
            continue;
        }
        best = best.max(float::abs(v));
    }
    best
}
