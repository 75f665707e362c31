//! Residuals of the gradient almost Ricci soliton system on a multiply
//! warped product, the harmonic-Weyl conditions, and the drift quantities
//! `B`, `C` with the quadratic constraints they impose on `ξᵢ = hᵢ′/hᵢ`.
//!
//! A candidate `(f, λ)` solves the soliton equation exactly when the `k + 1`
//! residuals
//!
//! ```text
//! res₀ = f″ - Σⱼ rⱼ hⱼ″/hⱼ - λ
//! resᵢ = -hᵢ″/hᵢ - (rᵢ-1)ξᵢ² - ξᵢ Σ_{m≠i} r_m ξ_m + f′ ξᵢ + μᵢ/hᵢ² - λ
//! ```
//!
//! vanish. The residuals are assembled pointwise from the ξ-form to limit
//! cancellation; [`soliton_residuals_via_eigenvalues`] recomputes them by
//! composing the geometry operations and exists as an independent codepath
//! for cross-checking.
//!
//! Everything is reported raw (not relative). Grid points where `|f′|`
//! falls below [`crate::CRITICAL_EPS`] are excluded from the `B`, `C`
//! sup-norms and listed in the report, since both quantities divide by `f′`
//! and only make sense near regular points of the potential.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::DomainError;
use crate::geometry::{self, GeometryError, ProductSpec};
use crate::numerics::{fd_derivative, max_abs_excluding, NumericsError};
use crate::{
    Expr, FunctionHandle, SampledFunction, CRITICAL_EPS, DEFAULT_TRIM, TOL_CLOSED, TOL_SAMPLED,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolitonError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(
        "f′ vanishes on the whole grid ({count} points below {threshold:e}); B and C are undefined"
    )]
    CriticalPoints { count: usize, threshold: f64 },
    #[error("check requires exactly {expected} fibers, spec has {got}")]
    Arity { expected: usize, got: usize },
}

/// A verification payload: the product together with a candidate potential
/// `f` and soliton function `λ`.
#[derive(Debug, Clone)]
pub struct SolitonSpec {
    product: ProductSpec,
    f: FunctionHandle,
    lambda: FunctionHandle,
}

impl SolitonSpec {
    /// Bundle a product with `(f, λ)`; both handles must be evaluable on the
    /// product grid.
    pub fn new(
        product: ProductSpec,
        f: FunctionHandle,
        lambda: FunctionHandle,
    ) -> Result<SolitonSpec, SolitonError> {
        f.sample(product.grid())?;
        lambda.sample(product.grid())?;
        Ok(SolitonSpec { product, f, lambda })
    }

    pub fn product(&self) -> &ProductSpec {
        &self.product
    }

    pub fn f(&self) -> &FunctionHandle {
        &self.f
    }

    pub fn lambda(&self) -> &FunctionHandle {
        &self.lambda
    }

    pub fn all_closed(&self) -> bool {
        self.product.all_closed() && self.f.is_closed() && self.lambda.is_closed()
    }

    /// Default residual tolerance: tight for closed-form data, loose enough
    /// for the second-order sampled paths otherwise.
    pub fn default_tolerance(&self) -> f64 {
        if self.all_closed() {
            TOL_CLOSED
        } else {
            TOL_SAMPLED
        }
    }
}

/// One residual function with its trimmed sup-norm.
#[derive(Debug, Clone)]
pub struct ResidualSeries {
    pub label: String,
    pub values: SampledFunction,
    /// Grid indices masked out of the sup-norm (critical points of `f`).
    pub excluded: Vec<usize>,
    pub sup_norm: f64,
}

impl ResidualSeries {
    pub(crate) fn new(
        label: String,
        values: SampledFunction,
        excluded: Vec<usize>,
        trim: usize,
    ) -> Self {
        let sup_norm = max_abs_excluding(&values, trim, &excluded);
        ResidualSeries {
            label,
            values,
            excluded,
            sup_norm,
        }
    }
}

/// Residuals of one check: per-equation series, the tolerance they were
/// judged against, and the overall verdict.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub series: Vec<ResidualSeries>,
    pub tolerance: f64,
    pub trim: usize,
    pub pass: bool,
}

impl ResidualReport {
    pub(crate) fn new(series: Vec<ResidualSeries>, tolerance: f64) -> Self {
        let pass = series.iter().all(|s| s.sup_norm <= tolerance);
        ResidualReport {
            series,
            tolerance,
            trim: DEFAULT_TRIM,
            pass,
        }
    }

    /// Largest sup-norm across all equations.
    pub fn worst(&self) -> f64 {
        self.series.iter().fold(0.0, |acc, s| acc.max(s.sup_norm))
    }

    /// Union of the per-series excluded indices.
    pub fn excluded_points(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for s in &self.series {
            for &i in &s.excluded {
                if !out.contains(&i) {
                    out.push(i);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Per-spec sampled data shared by the residual assemblers.
struct Profile {
    dims: Vec<f64>,
    mus: Vec<f64>,
    h: Vec<Vec<f64>>,
    xi: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    lam: Vec<f64>,
}

impl Profile {
    fn build(spec: &SolitonSpec) -> Result<Profile, SolitonError> {
        let p = spec.product();
        let grid = p.grid();
        let d = p.fiber_derivatives(2)?;
        let mut h = Vec::new();
        let mut xi = Vec::new();
        let mut w = Vec::new();
        for per_fiber in &d {
            let hv = per_fiber[0].values().to_vec();
            let xv: Vec<f64> = per_fiber[1]
                .values()
                .iter()
                .zip(&hv)
                .map(|(d1, h)| d1 / h)
                .collect();
            let wv: Vec<f64> = per_fiber[2]
                .values()
                .iter()
                .zip(&hv)
                .map(|(d2, h)| d2 / h)
                .collect();
            h.push(hv);
            xi.push(xv);
            w.push(wv);
        }
        let f1 = spec.f().derivative(1, grid)?.values().to_vec();
        let f2 = spec.f().derivative(2, grid)?.values().to_vec();
        let lam = spec.lambda().sample(grid)?.values().to_vec();
        Ok(Profile {
            dims: p.fibers().iter().map(|f| f.dim() as f64).collect(),
            mus: p.fibers().iter().map(|f| f.mu()).collect(),
            h,
            xi,
            w,
            f1,
            f2,
            lam,
        })
    }
}

/// Residuals of the `k + 1` soliton equations, assembled pointwise in ξ-form.
pub fn soliton_residuals(spec: &SolitonSpec, tol: f64) -> Result<ResidualReport, SolitonError> {
    let pr = Profile::build(spec)?;
    let grid = *spec.product().grid();
    let count = grid.count();
    let k = pr.dims.len();
    let mut series = Vec::with_capacity(k + 1);

    let mut res0 = Vec::with_capacity(count);
    for j in 0..count {
        let mut acc = pr.f2[j] - pr.lam[j];
        for i in 0..k {
            acc -= pr.dims[i] * pr.w[i][j];
        }
        res0.push(acc);
    }
    series.push(ResidualSeries::new(
        "res0".into(),
        SampledFunction::new(grid, res0)?,
        vec![],
        DEFAULT_TRIM,
    ));

    for i in 0..k {
        let mut res = Vec::with_capacity(count);
        for j in 0..count {
            let mut cross = 0.0;
            for m in 0..k {
                if m != i {
                    cross += pr.dims[m] * pr.xi[m][j];
                }
            }
            let xi = pr.xi[i][j];
            let value = -pr.w[i][j] - (pr.dims[i] - 1.0) * xi * xi - xi * cross
                + pr.f1[j] * xi
                + pr.mus[i] / (pr.h[i][j] * pr.h[i][j])
                - pr.lam[j];
            res.push(value);
        }
        series.push(ResidualSeries::new(
            format!("res_fiber_{}", i + 1),
            SampledFunction::new(grid, res)?,
            vec![],
            DEFAULT_TRIM,
        ));
    }
    Ok(ResidualReport::new(series, tol))
}

/// The same equations assembled through the geometry operations:
/// `res₀ = f″ + Ric_base - λ` and `resᵢ = f′ξᵢ + Ric_fiber(i) - λ`.
/// Independent codepath used to cross-check [`soliton_residuals`].
pub fn soliton_residuals_via_eigenvalues(
    spec: &SolitonSpec,
    tol: f64,
) -> Result<ResidualReport, SolitonError> {
    let p = spec.product();
    let grid = *p.grid();
    let f2 = spec.f().derivative(2, &grid)?;
    let f1 = spec.f().derivative(1, &grid)?;
    let lam = spec.lambda().sample(&grid)?;
    let mut series = Vec::with_capacity(p.fiber_count() + 1);

    let base = geometry::ricci_base(p)?;
    let res0: Vec<f64> = f2
        .values()
        .iter()
        .zip(base.values())
        .zip(lam.values())
        .map(|((f2, b), l)| f2 + b - l)
        .collect();
    series.push(ResidualSeries::new(
        "res0".into(),
        SampledFunction::new(grid, res0)?,
        vec![],
        DEFAULT_TRIM,
    ));

    for i in 1..=p.fiber_count() {
        let eig = geometry::ricci_fiber(p, i)?;
        let xi = geometry::xi(p, i)?;
        let res: Vec<f64> = f1
            .values()
            .iter()
            .zip(xi.values())
            .zip(eig.values().iter().zip(lam.values()))
            .map(|((f1, x), (e, l))| f1 * x + e - l)
            .collect();
        series.push(ResidualSeries::new(
            format!("res_fiber_{i}"),
            SampledFunction::new(grid, res)?,
            vec![],
            DEFAULT_TRIM,
        ));
    }
    Ok(ResidualReport::new(series, tol))
}

/// Pairwise harmonic-Weyl residuals `hᵢ″/hᵢ - hⱼ″/hⱼ` for `i < j`.
/// A single fiber yields an empty report that passes vacuously.
pub fn harmonic_weyl_residuals(p: &ProductSpec, tol: f64) -> Result<ResidualReport, SolitonError> {
    let d = p.fiber_derivatives(2)?;
    let grid = *p.grid();
    let count = grid.count();
    let k = p.fiber_count();
    let mut series = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let mut res = Vec::with_capacity(count);
            for idx in 0..count {
                let wi = d[i][2].values()[idx] / d[i][0].values()[idx];
                let wj = d[j][2].values()[idx] / d[j][0].values()[idx];
                res.push(wi - wj);
            }
            series.push(ResidualSeries::new(
                format!("hw_pair_{}_{}", i + 1, j + 1),
                SampledFunction::new(grid, res)?,
                vec![],
                DEFAULT_TRIM,
            ));
        }
    }
    Ok(ResidualReport::new(series, tol))
}

/// The drift quantities `B`, `C` with the critical-point mask applied.
#[derive(Debug, Clone)]
pub struct BcQuantities {
    pub b: SampledFunction,
    pub c: SampledFunction,
    /// Grid indices with `|f′|` below the critical threshold; `b` and `c`
    /// are zeroed there and the indices are excluded from sup-norms.
    pub excluded: Vec<usize>,
}

/// Pointwise scalar-curvature derivative from third derivatives of the
/// warping functions.
fn scalar_curvature_prime(p: &ProductSpec, d: &[Vec<SampledFunction>], j: usize) -> f64 {
    let k = p.fiber_count();
    let mut acc = 0.0;
    for i in 0..k {
        let r = p.fibers()[i].dim() as f64;
        let mu = p.fibers()[i].mu();
        let h = d[i][0].values()[j];
        let xi = d[i][1].values()[j] / h;
        let w = d[i][2].values()[j] / h;
        let xi_p = w - xi * xi;
        let w_p = d[i][3].values()[j] / h - w * xi;
        acc += r * (-2.0 * w_p - 2.0 * mu * xi / (h * h) - 2.0 * (r - 1.0) * xi * xi_p);
    }
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let ra = p.fibers()[a].dim() as f64;
            let rb = p.fibers()[b].dim() as f64;
            let ha = d[a][0].values()[j];
            let hb = d[b][0].values()[j];
            let xa = d[a][1].values()[j] / ha;
            let xb = d[b][1].values()[j] / hb;
            let xa_p = d[a][2].values()[j] / ha - xa * xa;
            let xb_p = d[b][2].values()[j] / hb - xb * xb;
            acc -= ra * rb * (xa_p * xb + xa * xb_p);
        }
    }
    acc
}

/// The functions `B = ((n-1)λ - R + Ric_base - (f′)²)/f′` and
/// `C = (2(n-1)λ′ - R′)/(2(n-1)f′) + λ`, sampled on the grid.
pub fn bc_quantities(spec: &SolitonSpec) -> Result<BcQuantities, SolitonError> {
    let p = spec.product();
    let grid = *p.grid();
    let count = grid.count();
    let d = p.fiber_derivatives(3)?;
    let f1 = spec.f().derivative(1, &grid)?;
    let lam = spec.lambda().sample(&grid)?;
    let lam1 = spec.lambda().derivative(1, &grid)?;
    let n = p.n() as f64;

    let mut excluded = Vec::new();
    let mut b = Vec::with_capacity(count);
    let mut c = Vec::with_capacity(count);
    for j in 0..count {
        let fp = f1.values()[j];
        if crate::float::abs(fp) < CRITICAL_EPS {
            excluded.push(j);
            b.push(0.0);
            c.push(0.0);
            continue;
        }
        let mut r = 0.0;
        let mut ric_base = 0.0;
        for (i, fiber) in p.fibers().iter().enumerate() {
            let ri = fiber.dim() as f64;
            let h = d[i][0].values()[j];
            let xi = d[i][1].values()[j] / h;
            let w = d[i][2].values()[j] / h;
            r += ri * (-2.0 * w + fiber.mu() / (h * h) - (ri - 1.0) * xi * xi);
            ric_base -= ri * w;
        }
        for (a, fa) in p.fibers().iter().enumerate() {
            for (m, fm) in p.fibers().iter().enumerate() {
                if a == m {
                    continue;
                }
                let xa = d[a][1].values()[j] / d[a][0].values()[j];
                let xm = d[m][1].values()[j] / d[m][0].values()[j];
                r -= (fa.dim() * fm.dim()) as f64 * xa * xm;
            }
        }
        let r_prime = scalar_curvature_prime(p, &d, j);
        b.push(((n - 1.0) * lam.values()[j] - r + ric_base - fp * fp) / fp);
        c.push(
            (2.0 * (n - 1.0) * lam1.values()[j] - r_prime) / (2.0 * (n - 1.0) * fp)
                + lam.values()[j],
        );
    }
    if excluded.len() == count {
        return Err(SolitonError::CriticalPoints {
            count,
            threshold: CRITICAL_EPS,
        });
    }
    Ok(BcQuantities {
        b: SampledFunction::new(grid, b)?,
        c: SampledFunction::new(grid, c)?,
        excluded,
    })
}

/// Symbolic `B` and `C` for all-closed specs.
fn bc_exprs(spec: &SolitonSpec) -> Option<(Expr, Expr)> {
    let p = spec.product();
    let f = spec.f().closed_expr()?;
    let lam = spec.lambda().closed_expr()?;
    let r = geometry::scalar_curvature_expr(p)?;
    let ric_base = geometry::ricci_base_expr(p)?;
    let n1 = Expr::int(p.n() as i64 - 1);
    let f1 = f.differentiate();
    let b = Expr::div(
        Expr::sub(
            Expr::add(
                Expr::sub(Expr::mul(n1.clone(), lam.clone()), r.clone()),
                ric_base,
            ),
            Expr::pow(f1.clone(), Expr::lit(2.0)),
        ),
        f1.clone(),
    );
    let c = Expr::add(
        Expr::div(
            Expr::sub(
                Expr::mul(Expr::mul(Expr::lit(2.0), n1.clone()), lam.differentiate()),
                r.differentiate(),
            ),
            Expr::mul(Expr::mul(Expr::lit(2.0), n1), f1),
        ),
        lam.clone(),
    );
    Some((b, c))
}

/// Evaluate an expression over the grid, zeroing masked points (where the
/// expression is allowed to be singular).
fn eval_masked(e: &Expr, grid: &crate::Grid, excluded: &[usize]) -> Result<Vec<f64>, SolitonError> {
    let mut out = Vec::with_capacity(grid.count());
    for (j, s) in grid.points().enumerate() {
        if excluded.contains(&j) {
            out.push(0.0);
            continue;
        }
        out.push(e.evaluate(s)?);
    }
    Ok(out)
}

/// Residuals of the two quadratic constraints satisfied by every
/// `ξᵢ = hᵢ′/hᵢ` on a harmonic-Weyl almost soliton:
///
/// ```text
/// xi_q33_i = ξᵢ² - B ξᵢ - C + μᵢ/hᵢ²
/// xi_q34_i = B ξᵢ² + (B′ + 2λ) ξᵢ + (C - λ) B + C′
/// ```
///
/// For all-closed specs `B′`, `C′` come from symbolic differentiation of the
/// composed expressions; otherwise they are finite differences of the
/// sampled `B`, `C` (with the mask widened by the stencil radius). The
/// sampled derivative series is effectively a fourth difference of the raw
/// samples, so its accuracy floor scales like `ε/Δs⁴` in the machine
/// precision `ε`: refining the grid past a few hundred points makes that
/// series worse, not better.
pub fn xi_quadratic_residuals(
    spec: &SolitonSpec,
    tol: f64,
) -> Result<ResidualReport, SolitonError> {
    let p = spec.product();
    let grid = *p.grid();
    let count = grid.count();
    let k = p.fiber_count();
    let bc = bc_quantities(spec)?;
    let lam = spec.lambda().sample(&grid)?;
    let d = p.fiber_derivatives(1)?;
    let h0: Vec<&[f64]> = d.iter().map(|per| per[0].values()).collect();
    let xis: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            d[i][1]
                .values()
                .iter()
                .zip(h0[i])
                .map(|(d1, h)| d1 / h)
                .collect()
        })
        .collect();

    let closed = spec.all_closed();
    let (b_vals, c_vals, b1_vals, c1_vals, prime_excluded) = if closed {
        let (b_expr, c_expr) = bc_exprs(spec).expect("all-closed spec must compose");
        let b1 = b_expr.differentiate();
        let c1 = c_expr.differentiate();
        (
            eval_masked(&b_expr, &grid, &bc.excluded)?,
            eval_masked(&c_expr, &grid, &bc.excluded)?,
            eval_masked(&b1, &grid, &bc.excluded)?,
            eval_masked(&c1, &grid, &bc.excluded)?,
            bc.excluded.clone(),
        )
    } else {
        // Finite differences of B and C; points whose stencil touches the
        // mask are excluded as well.
        let b1 = fd_derivative(&bc.b, 1)?;
        let c1 = fd_derivative(&bc.c, 1)?;
        let mut widened = Vec::new();
        for &i in &bc.excluded {
            for offset in -2i64..=2 {
                let j = i as i64 + offset;
                if j >= 0 && (j as usize) < count && !widened.contains(&(j as usize)) {
                    widened.push(j as usize);
                }
            }
        }
        // B and C near the ends come from one-sided stencils whose error is
        // not smooth in j; differentiating across that band loses an order,
        // so it is excluded from the derivative series.
        let guard = 4.min(count / 2);
        for j in (0..guard).chain(count - guard..count) {
            if !widened.contains(&j) {
                widened.push(j);
            }
        }
        widened.sort_unstable();
        (
            bc.b.values().to_vec(),
            bc.c.values().to_vec(),
            b1.values().to_vec(),
            c1.values().to_vec(),
            widened,
        )
    };

    let mut series = Vec::with_capacity(2 * k);
    for i in 0..k {
        let fiber = &p.fibers()[i];
        let mut res = Vec::with_capacity(count);
        for j in 0..count {
            if bc.excluded.contains(&j) {
                res.push(0.0);
                continue;
            }
            let xi = xis[i][j];
            let h = h0[i][j];
            res.push(xi * xi - b_vals[j] * xi - c_vals[j] + fiber.mu() / (h * h));
        }
        series.push(ResidualSeries::new(
            format!("xi_q33_{}", i + 1),
            SampledFunction::new(grid, res)?,
            bc.excluded.clone(),
            DEFAULT_TRIM,
        ));
    }
    for i in 0..k {
        let mut res = Vec::with_capacity(count);
        for j in 0..count {
            if prime_excluded.contains(&j) {
                res.push(0.0);
                continue;
            }
            let xi = xis[i][j];
            res.push(
                b_vals[j] * xi * xi
                    + (b1_vals[j] + 2.0 * lam.values()[j]) * xi
                    + (c_vals[j] - lam.values()[j]) * b_vals[j]
                    + c1_vals[j],
            );
        }
        series.push(ResidualSeries::new(
            format!("xi_q34_{}", i + 1),
            SampledFunction::new(grid, res)?,
            prime_excluded.clone(),
            DEFAULT_TRIM,
        ));
    }
    Ok(ResidualReport::new(series, tol))
}

/// For a two-fiber harmonic-Weyl soliton, `λ` is determined by the warping
/// data alone; this residual measures
/// `λ + a′ + r₁a² + b′ + r₂b² - μ₁/h₁² - μ₂/h₂²` with `a = ξ₁`, `b = ξ₂`.
pub fn lambda_good_check(spec: &SolitonSpec, tol: f64) -> Result<ResidualReport, SolitonError> {
    let p = spec.product();
    if p.fiber_count() != 2 {
        return Err(SolitonError::Arity {
            expected: 2,
            got: p.fiber_count(),
        });
    }
    let grid = *p.grid();
    let count = grid.count();
    let d = p.fiber_derivatives(2)?;
    let lam = spec.lambda().sample(&grid)?;
    let mut res = Vec::with_capacity(count);
    for j in 0..count {
        let mut acc = lam.values()[j];
        for i in 0..2 {
            let fiber = &p.fibers()[i];
            let r = fiber.dim() as f64;
            let h = d[i][0].values()[j];
            let xi = d[i][1].values()[j] / h;
            let w = d[i][2].values()[j] / h;
            // a′ + r a² = (w - ξ²) + r ξ²
            acc += w + (r - 1.0) * xi * xi - fiber.mu() / (h * h);
        }
        res.push(acc);
    }
    let series = vec![ResidualSeries::new(
        "lambda_good".into(),
        SampledFunction::new(grid, res)?,
        vec![],
        DEFAULT_TRIM,
    )];
    Ok(ResidualReport::new(series, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FiberSpec;
    use crate::Grid;

    fn grid(a: f64, b: f64, count: usize) -> Grid {
        Grid::new(a, b, count).unwrap()
    }

    fn closed(text: &str) -> FunctionHandle {
        FunctionHandle::Closed(Expr::parse(text).unwrap())
    }

    fn spec_one_fiber(
        htext: &str,
        dim: usize,
        mu: f64,
        ftext: &str,
        ltext: &str,
        g: Grid,
    ) -> SolitonSpec {
        let fiber = FiberSpec::new(dim, mu, closed(htext)).unwrap();
        let product = ProductSpec::new(g, alloc::vec![fiber]).unwrap();
        SolitonSpec::new(product, closed(ftext), closed(ltext)).unwrap()
    }

    fn rigid_spec(g: Grid) -> SolitonSpec {
        // n = 5, r = (2, 2), h₁ = s, h₂ ≡ 1, μ₁ = μ₂ = 1, f = s²/2, λ ≡ 1.
        let f1 = FiberSpec::new(2, 1.0, closed("s")).unwrap();
        let f2 = FiberSpec::new(2, 1.0, closed("1")).unwrap();
        let product = ProductSpec::new(g, alloc::vec![f1, f2]).unwrap();
        SolitonSpec::new(product, closed("s^2/2"), closed("1")).unwrap()
    }

    #[test]
    fn flat_product_with_linear_potential() {
        let spec = spec_one_fiber("1", 2, 0.0, "2*s + 1", "0", grid(-1.0, 1.0, 101));
        let report = soliton_residuals(&spec, 1e-12).unwrap();
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn exponential_one_fiber_soliton() {
        // k=1, n=4, h=exp(s), μ=0, f=exp(s), λ=exp(s)-3.
        let spec = spec_one_fiber(
            "exp(s)",
            3,
            0.0,
            "exp(s)",
            "exp(s) - 3",
            grid(-0.5, 1.0, 301),
        );
        let report = soliton_residuals(&spec, 1e-10).unwrap();
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn rigid_product_soliton() {
        let report = soliton_residuals(&rigid_spec(grid(0.5, 2.0, 401)), 1e-10).unwrap();
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn dual_codepaths_agree() {
        for spec in [
            spec_one_fiber(
                "exp(s)",
                3,
                0.0,
                "exp(s)",
                "exp(s) - 3",
                grid(-0.5, 1.0, 301),
            ),
            rigid_spec(grid(0.5, 2.0, 301)),
        ] {
            let a = soliton_residuals(&spec, 1e-8).unwrap();
            let b = soliton_residuals_via_eigenvalues(&spec, 1e-8).unwrap();
            for (sa, sb) in a.series.iter().zip(&b.series) {
                assert_eq!(sa.label, sb.label);
                let diff = sa.values.zip_with(&sb.values, |x, y| x - y).unwrap();
                assert!(crate::numerics::max_abs(&diff, 0).unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn harmonic_weyl_vacuous_for_one_fiber() {
        let spec = spec_one_fiber("exp(s)", 3, 0.0, "exp(s)", "exp(s)-3", grid(0.0, 1.0, 51));
        let report = harmonic_weyl_residuals(spec.product(), 1e-10).unwrap();
        assert!(report.pass);
        assert!(report.series.is_empty());
    }

    #[test]
    fn harmonic_weyl_cone_times_flat() {
        let f1 = FiberSpec::new(2, 1.0, closed("s")).unwrap();
        let f2 = FiberSpec::new(2, 1.0, closed("1")).unwrap();
        let p = ProductSpec::new(grid(0.5, 2.0, 101), alloc::vec![f1, f2]).unwrap();
        let report = harmonic_weyl_residuals(&p, 1e-12).unwrap();
        assert_eq!(report.series.len(), 1);
        assert_eq!(report.series[0].label, "hw_pair_1_2");
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn bc_on_flat_spec() {
        // f = s on the flat k=1 spec: B ≡ -1, C ≡ 0.
        let spec = spec_one_fiber("1", 2, 0.0, "s", "0", grid(-1.0, 1.0, 101));
        let bc = bc_quantities(&spec).unwrap();
        assert!(bc.excluded.is_empty());
        for (&b, &c) in bc.b.values().iter().zip(bc.c.values()) {
            assert!((b + 1.0).abs() <= 1e-12);
            assert!(c.abs() <= 1e-12);
        }
    }

    #[test]
    fn bc_on_rigid_spec_matches_direct_formula() {
        let g = grid(0.5, 2.0, 201);
        let spec = rigid_spec(g);
        let bc = bc_quantities(&spec).unwrap();
        // R = 2, Ric_base = 0, so B = (4·1 - 2 + 0 - s²)/s and C = 1.
        for (j, s) in g.points().enumerate() {
            let want_b = (2.0 - s * s) / s;
            assert!((bc.b.values()[j] - want_b).abs() <= 1e-11);
            assert!((bc.c.values()[j] - 1.0).abs() <= 1e-11);
        }
    }

    #[test]
    fn xi_quadratics_vanish_on_rigid_spec() {
        let spec = rigid_spec(grid(0.5, 2.0, 201));
        let report = xi_quadratic_residuals(&spec, 1e-8).unwrap();
        assert_eq!(report.series.len(), 4);
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn xi_quadratics_vanish_on_exponential_soliton() {
        let spec = spec_one_fiber(
            "exp(s)",
            3,
            0.0,
            "exp(s)",
            "exp(s) - 3",
            grid(-0.5, 1.0, 301),
        );
        let report = xi_quadratic_residuals(&spec, 1e-8).unwrap();
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn xi_quadratics_sampled_path() {
        // Same exponential soliton but with every handle sampled. The grid
        // is chosen near the noise optimum of the derivative series; see the
        // module notes on the ε/Δs⁴ floor.
        let g = grid(-0.5, 1.0, 501);
        let h = SampledFunction::from_fn(g, |s| s.exp()).unwrap();
        let f = SampledFunction::from_fn(g, |s| s.exp()).unwrap();
        let l = SampledFunction::from_fn(g, |s| s.exp() - 3.0).unwrap();
        let fiber = FiberSpec::new(3, 0.0, FunctionHandle::Sampled(h)).unwrap();
        let product = ProductSpec::new(g, alloc::vec![fiber]).unwrap();
        let spec = SolitonSpec::new(
            product,
            FunctionHandle::Sampled(f),
            FunctionHandle::Sampled(l),
        )
        .unwrap();
        assert!(!spec.all_closed());
        let report = xi_quadratic_residuals(&spec, 1e-4).unwrap();
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn lambda_good_on_rigid_spec() {
        let spec = rigid_spec(grid(0.5, 2.0, 201));
        let report = lambda_good_check(&spec, 1e-10).unwrap();
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn lambda_good_requires_two_fibers() {
        let spec = spec_one_fiber("1", 2, 0.0, "s", "0", grid(-1.0, 1.0, 51));
        let err = lambda_good_check(&spec, 1e-8).unwrap_err();
        assert!(matches!(
            err,
            SolitonError::Arity {
                expected: 2,
                got: 1
            }
        ));
    }

    #[test]
    fn critical_points_are_masked_and_reported() {
        // f = s² has f′(0) = 0; the midpoint lands exactly on zero.
        let spec = spec_one_fiber("1", 3, 0.0, "s^2", "2", grid(-1.0, 1.0, 101));
        let bc = bc_quantities(&spec).unwrap();
        assert_eq!(bc.excluded, alloc::vec![50]);
        assert_eq!(bc.b.values()[50], 0.0);
    }

    #[test]
    fn all_critical_is_an_error() {
        let spec = spec_one_fiber("1", 3, 0.0, "1", "0", grid(-1.0, 1.0, 51));
        let err = bc_quantities(&spec).unwrap_err();
        assert!(matches!(err, SolitonError::CriticalPoints { .. }));
    }
}
