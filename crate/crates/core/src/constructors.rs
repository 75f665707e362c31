//! Explicit soliton families.
//!
//! Four constructions produce verified [`SolitonSpec`]s:
//!
//! - [`one_fiber_soliton`]: on `I ×_h N^{n-1}` the potential is determined
//!   by `h` through a quadrature, `f′(s) = h(s)·[c + ∫ₐˢ (μ + (n-2)(h h″ -
//!   (h′)²))/h³ dt]`, and `λ` follows algebraically. When the integrand
//!   vanishes identically or stays inside the symbolic antiderivative table
//!   the result is closed-form; otherwise trapezoid quadrature produces a
//!   sampled potential.
//! - [`example_family`]: the trigonometric family with any number of
//!   Ricci-flat fibers, `hᵢ = exp((i - C/(n-1))s)(cos Ls)^{-1/(n-1)}`,
//!   `f = -log cos(Ls)`, `λ = -L²/((n-1)cos²(Ls))`.
//! - [`rigid_product`]: `h₁ = As + B`, `h₂ ≡ 1`, quadratic potential and
//!   constant `λ`; the base block is Ricci-flat.
//! - [`schouten_one_fiber`]: linear warping with
//!   `λ = R/(2(n-1)) + τ`; the linear coefficient `c₀` of the potential is
//!   forced by the fiber equation and solved for, not taken as input.
//!
//! [`two_fiber_from_f`] goes the other way: it induces the two-fiber data
//! `(h₁, h₂, λ)` from a candidate potential and reports the residuals of the
//! two ODEs the potential would have to satisfy — no nonconstant candidate
//! clears them, which is the point.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::DomainError;
use crate::geometry::{FiberSpec, GeometryError, ProductSpec};
use crate::numerics::{cumulative_integral, NumericsError};
use crate::soliton::{ResidualReport, ResidualSeries, SolitonError, SolitonSpec};
use crate::{Expr, FunctionHandle, Grid, SampledFunction, CRITICAL_EPS, DEFAULT_TRIM};

/// Threshold below which `h′` is considered critical for the λ-ODE
/// cross-check mask.
const H_PRIME_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConstructError {
    #[error("invalid parameters: {0}")]
    Param(String),
    #[error("f′ falls below {threshold:e} at {} grid points (first at index {})", indices.len(), indices.first().copied().unwrap_or(0))]
    CriticalPoints { indices: Vec<usize>, threshold: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Soliton(#[from] SolitonError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

// ---------------------------------------------------------------------------
// One fiber
// ---------------------------------------------------------------------------

/// Build the warped-product soliton determined by a single warping function.
///
/// `quad_const` and `f_const` are the two free quadrature constants, both
/// anchored at the left endpoint of the grid: `f′(a) = quad_const · h(a)`
/// and `f(a) = f_const`. `λ` comes from the algebraic fiber equation, which
/// stays total at critical points of `h`; the ODE form it is equivalent to
/// can be cross-checked with [`lambda_ode_residual`].
///
/// With a closed `h` the constructor first tries to express the potential in
/// closed form (the integrand reduces to zero on the grid, or everything
/// stays inside the antiderivative table); it falls back to trapezoid
/// quadrature, yielding sampled handles, otherwise.
pub fn one_fiber_soliton(
    h: &FunctionHandle,
    mu: f64,
    n: usize,
    grid: Grid,
    quad_const: f64,
    f_const: f64,
) -> Result<SolitonSpec, ConstructError> {
    if n < 3 {
        return Err(ConstructError::Param(format!("n = {n} must be at least 3")));
    }
    let fiber = FiberSpec::new(n - 1, mu, h.clone())?;
    let product = ProductSpec::new(grid, vec![fiber])?;

    if let FunctionHandle::Closed(h_expr) = h {
        if let Some((f_expr, lam_expr)) =
            closed_potential(h_expr, mu, n, &grid, quad_const, f_const)?
        {
            return Ok(SolitonSpec::new(
                product,
                FunctionHandle::Closed(f_expr),
                FunctionHandle::Closed(lam_expr),
            )?);
        }
    }

    // Quadrature path: second-order accurate in the grid spacing.
    let h0 = h.sample(&grid)?;
    let h1 = h.derivative(1, &grid)?;
    let h2 = h.derivative(2, &grid)?;
    let nm2 = (n - 2) as f64;
    let integrand = SampledFunction::new(
        grid,
        (0..grid.count())
            .map(|j| {
                let (h, hp, hpp) = (h0.values()[j], h1.values()[j], h2.values()[j]);
                (mu + nm2 * (h * hpp - hp * hp)) / (h * h * h)
            })
            .collect(),
    )?;
    let inner = cumulative_integral(&integrand, 0, 0.0)?;
    let f1 = SampledFunction::new(
        grid,
        (0..grid.count())
            .map(|j| h0.values()[j] * (quad_const + inner.values()[j]))
            .collect(),
    )?;
    let f = cumulative_integral(&f1, 0, f_const)?;
    let lam = SampledFunction::new(
        grid,
        (0..grid.count())
            .map(|j| {
                let (h, hp, hpp) = (h0.values()[j], h1.values()[j], h2.values()[j]);
                let xi = hp / h;
                f1.values()[j] * xi + mu / (h * h) - hpp / h - nm2 * xi * xi
            })
            .collect(),
    )?;
    Ok(SolitonSpec::new(
        product,
        FunctionHandle::Sampled(f),
        FunctionHandle::Sampled(lam),
    )?)
}

/// Closed-form potential, when the quadrature can be carried out
/// symbolically. Returns `Ok(None)` when it cannot.
fn closed_potential(
    h: &Expr,
    mu: f64,
    n: usize,
    grid: &Grid,
    quad_const: f64,
    f_const: f64,
) -> Result<Option<(Expr, Expr)>, ConstructError> {
    let h1 = h.differentiate();
    let h2 = h1.differentiate();
    let nm2 = Expr::int(n as i64 - 2);
    let integrand = Expr::div(
        Expr::add(
            Expr::lit(mu),
            Expr::mul(
                nm2,
                Expr::sub(
                    Expr::mul(h.clone(), h2.clone()),
                    Expr::pow(h1.clone(), Expr::lit(2.0)),
                ),
            ),
        ),
        Expr::pow(h.clone(), Expr::lit(3.0)),
    )
    .simplify();

    // The integrand often vanishes identically for reasons the constant
    // folder cannot see (trigonometric identities); detect that numerically.
    let zero_tol = 1e-12 * (1.0 + crate::float::abs(mu) + n as f64);
    let vanishes = grid.points().all(|s| match integrand.evaluate(s) {
        Ok(v) => crate::float::abs(v) <= zero_tol,
        Err(_) => false,
    });

    let f1_expr = if vanishes {
        Expr::mul(Expr::lit(quad_const), h.clone())
    } else if let Some(g) = integrand.antiderivative() {
        let g_at_a = g.evaluate(grid.a())?;
        Expr::mul(
            h.clone(),
            Expr::add(Expr::lit(quad_const), Expr::sub(g, Expr::lit(g_at_a))),
        )
        .simplify()
    } else {
        return Ok(None);
    };

    let f_expr = match f1_expr.antiderivative() {
        Some(big) => {
            let big_at_a = big.evaluate(grid.a())?;
            Expr::add(Expr::sub(big, Expr::lit(big_at_a)), Expr::lit(f_const)).simplify()
        }
        None => return Ok(None),
    };

    let xi = Expr::div(h1.clone(), h.clone());
    let lam_expr = Expr::sub(
        Expr::add(
            Expr::mul(f1_expr, xi.clone()),
            Expr::div(Expr::lit(mu), Expr::pow(h.clone(), Expr::lit(2.0))),
        ),
        Expr::add(
            Expr::div(h2, h.clone()),
            Expr::mul(Expr::int(n as i64 - 2), Expr::pow(xi, Expr::lit(2.0))),
        ),
    )
    .simplify();
    Ok(Some((f_expr, lam_expr)))
}

/// Residual of the ODE form of the one-fiber λ-equation,
/// `h (λ/h′)′ - (n-1)h″/h - μ (1/(h h′))′ + (h″/h′)′ + (n-2)(h′/h)′`,
/// masked (set to zero) where `|h′|` is below a small threshold. The
/// algebraic λ used by [`one_fiber_soliton`] must make this vanish wherever
/// it is defined.
pub fn lambda_ode_residual(
    h: &FunctionHandle,
    mu: f64,
    n: usize,
    lambda: &FunctionHandle,
    grid: &Grid,
) -> Result<SampledFunction, ConstructError> {
    let h0 = h.sample(grid)?;
    let h1 = h.derivative(1, grid)?;
    let h2 = h.derivative(2, grid)?;
    let h3 = h.derivative(3, grid)?;
    let lam = lambda.sample(grid)?;
    let lam1 = lambda.derivative(1, grid)?;
    let nm = n as f64;
    let mut out = Vec::with_capacity(grid.count());
    for j in 0..grid.count() {
        let (h, hp, hpp, hppp) = (
            h0.values()[j],
            h1.values()[j],
            h2.values()[j],
            h3.values()[j],
        );
        if crate::float::abs(hp) < H_PRIME_EPS {
            out.push(0.0);
            continue;
        }
        let lhs = h * (lam1.values()[j] * hp - lam.values()[j] * hpp) / (hp * hp);
        let rhs = (nm - 1.0) * hpp / h
            - mu * (hp * hp + h * hpp) / (h * h * hp * hp)
            - (hppp * hp - hpp * hpp) / (hp * hp)
            - (nm - 2.0) * (hpp * h - hp * hp) / (h * h);
        out.push(lhs - rhs);
    }
    Ok(SampledFunction::new(*grid, out)?)
}

// ---------------------------------------------------------------------------
// Trigonometric multi-fiber family
// ---------------------------------------------------------------------------

/// The constants and the assembled spec of the multi-fiber family.
#[derive(Debug, Clone)]
pub struct ExampleFamily {
    pub n: usize,
    /// Weighted dimension sum `Σ rⱼ · j`.
    pub c_const: f64,
    /// `L² = (n-1) Σ rⱼ j² - C²`; positive whenever there are two or more
    /// fibers, zero for one fiber.
    pub l_squared: f64,
    /// Half-width `π/(2L)` of the maximal interval (1.0 in the degenerate
    /// one-fiber case, where the family is flat and any interval works).
    pub epsilon: f64,
    pub spec: SolitonSpec,
}

/// Build the family member with the given fiber dimensions on
/// `[-margin·ε, margin·ε]`. All fibers are Ricci-flat (`μᵢ = 0`).
pub fn example_family(
    dims: &[usize],
    margin: f64,
    points: usize,
) -> Result<ExampleFamily, ConstructError> {
    if dims.is_empty() {
        return Err(ConstructError::Param(
            "at least one fiber is required".into(),
        ));
    }
    if dims.iter().any(|&r| r < 1) {
        return Err(ConstructError::Param(
            "fiber dimensions must all be at least 1".into(),
        ));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(ConstructError::Param(format!(
            "margin must lie in (0, 1), got {margin}"
        )));
    }
    let n = 1 + dims.iter().sum::<usize>();
    if n < 3 {
        return Err(ConstructError::Param(format!(
            "total dimension n = {n} must be at least 3"
        )));
    }
    let c: f64 = dims
        .iter()
        .enumerate()
        .map(|(idx, &r)| (r * (idx + 1)) as f64)
        .sum();
    let sum_rj2: f64 = dims
        .iter()
        .enumerate()
        .map(|(idx, &r)| (r * (idx + 1) * (idx + 1)) as f64)
        .sum();
    let l_squared = (n as f64 - 1.0) * sum_rj2 - c * c;
    if dims.len() >= 2 && l_squared <= 0.0 {
        // Strict Cauchy-Schwarz over distinct weights makes this impossible.
        return Err(ConstructError::Param(format!(
            "L² = {l_squared} must be positive for {} fibers",
            dims.len()
        )));
    }

    // One fiber degenerates to L = 0: flat metric, zero potential. The
    // natural half-width π/(2L) is infinite, so fall back to 1.
    let epsilon = if l_squared > 0.0 {
        core::f64::consts::PI / (2.0 * crate::float::sqrt(l_squared))
    } else {
        1.0
    };
    let grid = Grid::new(-margin * epsilon, margin * epsilon, points)?;

    let n1 = Expr::int(n as i64 - 1);
    let l_expr = Expr::sqrt(Expr::lit(l_squared));
    let ls = Expr::mul(l_expr, Expr::Var);
    let cos_ls = Expr::cos(ls.clone());

    let mut fibers = Vec::with_capacity(dims.len());
    for (idx, &r) in dims.iter().enumerate() {
        let coeff = Expr::sub(
            Expr::int((idx + 1) as i64),
            Expr::div(Expr::lit(c), n1.clone()),
        );
        let h = Expr::mul(
            Expr::exp(Expr::mul(coeff, Expr::Var)),
            Expr::pow(cos_ls.clone(), Expr::div(Expr::lit(-1.0), n1.clone())),
        );
        fibers.push(FiberSpec::new(r, 0.0, FunctionHandle::Closed(h))?);
    }
    let product = ProductSpec::new(grid, fibers)?;
    let f = Expr::neg(Expr::log(cos_ls.clone()));
    let lam = Expr::neg(Expr::div(
        Expr::lit(l_squared),
        Expr::mul(n1, Expr::pow(cos_ls, Expr::lit(2.0))),
    ));
    let spec = SolitonSpec::new(
        product,
        FunctionHandle::Closed(f),
        FunctionHandle::Closed(lam),
    )?;
    Ok(ExampleFamily {
        n,
        c_const: c,
        l_squared,
        epsilon,
        spec,
    })
}

// ---------------------------------------------------------------------------
// Rigid products
// ---------------------------------------------------------------------------

/// Parameters of the rigid two-fiber product.
#[derive(Debug, Clone, Copy)]
pub struct RigidParams {
    pub n: usize,
    pub r1: usize,
    /// Slope `A ≠ 0` of `h₁ = As + B`.
    pub slope: f64,
    /// Offset `B` of `h₁`.
    pub offset: f64,
    /// The constant soliton value `λ`.
    pub lambda0: f64,
}

/// A rigid product together with the constants the construction forces.
#[derive(Debug, Clone)]
pub struct RigidSoliton {
    pub spec: SolitonSpec,
    /// `μ₁ = (r₁-1)A²`, making the base block Ricci-flat.
    pub mu1: f64,
    /// `μ₂ = λ` for the unit-warped second fiber.
    pub mu2: f64,
    /// Linear coefficient `D = λB/A` of the potential.
    pub d_coeff: f64,
    /// `λ = 0` collapses all eigenvalues to zero (flat/Einstein degenerate
    /// case with a linear potential).
    pub degenerate: bool,
}

/// Build the rigid product `h₁ = As + B`, `h₂ ≡ 1`,
/// `f = (λ/2)s² + (λB/A)s`, with constant `λ`.
pub fn rigid_product(p: &RigidParams, grid: Grid) -> Result<RigidSoliton, ConstructError> {
    if p.n < 4 {
        return Err(ConstructError::Param(format!(
            "n = {} must be at least 4",
            p.n
        )));
    }
    if p.r1 < 2 || p.r1 > p.n - 2 {
        return Err(ConstructError::Param(format!(
            "r1 = {} must satisfy 2 ≤ r1 ≤ n-2 = {}",
            p.r1,
            p.n - 2
        )));
    }
    if p.slope == 0.0 || !p.slope.is_finite() {
        return Err(ConstructError::Param("slope A must be nonzero".into()));
    }
    let r2 = p.n - 1 - p.r1;
    if r2 == 1 && p.lambda0 != 0.0 {
        return Err(ConstructError::Param(
            "a one-dimensional second fiber cannot carry Einstein constant λ ≠ 0; use r1 ≤ n-3"
                .into(),
        ));
    }
    let mu1 = (p.r1 as f64 - 1.0) * p.slope * p.slope;
    let mu2 = p.lambda0;
    let d_coeff = p.lambda0 * p.offset / p.slope;

    let h1 = Expr::add(
        Expr::mul(Expr::lit(p.slope), Expr::Var),
        Expr::lit(p.offset),
    )
    .simplify();
    let f1 = FiberSpec::new(p.r1, mu1, FunctionHandle::Closed(h1))?;
    let f2 = FiberSpec::new(r2, mu2, FunctionHandle::Closed(Expr::lit(1.0)))?;
    let product = ProductSpec::new(grid, vec![f1, f2])?;
    let f = Expr::add(
        Expr::mul(
            Expr::lit(p.lambda0 / 2.0),
            Expr::pow(Expr::Var, Expr::lit(2.0)),
        ),
        Expr::mul(Expr::lit(d_coeff), Expr::Var),
    )
    .simplify();
    let spec = SolitonSpec::new(
        product,
        FunctionHandle::Closed(f),
        FunctionHandle::Closed(Expr::lit(p.lambda0)),
    )?;
    Ok(RigidSoliton {
        spec,
        mu1,
        mu2,
        d_coeff,
        degenerate: p.lambda0 == 0.0,
    })
}

// ---------------------------------------------------------------------------
// Schouten-type one-fiber solitons
// ---------------------------------------------------------------------------

/// Parameters of the one-fiber construction with `λ = R/(2(n-1)) + τ`.
#[derive(Debug, Clone, Copy)]
pub struct SchoutenParams {
    pub n: usize,
    /// Slope `A ≠ 0` of `h = As + B`.
    pub slope: f64,
    pub offset: f64,
    /// Einstein constant of the fiber.
    pub mu: f64,
    pub tau: f64,
    /// Free additive constant of the potential.
    pub c1: f64,
}

/// The construction result; `c0` is solved for, not chosen.
#[derive(Debug, Clone)]
pub struct SchoutenSoliton {
    pub spec: SolitonSpec,
    /// Linear coefficient of the potential forced by the fiber equation:
    /// `c₀ = τB/A`.
    pub c0: f64,
    /// Coefficient of the log term, `-(μ-(n-2)A²)/(2A²)`; zero exactly when
    /// `μ = (n-2)A²` (the scalar-flat case).
    pub log_coeff: f64,
}

/// Build the one-fiber soliton with linear warping and
/// `λ = R/(2(n-1)) + τ`; the potential is
/// `f = -((μ-(n-2)A²)/(2A²)) log(As+B) + (τ/2)s² + c₀ s + c₁` with `c₀`
/// solved from the fiber equation.
pub fn schouten_one_fiber(
    p: &SchoutenParams,
    grid: Grid,
) -> Result<SchoutenSoliton, ConstructError> {
    if p.n < 3 {
        return Err(ConstructError::Param(format!(
            "n = {} must be at least 3",
            p.n
        )));
    }
    if p.slope == 0.0 || !p.slope.is_finite() {
        return Err(ConstructError::Param("slope A must be nonzero".into()));
    }
    let a = p.slope;
    let nm2 = p.n as f64 - 2.0;
    let scalar_excess = p.mu - nm2 * a * a;
    let log_coeff = -scalar_excess / (2.0 * a * a);
    let c0 = p.tau * p.offset / a;

    let h = Expr::add(Expr::mul(Expr::lit(a), Expr::Var), Expr::lit(p.offset)).simplify();
    let fiber = FiberSpec::new(p.n - 1, p.mu, FunctionHandle::Closed(h.clone()))?;
    let product = ProductSpec::new(grid, vec![fiber])?;

    let f = Expr::add(
        Expr::add(
            Expr::mul(Expr::lit(log_coeff), Expr::log(h.clone())),
            Expr::mul(Expr::lit(p.tau / 2.0), Expr::pow(Expr::Var, Expr::lit(2.0))),
        ),
        Expr::add(Expr::mul(Expr::lit(c0), Expr::Var), Expr::lit(p.c1)),
    )
    .simplify();
    // λ = R/(2(n-1)) + τ with R = (n-1)(μ-(n-2)A²)/h².
    let lam = Expr::add(
        Expr::div(Expr::lit(scalar_excess / 2.0), Expr::pow(h, Expr::lit(2.0))),
        Expr::lit(p.tau),
    )
    .simplify();
    let spec = SolitonSpec::new(
        product,
        FunctionHandle::Closed(f),
        FunctionHandle::Closed(lam),
    )?;
    Ok(SchoutenSoliton {
        spec,
        c0,
        log_coeff,
    })
}

// ---------------------------------------------------------------------------
// Two-fiber data induced by a candidate potential
// ---------------------------------------------------------------------------

/// Candidate data for the two-fiber reconstruction from a potential.
#[derive(Debug, Clone)]
pub struct TwoFiberFParams {
    pub n: usize,
    pub r1: usize,
    /// `C₁ ≠ 0` with `h₁ = C₁⁻¹ f′`.
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Einstein constant of the first fiber (must be 0 when `r1 = 1`).
    pub mu1: f64,
    pub f: FunctionHandle,
}

/// Induce `(h₁, h₂, λ)` from the candidate potential and report the
/// residuals of the two ODEs the potential must satisfy:
///
/// ```text
/// potential_ode_1 = (n-1) f‴ Λ - (n-1) f′ f″ + (f′)³
/// potential_ode_2 = ((n-2) f′ f‴ - (r₁-1)(f″)² + C₁²μ₁) Λ - r₂ (f′)² f″
/// ```
///
/// with `Λ = C₁C₃ e^{(f-C₂)/(n-1)} - (n-1)`. Only constant potentials can
/// satisfy both; the report quantifies how badly a candidate fails. The
/// second fiber of the induced spec is taken Ricci-flat (no `μ₂` is part of
/// the data, and none is consistent for a nonconstant candidate).
pub fn two_fiber_from_f(
    p: &TwoFiberFParams,
    grid: Grid,
    tol: f64,
) -> Result<(SolitonSpec, ResidualReport), ConstructError> {
    if p.n < 4 {
        return Err(ConstructError::Param(format!(
            "n = {} must be at least 4",
            p.n
        )));
    }
    if p.r1 < 1 || p.r1 > p.n - 2 {
        return Err(ConstructError::Param(format!(
            "r1 = {} must satisfy 1 ≤ r1 ≤ n-2 = {}",
            p.r1,
            p.n - 2
        )));
    }
    if p.c1 == 0.0 || !p.c1.is_finite() {
        return Err(ConstructError::Param("C1 must be nonzero".into()));
    }
    if p.r1 == 1 && p.mu1 != 0.0 {
        return Err(ConstructError::Param(
            "a one-dimensional first fiber forces mu1 = 0".into(),
        ));
    }
    let r2 = p.n - 1 - p.r1;
    let n1 = p.n as f64 - 1.0;

    let f0 = p.f.sample(&grid)?;
    let f1 = p.f.derivative(1, &grid)?;
    let f2 = p.f.derivative(2, &grid)?;
    let f3 = p.f.derivative(3, &grid)?;

    let critical: Vec<usize> = f1
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| crate::float::abs(**v) < CRITICAL_EPS)
        .map(|(j, _)| j)
        .collect();
    if !critical.is_empty() {
        return Err(ConstructError::CriticalPoints {
            indices: critical,
            threshold: CRITICAL_EPS,
        });
    }

    let (h1_handle, h2_handle, lam_handle) = match &p.f {
        FunctionHandle::Closed(f_expr) => {
            let fp = f_expr.differentiate();
            let h1 = Expr::div(fp.clone(), Expr::lit(p.c1));
            let h2 = Expr::add(
                Expr::mul(
                    Expr::lit(-n1 / p.c1),
                    Expr::exp(Expr::div(
                        Expr::neg(Expr::sub(f_expr.clone(), Expr::lit(p.c2))),
                        Expr::lit(n1),
                    )),
                ),
                Expr::lit(p.c3),
            );
            let lam = Expr::sub(
                fp.differentiate(),
                Expr::mul(Expr::lit(n1), Expr::div(fp.differentiate_n(2), fp)),
            );
            (
                FunctionHandle::Closed(h1),
                FunctionHandle::Closed(h2),
                FunctionHandle::Closed(lam),
            )
        }
        FunctionHandle::Sampled(_) => {
            let h1 = SampledFunction::new(grid, f1.values().iter().map(|v| v / p.c1).collect())?;
            let h2 = SampledFunction::new(
                grid,
                f0.values()
                    .iter()
                    .map(|f| -n1 / p.c1 * crate::float::exp(-(f - p.c2) / n1) + p.c3)
                    .collect(),
            )?;
            let lam = SampledFunction::new(
                grid,
                (0..grid.count())
                    .map(|j| f2.values()[j] - n1 * f3.values()[j] / f1.values()[j])
                    .collect(),
            )?;
            (
                FunctionHandle::Sampled(h1),
                FunctionHandle::Sampled(h2),
                FunctionHandle::Sampled(lam),
            )
        }
    };

    let fiber1 = FiberSpec::new(p.r1, p.mu1, h1_handle)?;
    let fiber2 = FiberSpec::new(r2, 0.0, h2_handle)?;
    let product = ProductSpec::new(grid, vec![fiber1, fiber2])?;
    let spec = SolitonSpec::new(product, p.f.clone(), lam_handle)?;

    let c1sq_mu1 = p.c1 * p.c1 * p.mu1;
    let mut ode1 = Vec::with_capacity(grid.count());
    let mut ode2 = Vec::with_capacity(grid.count());
    for j in 0..grid.count() {
        let (f, fp, fpp, fppp) = (
            f0.values()[j],
            f1.values()[j],
            f2.values()[j],
            f3.values()[j],
        );
        let big_lambda = p.c1 * p.c3 * crate::float::exp((f - p.c2) / n1) - n1;
        ode1.push(n1 * fppp * big_lambda - n1 * fp * fpp + fp * fp * fp);
        ode2.push(
            ((p.n as f64 - 2.0) * fp * fppp - (p.r1 as f64 - 1.0) * fpp * fpp + c1sq_mu1)
                * big_lambda
                - r2 as f64 * fp * fp * fpp,
        );
    }
    let report = ResidualReport::new(
        vec![
            ResidualSeries::new(
                "potential_ode_1".into(),
                SampledFunction::new(grid, ode1)?,
                vec![],
                DEFAULT_TRIM,
            ),
            ResidualSeries::new(
                "potential_ode_2".into(),
                SampledFunction::new(grid, ode2)?,
                vec![],
                DEFAULT_TRIM,
            ),
        ],
        tol,
    );
    Ok((spec, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::max_abs;
    use crate::soliton::{harmonic_weyl_residuals, soliton_residuals, xi_quadratic_residuals};

    fn grid(a: f64, b: f64, count: usize) -> Grid {
        Grid::new(a, b, count).unwrap()
    }

    fn closed(text: &str) -> FunctionHandle {
        FunctionHandle::Closed(Expr::parse(text).unwrap())
    }

    #[test]
    fn one_fiber_constant_warping() {
        // h ≡ 1, μ = 0, quad_const = 2: f = 2s + f_const, λ ≡ 0.
        let g = grid(-1.0, 1.0, 101);
        let spec = one_fiber_soliton(&closed("1"), 0.0, 4, g, 2.0, 0.5).unwrap();
        assert!(spec.all_closed());
        let f = spec.f().closed_expr().unwrap();
        for s in [-0.5, 0.0, 0.8] {
            assert!((f.evaluate(s).unwrap() - (2.0 * s + 0.5 + 2.0)).abs() <= 1e-12);
        }
        let lam = spec.lambda().closed_expr().unwrap();
        assert_eq!(lam.evaluate(0.3).unwrap(), 0.0);
        assert!(soliton_residuals(&spec, 1e-12).unwrap().pass);
    }

    #[test]
    fn one_fiber_cosine_is_einstein() {
        // h = cos s, μ = n-2: the integrand vanishes identically; with
        // quad_const = 0 the potential is constant and λ ≡ n-1.
        let g = grid(-1.4, 1.4, 201);
        let spec = one_fiber_soliton(&closed("cos(s)"), 2.0, 4, g, 0.0, 1.0).unwrap();
        assert!(spec.all_closed());
        let lam = spec.lambda().closed_expr().unwrap();
        for s in [-1.0, 0.0, 0.7] {
            assert!((lam.evaluate(s).unwrap() - 3.0).abs() <= 1e-11, "{s}");
        }
        assert!(soliton_residuals(&spec, 1e-10).unwrap().pass);
    }

    #[test]
    fn one_fiber_exponential_closed_form() {
        // h = exp(s), μ = 0, quad_const = 1: f′ = eˢ and λ = eˢ - 3.
        let g = grid(-0.5, 1.0, 201);
        let spec = one_fiber_soliton(&closed("exp(s)"), 0.0, 4, g, 1.0, 0.0).unwrap();
        assert!(spec.all_closed());
        let lam = spec.lambda().closed_expr().unwrap();
        for s in [-0.3, 0.0, 0.9] {
            assert!((lam.evaluate(s).unwrap() - (s.exp() - 3.0)).abs() <= 1e-11);
        }
        let report = soliton_residuals(&spec, 1e-10).unwrap();
        assert!(report.pass, "worst {}", report.worst());
        // Harmonic Weyl is vacuous for one fiber, and the ξ quadratics hold.
        assert!(harmonic_weyl_residuals(spec.product(), 1e-12).unwrap().pass);
        let xi = xi_quadratic_residuals(&spec, 1e-8).unwrap();
        assert!(xi.pass, "worst {}", xi.worst());
    }

    #[test]
    fn one_fiber_constant_integrand_stays_closed() {
        // h ≡ 1 with μ = 2: the integrand is the constant 2, so the table
        // path applies and f″ = 2 balances λ = μ = 2 exactly.
        let g = grid(-1.0, 1.0, 101);
        let spec = one_fiber_soliton(&closed("1"), 2.0, 4, g, 0.5, 0.25).unwrap();
        assert!(spec.all_closed());
        let lam = spec.lambda().closed_expr().unwrap();
        assert_eq!(lam.evaluate(0.3).unwrap(), 2.0);
        assert!(soliton_residuals(&spec, 1e-12).unwrap().pass);
    }

    #[test]
    fn one_fiber_constants_anchor_at_left_endpoint() {
        // f(a) = f_const and f′(a) = quad_const · h(a), on both the closed
        // and the quadrature paths.
        let g = grid(-0.5, 1.0, 1001);
        let (qc, fc) = (0.7, -1.3);
        let closed_spec = one_fiber_soliton(&closed("exp(s)"), 0.0, 4, g, qc, fc).unwrap();
        let f = closed_spec.f().closed_expr().unwrap();
        assert!((f.evaluate(g.a()).unwrap() - fc).abs() <= 1e-12);
        let fp = f.differentiate();
        assert!((fp.evaluate(g.a()).unwrap() - qc * g.a().exp()).abs() <= 1e-12);

        let sampled = SampledFunction::from_fn(g, |s| s.exp()).unwrap();
        let quad_spec =
            one_fiber_soliton(&FunctionHandle::Sampled(sampled), 0.0, 4, g, qc, fc).unwrap();
        let f = quad_spec.f().sample(&g).unwrap();
        assert!((f.values()[0] - fc).abs() <= 1e-12);
        let fp = quad_spec.f().derivative(1, &g).unwrap();
        assert!((fp.values()[0] - qc * g.a().exp()).abs() <= 1e-5);
    }

    #[test]
    fn one_fiber_quadrature_fallback() {
        // h = 1 + s² with generic μ has no tabulated antiderivative; the
        // constructor falls back to sampled quadrature.
        let g = grid(-2.0, 2.0, 2001);
        let spec = one_fiber_soliton(&closed("1 + s^2"), 1.0, 4, g, 1.0, 0.0).unwrap();
        assert!(!spec.all_closed());
        let report = soliton_residuals(&spec, 1e-4).unwrap();
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn one_fiber_sampled_input() {
        let g = grid(0.0, 1.0, 1001);
        let h = SampledFunction::from_fn(g, |s| s.exp()).unwrap();
        let spec = one_fiber_soliton(&FunctionHandle::Sampled(h), 0.0, 4, g, 1.0, 0.0).unwrap();
        let report = soliton_residuals(&spec, 1e-5).unwrap();
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn lambda_ode_cross_check_on_exponential() {
        let g = grid(-0.5, 1.0, 201);
        let spec = one_fiber_soliton(&closed("exp(s)"), 0.0, 4, g, 1.0, 0.0).unwrap();
        let res =
            lambda_ode_residual(spec.product().fibers()[0].h(), 0.0, 4, spec.lambda(), &g).unwrap();
        assert!(max_abs(&res, 0).unwrap() <= 1e-10);
    }

    #[test]
    fn family_dims_1_2() {
        let fam = example_family(&[1, 2], 0.9, 1001).unwrap();
        assert_eq!(fam.n, 4);
        assert_eq!(fam.c_const, 5.0);
        assert_eq!(fam.l_squared, 2.0);
        let want_eps = core::f64::consts::PI / (2.0 * 2.0f64.sqrt());
        assert!((fam.epsilon - want_eps).abs() <= 1e-15);
        // λ(0) = -L²/(n-1) = -2/3.
        let lam = fam.spec.lambda().closed_expr().unwrap();
        assert!((lam.evaluate(0.0).unwrap() + 2.0 / 3.0).abs() <= 1e-14);
        let report = soliton_residuals(&fam.spec, 1e-9).unwrap();
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn family_dims_1_2_3() {
        let fam = example_family(&[1, 2, 3], 0.9, 401).unwrap();
        assert_eq!(fam.n, 7);
        assert_eq!(fam.c_const, 14.0);
        assert_eq!(fam.l_squared, 20.0);
        let report = soliton_residuals(&fam.spec, 1e-9).unwrap();
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn family_rejects_too_small_dimension() {
        // dims (1): n = 2 < 3.
        assert!(matches!(
            example_family(&[1], 0.9, 101),
            Err(ConstructError::Param(_))
        ));
        assert!(matches!(
            example_family(&[1, 2], 1.2, 101),
            Err(ConstructError::Param(_))
        ));
        assert!(matches!(
            example_family(&[0, 2], 0.9, 101),
            Err(ConstructError::Param(_))
        ));
    }

    #[test]
    fn family_single_fiber_is_flat() {
        let fam = example_family(&[3], 0.5, 101).unwrap();
        assert_eq!(fam.l_squared, 0.0);
        let report = soliton_residuals(&fam.spec, 1e-12).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn family_is_not_harmonic_weyl() {
        let fam = example_family(&[1, 2], 0.9, 401).unwrap();
        let report = harmonic_weyl_residuals(fam.spec.product(), 1e-8).unwrap();
        assert!(!report.pass);
        assert!(report.worst() >= 0.1, "sup {}", report.worst());
    }

    #[test]
    fn rigid_spec_example() {
        let params = RigidParams {
            n: 5,
            r1: 2,
            slope: 1.0,
            offset: 0.0,
            lambda0: 1.0,
        };
        let rigid = rigid_product(&params, grid(0.5, 2.0, 401)).unwrap();
        assert_eq!(rigid.mu1, 1.0);
        assert_eq!(rigid.mu2, 1.0);
        assert_eq!(rigid.d_coeff, 0.0);
        assert!(!rigid.degenerate);
        let report = soliton_residuals(&rigid.spec, 1e-10).unwrap();
        assert!(report.pass, "worst {}", report.worst());
        // Base block is Ricci-flat.
        let base = crate::geometry::ricci_base(rigid.spec.product()).unwrap();
        assert!(max_abs(&base, 0).unwrap() <= 1e-12);
        let eig1 = crate::geometry::ricci_fiber(rigid.spec.product(), 1).unwrap();
        assert!(max_abs(&eig1, 0).unwrap() <= 1e-12);
    }

    #[test]
    fn rigid_with_offset_solves_linear_coefficient() {
        let params = RigidParams {
            n: 6,
            r1: 2,
            slope: 2.0,
            offset: 1.0,
            lambda0: 0.7,
        };
        let rigid = rigid_product(&params, grid(0.0, 1.0, 301)).unwrap();
        assert!((rigid.d_coeff - 0.35).abs() <= 1e-15);
        let report = soliton_residuals(&rigid.spec, 1e-10).unwrap();
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn rigid_rejects_small_r1_and_flags_degenerate() {
        let bad = RigidParams {
            n: 4,
            r1: 1,
            slope: 1.0,
            offset: 0.0,
            lambda0: 1.0,
        };
        assert!(matches!(
            rigid_product(&bad, grid(0.5, 2.0, 51)),
            Err(ConstructError::Param(_))
        ));
        let degenerate = RigidParams {
            n: 5,
            r1: 2,
            slope: 1.0,
            offset: 0.0,
            lambda0: 0.0,
        };
        let rigid = rigid_product(&degenerate, grid(0.5, 2.0, 51)).unwrap();
        assert!(rigid.degenerate);
        // Two eigenvalue functions collapse into one cluster of full
        // multiplicity: everything is Ricci-flat.
        let clusters = crate::geometry::eigenvalue_clusters(rigid.spec.product(), 1e-6).unwrap();
        assert_eq!(clusters.len(), 1);
    }

    #[test]
    fn rigid_eigenvalue_structure() {
        let params = RigidParams {
            n: 5,
            r1: 2,
            slope: 1.0,
            offset: 0.0,
            lambda0: 1.0,
        };
        let rigid = rigid_product(&params, grid(0.5, 2.0, 201)).unwrap();
        let clusters = crate::geometry::eigenvalue_clusters(rigid.spec.product(), 1e-6).unwrap();
        assert_eq!(clusters.len(), 2);
        let mut mults: Vec<usize> = clusters.iter().map(|c| c.multiplicity).collect();
        mults.sort_unstable();
        assert_eq!(mults, alloc::vec![2, 3]);
    }

    #[test]
    fn schouten_gaussian_case() {
        // n = 4, A = 1, B = 0, μ = 2 = (n-2)A², τ = 1: f = s²/2 + c₁,
        // λ ≡ 1, R ≡ 0.
        let params = SchoutenParams {
            n: 4,
            slope: 1.0,
            offset: 0.0,
            mu: 2.0,
            tau: 1.0,
            c1: 0.0,
        };
        let sch = schouten_one_fiber(&params, grid(0.5, 2.0, 301)).unwrap();
        assert_eq!(sch.c0, 0.0);
        assert_eq!(sch.log_coeff, 0.0);
        let lam = sch.spec.lambda().closed_expr().unwrap();
        assert_eq!(lam.evaluate(1.0).unwrap(), 1.0);
        let r = crate::geometry::scalar_curvature(sch.spec.product()).unwrap();
        assert!(max_abs(&r, 0).unwrap() <= 1e-12);
        let report = soliton_residuals(&sch.spec, 1e-10).unwrap();
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn schouten_log_branch_and_offset() {
        // μ ≠ (n-2)A² activates the log term; B ≠ 0 forces c₀ = τB/A.
        let params = SchoutenParams {
            n: 4,
            slope: 1.0,
            offset: 0.3,
            mu: 3.0,
            tau: 1.0,
            c1: 2.0,
        };
        let sch = schouten_one_fiber(&params, grid(0.5, 2.0, 301)).unwrap();
        assert!((sch.c0 - 0.3).abs() <= 1e-15);
        assert!((sch.log_coeff + 0.5).abs() <= 1e-15);
        let report = soliton_residuals(&sch.spec, 1e-10).unwrap();
        assert!(report.pass, "worst {}", report.worst());
        // λ is genuinely nonconstant on this branch.
        let lam = sch.spec.lambda().closed_expr().unwrap();
        assert!((lam.evaluate(0.5).unwrap() - lam.evaluate(2.0).unwrap()).abs() > 0.1);
    }

    #[test]
    fn two_fiber_linear_potential() {
        // f = s: the first ODE residual is (f′)³ = 1 everywhere.
        let p = TwoFiberFParams {
            n: 5,
            r1: 2,
            c1: 1.0,
            c2: 0.0,
            c3: 10.0,
            mu1: 1.0,
            f: closed("s"),
        };
        let (spec, report) = two_fiber_from_f(&p, grid(0.0, 1.0, 201), 1e-8).unwrap();
        assert!(spec.all_closed());
        assert_eq!(report.series[0].label, "potential_ode_1");
        let ode1 = &report.series[0].values;
        for &v in ode1.values() {
            assert!((v - 1.0).abs() <= 1e-12);
        }
        assert!(!report.pass);
    }

    #[test]
    fn two_fiber_quadratic_potential_fails_loudly() {
        let p = TwoFiberFParams {
            n: 5,
            r1: 2,
            c1: 1.0,
            c2: 0.0,
            c3: 10.0,
            mu1: 1.0,
            f: closed("s^2"),
        };
        let (_, report) = two_fiber_from_f(&p, grid(1.0, 2.0, 201), 1e-8).unwrap();
        assert!(report.worst() > 0.1, "worst {}", report.worst());
    }

    #[test]
    fn two_fiber_rejects_nonpositive_second_warping() {
        // C3 too small pushes h2 below zero somewhere on the interval.
        let p = TwoFiberFParams {
            n: 5,
            r1: 2,
            c1: 1.0,
            c2: 0.0,
            c3: 1.0,
            mu1: 1.0,
            f: closed("s"),
        };
        let err = two_fiber_from_f(&p, grid(0.0, 1.0, 101), 1e-8).unwrap_err();
        assert!(matches!(
            err,
            ConstructError::Geometry(GeometryError::Positivity(_))
        ));
    }

    #[test]
    fn one_fiber_rejects_nonpositive_warping() {
        let err =
            one_fiber_soliton(&closed("s"), 0.0, 4, grid(-1.0, 1.0, 101), 1.0, 0.0).unwrap_err();
        assert!(matches!(
            err,
            ConstructError::Geometry(GeometryError::Positivity(_))
        ));
    }

    #[test]
    fn two_fiber_rejects_critical_potential() {
        let p = TwoFiberFParams {
            n: 5,
            r1: 2,
            c1: 1.0,
            c2: 0.0,
            c3: 10.0,
            mu1: 0.0,
            f: closed("1"),
        };
        assert!(matches!(
            two_fiber_from_f(&p, grid(0.0, 1.0, 101), 1e-8),
            Err(ConstructError::CriticalPoints { .. })
        ));
    }
}
