//! Exact-rational coefficient pipeline for the degree-12 polynomial that
//! obstructs nonconstant two-fiber potentials.
//!
//! Eliminating the exponential factor and the third derivative from the two
//! potential ODEs leaves three Λ-free ODEs together with a quadratic for
//! `u = f″` as a function of `y = f′`. Substituting the quadratic's root
//! back in and clearing the square root produces
//!
//! ```text
//! P(y) = (X y⁴ - (η₃+δ))² (η₂ y⁴ - η₃) - y⁴ (Y η₂ y⁴ + β̃₁ η₃)²
//!      = a₁₂ y¹² + a₈ y⁸ + a₄ y⁴ + a₀,
//! ```
//!
//! which every solution's `f′` must annihilate pointwise. All of this is
//! carried out in exact rational arithmetic: the leading coefficient
//! identity `a₁₂ = -(n-2)²(4n-3r₁-5)²/(81(n-1)⁶(r₁-1)⁴)` is the nonvanishing
//! witness, and floating point would mask it.
//!
//! `C₁` and `μ₁` enter every coefficient only through `C₁²μ₁`, so scaling
//! `C₁ ↦ tC₁`, `μ₁ ↦ μ₁/t²` changes nothing. The sign choice in the
//! quadratic's root is squared away during the elimination, so no sign
//! parameter appears here.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::numerics::NumericsError;
use crate::soliton::{ResidualReport, ResidualSeries};
use crate::{FunctionHandle, Grid, SampledFunction, DEFAULT_TRIM};

/// Arbitrary-precision rational, kept in canonical form by construction.
pub type Rational = num_rational::BigRational;

fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Render a rational the way the reports expect: `-9/4096`, `0`, `7`.
pub fn rational_string(r: &Rational) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReductionError {
    #[error("r1 = 1 is degenerate: a one-dimensional first fiber forces a constant potential, and the coefficient pipeline is undefined")]
    FirstFiberOneDimensional,
    #[error("parameters out of range: {0}")]
    OutOfRange(String),
    #[error("C1 must be nonzero")]
    ZeroC1,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// The auxiliary coefficients of the elimination, all exact.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionCoeffs {
    pub beta1: Rational,
    pub beta2: Rational,
    pub beta3: Rational,
    pub beta4: Rational,
    pub gamma1: Rational,
    pub gamma2: Rational,
    pub gamma3: Rational,
    pub gamma4: Rational,
    pub eta1: Rational,
    pub eta2: Rational,
    pub eta3: Rational,
    pub tbeta1: Rational,
    pub tbeta2: Rational,
    pub delta: Rational,
    pub x: Rational,
    pub y: Rational,
}

/// Sparse coefficients of `P(y) = a₁₂y¹² + a₈y⁸ + a₄y⁴ + a₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs {
    pub a12: Rational,
    pub a8: Rational,
    pub a4: Rational,
    pub a0: Rational,
}

fn check_range(n: u32, r1: u32) -> Result<(), ReductionError> {
    if r1 == 1 {
        return Err(ReductionError::FirstFiberOneDimensional);
    }
    if n < 4 {
        return Err(ReductionError::OutOfRange(format!(
            "n = {n} must be at least 4"
        )));
    }
    if r1 < 2 || r1 > n - 2 {
        return Err(ReductionError::OutOfRange(format!(
            "r1 = {r1} must satisfy 2 ≤ r1 ≤ n-2 = {}",
            n - 2
        )));
    }
    Ok(())
}

/// Compute every auxiliary coefficient from `(n, r₁, C₁, μ₁)`.
pub fn reduction_coeffs(
    n: u32,
    r1: u32,
    c1: &Rational,
    mu1: &Rational,
) -> Result<ReductionCoeffs, ReductionError> {
    check_range(n, r1)?;
    if c1.is_zero() {
        return Err(ReductionError::ZeroC1);
    }
    let nn = rat(n as i64);
    let rr1 = rat(r1 as i64);
    let rr2 = rat((n - 1 - r1) as i64);
    let one = Rational::one();
    let n1 = &nn - &one; // n - 1
    let n2 = &nn - rat(2); // n - 2
    let r1m1 = &rr1 - &one; // r1 - 1
    let c1sq_mu1 = c1 * c1 * mu1;

    let beta1 = &n1 * (rat(3) * &r1m1 + rat(4) * &rr2);
    let beta2 = n2.clone();
    let beta3 = &n1 * &n1 * &r1m1;
    let beta4 = &c1sq_mu1 * &n1;

    let gamma1 = rat(3) * &n2 * &n1 * &n1 * &r1m1;
    let gamma2 = rat(4) * &n2 * &n2 * &n1;
    let gamma3 = &n2 * &n2;
    let gamma4 = &c1sq_mu1 * &n1 * &n1 * &rr2;

    let eta1 = &gamma2 / (rat(2) * &gamma1);
    let eta2 = (&gamma2 * &gamma2 - rat(4) * &gamma1 * &gamma3) / (rat(4) * &gamma1 * &gamma1);
    let eta3 = &gamma4 / &gamma1;

    let tbeta1 = &beta1 / &beta3;
    let tbeta2 = &beta2 / &beta3;
    let delta = &c1sq_mu1 * &n1 * &n1;

    let x = (&tbeta1 - &eta1) * &eta1 - &eta2 - &tbeta2;
    let y = rat(2) * &eta1 - &tbeta1;

    Ok(ReductionCoeffs {
        beta1,
        beta2,
        beta3,
        beta4,
        gamma1,
        gamma2,
        gamma3,
        gamma4,
        eta1,
        eta2,
        eta3,
        tbeta1,
        tbeta2,
        delta,
        x,
        y,
    })
}

/// Independently simplified closed forms of the quotient coefficients,
/// mirroring the step-by-step reductions; must agree exactly with the
/// definitional values of [`reduction_coeffs`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimplifiedForms {
    pub eta1: Rational,
    pub eta2: Rational,
    pub tbeta1: Rational,
    pub tbeta2: Rational,
    pub x: Rational,
    pub y: Rational,
}

pub fn simplified_forms(n: u32, r1: u32) -> Result<SimplifiedForms, ReductionError> {
    check_range(n, r1)?;
    let n = n as i64;
    let r1 = r1 as i64;
    let n1 = rat(n - 1);
    let n2 = rat(n - 2);
    let r1m1 = rat(r1 - 1);
    let q = rat(4 * n - 3 * r1 - 5);
    Ok(SimplifiedForms {
        eta1: rat(2) * &n2 / (rat(3) * &n1 * &r1m1),
        eta2: &n2 * &q / (rat(9) * &n1 * &n1 * &r1m1 * &r1m1),
        tbeta1: rat(4 * n - r1 - 7) / (&n1 * &r1m1),
        tbeta2: &n2 / (&n1 * &n1 * &r1m1),
        x: rat(4) * &n2 * &q / (rat(9) * &n1 * &n1 * &r1m1 * &r1m1),
        y: rat(-8 * n + 3 * r1 + 13) / (rat(3) * &n1 * &r1m1),
    })
}

// Dense polynomial helpers over Rational, coefficients by ascending degree.

fn poly_mul(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn poly_sub(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let len = a.len().max(b.len());
    let mut out = vec![Rational::zero(); len];
    for (i, v) in a.iter().enumerate() {
        out[i] += v;
    }
    for (i, v) in b.iter().enumerate() {
        out[i] -= v;
    }
    out
}

/// Expand the defining expression of `P` exactly. Working in the variable
/// `t = y⁴`, the expression is a cubic whose coefficients are the sparse
/// `a₀, a₄, a₈, a₁₂`.
pub fn expand_poly(c: &ReductionCoeffs) -> PolyCoeffs {
    let eta3_delta = &c.eta3 + &c.delta;
    // (X t - (η₃+δ))² (η₂ t - η₃)
    let lin = [-&eta3_delta, c.x.clone()];
    let sq = poly_mul(&lin, &lin);
    let lhs = poly_mul(&sq, &[-&c.eta3, c.eta2.clone()]);
    // t (Y η₂ t + β̃₁ η₃)²
    let q = [&c.tbeta1 * &c.eta3, &c.y * &c.eta2];
    let qsq = poly_mul(&q, &q);
    let mut rhs = vec![Rational::zero()];
    rhs.extend(qsq);
    let p = poly_sub(&lhs, &rhs);
    debug_assert_eq!(p.len(), 4);
    PolyCoeffs {
        a0: p[0].clone(),
        a4: p[1].clone(),
        a8: p[2].clone(),
        a12: p[3].clone(),
    }
}

/// The closed form of the leading coefficient,
/// `a₁₂ = -(n-2)²(4n-3r₁-5)² / (81(n-1)⁶(r₁-1)⁴)`; strictly negative on the
/// whole valid range, which is what makes `P` nonconstant.
pub fn leading_coeff_closed_form(n: u32, r1: u32) -> Result<Rational, ReductionError> {
    check_range(n, r1)?;
    let n = n as i64;
    let r1 = r1 as i64;
    let num = rat(n - 2) * rat(n - 2) * rat(4 * n - 3 * r1 - 5) * rat(4 * n - 3 * r1 - 5);
    let mut den = rat(81);
    for _ in 0..6 {
        den *= rat(n - 1);
    }
    for _ in 0..4 {
        den *= rat(r1 - 1);
    }
    Ok(-num / den)
}

/// Evaluate `P` at a rational point by Horner's rule in `t = y⁴`.
pub fn horner(p: &PolyCoeffs, y: &Rational) -> Rational {
    let t = y * y * y * y;
    ((&p.a12 * &t + &p.a8) * &t + &p.a4) * &t + &p.a0
}

/// Evaluate `P` at an f64 point.
pub fn horner_f64(p: &PolyCoeffs, y: f64) -> f64 {
    let t = y * y * y * y;
    ((rational_to_f64(&p.a12) * t + rational_to_f64(&p.a8)) * t + rational_to_f64(&p.a4)) * t
        + rational_to_f64(&p.a0)
}

/// Nearest-f64 of a rational (good to a rounding or two).
pub fn rational_to_f64(r: &Rational) -> f64 {
    let num = r.numer();
    let den = r.denom();
    // Drop matched bit lengths so both parts fit comfortably in f64 range.
    let shift = (num.bits().max(den.bits())).saturating_sub(100);
    let num_shifted = num >> shift;
    let den_shifted = den >> shift;
    let to_f64 = |x: &BigInt| -> f64 {
        let mut acc = 0.0f64;
        for digit in x.magnitude().iter_u64_digits().rev() {
            acc = acc * 1.8446744073709552e19 + digit as f64;
        }
        if x.is_negative() {
            -acc
        } else {
            acc
        }
    };
    let d = to_f64(&den_shifted);
    if d == 0.0 {
        return 0.0;
    }
    to_f64(&num_shifted) / d
}

/// Exact rational from an f64 (every finite f64 is dyadic).
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

/// Residuals of the three Λ-free ODEs every nonconstant two-fiber potential
/// would have to satisfy, plus `P(f′(s))` per grid point:
///
/// ```text
/// reduced_ode_1 = [(n-2)(f′)² - (n-1)(r₁-1)f″] f′f‴
///                 - [C₁²μ₁ - (r₁-1)(f″)²][(n-1)f″ - (f′)²]
/// reduced_ode_2 = β₁(f′)²f″ + β₃[(f″)² - f′f‴] - β₂(f′)⁴ - (n-1)β₄
/// reduced_ode_3 = 3β₂β₃(f″)² - 4(n-1)β₂²(f′)²f″ + β₂²(f′)⁴ + (n-1)r₂β₄
/// ```
///
/// A closed-form `f` is recommended, since the third derivative enters.
pub fn reduced_ode_residuals(
    f: &FunctionHandle,
    n: u32,
    r1: u32,
    c1: f64,
    mu1: f64,
    grid: &Grid,
    tol: f64,
) -> Result<ResidualReport, ReductionError> {
    let c1_rat = rational_from_f64(c1).ok_or(ReductionError::ZeroC1)?;
    let mu1_rat = rational_from_f64(mu1)
        .ok_or_else(|| ReductionError::OutOfRange("mu1 not finite".into()))?;
    let coeffs = reduction_coeffs(n, r1, &c1_rat, &mu1_rat)?;
    let poly = expand_poly(&coeffs);

    let f1 = f.derivative(1, grid)?;
    let f2 = f.derivative(2, grid)?;
    let f3 = f.derivative(3, grid)?;

    let nf = n as f64;
    let r1f = r1 as f64;
    let r2f = (n - 1 - r1) as f64;
    let beta1 = rational_to_f64(&coeffs.beta1);
    let beta2 = rational_to_f64(&coeffs.beta2);
    let beta3 = rational_to_f64(&coeffs.beta3);
    let beta4 = rational_to_f64(&coeffs.beta4);
    let c1sq_mu1 = c1 * c1 * mu1;

    let count = grid.count();
    let mut r_a = Vec::with_capacity(count);
    let mut r_b = Vec::with_capacity(count);
    let mut r_c = Vec::with_capacity(count);
    let mut p_at = Vec::with_capacity(count);
    for j in 0..count {
        let (fp, fpp, fppp) = (f1.values()[j], f2.values()[j], f3.values()[j]);
        r_a.push(
            ((nf - 2.0) * fp * fp - (nf - 1.0) * (r1f - 1.0) * fpp) * fp * fppp
                - (c1sq_mu1 - (r1f - 1.0) * fpp * fpp) * ((nf - 1.0) * fpp - fp * fp),
        );
        r_b.push(
            beta1 * fp * fp * fpp + beta3 * (fpp * fpp - fp * fppp)
                - beta2 * fp * fp * fp * fp
                - (nf - 1.0) * beta4,
        );
        r_c.push(
            3.0 * beta2 * beta3 * fpp * fpp - 4.0 * (nf - 1.0) * beta2 * beta2 * fp * fp * fpp
                + beta2 * beta2 * fp * fp * fp * fp
                + (nf - 1.0) * r2f * beta4,
        );
        p_at.push(horner_f64(&poly, fp));
    }
    let series = vec![
        ResidualSeries::new(
            "reduced_ode_1".into(),
            SampledFunction::new(*grid, r_a)?,
            vec![],
            DEFAULT_TRIM,
        ),
        ResidualSeries::new(
            "reduced_ode_2".into(),
            SampledFunction::new(*grid, r_b)?,
            vec![],
            DEFAULT_TRIM,
        ),
        ResidualSeries::new(
            "reduced_ode_3".into(),
            SampledFunction::new(*grid, r_c)?,
            vec![],
            DEFAULT_TRIM,
        ),
        ResidualSeries::new(
            "poly_at_fprime".into(),
            SampledFunction::new(*grid, p_at)?,
            vec![],
            DEFAULT_TRIM,
        ),
    ];
    Ok(ResidualReport::new(series, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Expr;

    fn coeffs_5_2() -> ReductionCoeffs {
        reduction_coeffs(5, 2, &rat(1), &rat(1)).unwrap()
    }

    /// The unexpanded defining expression, evaluated directly; the oracle
    /// for the expansion.
    fn defining_expression(c: &ReductionCoeffs, y: &Rational) -> Rational {
        let y4 = y * y * y * y;
        let first = &c.x * &y4 - (&c.eta3 + &c.delta);
        let second = &c.eta2 * &y4 - &c.eta3;
        let third = &c.y * &c.eta2 * &y4 + &c.tbeta1 * &c.eta3;
        &first * &first * &second - &y4 * &third * &third
    }

    #[test]
    fn pipeline_values_for_n5_r1_2() {
        let c = coeffs_5_2();
        assert_eq!(c.beta1, rat(44));
        assert_eq!(c.beta2, rat(3));
        assert_eq!(c.beta3, rat(16));
        assert_eq!(c.beta4, rat(4));
        assert_eq!(c.gamma1, rat(144));
        assert_eq!(c.gamma2, rat(144));
        assert_eq!(c.gamma3, rat(9));
        assert_eq!(c.gamma4, rat(32));
        assert_eq!(c.eta1, Rational::new(1.into(), 2.into()));
        assert_eq!(c.eta2, Rational::new(3.into(), 16.into()));
        assert_eq!(c.eta3, Rational::new(2.into(), 9.into()));
        assert_eq!(c.tbeta1, Rational::new(11.into(), 4.into()));
        assert_eq!(c.tbeta2, Rational::new(3.into(), 16.into()));
        assert_eq!(c.delta, rat(16));
        assert_eq!(c.x, Rational::new(3.into(), 4.into()));
        assert_eq!(c.y, Rational::new((-7).into(), 4.into()));
    }

    #[test]
    fn zero_mu_collapses_mu_terms() {
        let c = reduction_coeffs(5, 2, &rat(1), &rat(0)).unwrap();
        assert!(c.beta4.is_zero());
        assert!(c.gamma4.is_zero());
        assert!(c.eta3.is_zero());
        assert!(c.delta.is_zero());
        let p = expand_poly(&c);
        assert!(p.a8.is_zero() && p.a4.is_zero() && p.a0.is_zero());
        assert!(!p.a12.is_zero());
    }

    #[test]
    fn r1_equal_one_is_rejected() {
        assert!(matches!(
            reduction_coeffs(4, 1, &rat(1), &rat(1)),
            Err(ReductionError::FirstFiberOneDimensional)
        ));
        assert!(matches!(
            leading_coeff_closed_form(4, 1),
            Err(ReductionError::FirstFiberOneDimensional)
        ));
    }

    #[test]
    fn leading_coefficient_examples() {
        let p = expand_poly(&coeffs_5_2());
        assert_eq!(p.a12, Rational::new((-9).into(), 4096.into()));
        assert_eq!(p.a12, leading_coeff_closed_form(5, 2).unwrap());
        assert_eq!(p.a0, Rational::new((-42632).into(), 729.into()));

        // n = 4, r1 = 2: both routes give -100/59049.
        let c = reduction_coeffs(4, 2, &rat(1), &rat(1)).unwrap();
        let p = expand_poly(&c);
        assert_eq!(p.a12, Rational::new((-100).into(), 59049.into()));
        assert_eq!(p.a12, leading_coeff_closed_form(4, 2).unwrap());
    }

    #[test]
    fn leading_coefficient_matches_closed_form_and_is_negative() {
        for n in 4..=12u32 {
            for r1 in 2..=(n - 2) {
                let c = reduction_coeffs(n, r1, &rat(1), &rat(1)).unwrap();
                let p = expand_poly(&c);
                let closed = leading_coeff_closed_form(n, r1).unwrap();
                assert_eq!(p.a12, closed, "n={n} r1={r1}");
                assert!(p.a12.is_negative(), "n={n} r1={r1}");
            }
        }
    }

    #[test]
    fn simplified_forms_agree_with_definitions() {
        for n in 4..=12u32 {
            for r1 in 2..=(n - 2) {
                let c = reduction_coeffs(n, r1, &rat(1), &rat(1)).unwrap();
                let s = simplified_forms(n, r1).unwrap();
                assert_eq!(c.eta1, s.eta1, "eta1 n={n} r1={r1}");
                assert_eq!(c.eta2, s.eta2, "eta2 n={n} r1={r1}");
                assert_eq!(c.tbeta1, s.tbeta1, "tbeta1 n={n} r1={r1}");
                assert_eq!(c.tbeta2, s.tbeta2, "tbeta2 n={n} r1={r1}");
                assert_eq!(c.x, s.x, "x n={n} r1={r1}");
                assert_eq!(c.y, s.y, "y n={n} r1={r1}");
            }
        }
    }

    #[test]
    fn expansion_matches_defining_expression() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for (n, r1) in [(5u32, 2u32), (7, 3), (9, 5), (12, 10)] {
            for (c1, mu1) in [
                (rat(1), rat(1)),
                (rat(2), rat(-2)),
                (Rational::new(1.into(), 3.into()), rat(1)),
            ] {
                let c = reduction_coeffs(n, r1, &c1, &mu1).unwrap();
                let p = expand_poly(&c);
                for _ in 0..20 {
                    let q = (next() % 12 + 1) as i64;
                    let num = (next() % (10 * q as u64 + 1)) as i64 - 5 * q;
                    let y = Rational::new(num.into(), q.into());
                    assert_eq!(horner(&p, &y), defining_expression(&c, &y));
                }
            }
        }
    }

    #[test]
    fn scaling_c1_and_mu1_together_is_invariant() {
        let base = reduction_coeffs(6, 3, &rat(1), &rat(9)).unwrap();
        // C1 -> 3 C1, mu1 -> mu1/9 keeps C1² mu1 fixed.
        let scaled = reduction_coeffs(6, 3, &rat(3), &rat(1)).unwrap();
        assert_eq!(base, scaled);
    }

    #[test]
    fn rational_strings() {
        let p = expand_poly(&coeffs_5_2());
        assert_eq!(rational_string(&p.a12), "-9/4096");
        assert_eq!(rational_string(&Rational::zero()), "0");
        assert_eq!(rational_string(&rat(7)), "7");
    }

    #[test]
    fn reduced_odes_for_linear_potential() {
        // f = s: second residual is -β₂ - (n-1)β₄ = -3 - 16 = -19.
        let grid = Grid::new(0.0, 1.0, 101).unwrap();
        let f = FunctionHandle::Closed(Expr::parse("s").unwrap());
        let report = reduced_ode_residuals(&f, 5, 2, 1.0, 1.0, &grid, 1e-8).unwrap();
        assert_eq!(report.series[1].label, "reduced_ode_2");
        for &v in report.series[1].values.values() {
            assert!((v + 19.0).abs() <= 1e-12);
        }
        // P(1) = a12 + a8 + a4 + a0 ≠ 0, consistent with the failure.
        let c = coeffs_5_2();
        let p = expand_poly(&c);
        let p1 = horner(&p, &rat(1));
        assert!(!p1.is_zero());
        let expect = rational_to_f64(&p1);
        for &v in report.series[3].values.values() {
            assert!((v - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        }
        assert!(!report.pass);
    }

    #[test]
    fn constant_potential_with_zero_mu_passes() {
        let grid = Grid::new(0.0, 1.0, 101).unwrap();
        let f = FunctionHandle::Closed(Expr::parse("3").unwrap());
        let report = reduced_ode_residuals(&f, 5, 2, 1.0, 0.0, &grid, 1e-14).unwrap();
        assert!(report.pass, "worst {}", report.worst());
    }

    #[test]
    fn f64_round_trips_through_rational() {
        for x in [0.5, -2.25, 1.0 / 3.0, 42.0] {
            let r = rational_from_f64(x).unwrap();
            assert_eq!(rational_to_f64(&r), x);
        }
    }
}
