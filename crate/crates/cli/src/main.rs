//! `warpsol` — construct and verify gradient almost Ricci solitons on
//! multiply warped products over an interval.
//!
//! Subcommands:
//!
//! - `construct one-fiber|example|rigid|schouten … --out spec.json` writes a
//!   closed-form spec file for one of the explicit families.
//! - `verify spec.json [--checks soliton,weyl,xi,lambda-good]` runs the
//!   requested residual checks, prints a JSON summary, optionally dumps a
//!   per-point CSV and an SVG chart, and exits 0 (pass) / 1 (residual
//!   failure) / 2 (usage or input error).
//! - `coeffs --n 5 --r1 2 --c1 1 --mu1 1` prints the exact reduction
//!   coefficients and the sparse degree-12 polynomial as JSON.
//! - `two-fiber-probe --f "s" …` scores a candidate two-fiber potential
//!   against the ODEs it would have to satisfy.

mod report;
mod specfile;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use report::{write_csv, write_svg, CheckSummary, LabeledSup, VerifySummary};
use specfile::SpecFile;
use warpsol_core::constructors::{
    example_family, one_fiber_soliton, rigid_product, schouten_one_fiber, two_fiber_from_f,
    RigidParams, SchoutenParams, TwoFiberFParams,
};
use warpsol_core::reduction::{
    expand_poly, leading_coeff_closed_form, rational_from_f64, rational_string,
    reduced_ode_residuals, reduction_coeffs, Rational,
};
use warpsol_core::soliton::{
    harmonic_weyl_residuals, lambda_good_check, soliton_residuals, xi_quadratic_residuals,
};
use warpsol_core::{Expr, FunctionHandle, Grid, ResidualReport, DEFAULT_GRID_POINTS};

/// Anything that should terminate the process with exit code 2.
#[derive(Debug)]
pub struct CliError {
    msg: String,
}

impl CliError {
    fn input(msg: String) -> CliError {
        CliError { msg }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.msg)
    }
}

macro_rules! from_error {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> CliError {
                CliError { msg: e.to_string() }
            }
        }
    )*};
}

from_error!(
    warpsol_core::expr::ParseError,
    warpsol_core::expr::DomainError,
    warpsol_core::numerics::NumericsError,
    warpsol_core::geometry::GeometryError,
    warpsol_core::soliton::SolitonError,
    warpsol_core::constructors::ConstructError,
    warpsol_core::reduction::ReductionError
);

#[derive(Parser)]
#[command(
    name = "warpsol",
    version,
    about = "Construct and verify gradient almost Ricci solitons on multiply warped products"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a closed-form spec file for one of the explicit constructions.
    Construct {
        #[command(subcommand)]
        family: ConstructCmd,
    },
    /// Run residual checks on a spec file.
    Verify(VerifyArgs),
    /// Print the exact reduction coefficients and polynomial as JSON.
    Coeffs(CoeffsArgs),
    /// Score a candidate two-fiber potential against its ODE system.
    TwoFiberProbe(ProbeArgs),
}

#[derive(Subcommand)]
enum ConstructCmd {
    /// One fiber: potential determined by the warping function through a
    /// quadrature (closed form required here; the library also offers the
    /// sampled fallback).
    OneFiber(OneFiberArgs),
    /// The trigonometric family with any number of Ricci-flat fibers.
    Example(ExampleArgs),
    /// Rigid product: linear first warping, constant second, quadratic
    /// potential, constant lambda.
    Rigid(RigidArgs),
    /// One-fiber construction with lambda tied to the scalar curvature.
    Schouten(SchoutenArgs),
}

fn parse_interval(text: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err("expected two comma-separated numbers, e.g. 0.5,2".into());
    }
    let a = parts[0]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("left endpoint: {e}"))?;
    let b = parts[1]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("right endpoint: {e}"))?;
    Ok((a, b))
}

fn parse_rational(text: &str) -> Result<Rational, String> {
    if let Ok(r) = text.parse::<Rational>() {
        return Ok(r);
    }
    if let Ok(x) = text.parse::<f64>() {
        if let Some(r) = rational_from_f64(x) {
            return Ok(r);
        }
    }
    Err(format!(
        "{text:?} is not a rational (use p/q, an integer, or a decimal)"
    ))
}

#[derive(Args)]
struct OneFiberArgs {
    /// Warping function h(s), must be positive on the interval.
    #[arg(long, allow_hyphen_values = true)]
    h: String,
    /// Einstein constant of the fiber.
    #[arg(long, allow_negative_numbers = true)]
    mu: f64,
    /// Total dimension n (fiber dimension is n-1).
    #[arg(long)]
    n: usize,
    /// Interval a,b for the base coordinate.
    #[arg(long, value_parser = parse_interval, allow_hyphen_values = true)]
    interval: (f64, f64),
    /// Quadrature constant for f' (anchored at the left endpoint).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    quad_const: f64,
    /// Additive constant for f (anchored at the left endpoint).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    f_const: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
    /// Output spec file path.
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct ExampleArgs {
    /// Comma-separated fiber dimensions, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    /// Fraction of the maximal half-width to cover, in (0,1).
    #[arg(long)]
    margin: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct RigidArgs {
    #[arg(long)]
    n: usize,
    /// Dimension of the first fiber (at least 2).
    #[arg(long)]
    r1: usize,
    /// Slope A of h1 = A s + B.
    #[arg(long, allow_negative_numbers = true)]
    slope: f64,
    /// Offset B of h1.
    #[arg(long, allow_negative_numbers = true)]
    offset: f64,
    /// The constant soliton value.
    #[arg(long, allow_negative_numbers = true)]
    lambda0: f64,
    #[arg(long, value_parser = parse_interval, allow_hyphen_values = true)]
    interval: (f64, f64),
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct SchoutenArgs {
    #[arg(long)]
    n: usize,
    /// Slope A of h = A s + B.
    #[arg(long, allow_negative_numbers = true)]
    slope: f64,
    /// Offset B of h.
    #[arg(long, allow_negative_numbers = true)]
    offset: f64,
    /// Einstein constant of the fiber.
    #[arg(long, allow_negative_numbers = true)]
    mu: f64,
    /// Additive constant in lambda = R/(2(n-1)) + tau.
    #[arg(long, allow_negative_numbers = true)]
    tau: f64,
    /// Free additive constant of the potential.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c1: f64,
    #[arg(long, value_parser = parse_interval, allow_hyphen_values = true)]
    interval: (f64, f64),
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// Spec file to verify.
    spec: String,
    /// Residual tolerance (default 1e-8 for closed-form specs).
    #[arg(long)]
    tol: Option<f64>,
    /// Write the per-point residual table to this CSV file.
    #[arg(long)]
    csv: Option<String>,
    /// Write a log-scale residual chart to this SVG file.
    #[arg(long)]
    svg: Option<String>,
    /// Comma-separated checks: soliton, weyl, xi, lambda-good.
    #[arg(long, default_value = "soliton")]
    checks: String,
}

#[derive(Args)]
struct CoeffsArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    r1: u32,
    /// C1 as a rational (p/q, integer, or decimal).
    #[arg(long, default_value = "1", value_parser = parse_rational, allow_hyphen_values = true)]
    c1: Rational,
    /// mu1 as a rational.
    #[arg(long, default_value = "1", value_parser = parse_rational, allow_hyphen_values = true)]
    mu1: Rational,
}

#[derive(Args)]
struct ProbeArgs {
    /// Candidate potential f(s); f' must not vanish on the interval.
    #[arg(long, allow_hyphen_values = true)]
    f: String,
    #[arg(long)]
    n: u32,
    #[arg(long)]
    r1: u32,
    #[arg(long, allow_negative_numbers = true)]
    c1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c2: f64,
    #[arg(long, allow_negative_numbers = true)]
    c3: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu1: f64,
    #[arg(long, value_parser = parse_interval, allow_hyphen_values = true)]
    interval: (f64, f64),
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Construct { family } => construct(family),
        Command::Verify(args) => verify(args),
        Command::Coeffs(args) => coeffs(args),
        Command::TwoFiberProbe(args) => probe(args),
    }
}

fn grid_from(interval: (f64, f64), points: usize) -> Result<Grid, CliError> {
    Grid::new(interval.0, interval.1, points)
        .map_err(|e| CliError::input(format!("invalid interval/grid: {e}")))
}

fn construct(cmd: ConstructCmd) -> Result<u8, CliError> {
    match cmd {
        ConstructCmd::OneFiber(args) => {
            let h_expr = Expr::parse(&args.h)
                .map_err(|e| CliError::input(format!("in expression for --h: {e}")))?;
            let grid = grid_from(args.interval, args.grid_points)?;
            let spec = one_fiber_soliton(
                &FunctionHandle::Closed(h_expr),
                args.mu,
                args.n,
                grid,
                args.quad_const,
                args.f_const,
            )?;
            if !spec.all_closed() {
                return Err(CliError::input(format!(
                    "the potential for h = {:?} has no closed form in this expression \
                     language; the library quadrature path still handles it in-process",
                    args.h
                )));
            }
            SpecFile::from_spec(&spec)?.save(&args.out)?;
            eprintln!("wrote {}", args.out);
            Ok(0)
        }
        ConstructCmd::Example(args) => {
            let fam = example_family(&args.dims, args.margin, args.grid_points)?;
            SpecFile::from_spec(&fam.spec)?.save(&args.out)?;
            eprintln!(
                "wrote {} (n = {}, C = {}, L^2 = {}, half-width = {:.6})",
                args.out, fam.n, fam.c_const, fam.l_squared, fam.epsilon
            );
            Ok(0)
        }
        ConstructCmd::Rigid(args) => {
            let params = RigidParams {
                n: args.n,
                r1: args.r1,
                slope: args.slope,
                offset: args.offset,
                lambda0: args.lambda0,
            };
            let rigid = rigid_product(&params, grid_from(args.interval, args.grid_points)?)?;
            SpecFile::from_spec(&rigid.spec)?.save(&args.out)?;
            eprintln!(
                "wrote {} (mu1 = {}, mu2 = {}, linear coefficient D = {}{})",
                args.out,
                rigid.mu1,
                rigid.mu2,
                rigid.d_coeff,
                if rigid.degenerate {
                    "; lambda = 0 collapses all eigenvalues"
                } else {
                    ""
                }
            );
            Ok(0)
        }
        ConstructCmd::Schouten(args) => {
            let params = SchoutenParams {
                n: args.n,
                slope: args.slope,
                offset: args.offset,
                mu: args.mu,
                tau: args.tau,
                c1: args.c1,
            };
            let sch = schouten_one_fiber(&params, grid_from(args.interval, args.grid_points)?)?;
            SpecFile::from_spec(&sch.spec)?.save(&args.out)?;
            eprintln!(
                "wrote {} (solved c0 = {}, log coefficient = {})",
                args.out, sch.c0, sch.log_coeff
            );
            Ok(0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Check {
    Soliton,
    Weyl,
    Xi,
    LambdaGood,
}

fn parse_checks(text: &str) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let check = match part.trim() {
            "soliton" => Check::Soliton,
            "weyl" => Check::Weyl,
            "xi" => Check::Xi,
            "lambda-good" => Check::LambdaGood,
            other => {
                return Err(CliError::input(format!(
                    "unknown check {other:?}; available: soliton, weyl, xi, lambda-good"
                )))
            }
        };
        if !out.contains(&check) {
            out.push(check);
        }
    }
    if out.is_empty() {
        return Err(CliError::input("no checks requested".into()));
    }
    // Fixed execution and column order regardless of how they were listed.
    out.sort_by_key(|c| match c {
        Check::Soliton => 0,
        Check::Weyl => 1,
        Check::Xi => 2,
        Check::LambdaGood => 3,
    });
    Ok(out)
}

fn verify(args: VerifyArgs) -> Result<u8, CliError> {
    let file = SpecFile::load(&args.spec)?;
    let (spec, lambda_source) = file.to_spec()?;
    let tol = args.tol.unwrap_or_else(|| spec.default_tolerance());
    let checks = parse_checks(&args.checks)?;

    let mut summaries = Vec::new();
    let mut csv_series: Vec<(String, Vec<f64>)> = Vec::new();
    let push_series = |report: &ResidualReport, csv: &mut Vec<(String, Vec<f64>)>| {
        for s in &report.series {
            csv.push((s.label.clone(), s.values.values().to_vec()));
        }
    };

    for check in &checks {
        match check {
            Check::Soliton => {
                let report = soliton_residuals(&spec, tol)?;
                push_series(&report, &mut csv_series);
                summaries.push(CheckSummary::from_report("soliton", &report));
            }
            Check::Weyl => {
                let report = harmonic_weyl_residuals(spec.product(), tol)?;
                push_series(&report, &mut csv_series);
                summaries.push(CheckSummary::from_report("weyl", &report));
            }
            Check::Xi => {
                let report = xi_quadratic_residuals(&spec, tol)?;
                push_series(&report, &mut csv_series);
                summaries.push(CheckSummary::from_report("xi", &report));
            }
            Check::LambdaGood => {
                if spec.product().fiber_count() != 2 {
                    summaries.push(CheckSummary::skipped(
                        "lambda-good",
                        "requires exactly two fibers",
                    ));
                } else {
                    let report = lambda_good_check(&spec, tol)?;
                    push_series(&report, &mut csv_series);
                    summaries.push(CheckSummary::from_report("lambda-good", &report));
                }
            }
        }
    }

    if let Some(path) = &args.csv {
        write_csv(path, spec.product().grid(), &csv_series)?;
    }
    if let Some(path) = &args.svg {
        write_svg(path, spec.product().grid(), &csv_series)?;
    }

    let pass = summaries.iter().all(|s| s.pass);
    let summary = VerifySummary {
        file: args.spec.clone(),
        interval: file.interval,
        grid_points: file.grid_points,
        tolerance: tol,
        lambda: lambda_source.as_str().to_string(),
        checks: summaries,
        pass,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::input(format!("cannot serialize summary: {e}")))?
    );
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct CoeffsOut {
    n: u32,
    r1: u32,
    c1: String,
    mu1: String,
    beta1: String,
    beta2: String,
    beta3: String,
    beta4: String,
    gamma1: String,
    gamma2: String,
    gamma3: String,
    gamma4: String,
    eta1: String,
    eta2: String,
    eta3: String,
    tbeta1: String,
    tbeta2: String,
    delta: String,
    x: String,
    y: String,
    a12: String,
    a8: String,
    a4: String,
    a0: String,
    a12_closed_form: String,
    r#match: bool,
}

fn coeffs(args: CoeffsArgs) -> Result<u8, CliError> {
    let c = reduction_coeffs(args.n, args.r1, &args.c1, &args.mu1)?;
    let p = expand_poly(&c);
    let closed = leading_coeff_closed_form(args.n, args.r1)?;
    let out = CoeffsOut {
        n: args.n,
        r1: args.r1,
        c1: rational_string(&args.c1),
        mu1: rational_string(&args.mu1),
        beta1: rational_string(&c.beta1),
        beta2: rational_string(&c.beta2),
        beta3: rational_string(&c.beta3),
        beta4: rational_string(&c.beta4),
        gamma1: rational_string(&c.gamma1),
        gamma2: rational_string(&c.gamma2),
        gamma3: rational_string(&c.gamma3),
        gamma4: rational_string(&c.gamma4),
        eta1: rational_string(&c.eta1),
        eta2: rational_string(&c.eta2),
        eta3: rational_string(&c.eta3),
        tbeta1: rational_string(&c.tbeta1),
        tbeta2: rational_string(&c.tbeta2),
        delta: rational_string(&c.delta),
        x: rational_string(&c.x),
        y: rational_string(&c.y),
        a12: rational_string(&p.a12),
        a8: rational_string(&p.a8),
        a4: rational_string(&p.a4),
        a0: rational_string(&p.a0),
        a12_closed_form: rational_string(&closed),
        r#match: p.a12 == closed,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&out)
            .map_err(|e| CliError::input(format!("cannot serialize coefficients: {e}")))?
    );
    Ok(0)
}

#[derive(Serialize)]
struct ProbeOut {
    f: String,
    n: u32,
    r1: u32,
    c1: f64,
    c2: f64,
    c3: f64,
    mu1: f64,
    interval: [f64; 2],
    grid_points: usize,
    tolerance: f64,
    sup_norms: Vec<LabeledSup>,
    max_abs_poly_at_fprime: f64,
    pass: bool,
}

fn probe(args: ProbeArgs) -> Result<u8, CliError> {
    let f_expr =
        Expr::parse(&args.f).map_err(|e| CliError::input(format!("in expression for --f: {e}")))?;
    let f_handle = FunctionHandle::Closed(f_expr);
    let grid = grid_from(args.interval, args.grid_points)?;
    let params = TwoFiberFParams {
        n: args.n as usize,
        r1: args.r1 as usize,
        c1: args.c1,
        c2: args.c2,
        c3: args.c3,
        mu1: args.mu1,
        f: f_handle.clone(),
    };
    let (_induced, potential_report) = two_fiber_from_f(&params, grid, args.tol)?;
    let reduced_report = reduced_ode_residuals(
        &f_handle, args.n, args.r1, args.c1, args.mu1, &grid, args.tol,
    )?;

    let mut sup_norms = Vec::new();
    let mut max_poly = 0.0f64;
    for s in &potential_report.series {
        sup_norms.push(LabeledSup {
            equation: s.label.clone(),
            sup_norm: s.sup_norm,
        });
    }
    for s in &reduced_report.series {
        if s.label == "poly_at_fprime" {
            max_poly = s.sup_norm;
        } else {
            sup_norms.push(LabeledSup {
                equation: s.label.clone(),
                sup_norm: s.sup_norm,
            });
        }
    }
    let pass = sup_norms.iter().all(|s| s.sup_norm <= args.tol) && max_poly <= args.tol;
    let out = ProbeOut {
        f: args.f.clone(),
        n: args.n,
        r1: args.r1,
        c1: args.c1,
        c2: args.c2,
        c3: args.c3,
        mu1: args.mu1,
        interval: [args.interval.0, args.interval.1],
        grid_points: args.grid_points,
        tolerance: args.tol,
        sup_norms,
        max_abs_poly_at_fprime: max_poly,
        pass,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&out)
            .map_err(|e| CliError::input(format!("cannot serialize probe result: {e}")))?
    );
    Ok(if pass { 0 } else { 1 })
}
