//! The on-disk JSON spec format and its conversion into a verification
//! payload.
//!
//! ```json
//! {
//!   "interval": [-0.9, 0.9],
//!   "grid_points": 1001,
//!   "fibers": [ { "dim": 1, "mu": 0.0, "h": "exp(s)" } ],
//!   "f": "-log(cos(sqrt(2)*s))",
//!   "lambda": "..."
//! }
//! ```
//!
//! `grid_points` defaults to 1001. `lambda` is optional: when absent it is
//! derived symbolically from the base equation, `λ = f″ - Σ rⱼ hⱼ″/hⱼ`, and
//! the verification summary marks it as derived (the base residual is then
//! zero by construction and only the fiber equations carry content).

use serde::{Deserialize, Serialize};
use warpsol_core::geometry::FiberSpec;
use warpsol_core::{Expr, FunctionHandle, Grid, ProductSpec, SolitonSpec, DEFAULT_GRID_POINTS};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiberEntry {
    pub dim: usize,
    pub mu: f64,
    pub h: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecFile {
    pub interval: [f64; 2],
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    pub fibers: Vec<FiberEntry>,
    pub f: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

/// Where the verified λ came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaSource {
    Explicit,
    Derived,
}

impl LambdaSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            LambdaSource::Explicit => "explicit",
            LambdaSource::Derived => "derived",
        }
    }
}

fn parse_expr(field: &str, text: &str) -> Result<Expr, CliError> {
    Expr::parse(text)
        .map_err(|e| CliError::input(format!("in expression for {field}: {e} (input: {text:?})")))
}

impl SpecFile {
    pub fn load(path: &str) -> Result<SpecFile, CliError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {path}: {e}")))?;
        serde_json::from_str(&raw)
            .map_err(|e| CliError::input(format!("cannot parse {path} as a spec file: {e}")))
    }

    pub fn save(&self, path: &str) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::input(format!("cannot serialize spec: {e}")))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {path}: {e}")))
    }

    /// Build the verification payload; parses every expression and validates
    /// the product.
    pub fn to_spec(&self) -> Result<(SolitonSpec, LambdaSource), CliError> {
        if self.fibers.is_empty() {
            return Err(CliError::input("spec file has no fibers".into()));
        }
        let grid = Grid::new(self.interval[0], self.interval[1], self.grid_points)
            .map_err(|e| CliError::input(format!("invalid interval/grid: {e}")))?;
        let mut fibers = Vec::with_capacity(self.fibers.len());
        let mut h_exprs = Vec::with_capacity(self.fibers.len());
        for (i, entry) in self.fibers.iter().enumerate() {
            let h = parse_expr(&format!("fibers[{i}].h"), &entry.h)?;
            h_exprs.push((entry.dim, h.clone()));
            fibers.push(
                FiberSpec::new(entry.dim, entry.mu, FunctionHandle::Closed(h))
                    .map_err(|e| CliError::input(format!("fiber {}: {e}", i + 1)))?,
            );
        }
        let product = ProductSpec::new(grid, fibers)
            .map_err(|e| CliError::input(format!("invalid product: {e}")))?;
        let f = parse_expr("f", &self.f)?;

        let (lambda, source) = match &self.lambda {
            Some(text) => (parse_expr("lambda", text)?, LambdaSource::Explicit),
            None => {
                // λ = f″ - Σ rⱼ hⱼ″/hⱼ, assembled symbolically.
                let mut lam = f.differentiate_n(2);
                for (dim, h) in &h_exprs {
                    lam = Expr::sub(
                        lam,
                        Expr::mul(
                            Expr::int(*dim as i64),
                            Expr::div(h.differentiate_n(2), h.clone()),
                        ),
                    );
                }
                (lam, LambdaSource::Derived)
            }
        };
        let spec = SolitonSpec::new(
            product,
            FunctionHandle::Closed(f),
            FunctionHandle::Closed(lambda),
        )
        .map_err(|e| CliError::input(format!("invalid spec: {e}")))?;
        Ok((spec, source))
    }

    /// Render a constructed closed-form spec back into the file format.
    pub fn from_spec(spec: &SolitonSpec) -> Result<SpecFile, CliError> {
        let grid = spec.product().grid();
        let fibers =
            spec.product()
                .fibers()
                .iter()
                .map(|fiber| {
                    let h = fiber.h().closed_expr().ok_or_else(|| {
                        CliError::input("warping function is not closed-form".into())
                    })?;
                    Ok(FiberEntry {
                        dim: fiber.dim(),
                        mu: fiber.mu(),
                        h: h.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
        let f = spec
            .f()
            .closed_expr()
            .ok_or_else(|| CliError::input("potential is not closed-form".into()))?;
        let lambda = spec
            .lambda()
            .closed_expr()
            .ok_or_else(|| CliError::input("lambda is not closed-form".into()))?;
        Ok(SpecFile {
            interval: [grid.a(), grid.b()],
            grid_points: grid.count(),
            fibers,
            f: f.to_string(),
            lambda: Some(lambda.to_string()),
        })
    }
}
