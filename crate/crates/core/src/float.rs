//! f64 math shim: std intrinsics when available, libm otherwise.

#[cfg(feature = "std")]
mod imp {
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    pub fn sin(x: f64) -> f64 {
        x.sin()
    }
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }
    pub fn tan(x: f64) -> f64 {
        x.tan()
    }
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    pub fn pow(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }
    pub fn trunc(x: f64) -> f64 {
        x.trunc()
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    pub fn tan(x: f64) -> f64 {
        libm::tan(x)
    }
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    pub fn pow(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
    pub fn trunc(x: f64) -> f64 {
        libm::trunc(x)
    }
}

pub(crate) use imp::*;

/// True when `x` is finite and has no fractional part.
pub(crate) fn is_integer(x: f64) -> bool {
    x.is_finite() && trunc(x) == x
}
