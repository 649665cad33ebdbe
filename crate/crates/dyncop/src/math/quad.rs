//! Adaptive Simpson quadrature with fixed-order panels.

use crate::{Error, Result};

/// Tolerance and recursion budget for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Absolute tolerance on the integral value. Must be positive.
    pub abs_tol: f64,
    /// Subdivision cap (recursion depth). Must be at least 10.
    pub max_depth: u32,
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, max_depth: u32) -> Result<Self> {
        if !(abs_tol > 0.0) {
            return Err(Error::domain(format!("abs_tol must be > 0, got {abs_tol}")));
        }
        if max_depth < 10 {
            return Err(Error::domain(format!(
                "max_depth must be >= 10, got {max_depth}"
            )));
        }
        Ok(QuadratureSpec { abs_tol, max_depth })
    }

    /// Tight tolerance used for the tail coefficient and covariance integrals.
    pub fn tight() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            max_depth: 48,
        }
    }
}

impl Default for QuadratureSpec {
    /// Default tolerance used for the limiting cdf `G(x, y)`.
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-8,
            max_depth: 48,
        }
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    floor: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let err = left + right - whole;
    // `floor` stops the recursion once a panel's error estimate is at float
    // noise relative to the whole integral; halving the tolerance further
    // would demand sub-epsilon cancellation
    if err.abs() <= 15.0 * tol.max(floor) {
        return Ok(left + right + err / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureNonConvergence(format!(
            "subdivision cap reached on [{a}, {b}] with error estimate {:.3e}",
            err.abs() / 15.0
        )));
    }
    let half_tol = 0.5 * tol;
    Ok(
        adapt(f, a, m, fa, flm, fm, left, half_tol, floor, depth - 1)?
            + adapt(f, m, b, fm, frm, fb, right, half_tol, floor, depth - 1)?,
    )
}

/// Integrate `f` over `[a, b]` to within `spec.abs_tol` absolute error
/// (for integrands with a bounded fourth derivative). Deterministic.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(a < b) {
        return Err(Error::domain(format!(
            "integration bounds must satisfy a < b, got [{a}, {b}]"
        )));
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    for (x, v) in [(a, fa), (m, fm), (b, fb)] {
        if !v.is_finite() {
            return Err(Error::domain(format!("integrand not finite at {x}: {v}")));
        }
    }
    let whole = simpson(fa, fm, fb, b - a);
    // panels whose error estimate is six orders below the requested
    // tolerance contribute nothing measurable to the total
    let floor = spec.abs_tol * 1e-6;
    adapt(
        &f,
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        spec.abs_tol,
        floor,
        spec.max_depth,
    )
}
