//! Deterministic scalar special functions, adaptive quadrature, and the
//! random-number contract the rest of the crate builds on.

mod normal;
mod quad;
mod rng;

pub use normal::{erf, erfc, std_normal_cdf, std_normal_pdf, std_normal_quantile};
pub use quad::{integrate, QuadratureSpec};
pub use rng::{sample_std_normal, RngStream};

/// Chi-square cdf with three degrees of freedom, in closed form:
/// `P(X <= x) = erf(sqrt(x/2)) - sqrt(2x/pi) * exp(-x/2)`.
pub fn chi_square3_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let half = 0.5 * x;
    (erf(half.sqrt()) - (2.0 * x / std::f64::consts::PI).sqrt() * (-half).exp()).clamp(0.0, 1.0)
}
