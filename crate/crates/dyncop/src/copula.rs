//! The dynamic bivariate normal copula: correlation paths, density,
//! conditional distribution, dependence-measure maps, and the
//! triangular-array sampler.

use crate::math::{std_normal_cdf, std_normal_quantile, RngStream};
use crate::{Error, Result};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

/// Drift function `m(s)` on `[0, 1]` determining the correlation schedule
/// `rho_i = 1 - m(i/n)/log n`.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationPath {
    /// `m(s) = alpha`
    Constant(f64),
    /// `m(s) = alpha + beta * s`
    Linear { alpha: f64, beta: f64 },
    /// `m(s) = alpha + beta * s^gamma` with `alpha > 0`, `beta != 0`,
    /// `gamma > 0` (when `beta = 0`, `gamma` is not identifiable).
    Power { alpha: f64, beta: f64, gamma: f64 },
    /// Piecewise-linear interpolation of `(s, m(s))` knots, constant
    /// extrapolation beyond the end knots.
    Tabulated(Vec<(f64, f64)>),
}

impl CorrelationPath {
    /// Evaluate `m(s)`.
    pub fn m(&self, s: f64) -> f64 {
        match self {
            CorrelationPath::Constant(a) => *a,
            CorrelationPath::Linear { alpha, beta } => alpha + beta * s,
            CorrelationPath::Power { alpha, beta, gamma } => alpha + beta * s.powf(*gamma),
            CorrelationPath::Tabulated(knots) => {
                if knots.is_empty() {
                    return f64::NAN;
                }
                if s <= knots[0].0 {
                    return knots[0].1;
                }
                if s >= knots[knots.len() - 1].0 {
                    return knots[knots.len() - 1].1;
                }
                for w in knots.windows(2) {
                    let (s0, m0) = w[0];
                    let (s1, m1) = w[1];
                    if s <= s1 {
                        let t = (s - s0) / (s1 - s0);
                        return m0 + t * (m1 - m0);
                    }
                }
                knots[knots.len() - 1].1
            }
        }
    }

    /// Parameter sanity per family. `Power` additionally requires
    /// identifiability (`alpha > 0`, `beta != 0`, `gamma > 0`).
    pub fn validate(&self) -> Result<()> {
        match self {
            CorrelationPath::Constant(a) => {
                if *a < 0.0 {
                    return Err(Error::domain(format!("constant m = {a} must be >= 0")));
                }
            }
            CorrelationPath::Linear { alpha, beta } => {
                if *alpha < 0.0 || alpha + beta < 0.0 {
                    return Err(Error::domain(format!(
                        "linear m with alpha={alpha}, beta={beta} is negative on [0,1]"
                    )));
                }
            }
            CorrelationPath::Power { alpha, beta, gamma } => {
                if !(*alpha > 0.0) {
                    return Err(Error::domain(format!(
                        "power family needs alpha > 0, got {alpha}"
                    )));
                }
                if *beta == 0.0 {
                    return Err(Error::domain(
                        "power family needs beta != 0 (gamma not identifiable at beta = 0)",
                    ));
                }
                if !(*gamma > 0.0) {
                    return Err(Error::domain(format!(
                        "power family needs gamma > 0, got {gamma}"
                    )));
                }
            }
            CorrelationPath::Tabulated(knots) => {
                if knots.len() < 2 {
                    return Err(Error::domain("tabulated path needs at least 2 knots"));
                }
                for w in knots.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::domain("tabulated knots must have increasing s"));
                    }
                }
                if knots.iter().any(|(_, m)| *m < 0.0) {
                    return Err(Error::domain("tabulated m values must be >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Whether `m` is strictly positive on a fine grid of `[0, 1]`, as the
    /// Hüsler-Reiss mixture regime and the inference routines require.
    pub fn strictly_positive(&self, grid_points: usize) -> bool {
        (0..=grid_points).all(|k| self.m(k as f64 / grid_points as f64) > 0.0)
    }
}

/// Correlation schedule `rho_1..rho_n` for a sample of size `n`.
///
/// `rho_i = 1 - m(i/n)/log n`; every entry lies in `(-1, 1]`, where the value
/// 1 (from `m = 0`) is valid for the sampler only, never for density or
/// conditional-cdf evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoSchedule {
    pub n: usize,
    pub rho: Vec<f64>,
}

/// Build the schedule, rejecting any `m(i/n)` outside `[0, 2 log n)`.
pub fn build_schedule(path: &CorrelationPath, n: usize) -> Result<RhoSchedule> {
    if n < 2 {
        return Err(Error::domain(format!("sample size must be >= 2, got {n}")));
    }
    let log_n = (n as f64).ln();
    let mut rho = Vec::with_capacity(n);
    for i in 1..=n {
        let s = i as f64 / n as f64;
        let m = path.m(s);
        if m < 0.0 {
            return Err(Error::domain(format!("m({s}) = {m} is negative")));
        }
        if m >= 2.0 * log_n {
            return Err(Error::domain(format!(
                "m({s}) = {m} >= 2 log n = {}; rho_{i} would leave (-1, 1]",
                2.0 * log_n
            )));
        }
        rho.push(1.0 - m / log_n);
    }
    Ok(RhoSchedule { n, rho })
}

/// `n` paired observations on copula scale with cached rank-based
/// pseudo-observations `rank/(n+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pseudo_u: Vec<f64>,
    pub pseudo_v: Vec<f64>,
}

/// Ranks with the average rule for ties, divided by `n + 1`.
pub fn pseudo_observations(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        xs[a]
            .partial_cmp(&xs[b])
            .expect("non-finite value in ranks")
    });
    let mut out = vec![0.0; n];
    let denom = (n + 1) as f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // average rank over the tie block [i, j]
        let avg = (i + j + 2) as f64 / 2.0;
        for k in i..=j {
            out[idx[k]] = avg / denom;
        }
        i = j + 1;
    }
    out
}

impl PairedSample {
    /// Build from raw coordinates (any scale with continuous marginals);
    /// only the ranks matter downstream.
    pub fn from_xy(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::domain("x and y must have equal length"));
        }
        if x.is_empty() {
            return Err(Error::domain("sample must be non-empty"));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("sample values must be finite"));
        }
        let pseudo_u = pseudo_observations(&x);
        let pseudo_v = pseudo_observations(&y);
        Ok(PairedSample {
            u: x,
            v: y,
            pseudo_u,
            pseudo_v,
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

fn check_rho_open(rho: f64) -> Result<()> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::domain(format!("rho must lie in (-1, 1), got {rho}")));
    }
    Ok(())
}

fn check_interior(u: f64, name: &str) -> Result<()> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("{name} must lie in (0, 1), got {u}")));
    }
    Ok(())
}

/// Bivariate normal copula density `c(u, v; rho)`.
pub fn copula_density(u: f64, v: f64, rho: f64) -> Result<f64> {
    check_interior(u, "u")?;
    check_interior(v, "v")?;
    check_rho_open(rho)?;
    let x = std_normal_quantile(u)?;
    let y = std_normal_quantile(v)?;
    let r2 = 1.0 - rho * rho;
    let num = 2.0 * rho * x * y - rho * rho * (x * x + y * y);
    Ok((num / (2.0 * r2)).exp() / r2.sqrt())
}

/// Conditional distribution `C_1(u, v; rho) = P(V <= v | U = u)
/// = Phi((Phi^-(v) - rho Phi^-(u)) / sqrt(1 - rho^2))`.
pub fn conditional_cdf(u: f64, v: f64, rho: f64) -> Result<f64> {
    check_interior(u, "u")?;
    check_interior(v, "v")?;
    check_rho_open(rho)?;
    let x = std_normal_quantile(u)?;
    let y = std_normal_quantile(v)?;
    Ok(std_normal_cdf((y - rho * x) / (1.0 - rho * rho).sqrt()))
}

/// One pair `(U, V) = (Phi(Z1), Phi(rho Z1 + sqrt(1-rho^2) Z2))`.
///
/// `rho = 1` is allowed and yields comonotone pairs `U = V`.
pub fn sample_pair_with(rho: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    let u = std_normal_cdf(z1);
    let v = std_normal_cdf(rho * z1 + (1.0 - rho * rho).max(0.0).sqrt() * z2);
    (u, v)
}

/// One pair from a fresh stream.
pub fn sample_pair(rho: f64, stream: RngStream) -> (f64, f64) {
    sample_pair_with(rho, &mut stream.rng())
}

/// Raw uniform pairs of a triangular array, the i-th pair using `rho_i`.
/// Two draws are consumed per pair even at `rho = 1`.
pub fn sample_uniform_pairs(schedule: &RhoSchedule, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let mut u = Vec::with_capacity(schedule.n);
    let mut v = Vec::with_capacity(schedule.n);
    for &rho in &schedule.rho {
        let (ui, vi) = sample_pair_with(rho, rng);
        u.push(ui);
        v.push(vi);
    }
    (u, v)
}

/// Sample a triangular array and attach pseudo-observations.
pub fn sample_array(schedule: &RhoSchedule, stream: RngStream) -> PairedSample {
    let (u, v) = sample_uniform_pairs(schedule, &mut stream.rng());
    let pseudo_u = pseudo_observations(&u);
    let pseudo_v = pseudo_observations(&v);
    PairedSample {
        u,
        v,
        pseudo_u,
        pseudo_v,
    }
}

/// Total mass of the copula density by tensorized adaptive quadrature,
/// transformed to normal scores where the integrand is the smooth bivariate
/// normal density (the inner window tracks the conditional ridge, which is
/// what makes strong dependence like `rho = 0.99` integrable). Verification
/// utility for the normalization property; the result should be 1.
pub fn copula_density_mass(rho: f64) -> Result<f64> {
    check_rho_open(rho)?;
    let outer_spec = crate::math::QuadratureSpec::new(1e-8, 48)?;
    let inner_spec = crate::math::QuadratureSpec::new(1e-10, 48)?;
    let s = (1.0 - rho * rho).sqrt();
    let bound = 8.2;
    crate::math::integrate(
        |z1| {
            let u = std_normal_cdf(z1);
            if !(u > 0.0 && u < 1.0) {
                return 0.0;
            }
            let center = rho * z1;
            let lo = (center - 12.0 * s).max(-bound);
            let hi = (center + 12.0 * s).min(bound);
            if !(lo < hi) {
                return 0.0;
            }
            let inner = crate::math::integrate(
                |z2| {
                    let v = std_normal_cdf(z2);
                    if !(v > 0.0 && v < 1.0) {
                        return 0.0;
                    }
                    copula_density(u, v, rho).expect("interior point")
                        * crate::math::std_normal_pdf(z2)
                },
                lo,
                hi,
                &inner_spec,
            )
            .expect("smooth inner integrand");
            inner * crate::math::std_normal_pdf(z1)
        },
        -bound,
        bound,
        &outer_spec,
    )
}

/// `E[(U - 1/2)(V - 1/2)] = arcsin(rho/2) / (2 pi)`.
pub fn spearman_map(rho: f64) -> f64 {
    (rho / 2.0).asin() / (2.0 * PI)
}

/// Inverse of [`spearman_map`]: `rho = 2 sin(2 pi q)` for `|q| <= 1/12`.
pub fn spearman_map_inverse(q: f64) -> Result<f64> {
    if q.abs() > 1.0 / 12.0 {
        return Err(Error::domain(format!(
            "spearman moment {q} outside invertible range [-1/12, 1/12]"
        )));
    }
    Ok(2.0 * (2.0 * PI * q).sin())
}

/// `E[sgn((U - U')(V - V'))] = (2/pi) arcsin(rho)`. Reference map only: the
/// triangular array has no independent copy of each pair, so it is not used
/// for estimation.
pub fn kendall_map(rho: f64) -> f64 {
    2.0 / PI * rho.asin()
}
