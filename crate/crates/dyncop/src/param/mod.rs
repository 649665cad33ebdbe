//! Parametric inference for the drift function `m(s)`: score-equation
//! estimation in the constant, linear and power families along the Spearman
//! and Pearson routes, asymptotic covariance objects, and the associated
//! joint and constancy tests.

mod solver;
mod testing;

pub use solver::{
    fit_constant, fit_linear, fit_power, profile_roots, FitConfig, PowerStart, ProfileRoot,
};
pub use testing::{constancy_test, hotelling_test, hotelling_wald_statistic, TestResult};

use crate::copula::{spearman_map, PairedSample};
use crate::math::{integrate, std_normal_pdf, std_normal_quantile, QuadratureSpec};
use crate::{Error, Result};
use std::sync::OnceLock;

/// Which moment identity drives the score equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// `E[(U - 1/2)(V - 1/2)] = arcsin(rho/2)/(2 pi)`
    Spearman,
    /// `E[Phi^-(U) Phi^-(V)] = rho`
    Pearson,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimatorKind::Spearman => write!(f, "spearman"),
            EstimatorKind::Pearson => write!(f, "pearson"),
        }
    }
}

/// Parametric family of the drift function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Constant,
    Linear,
    Power,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Constant => write!(f, "constant"),
            Family::Linear => write!(f, "linear"),
            Family::Power => write!(f, "power"),
        }
    }
}

/// A fitted drift function. `beta`/`gamma` are 0/1 for families that fix
/// them; `residual_norm` is `max_k |l_k| / n` at the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamFit {
    pub family: Family,
    pub estimator: EstimatorKind,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub residual_norm: f64,
    pub n: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl ParamFit {
    /// Fitted drift value at `s`.
    pub fn m(&self, s: f64) -> f64 {
        match self.family {
            Family::Constant => self.alpha,
            Family::Linear => self.alpha + self.beta * s,
            Family::Power => self.alpha + self.beta * s.powf(self.gamma),
        }
    }
}

/// Spearman responses `Z_i = (pseudo_u_i - 1/2)(pseudo_v_i - 1/2)`.
pub fn spearman_responses(sample: &PairedSample) -> Vec<f64> {
    sample
        .pseudo_u
        .iter()
        .zip(&sample.pseudo_v)
        .map(|(&u, &v)| (u - 0.5) * (v - 0.5))
        .collect()
}

/// Pearson responses `Z*_i = Phi^-(pseudo_u_i) Phi^-(pseudo_v_i)`. The
/// rank/(n+1) construction keeps pseudo-observations strictly interior, so
/// the quantile is always defined.
pub fn pearson_responses(sample: &PairedSample) -> Vec<f64> {
    sample
        .pseudo_u
        .iter()
        .zip(&sample.pseudo_v)
        .map(|(&u, &v)| {
            std_normal_quantile(u).expect("pseudo-observation in (0,1)")
                * std_normal_quantile(v).expect("pseudo-observation in (0,1)")
        })
        .collect()
}

/// Exact-uniform variant of [`spearman_responses`], using the stored
/// coordinates instead of ranks. No finite-n bias correction is applied.
pub fn spearman_responses_raw(sample: &PairedSample) -> Vec<f64> {
    sample
        .u
        .iter()
        .zip(&sample.v)
        .map(|(&u, &v)| (u - 0.5) * (v - 0.5))
        .collect()
}

/// Exact-uniform variant of [`pearson_responses`]; requires the stored
/// coordinates to lie strictly inside the unit interval.
pub fn pearson_responses_raw(sample: &PairedSample) -> Result<Vec<f64>> {
    sample
        .u
        .iter()
        .zip(&sample.v)
        .map(|(&u, &v)| Ok(std_normal_quantile(u)? * std_normal_quantile(v)?))
        .collect()
}

pub(crate) fn responses_for(sample: &PairedSample, estimator: EstimatorKind) -> Vec<f64> {
    match estimator {
        EstimatorKind::Spearman => spearman_responses(sample),
        EstimatorKind::Pearson => pearson_responses(sample),
    }
}

/// `int_0^1 (u - 1/2)^2 phi(Phi^-(u)) du`, the Spearman-noise constant that
/// enters the leading covariance entries. Evaluated once by quadrature.
pub fn spearman_noise_integral() -> f64 {
    static V0: OnceLock<f64> = OnceLock::new();
    *V0.get_or_init(|| {
        integrate(
            |u| {
                if u <= 0.0 || u >= 1.0 {
                    return 0.0;
                }
                let z = std_normal_quantile(u).expect("interior u");
                (u - 0.5) * (u - 0.5) * std_normal_pdf(z)
            },
            0.0,
            1.0,
            &QuadratureSpec::tight(),
        )
        .expect("smooth integrand")
    })
}

/// Asymptotic covariance and scaling objects of the fitted family.
///
/// The 3x3 blocks are the power-family objects evaluated at the fitted
/// parameters (at `gamma = 1` for the linear family, and additionally
/// `beta = 0` for the constant family, where the third column of `delta_hat`
/// vanishes and `gamma` is unidentified). `scaling` is the rate diagonal of
/// the non-degenerate joint limit; `uniform_cov`, when `delta_hat` is
/// invertible, is the covariance of the uniformly `sqrt(n)/log n`-scaled
/// estimator (a degenerate limit: its first row and column vanish).
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticReport {
    pub family: Family,
    pub estimator: EstimatorKind,
    pub sigma: [[f64; 3]; 3],
    pub sigma0: [[f64; 3]; 3],
    pub delta_hat: [[f64; 3]; 3],
    pub scaling: [f64; 3],
    pub uniform_scaling: f64,
    pub uniform_cov: Option<[[f64; 3]; 3]>,
    /// Covariance of the transformed pair
    /// `(alpha + beta/2, alpha/2 + beta/3)` for the linear family.
    pub sigma_tilde: Option<[[f64; 2]; 2]>,
    pub tilde_scaling: Option<[f64; 2]>,
}

/// `Sigma` diagonal/off-diagonal entries for the Spearman route at
/// `(alpha, beta, gamma)`. `sigma_11` integrates `sqrt(m)` over `[0, 1]` and
/// is an error if the fitted `m` is negative anywhere there.
pub(crate) fn sigma_spearman(alpha: f64, beta: f64, gamma: f64) -> Result<[[f64; 3]; 3]> {
    let g = gamma;
    let s22 = 1.0 / (180.0 * (1.0 + 2.0 * g)) - 1.0 / (180.0 * (1.0 + g) * (1.0 + g));
    let s33 = 1.0 / (90.0 * (1.0 + 2.0 * g).powi(3)) - 1.0 / (180.0 * (1.0 + g).powi(4));
    let s23 = -1.0 / (180.0 * (1.0 + 2.0 * g).powi(2)) + 1.0 / (180.0 * (1.0 + g).powi(3));
    let m_at = |s: f64| alpha + beta * s.powf(g);
    for k in 0..=256 {
        let s = k as f64 / 256.0;
        if m_at(s) < 0.0 {
            return Err(Error::domain(format!(
                "sigma_11 undefined: fitted m({s:.4}) = {} is negative",
                m_at(s)
            )));
        }
    }
    let root_integral = integrate(
        |s| m_at(s).max(0.0).sqrt(),
        0.0,
        1.0,
        &QuadratureSpec::tight(),
    )?;
    let s11 = std::f64::consts::SQRT_2 * root_integral * spearman_noise_integral();
    Ok([[s11, 0.0, 0.0], [0.0, s22, s23], [0.0, s23, s33]])
}

/// `Sigma*` entries for the Pearson route at `(alpha, beta, gamma)`.
pub(crate) fn sigma_pearson(alpha: f64, beta: f64, gamma: f64) -> [[f64; 3]; 3] {
    let g = gamma;
    let s11 = 4.0 * (alpha + beta / (1.0 + g)).powi(2)
        + 2.0 * beta * beta * (1.0 / (1.0 + 2.0 * g) - 1.0 / ((1.0 + g) * (1.0 + g)));
    let s22 = 2.0 / (1.0 + 2.0 * g) - 2.0 / ((1.0 + g) * (1.0 + g));
    let s33 = 4.0 / (1.0 + 2.0 * g).powi(3) - 2.0 / (1.0 + g).powi(4);
    let s23 = -2.0 / (1.0 + 2.0 * g).powi(2) + 2.0 / (1.0 + g).powi(3);
    [[s11, 0.0, 0.0], [0.0, s22, s23], [0.0, s23, s33]]
}

/// `Delta` (or `Delta*`) evaluated at `(beta, gamma)`.
pub(crate) fn delta_matrix(beta: f64, gamma: f64, estimator: EstimatorKind) -> [[f64; 3]; 3] {
    let g = gamma;
    let scale = match estimator {
        // sqrt(3) / (6 pi)
        EstimatorKind::Spearman => 3.0f64.sqrt() / (6.0 * std::f64::consts::PI),
        // Delta* = 2 sqrt(3) pi Delta => scale 1
        EstimatorKind::Pearson => 1.0,
    };
    let d = [
        [1.0, 1.0 / (1.0 + g), -beta / (1.0 + g).powi(2)],
        [
            1.0 / (1.0 + g),
            1.0 / (1.0 + 2.0 * g),
            -beta / (1.0 + 2.0 * g).powi(2),
        ],
        [
            -1.0 / (1.0 + g).powi(2),
            -1.0 / (1.0 + 2.0 * g).powi(2),
            2.0 * beta / (1.0 + 2.0 * g).powi(3),
        ],
    ];
    d.map(|row| row.map(|v| scale * v))
}

/// Leading covariance entry of the linear-family contrast limit on the
/// Spearman route, with the `beta -> 0` limit
/// `sqrt(2 alpha) * V0` taken analytically.
pub(crate) fn sigma_tilde11_spearman(alpha: f64, beta: f64) -> Result<f64> {
    if alpha < 0.0 || alpha + beta < 0.0 {
        return Err(Error::domain(
            "sigma~_11 undefined: fitted linear m is negative on [0, 1]",
        ));
    }
    let v0 = spearman_noise_integral();
    if beta.abs() < 1e-9 * alpha.max(1.0) {
        return Ok(std::f64::consts::SQRT_2 * alpha.sqrt() * v0);
    }
    Ok(2.0 * std::f64::consts::SQRT_2 / (3.0 * beta)
        * ((alpha + beta).powf(1.5) - alpha.powf(1.5))
        * v0)
}

/// Evaluate the covariance/scaling report at a fit.
pub fn asymptotic_report(fit: &ParamFit) -> Result<AsymptoticReport> {
    if !fit.residual_norm.is_finite() {
        return Err(Error::domain("fit has non-finite residual"));
    }
    let (alpha, beta, gamma) = (fit.alpha, fit.beta, fit.gamma);
    let sigma = match fit.estimator {
        EstimatorKind::Spearman => sigma_spearman(alpha, beta, gamma)?,
        EstimatorKind::Pearson => sigma_pearson(alpha, beta, gamma),
    };
    let mut sigma0 = sigma;
    sigma0[0][0] = 0.0;
    let delta_hat = delta_matrix(beta, gamma, fit.estimator);
    let n = fit.n as f64;
    let log_n = n.ln();
    let scaling = match fit.estimator {
        EstimatorKind::Spearman => [
            n.sqrt() / log_n.powf(0.75),
            n.sqrt() / log_n,
            n.sqrt() / log_n,
        ],
        EstimatorKind::Pearson => [n.sqrt(), n.sqrt() / log_n, n.sqrt() / log_n],
    };
    let uniform_cov = linalg::invert3(&delta_hat).map(|inv| {
        let mut tmp = [[0.0; 3]; 3]; // inv * sigma0
        for r in 0..3 {
            for c in 0..3 {
                tmp[r][c] = (0..3).map(|k| inv[r][k] * sigma0[k][c]).sum();
            }
        }
        let mut out = [[0.0; 3]; 3]; // tmp * inv^T
        for r in 0..3 {
            for c in 0..3 {
                out[r][c] = (0..3).map(|k| tmp[r][k] * inv[c][k]).sum();
            }
        }
        out
    });
    let (sigma_tilde, tilde_scaling) = if fit.family == Family::Linear {
        match fit.estimator {
            EstimatorKind::Spearman => {
                let c = 12.0 * std::f64::consts::PI * std::f64::consts::PI;
                let st = [
                    [c * sigma_tilde11_spearman(alpha, beta)?, 0.0],
                    [0.0, c / 2160.0],
                ];
                (
                    Some(st),
                    Some([n.sqrt() / log_n.powf(0.75), n.sqrt() / log_n]),
                )
            }
            EstimatorKind::Pearson => {
                let st = [
                    [
                        4.0 * alpha * alpha + 4.0 * alpha * beta + 7.0 * beta * beta / 6.0,
                        0.0,
                    ],
                    [0.0, 1.0 / 6.0],
                ];
                (Some(st), Some([n.sqrt(), n.sqrt() / log_n]))
            }
        }
    } else {
        (None, None)
    };
    Ok(AsymptoticReport {
        family: fit.family,
        estimator: fit.estimator,
        sigma,
        sigma0,
        delta_hat,
        scaling,
        uniform_scaling: n.sqrt() / log_n,
        uniform_cov,
        sigma_tilde,
        tilde_scaling,
    })
}

/// Score targets and weights shared by the solvers and tests.
pub(crate) struct ScoreSystem {
    pub t: Vec<f64>,
    pub log_t: Vec<f64>,
    pub log_n: f64,
    pub estimator: EstimatorKind,
}

impl ScoreSystem {
    pub fn new(n: usize, estimator: EstimatorKind) -> Self {
        let t: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let log_t = t.iter().map(|&x| x.ln()).collect();
        ScoreSystem {
            t,
            log_t,
            log_n: (n as f64).ln(),
            estimator,
        }
    }

    /// Moment target for a given `rho`. For the Spearman route this is the
    /// arcsin map, defined only for `|rho| <= 2`.
    #[inline]
    pub fn target(&self, rho: f64) -> f64 {
        match self.estimator {
            EstimatorKind::Spearman => spearman_map(rho),
            EstimatorKind::Pearson => rho,
        }
    }

    /// Derivative of the target with respect to `rho`.
    #[inline]
    pub fn target_drho(&self, rho: f64) -> f64 {
        match self.estimator {
            EstimatorKind::Spearman => {
                1.0 / (4.0 * std::f64::consts::PI * (1.0 - rho * rho / 4.0).max(1e-14).sqrt())
            }
            EstimatorKind::Pearson => 1.0,
        }
    }
}

/// Small dense linear solves used by the fitters and tests.
pub(crate) mod linalg {
    /// Solve a 2x2 system; `None` when the pivot collapses.
    pub fn solve2(a: &[[f64; 2]; 2], b: &[f64; 2]) -> Option<[f64; 2]> {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let scale = a.iter().flatten().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        if !det.is_finite() || det.abs() <= 1e-14 * scale * scale {
            return None;
        }
        Some([
            (b[0] * a[1][1] - b[1] * a[0][1]) / det,
            (a[0][0] * b[1] - a[1][0] * b[0]) / det,
        ])
    }

    /// Solve a 3x3 system by Gaussian elimination with partial pivoting.
    pub fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
        let mut m = *a;
        let mut rhs = *b;
        for col in 0..3 {
            let (piv, maxval) = (col..3)
                .map(|r| (r, m[r][col].abs()))
                .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                .unwrap();
            if !maxval.is_finite() || maxval < 1e-300 {
                return None;
            }
            m.swap(col, piv);
            rhs.swap(col, piv);
            for r in col + 1..3 {
                let f = m[r][col] / m[col][col];
                for c in col..3 {
                    m[r][c] -= f * m[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
        let mut x = [0.0; 3];
        for r in (0..3).rev() {
            let mut s = rhs[r];
            for c in r + 1..3 {
                s -= m[r][c] * x[c];
            }
            if m[r][r] == 0.0 || !m[r][r].is_finite() {
                return None;
            }
            x[r] = s / m[r][r];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(x)
    }

    /// Inverse of a 3x3 matrix via cofactors; `None` when near-singular.
    pub fn invert3(a: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        let scale = a.iter().flatten().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        if !det.is_finite() || det.abs() <= 1e-12 * scale * scale * scale {
            return None;
        }
        let cof = |r1: usize, c1: usize, r2: usize, c2: usize| {
            a[r1][c1] * a[r2][c2] - a[r1][c2] * a[r2][c1]
        };
        let inv = [
            [
                cof(1, 1, 2, 2) / det,
                -cof(0, 1, 2, 2) / det,
                cof(0, 1, 1, 2) / det,
            ],
            [
                -cof(1, 0, 2, 2) / det,
                cof(0, 0, 2, 2) / det,
                -cof(0, 0, 1, 2) / det,
            ],
            [
                cof(1, 0, 2, 1) / det,
                -cof(0, 0, 2, 1) / det,
                cof(0, 0, 1, 1) / det,
            ],
        ];
        Some(inv)
    }
}
