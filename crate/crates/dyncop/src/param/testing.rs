//! Hypothesis tests built on the score-equation limits: the joint
//! Hotelling-type test of a full parameter vector and the constancy test of
//! the linear drift.

use super::linalg::solve3;
use super::{fit_linear, AsymptoticReport, EstimatorKind, ParamFit, ScoreSystem};
use crate::copula::PairedSample;
use crate::math::{chi_square3_cdf, std_normal_cdf};
use crate::param::responses_for;
use crate::{Error, Result};

/// Outcome of a hypothesis test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
    pub null_description: String,
}

/// Hotelling T² test of `(alpha, beta, gamma) = theta0` in the power family.
///
/// The statistic is the classical Hotelling quadratic form of the scaled
/// score vector at `theta0` (the vector whose joint normal limit the theory
/// establishes), studentized by the sample covariance of the centered
/// per-observation score contributions; the reference distribution is
/// chi-square with three degrees of freedom. When the score system is solved
/// exactly at `theta0`, the statistic is zero and the p-value one.
pub fn hotelling_test(
    sample: &PairedSample,
    estimator: EstimatorKind,
    theta0: (f64, f64, f64),
) -> Result<TestResult> {
    let n = sample.len();
    if n < 10 {
        return Err(Error::domain("hotelling test needs n >= 10"));
    }
    let (alpha0, beta0, gamma0) = theta0;
    if !(gamma0 > 0.0) {
        return Err(Error::domain("null gamma must be positive"));
    }
    let z = responses_for(sample, estimator);
    let sys = ScoreSystem::new(n, estimator);
    let l = sys.log_n;
    let nf = n as f64;
    // per-observation score contributions g_{k,i} = w_k(t_i) res_i(theta0)
    let mut g = vec![[0.0f64; 3]; n];
    for (i, (&zi, &lt)) in z.iter().zip(&sys.log_t).enumerate() {
        let a = (gamma0 * lt).exp();
        let rho = 1.0 - (alpha0 + beta0 * a) / l;
        if estimator == EstimatorKind::Spearman && rho.abs() > 2.0 {
            return Err(Error::domain(format!(
                "null parameters put rho_{} = {rho} outside the arcsin domain",
                i + 1
            )));
        }
        let res = zi - sys.target(rho);
        g[i] = [res, res * a, res * a * lt];
    }
    let rates = match estimator {
        EstimatorKind::Spearman => [l.powf(0.25) / nf.sqrt(), 1.0 / nf.sqrt(), 1.0 / nf.sqrt()],
        EstimatorKind::Pearson => [l / nf.sqrt(), 1.0 / nf.sqrt(), 1.0 / nf.sqrt()],
    };
    let mut sums = [0.0f64; 3];
    for gi in &g {
        for k in 0..3 {
            sums[k] += gi[k];
        }
    }
    let xi = [sums[0] * rates[0], sums[1] * rates[1], sums[2] * rates[2]];
    let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if xi.iter().all(|v| v.abs() <= 1e-12 * scale.max(1e-300) * nf) {
        // score system solved exactly at the null
        return Ok(TestResult {
            statistic: 0.0,
            dof: 3,
            p_value: 1.0,
            null_description: format!(
                "(alpha, beta, gamma) = ({alpha0}, {beta0}, {gamma0}), {estimator} route"
            ),
        });
    }
    let means = [sums[0] / nf, sums[1] / nf, sums[2] / nf];
    let mut cov = [[0.0f64; 3]; 3];
    for gi in &g {
        let c = [gi[0] - means[0], gi[1] - means[1], gi[2] - means[2]];
        for r in 0..3 {
            for s in r..3 {
                cov[r][s] += c[r] * c[s];
            }
        }
    }
    for r in 0..3 {
        for s in 0..r {
            cov[r][s] = cov[s][r];
        }
    }
    for r in 0..3 {
        for s in 0..3 {
            cov[r][s] *= rates[r] * rates[s];
        }
    }
    let y = solve3(&cov, &xi).ok_or_else(|| {
        Error::SingularSystem("empirical score covariance is singular".to_string())
    })?;
    let statistic = xi[0] * y[0] + xi[1] * y[1] + xi[2] * y[2];
    if !statistic.is_finite() || statistic < 0.0 {
        return Err(Error::SingularSystem(
            "hotelling quadratic form is not positive".to_string(),
        ));
    }
    Ok(TestResult {
        statistic,
        dof: 3,
        p_value: 1.0 - chi_square3_cdf(statistic),
        null_description: format!(
            "(alpha, beta, gamma) = ({alpha0}, {beta0}, {gamma0}), {estimator} route"
        ),
    })
}

/// The literal Wald-form quadratic
/// `(S Delta_hat (theta_hat - theta0))' Sigma^{-1} (...)` built from an
/// [`AsymptoticReport`]. Exposed for diagnostics; its finite-sample size is
/// far above nominal at desk-scale n because the plug-in covariance carries
/// `O(1/sqrt(log n))` errors, so [`hotelling_test`] carries the p-value.
pub fn hotelling_wald_statistic(
    fit: &ParamFit,
    report: &AsymptoticReport,
    theta0: (f64, f64, f64),
) -> Result<f64> {
    let d = [
        fit.alpha - theta0.0,
        fit.beta - theta0.1,
        fit.gamma - theta0.2,
    ];
    let mut v = [0.0f64; 3];
    for r in 0..3 {
        v[r] = report.scaling[r] * (0..3).map(|c| report.delta_hat[r][c] * d[c]).sum::<f64>();
    }
    let y = solve3(&report.sigma, &v)
        .ok_or_else(|| Error::SingularSystem("Sigma block not invertible".to_string()))?;
    let t = v[0] * y[0] + v[1] * y[1] + v[2] * y[2];
    if !t.is_finite() {
        return Err(Error::SingularSystem(
            "Wald statistic not finite".to_string(),
        ));
    }
    Ok(t)
}

/// Two-sided test of `beta = 0` in the linear family (i.e. constancy of the
/// drift, so the observations are identically distributed).
///
/// Under the null the contrast `(alpha/2 + beta/3) - (alpha + beta/2)/2 =
/// beta/12` is asymptotically centered normal at rate `sqrt(n)/log n` with
/// variance `12 pi^2 sigma~_22 = pi^2/180` (Spearman) or `sigma~*_22 = 1/6`
/// (Pearson); the statistic is the standardized contrast.
pub fn constancy_test(sample: &PairedSample, estimator: EstimatorKind) -> Result<TestResult> {
    let fit = fit_linear(sample, estimator)?;
    let n = fit.n as f64;
    let log_n = n.ln();
    let contrast = fit.beta / 12.0;
    let variance = match estimator {
        EstimatorKind::Spearman => 12.0 * std::f64::consts::PI * std::f64::consts::PI / 2160.0,
        EstimatorKind::Pearson => 1.0 / 6.0,
    };
    let z = (n.sqrt() / log_n) * contrast / variance.sqrt();
    Ok(TestResult {
        statistic: z,
        dof: 1,
        p_value: 2.0 * (1.0 - std_normal_cdf(z.abs())),
        null_description: format!("beta = 0 in m(s) = alpha + beta s, {estimator} route"),
    })
}
