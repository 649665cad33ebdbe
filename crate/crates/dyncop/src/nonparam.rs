//! Local-linear estimation of the drift function: kernel abstraction,
//! the smoother along both response routes, and bandwidth rules.

use crate::copula::PairedSample;
use crate::math::{integrate, QuadratureSpec};
use crate::param::{pearson_responses, spearman_responses, EstimatorKind, ScoreSystem};
use crate::{Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

/// Symmetric kernel on `[-1, 1]` with precomputed moments.
#[derive(Clone)]
pub struct Kernel {
    id: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `int t^2 k(t) dt`
    second_moment: f64,
    /// `int k(t)^2 dt`
    l2_norm: f64,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("id", &self.id)
            .field("second_moment", &self.second_moment)
            .field("l2_norm", &self.l2_norm)
            .finish()
    }
}

impl Kernel {
    /// `k(t) = 3/4 (1 - t^2)` on `[-1, 1]`; moments are exact rationals.
    pub fn epanechnikov() -> Self {
        Kernel {
            id: "epanechnikov".to_string(),
            eval: Arc::new(|t| {
                if t.abs() <= 1.0 {
                    0.75 * (1.0 - t * t)
                } else {
                    0.0
                }
            }),
            second_moment: 0.2,
            l2_norm: 0.6,
        }
    }

    /// A user kernel; must integrate to one, be symmetric, and vanish
    /// outside `[-1, 1]`. Moments are computed by quadrature.
    pub fn custom(
        id: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let eval = Arc::new(eval);
        let spec = QuadratureSpec::tight();
        let mass = integrate(|t| eval(t), -1.0, 1.0, &spec)?;
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "kernel mass {mass} differs from 1 by more than 1e-12"
            )));
        }
        for t in [0.13, 0.5, 0.77, 0.99] {
            if (eval(t) - eval(-t)).abs() > 1e-12 {
                return Err(Error::domain("kernel must be symmetric"));
            }
            if eval(t) < 0.0 {
                return Err(Error::domain("kernel must be nonnegative"));
            }
        }
        if eval(1.0 + 1e-9) != 0.0 || eval(-1.0 - 1e-9) != 0.0 {
            return Err(Error::domain("kernel must vanish outside [-1, 1]"));
        }
        let second_moment = integrate(|t| t * t * eval(t), -1.0, 1.0, &spec)?;
        let l2_norm = integrate(|t| eval(t) * eval(t), -1.0, 1.0, &spec)?;
        Ok(Kernel {
            id: id.into(),
            eval,
            second_moment,
            l2_norm,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    #[inline]
    pub fn evaluate(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm
    }
}

fn check_window(s: f64, n: usize, h: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("s must lie in (0, 1), got {s}")));
    }
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::domain(format!(
            "bandwidth must lie in (0, 1/2), got {h}"
        )));
    }
    if (n as f64) * h < 5.0 {
        return Err(Error::domain(format!(
            "window too narrow: n h = {} < 5",
            n as f64 * h
        )));
    }
    Ok(())
}

/// Design indices `j` with `j/n` inside `[s - h, s + h]`; empty when the
/// window misses the design entirely.
fn window_range(s: f64, n: usize, h: f64) -> std::ops::RangeInclusive<usize> {
    let lo = ((s - h) * n as f64).ceil().max(1.0) as usize;
    let hi = ((s + h) * n as f64).floor().min(n as f64).max(0.0) as usize;
    lo..=hi
}

struct WindowSums {
    s1: f64,
    s2: f64,
}

fn window_sums(s: f64, n: usize, h: f64, k: &Kernel) -> Result<WindowSums> {
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut support = 0usize;
    for j in window_range(s, n, h) {
        let d = s - j as f64 / n as f64;
        let kv = k.evaluate(d / h);
        if kv > 0.0 {
            support += 1;
        }
        s1 += kv * d;
        s2 += kv * d * d;
    }
    if support < 2 {
        return Err(Error::DegenerateWindow {
            s,
            message: format!("{support} design points with positive weight in [s-h, s+h]"),
        });
    }
    Ok(WindowSums { s1, s2 })
}

/// Local-linear weights `w_j = k((s - j/n)/h) [s_{n,2} - (s - j/n) s_{n,1}]`
/// over the full design `j = 1..n` (zero outside the kernel window).
///
/// Satisfies `sum_j w_j (s - j/n) = 0` identically and `sum_j w_j > 0`.
pub fn local_linear_weights(s: f64, n: usize, h: f64, k: &Kernel) -> Result<Vec<f64>> {
    check_window(s, n, h)?;
    let sums = window_sums(s, n, h, k)?;
    let mut w = vec![0.0; n];
    for j in window_range(s, n, h) {
        let d = s - j as f64 / n as f64;
        let kv = k.evaluate(d / h);
        w[j - 1] = kv * (sums.s2 - d * sums.s1);
    }
    Ok(w)
}

/// Weighted local-linear average of `responses` at `s`.
fn smooth_at(s: f64, n: usize, h: f64, k: &Kernel, responses: &[f64]) -> Result<f64> {
    check_window(s, n, h)?;
    let sums = window_sums(s, n, h, k)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in window_range(s, n, h) {
        let d = s - j as f64 / n as f64;
        let kv = k.evaluate(d / h);
        let w = kv * (sums.s2 - d * sums.s1);
        num += w * responses[j - 1];
        den += w;
    }
    if !(den > 0.0) {
        return Err(Error::DegenerateWindow {
            s,
            message: "weights sum to zero".to_string(),
        });
    }
    Ok(num / den)
}

/// Local-linear estimate of `Q(s) = E[(U - 1/2)(V - 1/2)]` on a grid.
pub fn fit_q_curve(sample: &PairedSample, grid: &[f64], h: f64, k: &Kernel) -> Result<Vec<f64>> {
    let z = spearman_responses(sample);
    grid.iter()
        .map(|&s| smooth_at(s, sample.len(), h, k, &z))
        .collect()
}

/// Out-of-range diagnostic for a curve point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointFlag {
    Ok,
    /// Spearman back-transform undefined: `Q_hat` outside `(-1/12, 1/12]`.
    OutOfRange,
}

/// Nonparametric drift estimate on a grid.
#[derive(Debug, Clone)]
pub struct CurveFit {
    pub grid: Vec<f64>,
    /// `m_hat(s)` per grid point; `None` where the back-transform is
    /// undefined (flagged, never clamped).
    pub values: Vec<Option<f64>>,
    pub flags: Vec<PointFlag>,
    pub bandwidth: f64,
    pub kernel_id: String,
    pub route: EstimatorKind,
    pub n: usize,
}

/// Local-linear drift estimate along the chosen route: the Spearman route
/// back-transforms the smoothed `Q_hat(s)` through `(1 - 2 sin(2 pi q)) log n`,
/// the Pearson route smooths `Z* - 1` and rescales by `-log n`.
pub fn fit_m_curve(
    sample: &PairedSample,
    grid: &[f64],
    h: f64,
    k: &Kernel,
    route: EstimatorKind,
) -> Result<CurveFit> {
    let n = sample.len();
    let log_n = (n as f64).ln();
    let mut values = Vec::with_capacity(grid.len());
    let mut flags = Vec::with_capacity(grid.len());
    match route {
        EstimatorKind::Spearman => {
            let q = fit_q_curve(sample, grid, h, k)?;
            for qs in q {
                if qs > 1.0 / 12.0 || qs <= -1.0 / 12.0 {
                    values.push(None);
                    flags.push(PointFlag::OutOfRange);
                } else {
                    values.push(Some((1.0 - 2.0 * (2.0 * PI * qs).sin()) * log_n));
                    flags.push(PointFlag::Ok);
                }
            }
        }
        EstimatorKind::Pearson => {
            let resp: Vec<f64> = pearson_responses(sample)
                .into_iter()
                .map(|z| z - 1.0)
                .collect();
            for &s in grid {
                let sm = smooth_at(s, n, h, k, &resp)?;
                values.push(Some(-sm * log_n));
                flags.push(PointFlag::Ok);
            }
        }
    }
    Ok(CurveFit {
        grid: grid.to_vec(),
        values,
        flags,
        bandwidth: h,
        kernel_id: k.id().to_string(),
        route,
        n,
    })
}

/// Mean-squared-error-optimal bandwidth for the chosen route; undefined at
/// `m'' = 0` (the caller falls back to the practical rule).
pub fn optimal_bandwidth(
    m_second_deriv: f64,
    n: usize,
    k: &Kernel,
    route: EstimatorKind,
) -> Result<f64> {
    if n < 10 {
        return Err(Error::domain("optimal bandwidth needs n >= 10"));
    }
    if m_second_deriv == 0.0 {
        return Err(Error::domain(
            "optimal bandwidth unbounded at m'' = 0; use the practical rule",
        ));
    }
    let numerator = match route {
        EstimatorKind::Spearman => PI * PI * k.l2_norm() / 15.0,
        EstimatorKind::Pearson => 2.0 * k.l2_norm(),
    };
    let denom = (m_second_deriv * k.second_moment()).powi(2);
    let nf = n as f64;
    Ok((nf.ln().powi(2) / nf).powf(0.2) * (numerator / denom).powf(0.2))
}

/// The field rule `h = d (log^2 n / n)^{1/5}`.
pub fn practical_bandwidth(n: usize, d: f64) -> f64 {
    let nf = n as f64;
    d * (nf.ln().powi(2) / nf).powf(0.2)
}

/// Bias-scale constant `lambda = h^2 sqrt(nh) / log n` at finite `(n, h)`.
pub fn lambda_from(n: usize, h: f64) -> f64 {
    let nf = n as f64;
    h * h * (nf * h).sqrt() / nf.ln()
}

/// Asymptotic `(bias, variance)` of `(sqrt(nh)/log n)(m_hat(s) - m(s))`:
/// bias `lambda m''(s) int t^2 k / 2` for both routes, variance
/// `(pi^2/15) int k^2` (Spearman) or `2 int k^2` (Pearson).
pub fn smoother_limit_params(
    m_second_deriv: f64,
    lambda_limit: f64,
    k: &Kernel,
    route: EstimatorKind,
) -> (f64, f64) {
    let bias = 0.5 * lambda_limit * m_second_deriv * k.second_moment();
    let variance = match route {
        EstimatorKind::Spearman => PI * PI / 15.0 * k.l2_norm(),
        EstimatorKind::Pearson => 2.0 * k.l2_norm(),
    };
    (bias, variance)
}

/// Pilot estimate of `m''(s)` (constant in `s`): extend the Spearman linear
/// score fit with an `s^2` term and return twice the quadratic coefficient.
pub fn pilot_m_second_deriv(sample: &PairedSample) -> Result<f64> {
    let n = sample.len();
    if n < 6 {
        return Err(Error::domain("pilot fit needs n >= 6"));
    }
    let z = spearman_responses(sample);
    let sys = ScoreSystem::new(n, EstimatorKind::Spearman);
    let l = sys.log_n;
    let basis = |t: f64| [1.0, t, t * t];
    // transform-based least squares start
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for (&zi, &t) in z.iter().zip(&sys.t) {
        let y = (1.0 - 2.0 * (2.0 * PI * zi).sin()) * l;
        let b = basis(t);
        for r in 0..3 {
            aty[r] += b[r] * y;
            for c in 0..3 {
                ata[r][c] += b[r] * b[c];
            }
        }
    }
    let mut theta = crate::param::linalg::solve3(&ata, &aty)
        .ok_or_else(|| Error::SingularSystem("pilot design".to_string()))?;
    let score = |th: &[f64; 3]| -> Option<([f64; 3], Vec<f64>)> {
        let mut f = [0.0; 3];
        let mut rho = Vec::with_capacity(n);
        for (&zi, &t) in z.iter().zip(&sys.t) {
            let b = basis(t);
            let m = th[0] + th[1] * b[1] + th[2] * b[2];
            let r = 1.0 - m / l;
            if r.abs() >= 2.0 - 1e-12 {
                return None;
            }
            let res = zi - sys.target(r);
            for (k, bk) in b.iter().enumerate() {
                f[k] += res * bk;
            }
            rho.push(r);
        }
        Some((f, rho))
    };
    let mut state = score(&theta);
    if state.is_none() {
        // shrink toward the neutral constant drift until valid
        let base = [l / 2.0, 0.0, 0.0];
        let mut lam = 0.5;
        for _ in 0..60 {
            let cand = [
                base[0] + lam * (theta[0] - base[0]),
                lam * theta[1],
                lam * theta[2],
            ];
            if let Some(s) = score(&cand) {
                theta = cand;
                state = Some(s);
                break;
            }
            lam *= 0.5;
        }
    }
    let (mut f, mut rho) = state.ok_or_else(|| {
        Error::SingularSystem("pilot start outside the arcsin domain".to_string())
    })?;
    for _ in 0..100 {
        let maxf = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if maxf / n as f64 <= 1e-12 {
            break;
        }
        let mut j = [[0.0f64; 3]; 3];
        for (&r, &t) in rho.iter().zip(&sys.t) {
            let b = basis(t);
            let d = sys.target_drho(r) / l;
            for row in 0..3 {
                for col in 0..3 {
                    j[row][col] += d * b[col] * b[row];
                }
            }
        }
        let step = crate::param::linalg::solve3(&j, &f)
            .ok_or_else(|| Error::SingularSystem("pilot jacobian".to_string()))?;
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = [
                theta[0] - lam * step[0],
                theta[1] - lam * step[1],
                theta[2] - lam * step[2],
            ];
            if let Some((fc, rc)) = score(&cand) {
                let c_max = fc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if c_max <= maxf || lam < 1e-9 {
                    theta = cand;
                    f = fc;
                    rho = rc;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(2.0 * theta[2])
}
