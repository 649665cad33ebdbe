//! Limiting joint law of normalized componentwise maxima, the stable tail
//! dependence function and the tail coefficient, plus an empirical
//! convergence experiment.

use crate::copula::{build_schedule, sample_pair_with, CorrelationPath, RhoSchedule};
use crate::math::{integrate, std_normal_cdf, QuadratureSpec, RngStream};
use crate::{Error, Result};
use rayon::prelude::*;

/// Asymptotic regime of the triangular array.
///
/// The degenerate regimes are statements about sequences of paths
/// (`max m -> 0` resp. `min m -> infinity`), not properties of a fixed `m`,
/// so the regime is explicit input rather than inferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `max m(i/n) -> 0`: limit `exp(min(x, y))`.
    Comonotone,
    /// `min m(i/n) -> infinity`: limit `exp(x + y)`.
    Independent,
    /// `m` continuous and strictly positive on `[0, 1]`: the Hüsler-Reiss
    /// mixture limit `G(x, y)`.
    HuslerReissMixture,
}

/// Evaluator for the limit law of a correlation path under a regime.
#[derive(Debug, Clone)]
pub struct LimitLaw {
    pub path: CorrelationPath,
    pub regime: Regime,
    pub quad: QuadratureSpec,
}

impl LimitLaw {
    pub fn new(path: CorrelationPath, regime: Regime, quad: QuadratureSpec) -> Result<Self> {
        path.validate()?;
        if regime == Regime::HuslerReissMixture && !path.strictly_positive(512) {
            return Err(Error::domain(
                "Hüsler-Reiss mixture regime requires m strictly positive on [0, 1]",
            ));
        }
        Ok(LimitLaw { path, regime, quad })
    }

    fn check_negative(x: f64, y: f64) -> Result<()> {
        if !(x < 0.0 && y < 0.0) {
            return Err(Error::domain(format!(
                "limit law is defined for x < 0, y < 0; got ({x}, {y})"
            )));
        }
        Ok(())
    }

    /// `int_0^1 Phi(sqrt(m(s)) + c / (2 sqrt(m(s)))) ds` where `c = log(x/y)`.
    fn mixture_integral(&self, log_ratio: f64) -> Result<f64> {
        integrate(
            |s| {
                let r = self.path.m(s).max(0.0).sqrt();
                if log_ratio == 0.0 {
                    std_normal_cdf(r)
                } else if r == 0.0 {
                    // m(s) = 0 boundary: the argument diverges with the sign
                    // of log_ratio
                    if log_ratio > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    std_normal_cdf(r + log_ratio / (2.0 * r))
                }
            },
            0.0,
            1.0,
            &self.quad,
        )
    }

    /// Exponent `x A(log(x/y)) + y A(log(y/x))`, shared by the cdf and the
    /// tail dependence function.
    fn exponent(&self, x: f64, y: f64) -> Result<f64> {
        if x == y {
            // log(x/y) = 0 exactly; avoid the ratio entirely
            return Ok((x + y) * self.mixture_integral(0.0)?);
        }
        let lr = (x / y).ln();
        Ok(x * self.mixture_integral(lr)? + y * self.mixture_integral(-lr)?)
    }

    /// Limiting cdf of `(n(max F1(X_i) - 1), n(max F2(Y_i) - 1))` at `(x, y)`.
    pub fn limit_cdf(&self, x: f64, y: f64) -> Result<f64> {
        Self::check_negative(x, y)?;
        match self.regime {
            Regime::Comonotone => Ok(x.min(y).exp()),
            Regime::Independent => Ok((x + y).exp()),
            Regime::HuslerReissMixture => Ok(self.exponent(x, y)?.exp()),
        }
    }

    /// Stable tail dependence function `l(x, y) = lim t^{-1}(1 - G(tx, ty))`,
    /// homogeneous of degree one.
    pub fn tail_dependence_fn(&self, x: f64, y: f64) -> Result<f64> {
        Self::check_negative(x, y)?;
        match self.regime {
            Regime::Comonotone => Ok(-x.min(y)),
            Regime::Independent => Ok(-(x + y)),
            Regime::HuslerReissMixture => Ok(-self.exponent(x, y)?),
        }
    }

    /// Tail coefficient `lambda = l(-1, -1) = 2 int_0^1 Phi(sqrt(m(s))) ds`,
    /// ranging from 1 (complete tail dependence) to 2 (tail independence).
    pub fn tail_coefficient(&self) -> Result<f64> {
        match self.regime {
            Regime::Comonotone => Ok(1.0),
            Regime::Independent => Ok(2.0),
            Regime::HuslerReissMixture => Ok(2.0 * self.mixture_integral(0.0)?),
        }
    }
}

/// Monte-Carlo comparison of the finite-n maxima law against the limit.
#[derive(Debug, Clone)]
pub struct MaximaExperiment {
    pub path: CorrelationPath,
    pub n: usize,
    pub replications: usize,
    /// Evaluation points, all strictly negative in both coordinates.
    pub grid: Vec<(f64, f64)>,
    pub seed: u64,
}

/// One row of the empirical-vs-limit table.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximaRow {
    pub x: f64,
    pub y: f64,
    pub empirical: f64,
    pub limit: f64,
    pub gap: f64,
}

/// Normalized componentwise maxima `(n(max u - 1), n(max v - 1))` of one
/// sampled array.
fn sample_maxima(schedule: &RhoSchedule, stream: RngStream) -> (f64, f64) {
    let mut rng = stream.rng();
    let mut max_u = f64::NEG_INFINITY;
    let mut max_v = f64::NEG_INFINITY;
    for &rho in &schedule.rho {
        let (u, v) = sample_pair_with(rho, &mut rng);
        max_u = max_u.max(u);
        max_v = max_v.max(v);
    }
    let n = schedule.n as f64;
    (n * (max_u - 1.0), n * (max_v - 1.0))
}

/// Sample the experiment and report, per grid point, the empirical joint cdf
/// of the normalized maxima alongside the limit and their absolute gap.
///
/// Replications run in parallel on one [`RngStream`] each; the reduction is
/// a count, so results are independent of scheduling.
pub fn empirical_maxima_cdf(exp: &MaximaExperiment, law: &LimitLaw) -> Result<Vec<MaximaRow>> {
    if exp.replications < 1 {
        return Err(Error::domain("replications must be >= 1"));
    }
    for &(x, y) in &exp.grid {
        LimitLaw::check_negative(x, y)?;
    }
    let schedule = build_schedule(&exp.path, exp.n)?;
    let counts: Vec<u64> = (0..exp.replications as u64)
        .into_par_iter()
        .map(|rep| sample_maxima(&schedule, RngStream::replication(exp.seed, rep)))
        .fold(
            || vec![0u64; exp.grid.len()],
            |mut acc, (mx, my)| {
                for (c, &(x, y)) in acc.iter_mut().zip(&exp.grid) {
                    if mx <= x && my <= y {
                        *c += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; exp.grid.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let mut rows = Vec::with_capacity(exp.grid.len());
    for (k, &(x, y)) in exp.grid.iter().enumerate() {
        let empirical = counts[k] as f64 / exp.replications as f64;
        let limit = law.limit_cdf(x, y)?;
        rows.push(MaximaRow {
            x,
            y,
            empirical,
            limit,
            gap: (empirical - limit).abs(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
// frozen oracle constants are kept digit-for-digit
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn law_const(m: f64) -> LimitLaw {
        LimitLaw::new(
            CorrelationPath::Constant(m),
            Regime::HuslerReissMixture,
            QuadratureSpec::tight(),
        )
        .unwrap()
    }

    #[test]
    fn degenerate_regimes() {
        let como = LimitLaw::new(
            CorrelationPath::Constant(0.0),
            Regime::Comonotone,
            QuadratureSpec::default(),
        )
        .unwrap();
        assert!((como.limit_cdf(-1.0, -2.0).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        let ind = LimitLaw::new(
            CorrelationPath::Constant(1.0),
            Regime::Independent,
            QuadratureSpec::default(),
        )
        .unwrap();
        assert!((ind.limit_cdf(-1.0, -2.0).unwrap() - (-3.0f64).exp()).abs() < 1e-15);
        assert!(como.limit_cdf(0.0, -1.0).is_err());
        assert!(ind.limit_cdf(-1.0, 0.5).is_err());
    }

    #[test]
    fn mixture_diagonal_value() {
        // G(-1,-1) = exp(-2 Phi(1)) for m = 1; frozen erf oracle
        let law = law_const(1.0);
        let g = law.limit_cdf(-1.0, -1.0).unwrap();
        assert!((g - 0.18587339814818440).abs() < 1e-10, "got {g}");
    }

    #[test]
    fn mixture_requires_positive_m() {
        let r = LimitLaw::new(
            CorrelationPath::Tabulated(vec![(0.0, 0.0), (1.0, 1.0)]),
            Regime::HuslerReissMixture,
            QuadratureSpec::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn tail_dependence_reference_and_homogeneity() {
        let law = law_const(1.0);
        // frozen value of -x Phi(1 + ln(x/y)/2) - y Phi(1 + ln(y/x)/2) at (-1,-2)
        let l = law.tail_dependence_fn(-1.0, -2.0).unwrap();
        assert!((l - 2.5651416866474607).abs() < 1e-9, "got {l}");
        for t in [0.1, 1.0, 10.0] {
            let lt = law.tail_dependence_fn(-t, -2.0 * t).unwrap();
            assert!(
                (lt - t * l).abs() <= 1e-9 * (t * l).abs().max(1.0),
                "homogeneity at t={t}"
            );
        }
        // dependence-ordering bounds at Constant(4)
        let law4 = law_const(4.0);
        let l4 = law4.tail_dependence_fn(-1.0, -2.0).unwrap();
        assert!((2.0 - 1e-12..=3.0 + 1e-12).contains(&l4));
    }

    #[test]
    fn tail_coefficient_closed_form() {
        // 2 Phi(sqrt(m)); frozen erf oracle values
        for (m, want) in [
            (0.25, 1.38292492254802621),
            (1.0, 1.6826894921370859),
            (4.0, 1.95449973610364159),
            (10.0, 1.99843459774199745),
        ] {
            let got = law_const(m).tail_coefficient().unwrap();
            assert!((got - want).abs() < 1e-10, "m={m}: {got} vs {want}");
        }
        // lambda = l(-1,-1) within 2x quad tolerance
        let law = law_const(1.0);
        let lam = law.tail_coefficient().unwrap();
        let l11 = law.tail_dependence_fn(-1.0, -1.0).unwrap();
        assert!((lam - l11).abs() <= 2.0 * law.quad.abs_tol);
    }

    #[test]
    fn cdf_ordering_and_symmetry() {
        let pts = [(-1.0, -2.0), (-0.5, -0.5), (-3.0, -0.2)];
        for m in [0.25, 1.0, 4.0] {
            let law = law_const(m);
            for &(x, y) in &pts {
                let g = law.limit_cdf(x, y).unwrap();
                let lo = (x + y).exp();
                let hi = x.min(y).exp();
                assert!(g > lo && g < hi, "ordering violated at m={m}, ({x},{y})");
                let gs = law.limit_cdf(y, x).unwrap();
                assert!((g - gs).abs() < 1e-12, "symmetry at m={m}, ({x},{y})");
            }
        }
    }

    #[test]
    fn constant_drift_closed_form() {
        // Constant(lambda0) admits a closed form with the integral dropped:
        // exp(Phi(sqrt(l0) + log(x/y)/(2 sqrt(l0))) x + ...) pointwise.
        let l0: f64 = 0.7;
        let law = law_const(l0);
        for &(x, y) in &[(-1.0, -2.0), (-0.3, -0.9), (-2.5, -2.5)] {
            let s = l0.sqrt();
            let expected = if x == y {
                ((x + y) * std_normal_cdf(s)).exp()
            } else {
                (x * std_normal_cdf(s + (x / y).ln() / (2.0 * s))
                    + y * std_normal_cdf(s + (y / x).ln() / (2.0 * s)))
                .exp()
            };
            let got = law.limit_cdf(x, y).unwrap();
            assert!((got - expected).abs() <= 2.0 * law.quad.abs_tol);
        }
    }

    #[test]
    fn empirical_comonotone_and_single_rep() {
        let exp = MaximaExperiment {
            path: CorrelationPath::Constant(0.0),
            n: 50,
            replications: 400,
            grid: vec![(-1.0, -0.25), (-1.0, -1.0), (-0.25, -0.25)],
            seed: 7,
        };
        let law = LimitLaw::new(
            CorrelationPath::Constant(0.0),
            Regime::Comonotone,
            QuadratureSpec::default(),
        )
        .unwrap();
        let rows = empirical_maxima_cdf(&exp, &law).unwrap();
        // comonotone arrays have max u == max v per replication, so the
        // joint empirical cdf at (x, y) is exactly the one at
        // (min(x,y), min(x,y))
        assert_eq!(rows[0].empirical, rows[1].empirical);
        for r in &rows {
            assert!(r.empirical >= 0.0 && r.empirical <= 1.0);
            assert!((r.gap - (r.empirical - r.limit).abs()).abs() < 1e-15);
        }

        let one = MaximaExperiment {
            replications: 1,
            ..exp
        };
        let rows = empirical_maxima_cdf(&one, &law).unwrap();
        for r in &rows {
            assert!(r.empirical == 0.0 || r.empirical == 1.0);
        }
    }

    #[test]
    fn empirical_is_deterministic_across_thread_counts() {
        let exp = MaximaExperiment {
            path: CorrelationPath::Constant(1.0),
            n: 200,
            replications: 500,
            grid: vec![(-0.5, -0.5)],
            seed: 3,
        };
        let law = law_const(1.0);
        let a = empirical_maxima_cdf(&exp, &law).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| empirical_maxima_cdf(&exp, &law).unwrap());
        assert_eq!(a, b);
    }
}
