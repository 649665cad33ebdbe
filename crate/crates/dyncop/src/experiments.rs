//! Deterministic experiment drivers shared by the CLI and the acceptance
//! suite: simulation, fitting, limit evaluation, Monte-Carlo table
//! replication, and the CSV dialect (comma-separated, `.` decimal, UTF-8,
//! mandatory header row; `#`-prefixed metadata lines precede the header).

use crate::copula::{build_schedule, sample_array, CorrelationPath, PairedSample};
use crate::limit::{empirical_maxima_cdf, LimitLaw, MaximaExperiment};
use crate::math::RngStream;
use crate::nonparam::{fit_m_curve, CurveFit, Kernel, PointFlag};
use crate::param::{
    asymptotic_report, fit_constant, fit_linear, fit_power, AsymptoticReport, EstimatorKind,
    Family, FitConfig, ParamFit,
};
use crate::{Error, Result};
use rayon::prelude::*;
use std::fmt::Write as _;

/// Replication stream layout: one stream per (cell, replication) pair so
/// parallel cells and replications never share randomness.
fn cell_stream(seed: u64, cell: u32, rep: u64) -> RngStream {
    RngStream::new(seed, ((cell as u64) << 32) | rep)
}

fn push_f64(out: &mut String, v: f64) {
    // shortest round-trip decimal; deterministic for fixed bits
    write!(out, "{v}").expect("string write");
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Human-readable tag of a path for CSV metadata.
pub fn describe_path(path: &CorrelationPath) -> String {
    match path {
        CorrelationPath::Constant(a) => format!("const(alpha={a})"),
        CorrelationPath::Linear { alpha, beta } => format!("linear(alpha={alpha},beta={beta})"),
        CorrelationPath::Power { alpha, beta, gamma } => {
            format!("power(alpha={alpha},beta={beta},gamma={gamma})")
        }
        CorrelationPath::Tabulated(knots) => format!("table({} knots)", knots.len()),
    }
}

/// Sample one array and serialize it: metadata lines, then `i,u,v` rows.
pub fn run_simulate(path: &CorrelationPath, n: usize, seed: u64) -> Result<String> {
    path.validate()?;
    let schedule = build_schedule(path, n)?;
    let sample = sample_array(&schedule, RngStream::new(seed, 0));
    let mut out = String::new();
    writeln!(out, "# path={}", describe_path(path)).unwrap();
    writeln!(out, "# n={n}").unwrap();
    writeln!(out, "# seed={seed}").unwrap();
    out.push_str("i,u,v\n");
    for i in 0..n {
        write!(out, "{},", i + 1).unwrap();
        push_f64(&mut out, sample.u[i]);
        out.push(',');
        push_f64(&mut out, sample.v[i]);
        out.push('\n');
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// CSV input
// ---------------------------------------------------------------------------

/// Parse a two-column sample from CSV text. Accepts column pairs named
/// `u,v` or `x,y` (case-insensitive; extra columns ignored); `#` lines are
/// metadata. Ranks are computed downstream, so the scale is irrelevant.
pub fn read_sample_csv(text: &str) -> Result<PairedSample> {
    let mut header: Option<(usize, usize)> = None;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match header {
            None => {
                let lower: Vec<String> = fields.iter().map(|f| f.to_lowercase()).collect();
                let find = |name: &str| lower.iter().position(|f| f == name);
                let pair = match (find("u"), find("v"), find("x"), find("y")) {
                    (Some(a), Some(b), _, _) => (a, b),
                    (_, _, Some(a), Some(b)) => (a, b),
                    _ => {
                        return Err(Error::Csv {
                            line: lineno + 1,
                            message: format!(
                                "header must contain columns u,v or x,y; got '{line}'"
                            ),
                        })
                    }
                };
                header = Some(pair);
            }
            Some((cu, cv)) => {
                let get = |c: usize| -> Result<f64> {
                    fields
                        .get(c)
                        .ok_or_else(|| Error::Csv {
                            line: lineno + 1,
                            message: format!("missing column {}", c + 1),
                        })?
                        .parse::<f64>()
                        .map_err(|e| Error::Csv {
                            line: lineno + 1,
                            message: format!("bad number: {e}"),
                        })
                };
                xs.push(get(cu)?);
                ys.push(get(cv)?);
            }
        }
    }
    if header.is_none() {
        return Err(Error::Csv {
            line: 0,
            message: "no header row found".to_string(),
        });
    }
    PairedSample::from_xy(xs, ys)
}

// ---------------------------------------------------------------------------
// parametric fit driver
// ---------------------------------------------------------------------------

/// Which tests to attach to a parametric fit report.
#[derive(Debug, Clone, Default)]
pub struct TestRequests {
    pub hotelling_null: Option<(f64, f64, f64)>,
    pub constancy: bool,
}

/// Parametric fit output bundle.
#[derive(Debug, Clone)]
pub struct ParamFitOutput {
    pub fit: ParamFit,
    pub report: AsymptoticReport,
    pub hotelling: Option<crate::param::TestResult>,
    pub constancy: Option<crate::param::TestResult>,
}

/// Fit a parametric family and evaluate its asymptotic report and any
/// requested tests.
pub fn run_fit_param(
    sample: &PairedSample,
    family: Family,
    estimator: EstimatorKind,
    power_config: &FitConfig,
    tests: &TestRequests,
) -> Result<ParamFitOutput> {
    let fit = match family {
        Family::Constant => fit_constant(sample, estimator)?,
        Family::Linear => fit_linear(sample, estimator)?,
        Family::Power => fit_power(sample, estimator, power_config)?,
    };
    let report = asymptotic_report(&fit)?;
    let hotelling = match tests.hotelling_null {
        Some(null) => Some(crate::param::hotelling_test(sample, estimator, null)?),
        None => None,
    };
    let constancy = if tests.constancy {
        Some(crate::param::constancy_test(sample, estimator)?)
    } else {
        None
    };
    Ok(ParamFitOutput {
        fit,
        report,
        hotelling,
        constancy,
    })
}

/// One CSV row per fit: flat key-value serialization of the fit and its
/// covariance/scaling objects.
pub fn param_fit_csv(out: &ParamFitOutput) -> String {
    let mut s = String::new();
    s.push_str(
        "family,estimator,n,alpha,beta,gamma,residual_norm,converged,\
         sigma11,sigma22,sigma33,sigma23,scale1,scale2,scale3,\
         delta11,delta12,delta13,delta21,delta22,delta23,delta31,delta32,delta33",
    );
    s.push('\n');
    let f = &out.fit;
    let r = &out.report;
    write!(
        s,
        "{},{},{},{},{},{},{},{}",
        f.family, f.estimator, f.n, f.alpha, f.beta, f.gamma, f.residual_norm, f.converged
    )
    .unwrap();
    for v in [r.sigma[0][0], r.sigma[1][1], r.sigma[2][2], r.sigma[1][2]] {
        write!(s, ",{v}").unwrap();
    }
    for v in r.scaling {
        write!(s, ",{v}").unwrap();
    }
    for row in r.delta_hat {
        for v in row {
            write!(s, ",{v}").unwrap();
        }
    }
    s.push('\n');
    s
}

/// Terse human-readable fit summary.
pub fn param_fit_text(out: &ParamFitOutput) -> String {
    let f = &out.fit;
    let mut s = format!(
        "{} fit ({} route), n = {}\n  alpha = {:.6}\n  beta  = {:.6}\n  gamma = {:.6}\n  residual = {:.3e} ({})\n",
        f.family,
        f.estimator,
        f.n,
        f.alpha,
        f.beta,
        f.gamma,
        f.residual_norm,
        if f.converged { "converged" } else { "NOT converged" },
    );
    for w in &f.warnings {
        writeln!(s, "  warning: {w}").unwrap();
    }
    if let Some(h) = &out.hotelling {
        writeln!(
            s,
            "  hotelling T2 = {:.4}, dof {}, p = {:.4} [{}]",
            h.statistic, h.dof, h.p_value, h.null_description
        )
        .unwrap();
    }
    if let Some(c) = &out.constancy {
        writeln!(
            s,
            "  constancy z = {:.4}, p = {:.4} [{}]",
            c.statistic, c.p_value, c.null_description
        )
        .unwrap();
    }
    s
}

// ---------------------------------------------------------------------------
// nonparametric fit driver
// ---------------------------------------------------------------------------

/// Default evaluation grid: s = 0.1, 0.11, ..., 0.9.
pub fn default_grid() -> Vec<f64> {
    (10..=90).map(|k| k as f64 / 100.0).collect()
}

/// Serialize a curve: columns `s,m_hat,route,h,kernel,flag` with missing
/// values left empty and flagged.
pub fn curve_csv(fit: &CurveFit) -> String {
    let mut s = String::from("s,m_hat,route,h,kernel,flag\n");
    for ((&g, v), flag) in fit.grid.iter().zip(&fit.values).zip(&fit.flags) {
        push_f64(&mut s, g);
        s.push(',');
        if let Some(v) = v {
            push_f64(&mut s, *v);
        }
        write!(s, ",{},", fit.route).unwrap();
        push_f64(&mut s, fit.bandwidth);
        writeln!(
            s,
            ",{},{}",
            fit.kernel_id,
            match flag {
                PointFlag::Ok => "ok",
                PointFlag::OutOfRange => "out_of_range",
            }
        )
        .unwrap();
    }
    s
}

/// Fit one curve per bandwidth factor `d` on the grid.
pub fn run_fit_nonparam(
    sample: &PairedSample,
    grid: &[f64],
    d_values: &[f64],
    kernel: &Kernel,
    route: EstimatorKind,
) -> Result<Vec<CurveFit>> {
    if d_values.is_empty() {
        return Err(Error::config("at least one bandwidth factor d is required"));
    }
    d_values
        .iter()
        .map(|&d| {
            if !(d > 0.0) {
                return Err(Error::config(format!("d must be positive, got {d}")));
            }
            let h = crate::nonparam::practical_bandwidth(sample.len(), d);
            fit_m_curve(sample, grid, h, kernel, route)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// limit driver
// ---------------------------------------------------------------------------

/// Tabulate `G` and `l` on a grid with a tail-coefficient footer.
pub fn run_limit(law: &LimitLaw, grid: &[(f64, f64)]) -> Result<String> {
    let mut s = String::from("x,y,G,l\n");
    for &(x, y) in grid {
        let g = law.limit_cdf(x, y)?;
        let l = law.tail_dependence_fn(x, y)?;
        push_f64(&mut s, x);
        s.push(',');
        push_f64(&mut s, y);
        s.push(',');
        push_f64(&mut s, g);
        s.push(',');
        push_f64(&mut s, l);
        s.push('\n');
    }
    writeln!(s, "# lambda={}", law.tail_coefficient()?).unwrap();
    Ok(s)
}

/// Tabulate the empirical-vs-limit comparison: columns
/// `x,y,empirical,limit,gap` plus the tail-coefficient footer.
pub fn run_limit_empirical(law: &LimitLaw, exp: &MaximaExperiment) -> Result<String> {
    let rows = empirical_maxima_cdf(exp, law)?;
    let mut s = String::from("x,y,empirical,limit,gap\n");
    for r in rows {
        for (k, v) in [r.x, r.y, r.empirical, r.limit, r.gap]
            .into_iter()
            .enumerate()
        {
            if k > 0 {
                s.push(',');
            }
            push_f64(&mut s, v);
        }
        s.push('\n');
    }
    writeln!(s, "# lambda={}", law.tail_coefficient()?).unwrap();
    Ok(s)
}

// ---------------------------------------------------------------------------
// Monte-Carlo table replication
// ---------------------------------------------------------------------------

/// Summary of one estimand over the replications of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub estimand: String,
    pub truth: f64,
    pub n: usize,
    pub reps: usize,
    pub mean: f64,
    /// Population variance over replications.
    pub variance: f64,
    /// Population mean squared error against the truth; equals
    /// `variance + (mean - truth)^2` identically.
    pub mse: f64,
    /// Monte-Carlo standard error of the mean, `sqrt(variance / reps)`.
    pub mc_se: f64,
    /// Replications aggregated from a stalled solver's best iterate.
    pub non_converged: usize,
}

fn summarize(
    estimand: &str,
    truth: f64,
    n: usize,
    values: &[f64],
    non_converged: usize,
) -> CellStats {
    let reps = values.len();
    let r = reps as f64;
    let mean = values.iter().sum::<f64>() / r;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / r;
    let mse = values
        .iter()
        .map(|v| (v - truth) * (v - truth))
        .sum::<f64>()
        / r;
    CellStats {
        estimand: estimand.to_string(),
        truth,
        n,
        reps,
        mean,
        variance,
        mse,
        mc_se: (variance / r).sqrt(),
        non_converged,
    }
}

/// Constant-drift cell: both estimators fitted on the same replications.
pub fn replicate_table1_cell(
    alpha: f64,
    n: usize,
    reps: usize,
    seed: u64,
    cell: u32,
) -> Result<Vec<CellStats>> {
    let path = CorrelationPath::Constant(alpha);
    let schedule = build_schedule(&path, n)?;
    let fits: Vec<(f64, f64)> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let sample = sample_array(&schedule, cell_stream(seed, cell, rep));
            let a_sp = fit_constant(&sample, EstimatorKind::Spearman).map(|f| f.alpha);
            let a_pe = fit_constant(&sample, EstimatorKind::Pearson).map(|f| f.alpha);
            a_sp.and_then(|a| a_pe.map(|b| (a, b)))
        })
        .collect::<Result<_>>()?;
    let sp: Vec<f64> = fits.iter().map(|f| f.0).collect();
    let pe: Vec<f64> = fits.iter().map(|f| f.1).collect();
    Ok(vec![
        summarize("alpha_hat", alpha, n, &sp, 0),
        summarize("alpha_star_hat", alpha, n, &pe, 0),
    ])
}

/// Linear-drift cell: both estimators plus the transformed contrasts
/// `alpha + beta/2` and `alpha/2 + beta/3`.
pub fn replicate_table2_cell(
    alpha: f64,
    beta: f64,
    n: usize,
    reps: usize,
    seed: u64,
    cell: u32,
) -> Result<Vec<CellStats>> {
    let path = CorrelationPath::Linear { alpha, beta };
    let schedule = build_schedule(&path, n)?;
    let fits: Vec<[f64; 4]> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let sample = sample_array(&schedule, cell_stream(seed, cell, rep));
            let sp = fit_linear(&sample, EstimatorKind::Spearman)?;
            let pe = fit_linear(&sample, EstimatorKind::Pearson)?;
            Ok([sp.alpha, sp.beta, pe.alpha, pe.beta])
        })
        .collect::<Result<_>>()?;
    let col = |k: usize| -> Vec<f64> { fits.iter().map(|f| f[k]).collect() };
    let comb = |a: usize, b: usize, ca: f64, cb: f64| -> Vec<f64> {
        fits.iter().map(|f| ca * f[a] + cb * f[b]).collect()
    };
    Ok(vec![
        summarize("alpha_hat", alpha, n, &col(0), 0),
        summarize("beta_hat", beta, n, &col(1), 0),
        summarize(
            "alpha_hat+beta_hat/2",
            alpha + beta / 2.0,
            n,
            &comb(0, 1, 1.0, 0.5),
            0,
        ),
        summarize(
            "alpha_hat/2+beta_hat/3",
            alpha / 2.0 + beta / 3.0,
            n,
            &comb(0, 1, 0.5, 1.0 / 3.0),
            0,
        ),
        summarize("alpha_star_hat", alpha, n, &col(2), 0),
        summarize("beta_star_hat", beta, n, &col(3), 0),
        summarize(
            "alpha_star_hat+beta_star_hat/2",
            alpha + beta / 2.0,
            n,
            &comb(2, 3, 1.0, 0.5),
            0,
        ),
        summarize(
            "alpha_star_hat/2+beta_star_hat/3",
            alpha / 2.0 + beta / 3.0,
            n,
            &comb(2, 3, 0.5, 1.0 / 3.0),
            0,
        ),
    ])
}

/// Power-drift cell along the Spearman route, with the replication protocol:
/// the solver starts at the generating parameters and stalled best iterates
/// are aggregated (and counted) rather than dropped.
pub fn replicate_table3_cell(
    alpha: f64,
    beta: f64,
    gamma: f64,
    n: usize,
    reps: usize,
    seed: u64,
    cell: u32,
) -> Result<Vec<CellStats>> {
    let path = CorrelationPath::Power { alpha, beta, gamma };
    path.validate()?;
    let schedule = build_schedule(&path, n)?;
    let config = FitConfig::replication((alpha, beta, gamma));
    let fits: Vec<(f64, f64, f64, bool)> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let sample = sample_array(&schedule, cell_stream(seed, cell, rep));
            match fit_power(&sample, EstimatorKind::Spearman, &config) {
                Ok(f) => Ok((f.alpha, f.beta, f.gamma, true)),
                Err(Error::NonConvergence { best, .. }) => {
                    Ok((best.alpha, best.beta, best.gamma, false))
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let nonconv = fits.iter().filter(|f| !f.3).count();
    let a: Vec<f64> = fits.iter().map(|f| f.0).collect();
    let b: Vec<f64> = fits.iter().map(|f| f.1).collect();
    let g: Vec<f64> = fits.iter().map(|f| f.2).collect();
    Ok(vec![
        summarize("alpha_hat", alpha, n, &a, nonconv),
        summarize("beta_hat", beta, n, &b, nonconv),
        summarize("gamma_hat", gamma, n, &g, nonconv),
    ])
}

/// A replicated table: rows of per-estimand summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub table_id: u8,
    pub seed: u64,
    pub rows: Vec<(String, CellStats)>,
}

impl SummaryTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "table,config,estimand,truth,n,reps,mean,variance,mse,mc_se,non_converged\n",
        );
        for (config, c) in &self.rows {
            write!(s, "{},{},{},", self.table_id, config, c.estimand).unwrap();
            push_f64(&mut s, c.truth);
            write!(s, ",{},{},", c.n, c.reps).unwrap();
            push_f64(&mut s, c.mean);
            s.push(',');
            push_f64(&mut s, c.variance);
            s.push(',');
            push_f64(&mut s, c.mse);
            s.push(',');
            push_f64(&mut s, c.mc_se);
            writeln!(s, ",{}", c.non_converged).unwrap();
        }
        s
    }
}

/// Replicate a whole simulation table. `n_values`/`reps` default to the
/// study design (n in {300, 1000, 3000}, 1000 replications).
pub fn replicate_table(
    table_id: u8,
    n_values: &[usize],
    reps: usize,
    seed: u64,
) -> Result<SummaryTable> {
    if reps < 1 {
        return Err(Error::config("replications must be >= 1"));
    }
    let mut rows = Vec::new();
    let mut cell: u32 = 0;
    match table_id {
        1 => {
            for &alpha in &[1.0, 10.0] {
                for &n in n_values {
                    let stats = replicate_table1_cell(alpha, n, reps, seed, cell)?;
                    cell += 1;
                    for c in stats {
                        rows.push((format!("alpha={alpha},n={n}"), c));
                    }
                }
            }
        }
        2 => {
            for &beta in &[1.0, 0.0] {
                for &n in n_values {
                    let stats = replicate_table2_cell(1.0, beta, n, reps, seed, cell)?;
                    cell += 1;
                    for c in stats {
                        rows.push((format!("alpha=1,beta={beta},n={n}"), c));
                    }
                }
            }
        }
        3 => {
            for &gamma in &[0.5, 1.0] {
                let n = n_values.last().copied().unwrap_or(3000);
                let stats = replicate_table3_cell(1.0, 1.0, gamma, n, reps, seed, cell)?;
                cell += 1;
                for c in stats {
                    rows.push((format!("alpha=1,beta=1,gamma={gamma},n={n}"), c));
                }
            }
        }
        other => return Err(Error::config(format!("unknown table id {other}"))),
    }
    Ok(SummaryTable {
        table_id,
        seed,
        rows,
    })
}
