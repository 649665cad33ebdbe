#![allow(clippy::excessive_precision)] // frozen oracle constants

//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).

use dyncop::copula::{
    build_schedule, copula_density_mass, sample_array, spearman_map, CorrelationPath, PairedSample,
};
use dyncop::experiments::{
    replicate_table, replicate_table1_cell, replicate_table2_cell, replicate_table3_cell,
    run_limit_empirical, run_simulate,
};
use dyncop::limit::{LimitLaw, MaximaExperiment, Regime};
use dyncop::math::{QuadratureSpec, RngStream};
use dyncop::nonparam::{fit_m_curve, local_linear_weights, practical_bandwidth, Kernel};
use dyncop::param::{
    asymptotic_report, fit_constant, fit_linear, fit_power, hotelling_test, EstimatorKind, Family,
    FitConfig, ParamFit, PowerStart,
};

fn report(criterion: u32, ok: bool, detail: &str) -> bool {
    println!(
        "criterion {criterion:02}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

#[test]
fn criterion_01_table1_replication() {
    let stats = replicate_table1_cell(1.0, 300, 1000, 42, 0).unwrap();
    let (sp, pe) = (&stats[0], &stats[1]);
    let ok_sp = (sp.mean - 1.0365).abs() <= 3.0 * sp.mc_se;
    let ok_pe = (pe.mean - 1.1690).abs() <= 3.0 * pe.mc_se;
    let ok_var = pe.variance < sp.variance;
    let ok = report(
        1,
        ok_sp && ok_pe && ok_var,
        &format!(
            "mean(a^)={:.4} (target 1.0365, 3se={:.4}); mean(a*)={:.4} (target 1.1690, 3se={:.4}); V(a*)={:.4} < V(a^)={:.4}: {}",
            sp.mean,
            3.0 * sp.mc_se,
            pe.mean,
            3.0 * pe.mc_se,
            pe.variance,
            sp.variance,
            ok_var
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_02_table2_replication() {
    let stats = replicate_table2_cell(1.0, 1.0, 300, 1000, 42, 0).unwrap();
    let combo = &stats[2]; // alpha_hat + beta_hat/2
    let ok_mean = (combo.mean - 1.5461).abs() <= 3.0 * combo.mc_se;
    let ok_var_a = stats[0].variance < stats[4].variance;
    let ok_var_b = stats[1].variance < stats[5].variance;
    let ok = report(
        2,
        ok_mean && ok_var_a && ok_var_b,
        &format!(
            "mean(a^+b^/2)={:.4} (target 1.5461, 3se={:.4}); V(a^)={:.4}<V(a*)={:.4}: {}; V(b^)={:.4}<V(b*)={:.4}: {}",
            combo.mean,
            3.0 * combo.mc_se,
            stats[0].variance,
            stats[4].variance,
            ok_var_a,
            stats[1].variance,
            stats[5].variance,
            ok_var_b
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_03_table3_qualitative() {
    let half = replicate_table3_cell(1.0, 1.0, 0.5, 3000, 1000, 42, 0).unwrap();
    let one = replicate_table3_cell(1.0, 1.0, 1.0, 3000, 1000, 42, 1).unwrap();
    let gamma_half = &half[2];
    let alpha_one = &one[0];
    let ok_mean = (0.7..=1.3).contains(&gamma_half.mean);
    let ok_var_g = gamma_half.variance > 2.0;
    let ok_var_a = alpha_one.variance > 5.0;
    let ok = report(
        3,
        ok_mean && ok_var_g && ok_var_a,
        &format!(
            "gamma=0.5: mean(g^)={:.4} in [0.7,1.3]: {}, V(g^)={:.2} > 2: {} ({} non-converged); gamma=1: V(a^)={:.2} > 5: {} ({} non-converged)",
            gamma_half.mean,
            ok_mean,
            gamma_half.variance,
            ok_var_g,
            gamma_half.non_converged,
            alpha_one.variance,
            ok_var_a,
            alpha_one.non_converged
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_04_tail_coefficient_closed_form() {
    // frozen erf-oracle values of 2 Phi(sqrt(m))
    let cases = [
        (0.25, 1.38292492254802621),
        (1.0, 1.6826894921370859),
        (4.0, 1.95449973610364159),
        (10.0, 1.99843459774199745),
    ];
    let mut worst: f64 = 0.0;
    for (m, want) in cases {
        let law = LimitLaw::new(
            CorrelationPath::Constant(m),
            Regime::HuslerReissMixture,
            QuadratureSpec::tight(),
        )
        .unwrap();
        let got = law.tail_coefficient().unwrap();
        worst = worst.max((got - want).abs());
    }
    let ok = report(
        4,
        worst < 1e-10,
        &format!("max |quadrature - closed form| = {worst:.2e} over m in {{0.25, 1, 4, 10}}"),
    );
    assert!(ok);
}

#[test]
fn criterion_05_density_normalization() {
    let mut worst: f64 = 0.0;
    for rho in [-0.9, -0.5, 0.0, 0.5, 0.9, 0.99] {
        let mass = copula_density_mass(rho).unwrap();
        worst = worst.max((mass - 1.0).abs());
    }
    let ok = report(
        5,
        worst < 1e-6,
        &format!("max |mass - 1| = {worst:.2e} over six rho including 0.99"),
    );
    assert!(ok);
}

#[test]
fn criterion_06_local_linear_exactness() {
    let k = Kernel::epanechnikov();
    let mut worst: f64 = 0.0;
    for n in [100usize, 3000] {
        for h in [0.05, 0.2] {
            let const_resp = vec![2.75; n];
            let lin_resp: Vec<f64> = (1..=n).map(|j| 0.6 + 1.3 * (j as f64 / n as f64)).collect();
            for gp in 1..=9 {
                let s = 0.1 * gp as f64;
                let w = local_linear_weights(s, n, h, &k).unwrap();
                let total: f64 = w.iter().sum();
                let wc: f64 = w.iter().zip(&const_resp).map(|(wj, r)| wj * r).sum();
                let wl: f64 = w.iter().zip(&lin_resp).map(|(wj, r)| wj * r).sum();
                let rel_c = (wc / total - 2.75).abs() / 2.75;
                let want_l = 0.6 + 1.3 * s;
                let rel_l = (wl / total - want_l).abs() / want_l;
                worst = worst.max(rel_c).max(rel_l);
            }
        }
    }
    let ok = report(
        6,
        worst <= 1e-12,
        &format!("max relative reproduction error {worst:.2e} (constants and linears)"),
    );
    assert!(ok);
}

#[test]
fn criterion_07_smoother_variance_scaling() {
    let k = Kernel::epanechnikov();
    let n = 3000;
    let h = practical_bandwidth(n, 0.3);
    let sched = build_schedule(&CorrelationPath::Constant(1.0), n).unwrap();
    let scale = (n as f64 * h).sqrt() / (n as f64).ln();
    let s_grid = [0.3, 0.5, 0.7];
    let seeds = 500u64;
    let mut sp: Vec<Vec<f64>> = vec![Vec::new(); 3];
    let mut pe: Vec<Vec<f64>> = vec![Vec::new(); 3];
    for seed in 0..seeds {
        let sample = sample_array(&sched, RngStream::new(7000, seed));
        let fs = fit_m_curve(&sample, &s_grid, h, &k, EstimatorKind::Spearman).unwrap();
        let fp = fit_m_curve(&sample, &s_grid, h, &k, EstimatorKind::Pearson).unwrap();
        for i in 0..3 {
            sp[i].push(fs.values[i].expect("in range"));
            pe[i].push(fp.values[i].expect("defined"));
        }
    }
    let var = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
    };
    // variance of the normalized estimator at s = 0.5
    let target = std::f64::consts::PI.powi(2) / 15.0 * 0.6;
    let v_norm = var(&sp[1]) * scale * scale;
    let ok_band = v_norm >= 0.65 * target && v_norm <= 1.35 * target;
    let mut ok_routes = true;
    let mut ratios = Vec::new();
    for i in 0..3 {
        let r = var(&pe[i]) / var(&sp[i]);
        ok_routes &= r > 1.0;
        ratios.push(format!("{:.2}", r));
    }
    let ok = report(
        7,
        ok_band && ok_routes,
        &format!(
            "normalized Var at s=0.5: {:.4} vs target {:.4} (band [{:.4}, {:.4}]); Pearson/Spearman variance ratios at s=0.3,0.5,0.7: {}",
            v_norm,
            target,
            0.65 * target,
            1.35 * target,
            ratios.join(", ")
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_covariance_cross_check() {
    let mk = |estimator| ParamFit {
        family: Family::Power,
        estimator,
        alpha: 1.0,
        beta: 1.0,
        gamma: 1.0,
        residual_norm: 0.0,
        n: 1000,
        converged: true,
        warnings: vec![],
    };
    let sp = asymptotic_report(&mk(EstimatorKind::Spearman)).unwrap();
    let pe = asymptotic_report(&mk(EstimatorKind::Pearson)).unwrap();
    let d_sp = (sp.sigma[1][1] - 1.0 / 2160.0).abs();
    let d_pe = (pe.sigma[1][1] - 1.0 / 6.0).abs();
    let ok = report(
        8,
        d_sp < 1e-12 && d_pe < 1e-12,
        &format!("|sigma22(1) - 1/2160| = {d_sp:.2e}; |sigma22*(1) - 1/6| = {d_pe:.2e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_09_hotelling_calibration() {
    let sched = build_schedule(
        &CorrelationPath::Power {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
        },
        1000,
    )
    .unwrap();
    let reps = 1000u64;
    let mut rejections = 0u32;
    for seed in 0..reps {
        let sample = sample_array(&sched, RngStream::new(900, seed));
        let r = hotelling_test(&sample, EstimatorKind::Spearman, (1.0, 1.0, 1.0)).unwrap();
        if r.p_value < 0.05 {
            rejections += 1;
        }
    }
    let size = rejections as f64 / reps as f64;
    let ok = report(
        9,
        (0.02..=0.10).contains(&size),
        &format!(
            "empirical size {size:.4} at nominal 5% over {reps} replications (band [0.02, 0.10])"
        ),
    );
    assert!(ok);
}

// Known red, kept on purpose. Exact computation of the finite-n joint
// probability (high-precision bivariate-normal quadrature, done before the
// build) gives P_100 = 0.42917 and P_10000 = 0.43258 against the limit
// G = 0.43113: the true gap shrinks only from 0.0020 to 0.0015 (and is not
// monotone in n between these points), while the binomial noise of 1e4
// replications is 0.0050 per run. The per-seed comparison below is therefore
// noise-dominated at these settings (pass probability ~0.2); the seed sets
// were fixed before the first run and are not tuned to the outcome.
#[test]
fn criterion_10_maxima_convergence_trend() {
    let law = LimitLaw::new(
        CorrelationPath::Constant(1.0),
        Regime::HuslerReissMixture,
        QuadratureSpec::tight(),
    )
    .unwrap();
    let mut improvements = 0;
    let mut detail = Vec::new();
    for k in 0..5u64 {
        let gap_at = |n: usize| {
            let exp = MaximaExperiment {
                path: CorrelationPath::Constant(1.0),
                n,
                replications: 10_000,
                grid: vec![(-0.5, -0.5)],
                seed: 4200 + k,
            };
            dyncop::limit::empirical_maxima_cdf(&exp, &law).unwrap()[0].gap
        };
        let small = gap_at(100);
        let large = gap_at(10_000);
        if large < small {
            improvements += 1;
        }
        detail.push(format!("seed set {k}: {small:.4} -> {large:.4}"));
    }
    let ok = report(
        10,
        improvements >= 4,
        &format!(
            "gap smaller at n=1e4 than n=1e2 in {improvements}/5 seed sets ({})",
            detail.join("; ")
        ),
    );
    assert!(ok);
}

fn noiseless_sample(targets: &[f64]) -> PairedSample {
    // pseudo_u = pseudo_v = 0.5 + sqrt(target) makes the Spearman response
    // exactly the target
    let pu: Vec<f64> = targets.iter().map(|t| 0.5 + t.max(0.0).sqrt()).collect();
    PairedSample {
        u: pu.clone(),
        v: pu.clone(),
        pseudo_u: pu.clone(),
        pseudo_v: pu,
    }
}

fn noiseless_pearson_sample(targets: &[f64]) -> PairedSample {
    let pu: Vec<f64> = targets
        .iter()
        .map(|t| dyncop::math::std_normal_cdf(t.max(0.0).sqrt()))
        .collect();
    PairedSample {
        u: pu.clone(),
        v: pu.clone(),
        pseudo_u: pu.clone(),
        pseudo_v: pu,
    }
}

#[test]
fn criterion_11_exact_recovery() {
    let n = 2000;
    let log_n = (n as f64).ln();
    let mut worst: f64 = 0.0;
    let paths = [
        (
            CorrelationPath::Constant(1.3),
            Family::Constant,
            (1.3, 0.0, 1.0),
        ),
        (
            CorrelationPath::Linear {
                alpha: 0.8,
                beta: 0.9,
            },
            Family::Linear,
            (0.8, 0.9, 1.0),
        ),
        (
            CorrelationPath::Power {
                alpha: 1.0,
                beta: 1.0,
                gamma: 0.5,
            },
            Family::Power,
            (1.0, 1.0, 0.5),
        ),
    ];
    for estimator in [EstimatorKind::Spearman, EstimatorKind::Pearson] {
        for (path, family, truth) in &paths {
            let targets: Vec<f64> = (1..=n)
                .map(|i| {
                    let rho = 1.0 - path.m(i as f64 / n as f64) / log_n;
                    match estimator {
                        EstimatorKind::Spearman => spearman_map(rho),
                        EstimatorKind::Pearson => rho,
                    }
                })
                .collect();
            let sample = match estimator {
                EstimatorKind::Spearman => noiseless_sample(&targets),
                EstimatorKind::Pearson => noiseless_pearson_sample(&targets),
            };
            let fit = match family {
                Family::Constant => fit_constant(&sample, estimator).unwrap(),
                Family::Linear => fit_linear(&sample, estimator).unwrap(),
                Family::Power => fit_power(
                    &sample,
                    estimator,
                    &FitConfig {
                        start: PowerStart::LinearFit,
                        ..FitConfig::default()
                    },
                )
                .unwrap(),
            };
            worst = worst
                .max((fit.alpha - truth.0).abs())
                .max((fit.beta - truth.1).abs())
                .max(match family {
                    Family::Power => (fit.gamma - truth.2).abs(),
                    _ => 0.0,
                });
        }
    }
    let ok = report(
        11,
        worst <= 1e-8,
        &format!("max parameter recovery error {worst:.2e} over all families and estimators"),
    );
    assert!(ok);
}

#[test]
fn criterion_12_determinism() {
    // identical seed/config => byte-identical output, including under
    // parallel replication with different thread counts
    let path = CorrelationPath::Linear {
        alpha: 1.0,
        beta: 1.0,
    };
    let sim_a = run_simulate(&path, 500, 42).unwrap();
    let sim_b = run_simulate(&path, 500, 42).unwrap();
    let ok_sim = sim_a == sim_b;

    let t_a = replicate_table(1, &[300], 200, 42).unwrap().to_csv();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let t_b = one.install(|| replicate_table(1, &[300], 200, 42).unwrap().to_csv());
    let ok_table = t_a == t_b;

    let law = LimitLaw::new(
        CorrelationPath::Constant(1.0),
        Regime::HuslerReissMixture,
        QuadratureSpec::tight(),
    )
    .unwrap();
    let exp = MaximaExperiment {
        path: CorrelationPath::Constant(1.0),
        n: 200,
        replications: 2000,
        grid: vec![(-0.5, -0.5), (-1.0, -1.0)],
        seed: 42,
    };
    let m_a = run_limit_empirical(&law, &exp).unwrap();
    let m_b = one.install(|| run_limit_empirical(&law, &exp).unwrap());
    let ok_maxima = m_a == m_b;

    let ok = report(
        12,
        ok_sim && ok_table && ok_maxima,
        &format!("simulate: {ok_sim}; parallel table replication: {ok_table}; parallel maxima experiment: {ok_maxima}"),
    );
    assert!(ok);
}
