//! Command-line front end: simulation, fitting, limit evaluation and
//! Monte-Carlo table replication for the dynamic bivariate normal copula.
//!
//! Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use dyncop::copula::CorrelationPath;
use dyncop::experiments::{
    self, read_sample_csv, run_fit_nonparam, run_fit_param, run_limit, run_limit_empirical,
    run_simulate, TestRequests,
};
use dyncop::limit::{LimitLaw, MaximaExperiment, Regime};
use dyncop::math::QuadratureSpec;
use dyncop::nonparam::Kernel;
use dyncop::param::{constancy_test, hotelling_test, EstimatorKind, Family, FitConfig, PowerStart};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "dyncop",
    version,
    about = "Dynamic bivariate normal copula: simulation, inference and tail limits"
)]
struct Cli {
    /// key=value file whose entries act as defaults for the subcommand's
    /// long flags; explicit flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a triangular array and emit CSV columns i,u,v
    Simulate(SimulateArgs),
    /// Fit a parametric drift family to a CSV sample
    FitParam(FitParamArgs),
    /// Local-linear drift estimation on a CSV sample
    FitNonparam(FitNonparamArgs),
    /// Evaluate the limiting maxima law G, the tail dependence function and
    /// the tail coefficient
    Limit(LimitArgs),
    /// Replicate a simulation-study table with Monte-Carlo standard errors
    ReplicateTable(ReplicateArgs),
    /// Run a hypothesis test on a CSV sample
    Test(TestArgs),
}

#[derive(Args, Debug, Clone)]
struct PathArgs {
    /// Drift family: const | linear | power | table:<csv of s,m knots>
    #[arg(long, default_value = "const")]
    path: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

impl PathArgs {
    fn build(&self) -> anyhow::Result<CorrelationPath> {
        let path = if let Some(file) = self.path.strip_prefix("table:") {
            let text = std::fs::read_to_string(file)?;
            let mut knots = Vec::new();
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let mut it = line.split(',').map(str::trim);
                let (Some(s), Some(m)) = (it.next(), it.next()) else {
                    anyhow::bail!("knot file line {} needs two columns", lineno + 1);
                };
                match (s.parse::<f64>(), m.parse::<f64>()) {
                    (Ok(s), Ok(m)) => knots.push((s, m)),
                    // a non-numeric first line is a header
                    _ if knots.is_empty() => continue,
                    _ => anyhow::bail!("knot file line {}: bad numbers", lineno + 1),
                }
            }
            CorrelationPath::Tabulated(knots)
        } else {
            match self.path.as_str() {
                "const" => CorrelationPath::Constant(self.alpha),
                "linear" => CorrelationPath::Linear {
                    alpha: self.alpha,
                    beta: self.beta,
                },
                "power" => CorrelationPath::Power {
                    alpha: self.alpha,
                    beta: self.beta,
                    gamma: self.gamma,
                },
                other => anyhow::bail!("unknown path family '{other}'"),
            }
        };
        path.validate()?;
        Ok(path)
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    path: PathArgs,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum EstimatorArg {
    Spearman,
    Pearson,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Spearman => EstimatorKind::Spearman,
            EstimatorArg::Pearson => EstimatorKind::Pearson,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FamilyArg {
    Const,
    Linear,
    Power,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Const => Family::Constant,
            FamilyArg::Linear => Family::Linear,
            FamilyArg::Power => Family::Power,
        }
    }
}

#[derive(Args, Debug)]
struct FitParamArgs {
    /// Input CSV with columns u,v or x,y
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = FamilyArg::Const)]
    family: FamilyArg,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Spearman)]
    estimator: EstimatorArg,
    /// Power-family start "alpha,beta,gamma" (default: linear-fit init)
    #[arg(long, value_name = "A,B,G", allow_hyphen_values = true)]
    start: Option<String>,
    /// Attach a Hotelling test of the null "alpha,beta,gamma"
    #[arg(long, value_name = "A,B,G", allow_hyphen_values = true)]
    hotelling: Option<String>,
    /// Attach the constancy (beta = 0) test
    #[arg(long, default_value_t = false)]
    constancy: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitNonparamArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Spearman)]
    route: EstimatorArg,
    /// Comma-separated bandwidth factors d in h = d (log^2 n / n)^{1/5};
    /// several values emit one curve file per d
    #[arg(long, default_value = "0.3")]
    d: String,
    /// Evaluation grid "lo:hi:step"
    #[arg(long, default_value = "0.1:0.9:0.01")]
    grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum RegimeArg {
    Comonotone,
    Independent,
    Mixture,
}

#[derive(Args, Debug)]
struct LimitArgs {
    #[command(flatten)]
    path: PathArgs,
    #[arg(long, value_enum, default_value_t = RegimeArg::Mixture)]
    regime: RegimeArg,
    /// Evaluation points "x,y;x,y;..." (all strictly negative)
    #[arg(
        long,
        default_value = "-1,-1;-1,-2;-0.5,-0.5",
        allow_hyphen_values = true
    )]
    grid: String,
    /// Also run the finite-n maxima experiment and report empirical vs limit
    #[arg(long, default_value_t = false)]
    empirical: bool,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReplicateArgs {
    /// Table id: 1 (constant), 2 (linear), 3 (power)
    #[arg(long)]
    table: u8,
    /// Sample sizes (table 3 uses the last)
    #[arg(long, value_delimiter = ',', default_values_t = vec![300usize, 1000, 3000])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum TestKind {
    Hotelling,
    Constancy,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long, value_enum)]
    kind: TestKind,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Spearman)]
    estimator: EstimatorArg,
    /// Null "alpha,beta,gamma" for the Hotelling test
    #[arg(long, value_name = "A,B,G", allow_hyphen_values = true)]
    null: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_triple(s: &str) -> anyhow::Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        anyhow::bail!("expected three comma-separated numbers, got '{s}'");
    }
    Ok((parts[0].parse()?, parts[1].parse()?, parts[2].parse()?))
}

fn parse_pairs(s: &str) -> anyhow::Result<Vec<(f64, f64)>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let mut it = p.split(',').map(str::trim);
            let (Some(x), Some(y)) = (it.next(), it.next()) else {
                anyhow::bail!("grid point '{p}' needs two coordinates");
            };
            Ok((x.parse::<f64>()?, y.parse::<f64>()?))
        })
        .collect()
}

fn parse_grid_spec(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        anyhow::bail!("grid must be lo:hi:step, got '{s}'");
    }
    let (lo, hi, step): (f64, f64, f64) = (parts[0].parse()?, parts[1].parse()?, parts[2].parse()?);
    if !(step > 0.0 && lo > 0.0 && hi < 1.0 && lo <= hi) {
        anyhow::bail!("grid must satisfy 0 < lo <= hi < 1 with positive step");
    }
    let count = ((hi - lo) / step).round() as usize;
    Ok((0..=count).map(|k| lo + k as f64 * step).collect())
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let path = a.path.build()?;
            let csv = run_simulate(&path, a.n, a.seed)?;
            emit(&a.out, &csv)?;
        }
        Command::FitParam(a) => {
            let text = std::fs::read_to_string(&a.input)?;
            let sample = read_sample_csv(&text)?;
            let mut config = FitConfig::default();
            if let Some(s) = &a.start {
                let (al, be, ga) = parse_triple(s)?;
                config.start = PowerStart::At(al, be, ga);
            }
            let tests = TestRequests {
                hotelling_null: a.hotelling.as_deref().map(parse_triple).transpose()?,
                constancy: a.constancy,
            };
            let out = run_fit_param(
                &sample,
                a.family.into(),
                a.estimator.into(),
                &config,
                &tests,
            )?;
            eprint!("{}", experiments::param_fit_text(&out));
            emit(&a.out, &experiments::param_fit_csv(&out))?;
        }
        Command::FitNonparam(a) => {
            let text = std::fs::read_to_string(&a.input)?;
            let sample = read_sample_csv(&text)?;
            let d_values: Vec<f64> =
                a.d.split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<Result<_, _>>()?;
            let grid = parse_grid_spec(&a.grid)?;
            let kernel = Kernel::epanechnikov();
            let curves = run_fit_nonparam(&sample, &grid, &d_values, &kernel, a.route.into())?;
            if curves.len() == 1 {
                emit(&a.out, &experiments::curve_csv(&curves[0]))?;
            } else {
                // one file per bandwidth factor, suffixed _d<value>
                let base = a
                    .out
                    .clone()
                    .ok_or_else(|| anyhow::anyhow!("--out is required with several d values"))?;
                for (d, curve) in d_values.iter().zip(&curves) {
                    let file = suffixed(&base, &format!("_d{d}"));
                    std::fs::write(&file, experiments::curve_csv(curve))?;
                    eprintln!("wrote {}", file.display());
                }
            }
        }
        Command::Limit(a) => {
            let path = a.path.build()?;
            let regime = match a.regime {
                RegimeArg::Comonotone => Regime::Comonotone,
                RegimeArg::Independent => Regime::Independent,
                RegimeArg::Mixture => Regime::HuslerReissMixture,
            };
            let law = LimitLaw::new(path.clone(), regime, QuadratureSpec::tight())?;
            let grid = parse_pairs(&a.grid)?;
            let csv = if a.empirical {
                let exp = MaximaExperiment {
                    path,
                    n: a.n,
                    replications: a.reps,
                    grid,
                    seed: a.seed,
                };
                run_limit_empirical(&law, &exp)?
            } else {
                run_limit(&law, &grid)?
            };
            emit(&a.out, &csv)?;
        }
        Command::ReplicateTable(a) => {
            let table = experiments::replicate_table(a.table, &a.n, a.reps, a.seed)?;
            emit(&a.out, &table.to_csv())?;
        }
        Command::Test(a) => {
            let text = std::fs::read_to_string(&a.input)?;
            let sample = read_sample_csv(&text)?;
            let result = match a.kind {
                TestKind::Hotelling => {
                    let null = a
                        .null
                        .as_deref()
                        .ok_or_else(|| anyhow::anyhow!("--null is required for hotelling"))?;
                    hotelling_test(&sample, a.estimator.into(), parse_triple(null)?)?
                }
                TestKind::Constancy => constancy_test(&sample, a.estimator.into())?,
            };
            let mut s = String::from("statistic,dof,p_value,null\n");
            s.push_str(&format!(
                "{},{},{},\"{}\"\n",
                result.statistic, result.dof, result.p_value, result.null_description
            ));
            emit(&a.out, &s)?;
        }
    }
    Ok(())
}

fn suffixed(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Splice `key=value` lines from a config file in as long flags right after
/// the subcommand, so explicit command-line flags (parsed later) override
/// them.
fn argv_with_config() -> anyhow::Result<Vec<String>> {
    let args: Vec<String> = std::env::args().collect();
    let mut config_file: Option<String> = None;
    let mut rest: Vec<String> = Vec::with_capacity(args.len());
    let mut i = 0;
    while i < args.len() {
        if args[i] == "--config" {
            if i + 1 >= args.len() {
                anyhow::bail!("--config needs a file argument");
            }
            config_file = Some(args[i + 1].clone());
            i += 2;
        } else if let Some(f) = args[i].strip_prefix("--config=") {
            config_file = Some(f.to_string());
            i += 1;
        } else {
            rest.push(args[i].clone());
            i += 1;
        }
    }
    let Some(file) = config_file else {
        return Ok(rest);
    };
    let text =
        std::fs::read_to_string(&file).map_err(|e| anyhow::anyhow!("config file {file}: {e}"))?;
    // flags given explicitly on the command line win over config entries
    let explicit: std::collections::HashSet<String> = rest
        .iter()
        .filter_map(|a| {
            a.strip_prefix("--")
                .map(|s| s.split('=').next().unwrap_or(s).to_string())
        })
        .collect();
    let mut injected = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            anyhow::bail!("config file {file} line {}: expected key=value", lineno + 1);
        };
        let key = key.trim();
        if explicit.contains(key) {
            continue;
        }
        injected.push(format!("--{key}"));
        injected.push(value.trim().to_string());
    }
    // insert after the subcommand token (first non-flag after the program)
    let sub_pos = rest
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| !a.starts_with('-'))
        .map(|(k, _)| k);
    match sub_pos {
        Some(k) => {
            let mut merged = rest[..=k].to_vec();
            merged.extend(injected);
            merged.extend(rest[k + 1..].iter().cloned());
            Ok(merged)
        }
        None => Ok(rest),
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<dyncop::Error>() {
        Some(
            dyncop::Error::NonConvergence { .. }
            | dyncop::Error::QuadratureNonConvergence(_)
            | dyncop::Error::SingularSystem(_)
            | dyncop::Error::DegenerateWindow { .. },
        ) => 3,
        // everything else (bad config, malformed input, io) is a usage error
        _ => 2,
    }
}

fn main() -> ExitCode {
    let argv = match argv_with_config() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(dyncop::Error::NonConvergence { best, .. }) =
                e.downcast_ref::<dyncop::Error>()
            {
                eprintln!(
                    "best iterate: alpha = {}, beta = {}, gamma = {} (residual {:.3e})",
                    best.alpha, best.beta, best.gamma, best.residual_norm
                );
            }
            ExitCode::from(exit_code_for(&e))
        }
    }
}
