//! Flag definitions and their translation into library settings.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use frailty::datagen::{BaselineMode, BaselineSpec, CensorKind, CensoringSpec, ClusterSizeSpec, CovariateSpec, GenerationConfig};
use frailty::fit::{FitControl, FitMethod};
use frailty::frailty::{FrailtyKind, FrailtySpec};

use crate::error::CliError;
use crate::expr::{self, Expr};
use crate::io::Columns;

#[derive(Parser, Debug)]
#[command(name = "frailty", version, about = "Simulate and fit shared frailty models for clustered survival data")]
pub struct Cli {
    /// Read flags for the subcommand from the matching table of a TOML file
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a clustered survival dataset
    Generate(GenerateCmd),
    /// Fit a shared frailty model to a dataset
    Fit(FitCmd),
    /// Covariance of the estimates (sandwich or weighted bootstrap)
    Cov(CovCmd),
    /// Repeated generate-and-fit study
    Simulate(SimulateCmd),
    /// Runtime scaling benchmark
    Bench(BenchCmd),
    /// Runtime and accuracy across a tolerance grid
    Sweep(SweepCmd),
}

fn list<T, E: std::fmt::Display>(flag: &str, s: &str, f: impl Fn(&str) -> Result<T, E>) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| f(p).map_err(|e| CliError::Usage(format!("{flag}: '{p}': {e}"))))
        .collect()
}

fn numbers(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    list(flag, s, expr::constant)
}

fn spec_parts<'a>(flag: &str, s: &'a str) -> Result<(&'a str, Vec<f64>), CliError> {
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    Ok((name.trim(), numbers(flag, rest)?))
}

fn arity(flag: &str, name: &str, v: &[f64], n: usize) -> Result<(), CliError> {
    if v.len() == n {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{flag}: '{name}' takes {n} parameters, found {}", v.len())))
    }
}

fn whole(flag: &str, x: f64) -> Result<usize, CliError> {
    if x >= 0.0 && x.fract() == 0.0 {
        Ok(x as usize)
    } else {
        Err(CliError::Usage(format!("{flag}: {x} is not a nonnegative integer")))
    }
}

/// `K`, `fixed:K`, `poisson:LAMBDA,K`, `zeta:S,U,L` or `uniform:L,U`.
pub fn parse_sizes(s: &str) -> Result<ClusterSizeSpec, CliError> {
    const F: &str = "--cluster-size";
    let spec = match s.trim().parse::<usize>() {
        Ok(k) => ClusterSizeSpec::Fixed(k),
        Err(_) => sized_law(s)?,
    };
    spec.validate().map_err(|e| CliError::flag(F, e))?;
    Ok(spec)
}

fn sized_law(s: &str) -> Result<ClusterSizeSpec, CliError> {
    const F: &str = "--cluster-size";
    let (name, v) = spec_parts(F, s)?;
    Ok(match name {
        "fixed" => {
            arity(F, name, &v, 1)?;
            ClusterSizeSpec::Fixed(whole(F, v[0])?)
        }
        "poisson" => {
            arity(F, name, &v, 2)?;
            ClusterSizeSpec::TruncatedPoisson {
                lambda: v[0],
                k: whole(F, v[1])?,
            }
        }
        "zeta" | "pareto" => {
            arity(F, name, &v, 3)?;
            ClusterSizeSpec::TruncatedZeta {
                s: v[0],
                u: whole(F, v[1])?,
                l: whole(F, v[2])?,
            }
        }
        "uniform" => {
            arity(F, name, &v, 2)?;
            ClusterSizeSpec::DiscreteUniform {
                l: whole(F, v[0])?,
                u: whole(F, v[1])?,
            }
        }
        other => return Err(CliError::Usage(format!("{F}: unknown cluster-size law '{other}'"))),
    })
}

/// `normal:MEAN,SD`, `uniform:A,B` or `discrete:A,B`.
pub fn parse_covariates(s: &str) -> Result<CovariateSpec, CliError> {
    const F: &str = "--covariates";
    let (name, v) = spec_parts(F, s)?;
    arity(F, name, &v, 2)?;
    let spec = match name {
        "normal" if v[1] >= 0.0 => CovariateSpec::Normal { mean: v[0], sd: v[1] },
        "uniform" if v[1] >= v[0] => CovariateSpec::Uniform { lower: v[0], upper: v[1] },
        "discrete" if v[1] >= v[0] && v[0].fract() == 0.0 && v[1].fract() == 0.0 => CovariateSpec::DiscreteUniform {
            lower: v[0] as i64,
            upper: v[1] as i64,
        },
        "normal" | "uniform" | "discrete" => return Err(CliError::Usage(format!("{F}: invalid parameters for '{name}'"))),
        other => return Err(CliError::Usage(format!("{F}: unknown covariate law '{other}'"))),
    };
    Ok(spec)
}

/// `none`, or `normal|lognormal|uniform:P1,P2`.
pub fn parse_censoring(s: &str, rate: Option<f64>) -> Result<CensoringSpec, CliError> {
    const F: &str = "--censor";
    if s.trim() == "none" {
        if rate.is_some() {
            return Err(CliError::Usage("--censor-rate: needs a censoring distribution".into()));
        }
        return Ok(CensoringSpec::None);
    }
    let (name, v) = spec_parts(F, s)?;
    let kind = CensorKind::parse(name).map_err(|e| CliError::flag(F, e))?;
    arity(F, name, &v, 2)?;
    if let Some(r) = rate {
        if !(r > 0.0 && r < 1.0) {
            return Err(CliError::Usage(format!("--censor-rate: {r} is outside (0, 1)")));
        }
    }
    Ok(CensoringSpec::Distribution {
        kind,
        params: [v[0], v[1]],
        target_rate: rate,
    })
}

/// `weibull-inv:C,D`, `weibull-cum:C,D`, `weibull-hazard:C,D` or `oscillating:A,B,C,D`.
pub fn parse_preset(s: &str) -> Result<BaselineSpec, CliError> {
    const F: &str = "--baseline";
    let (name, v) = spec_parts(F, s)?;
    let mode = match name {
        "weibull-inv" => Some(BaselineMode::InverseCumulative),
        "weibull-cum" => Some(BaselineMode::Cumulative),
        "weibull-hazard" => Some(BaselineMode::Hazard),
        "oscillating" => None,
        other => return Err(CliError::Usage(format!("{F}: unknown preset '{other}'"))),
    };
    let positive = |x: &[f64]| x.iter().all(|&p| p > 0.0);
    match mode {
        Some(m) => {
            arity(F, name, &v, 2)?;
            if !positive(&v) {
                return Err(CliError::Usage(format!("{F}: Weibull parameters must be positive")));
            }
            Ok(BaselineSpec::weibull(m, v[0], v[1]))
        }
        None => {
            arity(F, name, &v, 4)?;
            if !positive(&v) {
                return Err(CliError::Usage(format!("{F}: oscillating parameters must be positive")));
            }
            Ok(BaselineSpec::oscillating(v[0], v[1], v[2], v[3]))
        }
    }
}

fn parse_family(flag: &str, name: &str) -> Result<FrailtyKind, CliError> {
    FrailtyKind::parse(name).map_err(|e| CliError::flag(flag, e))
}

/// Frailty laws as `name:theta`, e.g. `gamma:2`.
pub fn parse_families(flag: &str, s: &str) -> Result<Vec<FrailtySpec>, CliError> {
    let v = list(flag, s, |p| -> Result<(String, f64), CliError> {
        let (name, theta) = p.split_once(':').ok_or_else(|| CliError::Usage("expected name:theta".into()))?;
        Ok((name.to_string(), expr::constant(theta).map_err(|e| CliError::Usage(e.to_string()))?))
    })?;
    v.into_iter()
        .map(|(name, theta)| FrailtySpec::new(parse_family(flag, &name)?, theta).map_err(|e| CliError::flag(flag, e)))
        .collect()
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    /// Number of clusters
    #[arg(long, default_value_t = 300)]
    pub clusters: usize,
    /// Cluster sizes: K, fixed:K, poisson:LAMBDA,K, zeta:S,U,L or uniform:L,U
    #[arg(long, default_value = "2")]
    pub cluster_size: String,
    /// Regression coefficients, comma separated constant expressions
    #[arg(long, default_value = "log(2),log(3)", allow_hyphen_values = true)]
    pub beta: String,
    /// Covariate law: normal:MEAN,SD, uniform:A,B or discrete:A,B
    #[arg(long, default_value = "normal:0,1")]
    pub covariates: String,
    /// Frailty distribution: gamma, pvf, lognormal, invgauss, posstab or none
    #[arg(long, default_value = "gamma")]
    pub frailty: String,
    /// Frailty parameter
    #[arg(long, default_value_t = 2.0)]
    pub theta: f64,
    /// Censoring law: none, normal:MEAN,SD, lognormal:MEAN,SD or uniform:A,B
    #[arg(long, default_value = "normal:130,15")]
    pub censor: String,
    /// Target censoring rate; solves for the location (upper bound for uniform)
    #[arg(long)]
    pub censor_rate: Option<f64>,
    /// Explicit censoring times, one per observation in generation order: a comma separated list or @FILE with one per line; replaces --censor
    #[arg(long, value_name = "TIMES", conflicts_with = "censor_rate")]
    pub censor_time: Option<String>,
    /// Baseline hazard λ₀(t) as an expression in t
    #[arg(long, value_name = "EXPR", conflicts_with_all = ["lambda0_cum", "lambda0_inv", "baseline"])]
    pub lambda0: Option<String>,
    /// Cumulative baseline hazard Λ₀(t) as an expression in t
    #[arg(long, value_name = "EXPR", conflicts_with_all = ["lambda0_inv", "baseline"])]
    pub lambda0_cum: Option<String>,
    /// Inverse cumulative baseline hazard Λ₀⁻¹(t) as an expression in t
    #[arg(long, value_name = "EXPR", conflicts_with = "baseline")]
    pub lambda0_inv: Option<String>,
    /// Baseline preset: weibull-inv:C,D, weibull-cum:C,D, weibull-hazard:C,D or oscillating:A,B,C,D
    #[arg(long)]
    pub baseline: Option<String>,
    /// Round observed times up to a multiple of this base
    #[arg(long)]
    pub round_base: Option<f64>,
}

fn censor_times(s: &str) -> Result<Vec<f64>, CliError> {
    const F: &str = "--censor-time";
    let text = match s.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{F}: {path}: {e}")))?,
        None => s.replace(',', "\n"),
    };
    let times = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| match l.parse::<f64>() {
            Ok(t) if t >= 0.0 => Ok(t),
            _ => Err(CliError::Usage(format!("{F}: '{l}' is not a nonnegative time"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if times.is_empty() {
        return Err(CliError::Usage(format!("{F}: no times given")));
    }
    Ok(times)
}

fn baseline_expr(flag: &str, s: &str, mode: BaselineMode) -> Result<BaselineSpec, CliError> {
    let e = Expr::parse(s).map_err(|e| CliError::Usage(format!("{flag}: {e}")))?;
    let label = e.source().to_string();
    if mode == BaselineMode::Hazard {
        // forms like d(ct)^d/t are 0/0 at the origin
        return Ok(BaselineSpec::new(mode, label, Arc::new(move |t| if t <= 0.0 { 0.0 } else { e.eval(t) })));
    }
    Ok(BaselineSpec::new(mode, label, Arc::new(move |t| e.eval(t))))
}

impl GenArgs {
    pub fn frailty_spec(&self) -> Result<FrailtySpec, CliError> {
        let kind = parse_family("--frailty", &self.frailty)?;
        if kind == FrailtyKind::None {
            return Ok(FrailtySpec::none());
        }
        FrailtySpec::new(kind, self.theta).map_err(|e| CliError::flag("--theta", e))
    }

    pub fn baseline_spec(&self) -> Result<BaselineSpec, CliError> {
        if let Some(s) = &self.lambda0 {
            baseline_expr("--lambda0", s, BaselineMode::Hazard)
        } else if let Some(s) = &self.lambda0_cum {
            baseline_expr("--lambda0-cum", s, BaselineMode::Cumulative)
        } else if let Some(s) = &self.lambda0_inv {
            baseline_expr("--lambda0-inv", s, BaselineMode::InverseCumulative)
        } else {
            parse_preset(self.baseline.as_deref().unwrap_or("weibull-inv:0.01,4.6"))
        }
    }

    pub fn config(&self, seed: u64) -> Result<GenerationConfig, CliError> {
        if self.clusters == 0 {
            return Err(CliError::Usage("--clusters: must be positive".into()));
        }
        let beta = numbers("--beta", &self.beta)?;
        if beta.is_empty() {
            return Err(CliError::Usage("--beta: at least one coefficient is required".into()));
        }
        if let Some(b) = self.round_base {
            if !(b > 0.0) {
                return Err(CliError::Usage(format!("--round-base: {b} must be positive")));
            }
        }
        let cfg = GenerationConfig {
            n_clusters: self.clusters,
            sizes: parse_sizes(&self.cluster_size)?,
            beta,
            covariates: parse_covariates(&self.covariates)?,
            frailty: self.frailty_spec()?,
            baseline: self.baseline_spec()?,
            censoring: match &self.censor_time {
                Some(s) => CensoringSpec::Explicit(censor_times(s)?),
                None => parse_censoring(&self.censor, self.censor_rate)?,
            },
            round_base: self.round_base,
            seed,
        };
        let flag = if self.censor_time.is_some() { "--censor-time" } else { "--censor" };
        cfg.validate().map_err(|e| CliError::flag(flag, e))?;
        if let (CensoringSpec::Explicit(c), ClusterSizeSpec::Fixed(k)) = (&cfg.censoring, &cfg.sizes) {
            if c.len() != self.clusters * k {
                return Err(CliError::Usage(format!("{flag}: {} times given for {} observations", c.len(), self.clusters * k)));
            }
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug, Clone)]
pub struct ControlArgs {
    /// Estimation method: loglik or score
    #[arg(long, default_value = "loglik")]
    pub fit_method: String,
    /// Absolute convergence tolerance (0 disables)
    #[arg(long, default_value_t = 0.0)]
    pub abs_tol: f64,
    /// Relative convergence tolerance (0 disables)
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,
    /// Maximum outer iterations
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Absolute tolerance of numerical integration
    #[arg(long, default_value_t = 0.0)]
    pub int_abs_tol: f64,
    /// Relative tolerance of numerical integration
    #[arg(long, default_value_t = 1.0)]
    pub int_rel_tol: f64,
    /// Integrand evaluation budget per integral
    #[arg(long, default_value_t = 1000)]
    pub int_max_evals: usize,
}

impl ControlArgs {
    pub fn control(&self) -> Result<FitControl, CliError> {
        let fit_method = FitMethod::parse(&self.fit_method).map_err(|e| CliError::flag("--fit-method", e))?;
        for (flag, v) in [
            ("--abs-tol", self.abs_tol),
            ("--rel-tol", self.rel_tol),
            ("--int-abs-tol", self.int_abs_tol),
            ("--int-rel-tol", self.int_rel_tol),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(CliError::Usage(format!("{flag}: {v} must be finite and nonnegative")));
            }
        }
        for (flag, v) in [("--max-iter", self.max_iter), ("--int-max-evals", self.int_max_evals)] {
            if v == 0 {
                return Err(CliError::Usage(format!("{flag}: must be positive")));
            }
        }
        Ok(FitControl {
            fit_method,
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_iter: self.max_iter,
            int_abs_tol: self.int_abs_tol,
            int_rel_tol: self.int_rel_tol,
            int_max_evals: self.int_max_evals,
            ..FitControl::default()
        })
    }
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Dataset CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Time column
    #[arg(long, default_value = "time")]
    pub time: String,
    /// Event indicator column (0/1)
    #[arg(long, default_value = "status")]
    pub status: String,
    /// Cluster label column
    #[arg(long, default_value = "family")]
    pub cluster: String,
    /// Covariate columns, comma separated [default: all others except rep]
    #[arg(long)]
    pub covariates: Option<String>,
    /// Frailty distribution to fit: gamma, pvf, lognormal, invgauss or none
    #[arg(long, default_value = "gamma")]
    pub frailty: String,
    /// Starting value of theta [default: the family's value giving Kendall's tau 0.3]
    #[arg(long)]
    pub theta_init: Option<f64>,
}

impl InputArgs {
    pub fn data_path(&self) -> Result<&PathBuf, CliError> {
        self.data.as_ref().ok_or_else(|| CliError::Usage("--data: a dataset is required".into()))
    }

    pub fn columns(&self) -> Columns {
        Columns {
            time: self.time.clone(),
            status: self.status.clone(),
            cluster: self.cluster.clone(),
            covariates: self.covariates.as_ref().map(|s| s.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect()),
        }
    }

    pub fn kind(&self) -> Result<FrailtyKind, CliError> {
        let kind = parse_family("--frailty", &self.frailty)?;
        if !kind.is_estimable() {
            return Err(CliError::Usage(format!("--frailty: {kind} cannot be fitted")));
        }
        if self.theta_init.is_some() && kind == FrailtyKind::None {
            return Err(CliError::Usage("--theta-init: no frailty parameter to start".into()));
        }
        Ok(kind)
    }
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct GenerateCmd {
    #[command(flatten)]
    pub gen: GenArgs,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; the manifest goes next to it with extension .manifest
    #[arg(long, default_value = "data.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct FitCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub control: ControlArgs,
    /// Directory for report.txt, baseline.csv, trace.csv and manifest.txt
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct CovCmd {
    /// Manifest of an earlier fit to reproduce instead of the data flags
    #[arg(long)]
    pub fit_manifest: Option<PathBuf>,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub control: ControlArgs,
    /// sandwich or bootstrap
    #[arg(long, default_value = "sandwich")]
    pub method: String,
    /// Bootstrap replicates
    #[arg(long = "B", visible_alias = "replicates", default_value_t = 200)]
    pub replicates: usize,
    /// Times at which to include the cumulative baseline hazard (bootstrap only)
    #[arg(long)]
    pub lambda_times: Option<String>,
    /// Bootstrap weight seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads
    #[arg(long, env = "FRAILTY_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, hide = true)]
    pub unit_weights: bool,
    /// Output CSV; the manifest goes next to it with extension .manifest
    #[arg(long, default_value = "cov.csv")]
    pub out: PathBuf,
}

impl CovCmd {
    pub fn lambda_times(&self) -> Result<Vec<f64>, CliError> {
        lambda_times(self.lambda_times.as_deref())
    }
}

pub fn lambda_times(s: Option<&str>) -> Result<Vec<f64>, CliError> {
    let v = s.map_or(Ok(Vec::new()), |s| numbers("--lambda-times", s))?;
    if v.iter().any(|t| !(*t >= 0.0)) {
        return Err(CliError::Usage("--lambda-times: times must be nonnegative".into()));
    }
    Ok(v)
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct SimulateCmd {
    #[command(flatten)]
    pub gen: GenArgs,
    #[command(flatten)]
    pub control: ControlArgs,
    /// Replicates
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Frailty family to fit [default: the generating family]
    #[arg(long)]
    pub fit_frailty: Option<String>,
    /// Times at which to summarize the estimated cumulative baseline hazard
    #[arg(long)]
    pub lambda_times: Option<String>,
    /// Standard errors: none, sandwich or bootstrap
    #[arg(long, default_value = "sandwich")]
    pub se: String,
    /// Bootstrap replicates when --se bootstrap
    #[arg(long = "B", visible_alias = "replicates", default_value_t = 100)]
    pub replicates: usize,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads
    #[arg(long, env = "FRAILTY_WORKERS")]
    pub workers: Option<usize>,
    /// Directory for summary.csv, reps.csv and manifest.txt
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct BenchCmd {
    /// generate, fit or sandwich
    #[arg(long, default_value = "fit")]
    pub op: String,
    /// Numbers of clusters
    #[arg(long, default_value = "50,100,150,200")]
    pub sizes: String,
    /// Frailty laws as name:theta
    #[arg(long, default_value = "gamma:2")]
    pub families: String,
    /// Timed runs per size
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[command(flatten)]
    pub control: ControlArgs,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for timings.csv, slopes.csv and manifest.txt
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct SweepCmd {
    #[command(flatten)]
    pub gen: GenArgs,
    #[command(flatten)]
    pub control: ControlArgs,
    /// abs-tol, rel-tol, int-abs-tol or int-rel-tol
    #[arg(long, default_value = "int-rel-tol")]
    pub param: String,
    /// Values of the swept tolerance
    #[arg(long, default_value = "1e-9,1e-7,1e-5,1e-3,1e-1")]
    pub values: String,
    /// Datasets per value
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads
    #[arg(long, env = "FRAILTY_WORKERS")]
    pub workers: Option<usize>,
    /// Directory for sweep.csv, points.csv and manifest.txt
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

impl BenchCmd {
    pub fn sizes(&self) -> Result<Vec<usize>, CliError> {
        list("--sizes", &self.sizes, |p| p.parse::<usize>())
    }
}

impl SweepCmd {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        numbers("--values", &self.values)
    }
}
