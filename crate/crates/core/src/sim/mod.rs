//! Replication studies, runtime benchmarks and tolerance sweeps over
//! generated datasets.

mod stats;

use std::time::Instant;

use crate::datagen::{generate, GenerationConfig};
use crate::error::{FrailtyError, Result};
use crate::fit::{fit_model, FitControl, FitResult};
use crate::frailty::{FrailtyKind, FrailtySpec};
use crate::numerics::QuadratureControl;
use crate::pool::{derive_seed, map_indexed};
use crate::variance::{bootstrap_cov, sandwich_cov, BootstrapOptions, ExponentialWeights};

pub use stats::{mean_interval, mean_sd, ols_slope, ranks, spearman, welch_t_test, wilson_interval, Correlation, Interval, TTest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeMethod {
    None,
    Sandwich,
    Bootstrap { replicates: usize },
}

impl SeMethod {
    pub fn parse(s: &str, replicates: usize) -> Result<Self> {
        match s {
            "none" => Ok(SeMethod::None),
            "sandwich" => Ok(SeMethod::Sandwich),
            "bootstrap" => Ok(SeMethod::Bootstrap { replicates }),
            other => Err(FrailtyError::InvalidParameter(format!("unknown standard-error method '{other}'"))),
        }
    }
}

/// Everything a replication study needs; rep `r` generates from
/// `generation` with seed `derive_seed(seed, r)`.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub reps: usize,
    pub generation: GenerationConfig,
    /// Family to fit; its θ is only a label.
    pub fit_family: FrailtyKind,
    pub control: FitControl,
    pub lambda_times: Vec<f64>,
    pub se: SeMethod,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl SimulationConfig {
    pub fn new(reps: usize, generation: GenerationConfig, seed: u64) -> Self {
        Self {
            reps,
            fit_family: generation.frailty.kind,
            generation,
            control: FitControl::default(),
            lambda_times: Vec::new(),
            se: SeMethod::Sandwich,
            seed,
            workers: None,
        }
    }
}

/// Outcome of one replicate: estimates followed by `Λ̂(t)` values.
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub rep: usize,
    pub seed: u64,
    pub converged: bool,
    pub estimates: Vec<f64>,
    pub standard_errors: Option<Vec<f64>>,
    /// Smallest jump of the fitted baseline.
    pub min_increment: f64,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ParameterRow {
    pub name: String,
    pub value: f64,
    pub mean_hat: f64,
    pub sd_hat: Option<f64>,
    pub mean_se: Option<f64>,
    pub cov_95ci: Option<f64>,
    pub cov_interval: Option<Interval>,
}

#[derive(Debug, Clone)]
pub struct SimulationSummary {
    pub reps: usize,
    pub converged: usize,
    pub failed: usize,
    pub rows: Vec<ParameterRow>,
    pub lambda_times: Vec<f64>,
    pub runtime_total: f64,
    pub runtime_mean: f64,
    pub runtime_sd: Option<f64>,
    pub outcomes: Vec<RepOutcome>,
}

impl SimulationSummary {
    pub fn row(&self, name: &str) -> Option<&ParameterRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// True `Λ₀(t)` of the generating configuration.
pub fn true_cumulative_hazard(config: &GenerationConfig, times: &[f64]) -> Result<Vec<f64>> {
    let quad = QuadratureControl::tight();
    times.iter().map(|&t| config.baseline.cumulative_at(t, &quad)).collect()
}

fn run_rep(cfg: &SimulationConfig, rep: usize) -> RepOutcome {
    let seed = derive_seed(cfg.seed, rep as u64);
    let start = Instant::now();
    let mut out = RepOutcome {
        rep,
        seed,
        converged: false,
        estimates: Vec::new(),
        standard_errors: None,
        min_increment: f64::NAN,
        seconds: 0.0,
        error: None,
    };
    let result = (|| -> Result<(FitResult, Option<Vec<f64>>)> {
        let generation = GenerationConfig { seed, ..cfg.generation.clone() };
        let data = generate(&generation)?;
        let family = FrailtySpec {
            kind: cfg.fit_family,
            theta: cfg.fit_family.initial_theta(),
        };
        let fit = fit_model(&data, &family, &cfg.control)?;
        if !fit.converged {
            return Ok((fit, None));
        }
        let se = match cfg.se {
            SeMethod::None => None,
            SeMethod::Sandwich => Some(sandwich_cov(&data, &fit, &cfg.control)),
            SeMethod::Bootstrap { replicates } => {
                let mut opts = BootstrapOptions::new(replicates);
                opts.workers = Some(1);
                Some(bootstrap_cov(&data, &fit, &cfg.control, &opts, &ExponentialWeights { seed: derive_seed(seed, u64::MAX) }))
            }
        };
        let se = match se {
            Some(Ok(est)) => Some(est.standard_errors()),
            Some(Err(e)) => {
                log::warn!("rep {rep}: standard errors unavailable: {e}");
                None
            }
            None => None,
        };
        Ok((fit, se))
    })();
    match result {
        Ok((fit, se)) => {
            out.converged = fit.converged;
            let mut est = fit.free_parameters();
            est.extend(cfg.lambda_times.iter().map(|&t| fit.baseline.value(t)));
            out.estimates = est;
            out.standard_errors = se;
            out.min_increment = fit.baseline.increments().into_iter().fold(f64::INFINITY, f64::min);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out.seconds = start.elapsed().as_secs_f64();
    out
}

fn lambda_name(t: f64) -> String {
    format!("Lambda.{t}")
}

/// Runs the replication study and summarizes the converged replicates.
pub fn simulate(cfg: &SimulationConfig) -> Result<SimulationSummary> {
    if cfg.reps == 0 {
        return Err(FrailtyError::InvalidParameter("reps must be at least 1".into()));
    }
    cfg.generation.validate()?;
    cfg.control.validate()?;
    let truth_lambda = true_cumulative_hazard(&cfg.generation, &cfg.lambda_times)?;
    let start = Instant::now();
    let outcomes = map_indexed(cfg.workers, cfg.reps, |r| run_rep(cfg, r));
    let runtime_total = start.elapsed().as_secs_f64();

    let good: Vec<&RepOutcome> = outcomes.iter().filter(|o| o.converged).collect();
    let failed = cfg.reps - good.len();
    if failed > 0 {
        log::warn!("{failed} of {} replicates failed or did not converge", cfg.reps);
    }
    let p = cfg.generation.beta.len();
    let mut names: Vec<String> = (1..=p).map(|k| format!("beta.Z{k}")).collect();
    let mut values = cfg.generation.beta.clone();
    if cfg.fit_family != FrailtyKind::None {
        names.push("theta".into());
        values.push(if cfg.generation.frailty.kind == FrailtyKind::None { 0.0 } else { cfg.generation.frailty.theta });
    }
    let n_gamma = names.len();
    names.extend(cfg.lambda_times.iter().map(|&t| lambda_name(t)));
    values.extend(truth_lambda);

    let rows = names
        .into_iter()
        .zip(values)
        .enumerate()
        .map(|(k, (name, value))| {
            let est: Vec<f64> = good.iter().map(|o| o.estimates[k]).collect();
            let (mean_hat, sd_hat) = if est.is_empty() { (f64::NAN, None) } else { mean_sd(&est) };
            let (mut mean_se, mut cov_95ci, mut cov_interval) = (None, None, None);
            if k < n_gamma && cfg.se != SeMethod::None {
                let with_se: Vec<(f64, f64)> = good.iter().filter_map(|o| o.standard_errors.as_ref().map(|s| (o.estimates[k], s[k]))).collect();
                if !with_se.is_empty() {
                    let ses: Vec<f64> = with_se.iter().map(|&(_, s)| s).collect();
                    mean_se = Some(mean_sd(&ses).0);
                    let hits = with_se.iter().filter(|&&(e, s)| (e - value).abs() <= 1.96 * s).count();
                    let w = wilson_interval(hits, with_se.len());
                    cov_95ci = Some(w.estimate);
                    cov_interval = Some(w);
                }
            }
            ParameterRow {
                name,
                value,
                mean_hat,
                sd_hat,
                mean_se,
                cov_95ci,
                cov_interval,
            }
        })
        .collect();
    let secs: Vec<f64> = outcomes.iter().map(|o| o.seconds).collect();
    let (runtime_mean, runtime_sd) = mean_sd(&secs);
    Ok(SimulationSummary {
        reps: cfg.reps,
        converged: good.len(),
        failed,
        rows,
        lambda_times: cfg.lambda_times.clone(),
        runtime_total,
        runtime_mean,
        runtime_sd,
        outcomes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchOp {
    Generate,
    Fit,
    Sandwich,
}

impl BenchOp {
    pub fn name(self) -> &'static str {
        match self {
            BenchOp::Generate => "generate",
            BenchOp::Fit => "fit",
            BenchOp::Sandwich => "sandwich_cov",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "generate" => Ok(BenchOp::Generate),
            "fit" => Ok(BenchOp::Fit),
            "sandwich" | "sandwich_cov" | "cov" => Ok(BenchOp::Sandwich),
            other => Err(FrailtyError::InvalidParameter(format!("unknown benchmark operation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub op: BenchOp,
    /// Numbers of clusters.
    pub sizes: Vec<usize>,
    pub families: Vec<FrailtySpec>,
    pub reps: usize,
    pub seed: u64,
    pub control: FitControl,
    /// Builds the generating configuration for `(n, family, seed)`.
    pub design: fn(usize, FrailtySpec, u64) -> GenerationConfig,
}

impl BenchmarkConfig {
    pub fn new(op: BenchOp, sizes: Vec<usize>, families: Vec<FrailtySpec>, reps: usize, seed: u64) -> Self {
        Self {
            op,
            sizes,
            families,
            reps,
            seed,
            control: FitControl::default(),
            design: GenerationConfig::performance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Timing {
    pub op: BenchOp,
    pub family: FrailtyKind,
    pub size: usize,
    pub rep: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SlopeFit {
    pub op: BenchOp,
    pub family: FrailtyKind,
    /// OLS slope of log seconds against log n with its 95% interval.
    pub slope: Interval,
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub sizes: Vec<usize>,
    pub timings: Vec<Timing>,
    pub slopes: Vec<SlopeFit>,
}

impl BenchmarkReport {
    pub fn mean_seconds(&self, family: FrailtyKind, size: usize) -> f64 {
        let v: Vec<f64> = self.timings.iter().filter(|t| t.family == family && t.size == size).map(|t| t.seconds).collect();
        mean_sd(&v).0
    }
}

/// Times `op` serially at each size and family, discarding one warm-up run
/// per point, and fits log-log slopes over all timed runs.
pub fn benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if cfg.sizes.len() < 4 {
        return Err(FrailtyError::InvalidParameter("a benchmark needs at least four sizes".into()));
    }
    if cfg.reps == 0 || cfg.families.is_empty() {
        return Err(FrailtyError::InvalidParameter("a benchmark needs at least one rep and one family".into()));
    }
    let mut timings = Vec::new();
    let mut slopes = Vec::new();
    for (fi, family) in cfg.families.iter().enumerate() {
        let start_family = FrailtySpec {
            kind: family.kind,
            theta: family.kind.initial_theta(),
        };
        for (si, &n) in cfg.sizes.iter().enumerate() {
            for rep in 0..=cfg.reps {
                let seed = derive_seed(cfg.seed, ((fi * cfg.sizes.len() + si) * (cfg.reps + 1) + rep) as u64);
                let generation = (cfg.design)(n, *family, seed);
                let seconds = match cfg.op {
                    BenchOp::Generate => {
                        let t = Instant::now();
                        generate(&generation)?;
                        t.elapsed().as_secs_f64()
                    }
                    BenchOp::Fit => {
                        let data = generate(&generation)?;
                        let t = Instant::now();
                        fit_model(&data, &start_family, &cfg.control)?;
                        t.elapsed().as_secs_f64()
                    }
                    BenchOp::Sandwich => {
                        let data = generate(&generation)?;
                        let fit = fit_model(&data, &start_family, &cfg.control)?;
                        let t = Instant::now();
                        sandwich_cov(&data, &fit, &cfg.control)?;
                        t.elapsed().as_secs_f64()
                    }
                };
                if rep > 0 {
                    timings.push(Timing {
                        op: cfg.op,
                        family: family.kind,
                        size: n,
                        rep: rep - 1,
                        seconds: seconds.max(1e-9),
                    });
                }
            }
        }
        let points: Vec<&Timing> = timings.iter().filter(|t| t.family == family.kind).collect();
        let x: Vec<f64> = points.iter().map(|t| (t.size as f64).ln()).collect();
        let y: Vec<f64> = points.iter().map(|t| t.seconds.ln()).collect();
        slopes.push(SlopeFit {
            op: cfg.op,
            family: family.kind,
            slope: ols_slope(&x, &y),
        });
    }
    Ok(BenchmarkReport {
        sizes: cfg.sizes.clone(),
        timings,
        slopes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TolParam {
    AbsTol,
    RelTol,
    IntAbsTol,
    IntRelTol,
}

impl TolParam {
    pub fn name(self) -> &'static str {
        match self {
            TolParam::AbsTol => "abs_tol",
            TolParam::RelTol => "rel_tol",
            TolParam::IntAbsTol => "int_abs_tol",
            TolParam::IntRelTol => "int_rel_tol",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "abs_tol" | "abstol" => Ok(TolParam::AbsTol),
            "rel_tol" | "reltol" => Ok(TolParam::RelTol),
            "int_abs_tol" | "int_abstol" => Ok(TolParam::IntAbsTol),
            "int_rel_tol" | "int_reltol" => Ok(TolParam::IntRelTol),
            other => Err(FrailtyError::InvalidParameter(format!("unknown tolerance '{other}'"))),
        }
    }

    /// `base` with this tolerance set to `value` and its partner set to zero.
    pub fn apply(self, base: &FitControl, value: f64) -> FitControl {
        let mut c = base.clone();
        match self {
            TolParam::AbsTol => {
                c.abs_tol = value;
                c.rel_tol = 0.0;
            }
            TolParam::RelTol => {
                c.rel_tol = value;
                c.abs_tol = 0.0;
            }
            TolParam::IntAbsTol => {
                c.int_abs_tol = value;
                c.int_rel_tol = 0.0;
            }
            TolParam::IntRelTol => {
                c.int_rel_tol = value;
                c.int_abs_tol = 0.0;
            }
        }
        c
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub param: TolParam,
    pub values: Vec<f64>,
    pub generation: GenerationConfig,
    pub control: FitControl,
    pub reps: usize,
    pub seed: u64,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub runtime: Interval,
    /// `β̂ − β` per coefficient.
    pub residual_beta: Vec<Interval>,
    pub residual_theta: Option<Interval>,
    pub converged: usize,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub rep: usize,
    pub seconds: f64,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub param: TolParam,
    pub rows: Vec<SweepRow>,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// Rank correlation of tolerance against runtime over all timed fits.
    pub fn runtime_trend(&self) -> Correlation {
        let x: Vec<f64> = self.points.iter().map(|p| p.value).collect();
        let y: Vec<f64> = self.points.iter().map(|p| p.seconds).collect();
        spearman(&x, &y)
    }

    /// Welch test of residual `k` between the first and the last value.
    pub fn residual_change(&self, k: usize) -> TTest {
        let pick = |v: f64| -> Vec<f64> { self.points.iter().filter(|p| p.value == v).map(|p| p.residuals[k]).collect() };
        let first = self.rows.first().map_or(f64::NAN, |r| r.value);
        let last = self.rows.last().map_or(f64::NAN, |r| r.value);
        welch_t_test(&pick(first), &pick(last))
    }
}

/// Fits the same `reps` datasets at each tolerance value. Rep `r` uses seed
/// `derive_seed(seed, r)` for every value.
pub fn tolerance_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.values.is_empty() || cfg.values.iter().any(|v| !(*v > 0.0)) {
        return Err(FrailtyError::InvalidParameter("sweep values must be positive".into()));
    }
    if cfg.reps == 0 {
        return Err(FrailtyError::InvalidParameter("reps must be at least 1".into()));
    }
    cfg.generation.validate()?;
    let datasets: Vec<_> = map_indexed(cfg.workers, cfg.reps, |r| {
        generate(&GenerationConfig {
            seed: derive_seed(cfg.seed, r as u64),
            ..cfg.generation.clone()
        })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let kind = cfg.generation.frailty.kind;
    let start_family = FrailtySpec {
        kind,
        theta: kind.initial_theta(),
    };
    let mut truth = cfg.generation.beta.clone();
    if kind != FrailtyKind::None {
        truth.push(cfg.generation.frailty.theta);
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &value in &cfg.values {
        let control = cfg.param.apply(&cfg.control, value);
        control.validate()?;
        let runs = map_indexed(cfg.workers, cfg.reps, |r| {
            let t = Instant::now();
            let fit = fit_model(&datasets[r], &start_family, &control);
            (fit, t.elapsed().as_secs_f64())
        });
        let mut here = Vec::new();
        for (r, (fit, seconds)) in runs.into_iter().enumerate() {
            match fit {
                Ok(f) if f.converged => {
                    let residuals = f.free_parameters().iter().zip(&truth).map(|(a, b)| a - b).collect();
                    here.push(SweepPoint { value, rep: r, seconds, residuals });
                }
                Ok(_) => log::warn!("{} = {value}: rep {r} did not converge", cfg.param.name()),
                Err(e) => log::warn!("{} = {value}: rep {r} failed: {e}", cfg.param.name()),
            }
        }
        let p = cfg.generation.beta.len();
        let column = |k: usize| -> Vec<f64> { here.iter().map(|pt| pt.residuals[k]).collect() };
        let secs: Vec<f64> = here.iter().map(|pt| pt.seconds).collect();
        rows.push(SweepRow {
            value,
            runtime: if secs.is_empty() { nan_interval() } else { mean_interval(&secs) },
            residual_beta: (0..p).map(|k| if here.is_empty() { nan_interval() } else { mean_interval(&column(k)) }).collect(),
            residual_theta: (kind != FrailtyKind::None).then(|| if here.is_empty() { nan_interval() } else { mean_interval(&column(p)) }),
            converged: here.len(),
        });
        points.extend(here);
    }
    Ok(SweepReport {
        param: cfg.param,
        rows,
        points,
    })
}

fn nan_interval() -> Interval {
    Interval {
        estimate: f64::NAN,
        lower: f64::NAN,
        upper: f64::NAN,
    }
}

#[cfg(test)]
mod tests;
