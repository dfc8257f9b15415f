use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use frailty::fit::{default_start, fit_model_from, summarize_curve, CurveType, FitResult};
use frailty::frailty::{FrailtyKind, FrailtySpec};
use frailty::sim::{benchmark, simulate, tolerance_sweep, BenchOp, BenchmarkConfig, SeMethod, SimulationConfig, SweepConfig, TolParam};
use frailty::variance::{bootstrap_cov, sandwich_cov, BootstrapOptions, CovarianceEstimate, CovarianceMethod, ExponentialWeights, UnitWeights};
use frailty::ClusteredDataset;

use crate::args::{lambda_times, parse_families, BenchCmd, CovCmd, FitCmd, GenerateCmd, InputArgs, SimulateCmd, SweepCmd};
use crate::error::CliError;
use crate::io::{num, read_dataset, write_csv, write_dataset};
use crate::manifest::Manifest;

/// Resolved options and the config file they came from, for the manifest.
pub struct RunInfo {
    pub options: Vec<(String, String)>,
    pub config: Option<PathBuf>,
}

impl RunInfo {
    fn manifest(&self, command: &str) -> Result<Manifest, CliError> {
        let mut m = Manifest::new(command, &self.options);
        if let Some(p) = &self.config {
            m.input("config", p)?;
        }
        Ok(m)
    }
}

fn sibling_manifest(out: &Path) -> PathBuf {
    out.with_extension("manifest")
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), num)
}

pub fn generate(cmd: &GenerateCmd, info: &RunInfo) -> Result<(), CliError> {
    let cfg = cmd.gen.config(cmd.seed)?;
    let data = frailty::datagen::generate(&cfg)?;
    if let Some(dir) = cmd.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_dataset(&cmd.out, &data)?;

    let mut s = String::new();
    writeln!(s, "Generated clustered survival data").unwrap();
    writeln!(s, "  Observations:          {}", data.len()).unwrap();
    writeln!(s, "  Clusters:              {}", data.n_clusters()).unwrap();
    writeln!(s, "  Avg. cluster size:     {:.2}", data.avg_cluster_size()).unwrap();
    writeln!(s, "  Right censoring rate:  {:.2}", data.censor_rate()).unwrap();
    writeln!(s, "  Frailty:               {}", cfg.frailty).unwrap();
    writeln!(s, "  Baseline:              {} = {}", cfg.baseline.mode.name(), cfg.baseline.label).unwrap();
    if let Some(c) = data.meta.censor_param {
        writeln!(s, "  Censoring parameter:   {c:.6}").unwrap();
    }
    if data.meta.n_unbounded > 0 {
        writeln!(s, "  Unbounded failure times: {}", data.meta.n_unbounded).unwrap();
    }
    print!("{s}");

    let mut m = info.manifest("generate")?;
    m.push("seed", cmd.seed);
    m.push("config_digest", cfg.digest());
    m.push("observations", data.len());
    m.push("clusters", data.n_clusters());
    m.push("censor_rate", num(data.censor_rate()));
    m.output("data", &cmd.out)?;
    m.write(&sibling_manifest(&cmd.out))
}

struct Fitted {
    data: ClusteredDataset,
    fit: FitResult,
    rows_dropped: usize,
}

fn run_fit(input: &InputArgs, control: &crate::args::ControlArgs) -> Result<Fitted, CliError> {
    let path = input.data_path()?;
    let kind = input.kind()?;
    let ctrl = control.control()?;
    let ing = read_dataset(path, &input.columns())?;
    if ing.rows_dropped > 0 {
        eprintln!(
            "warning: dropped {} of {} rows with missing values",
            ing.rows_dropped, ing.rows_read
        );
    }
    let spec = FrailtySpec {
        kind,
        theta: kind.initial_theta(),
    };
    let start = match input.theta_init {
        Some(t) => {
            let (lo, hi) = kind.theta_bounds();
            if !(t > lo && t < hi) {
                return Err(CliError::Usage(format!("--theta-init: {t} is outside ({lo}, {hi})")));
            }
            let mut g = default_start(&ing.data, kind)?;
            *g.last_mut().expect("theta entry") = t;
            Some(g)
        }
        None => None,
    };
    let fit = fit_model_from(&ing.data, &spec, &ctrl, start.as_deref())?;
    Ok(Fitted {
        data: ing.data,
        fit,
        rows_dropped: ing.rows_dropped,
    })
}

fn report(f: &Fitted) -> String {
    let fit = &f.fit;
    let mut s = String::new();
    writeln!(s, "Shared {} frailty model", fit.frailty.kind).unwrap();
    writeln!(s, "  n = {} observations, {} clusters, {} events", fit.n_obs, fit.n_clusters, fit.n_events).unwrap();
    if f.rows_dropped > 0 {
        writeln!(s, "  {} rows with missing values dropped", f.rows_dropped).unwrap();
    }
    writeln!(s).unwrap();
    let width = fit.covariate_names.iter().map(|n| n.len()).max().unwrap_or(4).max(4);
    writeln!(s, "  {:<width$}  {:>12}", "", "coef").unwrap();
    for (name, b) in fit.covariate_names.iter().zip(&fit.beta) {
        writeln!(s, "  {name:<width$}  {b:>12.6}").unwrap();
    }
    writeln!(s).unwrap();
    if fit.frailty.kind == FrailtyKind::None {
        writeln!(s, "Frailty distribution: none").unwrap();
    } else {
        let edge = if fit.boundary { "  (theta at the edge of its range)" } else { "" };
        writeln!(s, "Frailty distribution: {}({:.6}){edge}", fit.frailty.kind, fit.theta).unwrap();
        writeln!(s, "  VAR of frailty variates = {:.6}", fit.frailty.variance()).unwrap();
    }
    writeln!(s, "Log-likelihood: {:.6}", fit.loglik).unwrap();
    let status = if fit.converged { "Converged" } else { "Did not converge" };
    writeln!(s, "{status} ({}) after {} iterations: {}", fit.method, fit.iterations, fit.reason.describe()).unwrap();
    s
}

fn write_fit_artifacts(f: &Fitted, dir: &Path, m: &mut Manifest) -> Result<(), CliError> {
    let fit = &f.fit;
    let report_path = dir.join("report.txt");
    write_text(&report_path, &report(f))?;

    let header: Vec<String> = ["time", "n_risk", "n_event", "cumhaz", "surv"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = summarize_curve(fit, CurveType::CumHaz, None, false)
        .iter()
        .map(|r| vec![num(r.time), r.n_risk.to_string(), r.n_event.to_string(), num(r.value), num((-r.value).exp())])
        .collect();
    let baseline_path = dir.join("baseline.csv");
    write_csv(&baseline_path, &header, &rows)?;

    let mut header = vec!["iter".to_string()];
    header.extend(fit.parameter_labels());
    header.push("loglik".into());
    let rows: Vec<Vec<String>> = fit
        .trace
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut r = vec![i.to_string()];
            r.extend(t.gamma.iter().map(|&v| num(v)));
            r.push(num(t.loglik));
            r
        })
        .collect();
    let trace_path = dir.join("trace.csv");
    write_csv(&trace_path, &header, &rows)?;

    m.push("converged", fit.converged);
    m.push("iterations", fit.iterations);
    m.push("loglik", num(fit.loglik));
    for (l, v) in fit.parameter_labels().iter().zip(fit.free_parameters()) {
        m.push(format!("estimate.{l}"), num(v));
    }
    m.push("fit_digest", fit.digest());
    m.output("report", &report_path)?;
    m.output("baseline", &baseline_path)?;
    m.output("trace", &trace_path)
}

pub fn fit(cmd: &FitCmd, info: &RunInfo) -> Result<(), CliError> {
    let f = run_fit(&cmd.input, &cmd.control)?;
    ensure_dir(&cmd.out_dir)?;
    let mut m = info.manifest("fit")?;
    m.input("data", cmd.input.data_path()?)?;
    m.push("rows_dropped", f.rows_dropped);
    write_fit_artifacts(&f, &cmd.out_dir, &mut m)?;
    m.write(&cmd.out_dir.join("manifest.txt"))?;
    print!("{}", report(&f));
    if !f.fit.converged {
        return Err(CliError::NonConvergence(format!("fit did not converge: {}", f.fit.reason.describe())));
    }
    Ok(())
}

/// Rebuilds the fit flags recorded in a fit manifest and checks that the
/// data file is unchanged.
fn fit_from_manifest(path: &Path) -> Result<FitCmd, CliError> {
    use clap::{Args, FromArgMatches};
    let m = Manifest::read(path)?;
    if m.get("command") != Some("fit") {
        return Err(CliError::Usage(format!("--fit-manifest: {} is not a fit manifest", path.display())));
    }
    let mut argv = vec!["fit".to_string()];
    for (k, v) in m.options() {
        let flag = format!("--{}", k.replace('_', "-"));
        match v {
            "true" => argv.push(flag),
            "false" => {}
            v => {
                argv.push(flag);
                argv.push(v.to_string());
            }
        }
    }
    let command = FitCmd::augment_args(clap::Command::new("fit").no_binary_name(false));
    let matches = command
        .try_get_matches_from(&argv)
        .map_err(|e| CliError::Usage(format!("--fit-manifest: {e}")))?;
    let cmd = FitCmd::from_arg_matches(&matches).map_err(|e| CliError::Usage(format!("--fit-manifest: {e}")))?;
    let data = cmd.input.data_path()?;
    let recorded = m
        .get("input.data.sha256")
        .ok_or_else(|| CliError::Usage("--fit-manifest: no data digest recorded".into()))?;
    if crate::io::sha256_file(data)? != recorded {
        return Err(CliError::Usage(format!("--fit-manifest: {} changed since the fit", data.display())));
    }
    Ok(cmd)
}

fn write_cov(path: &Path, est: &CovarianceEstimate) -> Result<(), CliError> {
    let mut header = vec!["parameter".to_string()];
    header.extend(est.labels.iter().cloned());
    header.push("se".into());
    let se = est.standard_errors();
    let rows: Vec<Vec<String>> = est
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut r = vec![l.clone()];
            r.extend((0..est.labels.len()).map(|j| num(est.matrix[(i, j)])));
            r.push(num(se[i]));
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}

pub fn cov(cmd: &CovCmd, info: &RunInfo) -> Result<(), CliError> {
    let (input, control) = match &cmd.fit_manifest {
        Some(p) => {
            let f = fit_from_manifest(p)?;
            (f.input, f.control)
        }
        None => (cmd.input.clone(), cmd.control.clone()),
    };
    let times = cmd.lambda_times()?;
    let bootstrap = match cmd.method.as_str() {
        "sandwich" => false,
        "bootstrap" => true,
        other => return Err(CliError::Usage(format!("--method: unknown method '{other}' (expected sandwich or bootstrap)"))),
    };
    if !bootstrap && !times.is_empty() {
        return Err(CliError::Usage("--lambda-times: requires --method bootstrap".into()));
    }
    if !bootstrap && cmd.unit_weights {
        return Err(CliError::Usage("--unit-weights: requires --method bootstrap".into()));
    }
    if bootstrap && cmd.replicates < 2 {
        return Err(CliError::Usage("--B: at least two replicates are required".into()));
    }
    let f = run_fit(&input, &control)?;
    if !f.fit.converged {
        return Err(CliError::NonConvergence(format!("fit did not converge: {}", f.fit.reason.describe())));
    }
    let ctrl = control.control()?;
    let est = if bootstrap {
        let opts = BootstrapOptions {
            replicates: cmd.replicates,
            lambda_times: times,
            workers: cmd.workers,
        };
        if cmd.unit_weights {
            bootstrap_cov(&f.data, &f.fit, &ctrl, &opts, &UnitWeights)?
        } else {
            bootstrap_cov(&f.data, &f.fit, &ctrl, &opts, &ExponentialWeights { seed: cmd.seed })?
        }
    } else {
        sandwich_cov(&f.data, &f.fit, &ctrl)?
    };
    if let Some(dir) = cmd.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_cov(&cmd.out, &est)?;

    println!("Covariance: {}", est.method.describe());
    for (l, s) in est.labels.iter().zip(est.standard_errors()) {
        println!("  SE({l}) = {s:.6}");
    }
    let mut m = info.manifest("cov")?;
    m.input("data", input.data_path()?)?;
    if let Some(p) = &cmd.fit_manifest {
        m.input("fit_manifest", p)?;
    }
    m.push("seed", cmd.seed);
    m.push("method", est.method.describe());
    if let CovarianceMethod::Bootstrap { requested, converged } = est.method {
        m.push("bootstrap.requested", requested);
        m.push("bootstrap.converged", converged);
    }
    m.push("fit_digest", f.fit.digest());
    m.push("cache_key", &est.cache_key);
    m.output("cov", &cmd.out)?;
    m.write(&sibling_manifest(&cmd.out))
}

pub fn simulate_cmd(cmd: &SimulateCmd, info: &RunInfo) -> Result<(), CliError> {
    let generation = cmd.gen.config(cmd.seed)?;
    let control = cmd.control.control()?;
    let fit_family = match &cmd.fit_frailty {
        Some(s) => FrailtyKind::parse(s).map_err(|e| CliError::flag("--fit-frailty", e))?,
        None => generation.frailty.kind,
    };
    if !fit_family.is_estimable() {
        return Err(CliError::Usage(format!("--fit-frailty: {fit_family} cannot be fitted")));
    }
    if cmd.reps == 0 {
        return Err(CliError::Usage("--reps: must be positive".into()));
    }
    let se = SeMethod::parse(&cmd.se, cmd.replicates).map_err(|e| CliError::flag("--se", e))?;
    let mut cfg = SimulationConfig::new(cmd.reps, generation, cmd.seed);
    cfg.fit_family = fit_family;
    cfg.control = control;
    cfg.lambda_times = lambda_times(cmd.lambda_times.as_deref())?;
    cfg.se = se;
    cfg.workers = cmd.workers;
    let s = simulate(&cfg)?;

    ensure_dir(&cmd.out_dir)?;
    let mut header = vec![String::new()];
    header.extend(s.rows.iter().map(|r| r.name.clone()));
    let stat = |name: &str, f: &dyn Fn(&frailty::sim::ParameterRow) -> String| {
        let mut v = vec![name.to_string()];
        v.extend(s.rows.iter().map(f));
        v
    };
    let rows = vec![
        stat("value", &|r| num(r.value)),
        stat("mean.hat", &|r| num(r.mean_hat)),
        stat("sd.hat", &|r| opt(r.sd_hat)),
        stat("mean.se", &|r| opt(r.mean_se)),
        stat("cov.95CI", &|r| opt(r.cov_95ci)),
    ];
    let summary_path = cmd.out_dir.join("summary.csv");
    write_csv(&summary_path, &header, &rows)?;

    let n_se = s.rows.iter().filter(|r| !r.name.starts_with("Lambda.")).count();
    let mut header: Vec<String> = ["rep", "seed", "converged"].iter().map(|s| s.to_string()).collect();
    header.extend(s.rows.iter().map(|r| r.name.clone()));
    header.extend(s.rows[..n_se].iter().map(|r| format!("se.{}", r.name)));
    header.push("error".into());
    let rows: Vec<Vec<String>> = s
        .outcomes
        .iter()
        .map(|o| {
            let mut r = vec![(o.rep + 1).to_string(), o.seed.to_string(), o.converged.to_string()];
            r.extend((0..s.rows.len()).map(|k| o.estimates.get(k).map_or("NA".into(), |&v| num(v))));
            r.extend((0..n_se).map(|k| opt(o.standard_errors.as_ref().and_then(|v| v.get(k).copied()))));
            r.push(o.error.clone().unwrap_or_default());
            r
        })
        .collect();
    let reps_path = cmd.out_dir.join("reps.csv");
    write_csv(&reps_path, &header, &rows)?;

    println!("{} replicates, {} converged", s.reps, s.converged);
    let width = s.rows.iter().map(|r| r.name.len()).max().unwrap_or(8).max(10);
    print!("{:<9}", "");
    for r in &s.rows {
        print!(" {:>width$}", r.name);
    }
    println!();
    for row in &rows_for_print(&s) {
        print!("{:<9}", row.0);
        for v in &row.1 {
            print!(" {:>width$}", v);
        }
        println!();
    }
    println!("runtime: {:.2} s total, {:.3} s per replicate", s.runtime_total, s.runtime_mean);

    let mut m = info.manifest("simulate")?;
    m.push("seed", cmd.seed);
    m.push("config_digest", cfg.generation.digest());
    m.push("converged", s.converged);
    m.push("runtime_total", num(s.runtime_total));
    m.output("summary", &summary_path)?;
    m.output("reps", &reps_path)?;
    m.write(&cmd.out_dir.join("manifest.txt"))
}

fn rows_for_print(s: &frailty::sim::SimulationSummary) -> Vec<(&'static str, Vec<String>)> {
    let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
    vec![
        ("value", s.rows.iter().map(|r| f(Some(r.value))).collect()),
        ("mean.hat", s.rows.iter().map(|r| f(Some(r.mean_hat))).collect()),
        ("sd.hat", s.rows.iter().map(|r| f(r.sd_hat)).collect()),
        ("mean.se", s.rows.iter().map(|r| f(r.mean_se)).collect()),
        ("cov.95CI", s.rows.iter().map(|r| f(r.cov_95ci)).collect()),
    ]
}

pub fn bench(cmd: &BenchCmd, info: &RunInfo) -> Result<(), CliError> {
    let op = BenchOp::parse(&cmd.op).map_err(|e| CliError::flag("--op", e))?;
    let sizes = cmd.sizes()?;
    if sizes.len() < 4 || sizes.contains(&0) {
        return Err(CliError::Usage("--sizes: at least four positive sizes are required".into()));
    }
    if cmd.reps == 0 {
        return Err(CliError::Usage("--reps: must be positive".into()));
    }
    let families = parse_families("--families", &cmd.families)?;
    if let Some(f) = families.iter().find(|f| op != BenchOp::Generate && !f.kind.is_estimable()) {
        return Err(CliError::Usage(format!("--families: {} cannot be fitted", f.kind)));
    }
    let mut cfg = BenchmarkConfig::new(op, sizes, families, cmd.reps, cmd.seed);
    cfg.control = cmd.control.control()?;
    let r = benchmark(&cfg)?;

    ensure_dir(&cmd.out_dir)?;
    let header: Vec<String> = ["op", "family", "n", "rep", "seconds"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = r
        .timings
        .iter()
        .map(|t| vec![t.op.name().into(), t.family.name().into(), t.size.to_string(), (t.rep + 1).to_string(), num(t.seconds)])
        .collect();
    let timings_path = cmd.out_dir.join("timings.csv");
    write_csv(&timings_path, &header, &rows)?;
    let header: Vec<String> = ["op", "family", "slope", "lower", "upper"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = r
        .slopes
        .iter()
        .map(|s| vec![s.op.name().into(), s.family.name().into(), num(s.slope.estimate), num(s.slope.lower), num(s.slope.upper)])
        .collect();
    let slopes_path = cmd.out_dir.join("slopes.csv");
    write_csv(&slopes_path, &header, &rows)?;

    for s in &r.slopes {
        println!(
            "{} {}: log-log slope {:.3} (95% CI {:.3} to {:.3})",
            s.op.name(),
            s.family,
            s.slope.estimate,
            s.slope.lower,
            s.slope.upper
        );
    }
    let mut m = info.manifest("bench")?;
    m.push("seed", cmd.seed);
    m.output("timings", &timings_path)?;
    m.output("slopes", &slopes_path)?;
    m.write(&cmd.out_dir.join("manifest.txt"))
}

pub fn sweep(cmd: &SweepCmd, info: &RunInfo) -> Result<(), CliError> {
    let param = TolParam::parse(&cmd.param).map_err(|e| CliError::flag("--param", e))?;
    let values = cmd.values()?;
    if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
        return Err(CliError::Usage("--values: values must be positive".into()));
    }
    if cmd.reps == 0 {
        return Err(CliError::Usage("--reps: must be positive".into()));
    }
    let generation = cmd.gen.config(cmd.seed)?;
    if !generation.frailty.kind.is_estimable() {
        return Err(CliError::Usage(format!("--frailty: {} cannot be fitted", generation.frailty.kind)));
    }
    let cfg = SweepConfig {
        param,
        values,
        generation,
        control: cmd.control.control()?,
        reps: cmd.reps,
        seed: cmd.seed,
        workers: cmd.workers,
    };
    let r = tolerance_sweep(&cfg)?;

    ensure_dir(&cmd.out_dir)?;
    let p = cfg.generation.beta.len();
    let has_theta = r.rows.first().is_some_and(|row| row.residual_theta.is_some());
    let mut names: Vec<String> = (1..=p).map(|k| format!("beta.Z{k}")).collect();
    if has_theta {
        names.push("theta".into());
    }
    let mut header: Vec<String> = ["value", "converged", "runtime.mean", "runtime.lower", "runtime.upper"].iter().map(|s| s.to_string()).collect();
    header.extend(names.iter().map(|n| format!("residual.{n}")));
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|row| {
            let mut v = vec![num(row.value), row.converged.to_string(), num(row.runtime.estimate), num(row.runtime.lower), num(row.runtime.upper)];
            v.extend(row.residual_beta.iter().map(|i| num(i.estimate)));
            if let Some(t) = row.residual_theta {
                v.push(num(t.estimate));
            }
            v
        })
        .collect();
    let sweep_path = cmd.out_dir.join("sweep.csv");
    write_csv(&sweep_path, &header, &rows)?;
    let mut header: Vec<String> = ["value", "rep", "seconds"].iter().map(|s| s.to_string()).collect();
    header.extend(names.iter().map(|n| format!("residual.{n}")));
    let rows: Vec<Vec<String>> = r
        .points
        .iter()
        .map(|pt| {
            let mut v = vec![num(pt.value), (pt.rep + 1).to_string(), num(pt.seconds)];
            v.extend(pt.residuals.iter().map(|&x| num(x)));
            v
        })
        .collect();
    let points_path = cmd.out_dir.join("points.csv");
    write_csv(&points_path, &header, &rows)?;

    for row in &r.rows {
        println!("{} = {:e}: mean runtime {:.4} s, {} converged", param.name(), row.value, row.runtime.estimate, row.converged);
    }
    let trend = r.runtime_trend();
    println!("runtime trend: Spearman rho {:.3}, p = {:.3e}", trend.rho, trend.p_value);
    for (k, n) in names.iter().enumerate() {
        let t = r.residual_change(k);
        println!("{n} residual, first vs last value: Welch p = {:.3}", t.p_value);
    }
    let mut m = info.manifest("sweep")?;
    m.push("seed", cmd.seed);
    m.push("spearman_rho", num(trend.rho));
    m.push("spearman_p", num(trend.p_value));
    m.output("sweep", &sweep_path)?;
    m.output("points", &points_path)?;
    m.write(&cmd.out_dir.join("manifest.txt"))
}
