//! Semiparametric shared-frailty estimation: baseline hazard recursion,
//! log-likelihood, score equations, the alternating fit and summary curves.

mod curve;
pub(crate) mod objective;
pub(crate) mod prepared;
pub(crate) mod problem;
pub(crate) mod recursion;
pub(crate) mod solver;
mod step;

use sha2::{Digest, Sha256};

use crate::coxinit::cox_fit_prepared;
use crate::data::{ClusteredDataset, Record};
use crate::error::{FrailtyError, Result};
use crate::frailty::{FrailtyKind, FrailtySpec};
use crate::numerics::QuadratureControl;

pub use curve::{summarize_curve, CurveRow, CurveType};
pub use step::StepFunction;

use prepared::Prepared;
use problem::Problem;
use recursion::BaselineJumps;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitMethod {
    /// Alternate baseline refreshes with quasi-Newton ascent of ℓ.
    Loglik,
    /// Damped Newton on the profile score equations.
    Score,
}

impl FitMethod {
    pub fn name(self) -> &'static str {
        match self {
            FitMethod::Loglik => "loglik",
            FitMethod::Score => "score",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "loglik" => Ok(FitMethod::Loglik),
            "score" => Ok(FitMethod::Score),
            _ => Err(FrailtyError::InvalidParameter(format!("unknown fit method '{s}' (expected loglik or score)"))),
        }
    }
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How much ascent the loglik method does per baseline refresh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InnerSolve {
    SingleStep,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitControl {
    pub fit_method: FitMethod,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub int_abs_tol: f64,
    pub int_rel_tol: f64,
    pub int_max_evals: usize,
    pub verbose: bool,
    pub inner: InnerSolve,
}

impl Default for FitControl {
    fn default() -> Self {
        Self {
            fit_method: FitMethod::Loglik,
            abs_tol: 0.0,
            rel_tol: 1e-6,
            max_iter: 100,
            int_abs_tol: 0.0,
            int_rel_tol: 1.0,
            int_max_evals: 1000,
            verbose: false,
            inner: InnerSolve::SingleStep,
        }
    }
}

impl FitControl {
    pub fn quadrature(&self) -> QuadratureControl {
        QuadratureControl::new(self.int_abs_tol, self.int_rel_tol, self.int_max_evals)
    }

    pub fn with_method(mut self, method: FitMethod) -> Self {
        self.fit_method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let tols = [self.abs_tol, self.rel_tol, self.int_abs_tol, self.int_rel_tol];
        if tols.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(FrailtyError::InvalidParameter("tolerances must be finite and nonnegative".into()));
        }
        if self.max_iter == 0 || self.int_max_evals == 0 {
            return Err(FrailtyError::InvalidParameter("iteration and evaluation limits must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn digest_into(&self, h: &mut Sha256) {
        h.update(self.fit_method.name());
        for v in [self.abs_tol, self.rel_tol, self.int_abs_tol, self.int_rel_tol] {
            h.update(v.to_le_bytes());
        }
        h.update((self.max_iter as u64).to_le_bytes());
        h.update((self.int_max_evals as u64).to_le_bytes());
        h.update([self.inner as u8]);
    }
}

/// γ = (β, θ).
#[derive(Debug, Clone, PartialEq)]
pub struct GammaParams {
    pub beta: Vec<f64>,
    pub theta: f64,
}

impl GammaParams {
    pub fn new(beta: Vec<f64>, theta: f64) -> Self {
        Self { beta, theta }
    }

    /// β followed by θ.
    pub fn pack(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        v.push(self.theta);
        v
    }

    pub fn unpack(v: &[f64]) -> Self {
        let (theta, beta) = v.split_last().expect("gamma vector is empty");
        Self {
            beta: beta.to_vec(),
            theta: *theta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub gamma: Vec<f64>,
    pub loglik: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceReason {
    AbsoluteLoglik,
    RelativeLoglik,
    AbsoluteScore,
    RelativeStep,
    LineSearchFailure,
    MaxIterations,
}

impl ConvergenceReason {
    pub fn describe(self) -> &'static str {
        match self {
            ConvergenceReason::AbsoluteLoglik => "absolute change in log-likelihood below abs_tol",
            ConvergenceReason::RelativeLoglik => "relative change in log-likelihood below rel_tol",
            ConvergenceReason::AbsoluteScore => "normalized scores below abs_tol",
            ConvergenceReason::RelativeStep => "relative parameter change below rel_tol",
            ConvergenceReason::LineSearchFailure => "no improving step found",
            ConvergenceReason::MaxIterations => "iteration limit reached",
        }
    }
}

/// Distinct observed time with its event and censoring counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskRow {
    pub time: f64,
    pub n_event: usize,
    pub n_censor: usize,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub theta: f64,
    pub frailty: FrailtySpec,
    pub loglik: f64,
    /// Cumulative baseline hazard at the distinct failure times.
    pub baseline: StepFunction,
    /// Cumulative baseline hazard at every distinct observed time.
    pub baseline_all: StepFunction,
    pub iterations: usize,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    pub method: FitMethod,
    pub reason: ConvergenceReason,
    pub boundary: bool,
    /// Profile score at the estimate divided by the number of clusters.
    pub score: Vec<f64>,
    pub covariate_names: Vec<String>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub n_events: usize,
    pub control: FitControl,
    pub risk_table: Vec<RiskRow>,
}

impl FitResult {
    pub fn gamma(&self) -> GammaParams {
        GammaParams::new(self.beta.clone(), self.theta)
    }

    /// Packed free parameters: β, then θ unless the fit has no frailty.
    pub fn free_parameters(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        if self.frailty.kind != FrailtyKind::None {
            v.push(self.theta);
        }
        v
    }

    pub fn parameter_labels(&self) -> Vec<String> {
        let mut v = self.covariate_names.clone();
        if self.frailty.kind != FrailtyKind::None {
            v.push("theta".into());
        }
        v
    }

    /// Hex digest of the estimate and its settings, used as a cache key.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.frailty.kind.name());
        for v in self.free_parameters().iter().chain([self.loglik].iter()) {
            h.update(v.to_le_bytes());
        }
        for v in &self.baseline.cum_values {
            h.update(v.to_le_bytes());
        }
        h.update((self.n_obs as u64).to_le_bytes());
        self.control.digest_into(&mut h);
        hex_string(&h.finalize())
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn theta_for(spec: &FrailtySpec, gamma: &GammaParams) -> Vec<f64> {
    let mut g = gamma.beta.clone();
    if spec.kind != FrailtyKind::None {
        g.push(gamma.theta);
    }
    g
}

fn check_dim(prep: &Prepared, gamma: &GammaParams) -> Result<()> {
    if gamma.beta.len() != prep.p {
        return Err(FrailtyError::InvalidParameter(format!("beta has {} entries, data has {} covariates", gamma.beta.len(), prep.p)));
    }
    Ok(())
}

/// Jumps of `baseline` (original covariate scale) at the failure times of `prep`.
fn jumps_from(prep: &Prepared, baseline: &StepFunction, beta: &[f64]) -> BaselineJumps {
    let scale = 1.0 / prep.baseline_scale(beta);
    let cum: Vec<f64> = prep.fail_times.iter().map(|&t| baseline.value(t) * scale).collect();
    let mut prev = 0.0;
    let increments = cum
        .iter()
        .map(|&c| {
            let d = c - prev;
            prev = c;
            d
        })
        .collect();
    BaselineJumps { increments, cum }
}

pub(crate) fn jumps_to_step(prep: &Prepared, jumps: &BaselineJumps, beta: &[f64]) -> StepFunction {
    let scale = prep.baseline_scale(beta);
    StepFunction {
        times: prep.fail_times.clone(),
        cum_values: jumps.cum.iter().map(|c| c * scale).collect(),
    }
}

/// Profile baseline hazard at γ by the forward recursion over failure times.
pub fn estimate_baseline(data: &ClusteredDataset, spec: &FrailtySpec, gamma: &GammaParams, ctrl: &FitControl) -> Result<StepFunction> {
    let prep = Prepared::new(data)?;
    check_dim(&prep, gamma)?;
    let problem = Problem::new(&prep, spec.kind, ctrl.quadrature());
    let jumps = problem.baseline(&theta_for(spec, gamma))?;
    Ok(jumps_to_step(&prep, &jumps, &gamma.beta))
}

/// Log-likelihood at γ with the baseline held at `baseline`.
pub fn loglik(data: &ClusteredDataset, spec: &FrailtySpec, gamma: &GammaParams, baseline: &StepFunction, ctrl: &FitControl) -> Result<f64> {
    let prep = Prepared::new(data)?;
    check_dim(&prep, gamma)?;
    let problem = Problem::new(&prep, spec.kind, ctrl.quadrature());
    problem.loglik(&theta_for(spec, gamma), &jumps_from(&prep, baseline, &gamma.beta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    /// `(U_β, U_θ)`; the θ entry is zero without frailty.
    pub total: Vec<f64>,
    pub per_cluster: Vec<Vec<f64>>,
    pub cluster_ids: Vec<u64>,
}

/// Score equations at γ with the baseline held at `baseline`.
pub fn score(data: &ClusteredDataset, spec: &FrailtySpec, gamma: &GammaParams, baseline: &StepFunction, ctrl: &FitControl) -> Result<ScoreVector> {
    let prep = Prepared::new(data)?;
    check_dim(&prep, gamma)?;
    let problem = Problem::new(&prep, spec.kind, ctrl.quadrature());
    let mut per_cluster = problem.contributions_on(&theta_for(spec, gamma), &jumps_from(&prep, baseline, &gamma.beta), true)?;
    for u in per_cluster.iter_mut() {
        u.resize(prep.p + 1, 0.0);
    }
    Ok(ScoreVector {
        total: objective::sum_contributions(&per_cluster),
        per_cluster,
        cluster_ids: prep.cluster_ids.clone(),
    })
}

const COX_TOL: f64 = 1e-9;
const COX_MAX_ITER: usize = 50;

/// Cox partial-likelihood estimate of β on the (weighted) prepared data, or
/// zero when the information matrix is singular.
pub(crate) fn initial_beta(prep: &Prepared) -> Vec<f64> {
    match cox_fit_prepared(prep, &vec![0.0; prep.p], COX_TOL, COX_MAX_ITER) {
        Ok(c) if c.beta.iter().all(|b| b.is_finite()) => c.beta,
        Ok(_) => vec![0.0; prep.p],
        Err(e) => {
            log::warn!("Cox initialization failed ({e}); starting from beta = 0");
            vec![0.0; prep.p]
        }
    }
}

pub(crate) fn initial_gamma(prep: &Prepared, kind: FrailtyKind) -> Vec<f64> {
    let mut g = initial_beta(prep);
    if kind != FrailtyKind::None {
        g.push(kind.initial_theta());
    }
    g
}

pub(crate) fn drop_incomplete(data: &ClusteredDataset) -> std::borrow::Cow<'_, ClusteredDataset> {
    let complete = |r: &Record| r.time.is_finite() && r.covariates.iter().all(|v| v.is_finite());
    let dropped = data.records.iter().filter(|r| !complete(r)).count();
    if dropped == 0 {
        return std::borrow::Cow::Borrowed(data);
    }
    log::warn!("dropping {dropped} rows with missing or non-finite fields");
    let mut out = data.clone();
    out.records.retain(complete);
    std::borrow::Cow::Owned(out)
}

/// Packed starting point used by [`fit_model`]: Cox estimates for β, then
/// the family's initial θ.
pub fn default_start(data: &ClusteredDataset, kind: FrailtyKind) -> Result<Vec<f64>> {
    let data = drop_incomplete(data);
    Ok(initial_gamma(&Prepared::new(&data)?, kind))
}

/// Fits the shared-frailty model, initializing β from a Cox fit and θ at
/// the family's starting value.
pub fn fit_model(data: &ClusteredDataset, spec: &FrailtySpec, control: &FitControl) -> Result<FitResult> {
    fit_model_from(data, spec, control, None)
}

/// As [`fit_model`] with an optional packed starting point (β, then θ).
pub fn fit_model_from(data: &ClusteredDataset, spec: &FrailtySpec, control: &FitControl, start: Option<&[f64]>) -> Result<FitResult> {
    spec.ensure_estimable()?;
    control.validate()?;
    let data = drop_incomplete(data);
    let prep = Prepared::new(&data)?;
    if prep.n_clusters() < 2 {
        return Err(FrailtyError::InvalidData("at least two clusters are required".into()));
    }
    let problem = Problem::new(&prep, spec.kind, control.quadrature());
    let start = match start {
        Some(s) if s.len() == problem.n_params() => s.to_vec(),
        Some(s) => {
            return Err(FrailtyError::InvalidParameter(format!("starting point has {} entries, expected {}", s.len(), problem.n_params())));
        }
        None => initial_gamma(&prep, spec.kind),
    };
    let sol = solver::solve(&problem, control, start)?;
    if !sol.converged {
        log::warn!("fit did not converge: {}", sol.reason.describe());
    }
    let (score, _) = problem.profile_score(&sol.gamma)?;
    Ok(assemble(&data, &prep, spec.kind, control, sol, score))
}

fn assemble(data: &ClusteredDataset, prep: &Prepared, kind: FrailtyKind, control: &FitControl, sol: solver::Solution, score: Vec<f64>) -> FitResult {
    let p = prep.p;
    let theta = if kind == FrailtyKind::None { 0.0 } else { sol.gamma[p] };
    let frailty = FrailtySpec { kind, theta };
    let (lo, hi) = kind.theta_bounds();
    let boundary = kind != FrailtyKind::None && (theta - lo <= 1e-6 || hi - theta <= 1e-6);

    let mut risk_table: Vec<RiskRow> = Vec::new();
    for j in 0..prep.n_obs() {
        let t = prep.time[j];
        if risk_table.last().map(|r| r.time) != Some(t) {
            risk_table.push(RiskRow {
                time: t,
                n_event: 0,
                n_censor: 0,
            });
        }
        let row = risk_table.last_mut().expect("row just pushed");
        if prep.status[j] {
            row.n_event += 1;
        } else {
            row.n_censor += 1;
        }
    }
    let baseline = jumps_to_step(prep, &sol.jumps, &sol.gamma[..p]);
    let baseline_all = StepFunction {
        times: risk_table.iter().map(|r| r.time).collect(),
        cum_values: risk_table.iter().map(|r| baseline.value(r.time)).collect(),
    };
    FitResult {
        beta: sol.gamma[..p].to_vec(),
        theta,
        frailty,
        loglik: sol.loglik,
        baseline,
        baseline_all,
        iterations: sol.iterations,
        trace: sol.trace,
        converged: sol.converged,
        method: control.fit_method,
        reason: sol.reason,
        boundary,
        score,
        covariate_names: data.covariate_names.clone(),
        n_obs: prep.n_obs(),
        n_clusters: prep.n_clusters(),
        n_events: data.n_events(),
        control: control.clone(),
        risk_table,
    }
}
