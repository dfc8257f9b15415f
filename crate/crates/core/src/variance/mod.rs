//! Covariance estimates for the fitted parameters: a numerical profile
//! sandwich built from per-cluster scores, and a weighted bootstrap that
//! also covers the cumulative baseline hazard at chosen times.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use sha2::{Digest, Sha256};

use crate::data::ClusteredDataset;
use crate::error::{FrailtyError, Result};
use crate::fit::prepared::Prepared;
use crate::fit::problem::Problem;
use crate::fit::solver::{profile_jacobian, solve};
use crate::frailty::FrailtyKind;
use crate::fit::{drop_incomplete, hex_string, jumps_to_step, FitControl, FitResult};
use crate::numerics::compensated_sum;
use crate::pool::{derive_seed, map_indexed};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMethod {
    Sandwich,
    Bootstrap { requested: usize, converged: usize },
}

impl CovarianceMethod {
    pub fn describe(&self) -> String {
        match self {
            CovarianceMethod::Sandwich => "numerical profile sandwich".into(),
            CovarianceMethod::Bootstrap { requested, converged } => {
                format!("weighted bootstrap ({converged} of {requested} replicates converged)")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    /// Parameter names, then `Lambda@t` entries for bootstrap baseline times.
    pub labels: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub method: CovarianceMethod,
    pub cache_key: String,
}

impl CovarianceEstimate {
    pub fn standard_errors(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn lambda_label(t: f64) -> String {
    format!("Lambda@{t}")
}

/// `V = Ĵ⁻¹ B̂ Ĵ⁻ᵀ / n` with `Ĵ` the central-difference Jacobian of the mean
/// profile score at the estimate and `B̂ = n⁻¹ Σ U_i U_iᵀ`, where `U_i` is
/// cluster `i`'s contribution to the profile score: its own score term plus
/// its effect on the others through the estimated baseline.
pub fn sandwich_cov(data: &ClusteredDataset, fit: &FitResult, ctrl: &FitControl) -> Result<CovarianceEstimate> {
    if !fit.converged {
        return Err(FrailtyError::InvalidParameter("the sandwich estimator needs a converged fit".into()));
    }
    ctrl.validate()?;
    let data = drop_incomplete(data);
    let prep = Prepared::new(&data)?;
    let problem = Problem::new(&prep, fit.frailty.kind, ctrl.quadrature());
    let gamma = fit.free_parameters();
    let m = gamma.len();
    let n = prep.n_clusters() as f64;

    let jac = profile_jacobian(&problem, &gamma)?;
    let parts = influence_contributions(&prep, fit.frailty.kind, ctrl, &gamma)?;
    let mut meat = DMatrix::zeros(m, m);
    for u in &parts {
        for r in 0..m {
            for c in 0..m {
                meat[(r, c)] += u[r] * u[c] / n;
            }
        }
    }
    let inv = jac.clone().try_inverse().ok_or(FrailtyError::SingularJacobian)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(FrailtyError::SingularJacobian);
    }
    let matrix = symmetrize(&inv * meat * inv.transpose() / n);
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(FrailtyError::SingularJacobian);
    }
    Ok(CovarianceEstimate {
        labels: fit.parameter_labels(),
        matrix,
        method: CovarianceMethod::Sandwich,
        cache_key: cache_key(fit, "sandwich", &[], ctrl),
    })
}

/// `∂U/∂w_i` at unit weights: cluster `i`'s score contribution plus its
/// effect on every other contribution through the re-estimated baseline.
fn influence_contributions(prep: &Prepared, kind: FrailtyKind, ctrl: &FitControl, gamma: &[f64]) -> Result<Vec<Vec<f64>>> {
    const H: f64 = 1e-4;
    let n = prep.n_clusters();
    let quad = ctrl.quadrature();
    let probe = |i: usize, delta: f64| -> Result<Vec<f64>> {
        let mut local = prep.clone();
        let mut w = vec![1.0; n];
        w[i] += delta;
        local.set_weights(w)?;
        Ok(Problem::new(&local, kind, quad).profile_score(gamma)?.0)
    };
    map_indexed(None, n, |i| {
        let up = probe(i, H)?;
        let down = probe(i, -H)?;
        Ok(up.iter().zip(&down).map(|(a, b)| (a - b) * n as f64 / (2.0 * H)).collect())
    })
    .into_iter()
    .collect()
}

/// Source of raw per-cluster bootstrap weights for replicate `b`.
pub trait WeightSampler: Sync {
    fn draw(&self, replicate: usize, n: usize) -> Vec<f64>;

    /// Identifies the sampler in cache keys.
    fn tag(&self) -> String;
}

/// I.i.d. unit-mean exponential weights; replicate `b` uses a ChaCha8
/// stream seeded with `derive_seed(seed, b)`.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialWeights {
    pub seed: u64,
}

impl WeightSampler for ExponentialWeights {
    fn draw(&self, replicate: usize, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, replicate as u64));
        (0..n).map(|_| Exp1.sample(&mut rng)).collect()
    }

    fn tag(&self) -> String {
        format!("exp:{}", self.seed)
    }
}

/// Every weight equal to one: each replicate reproduces the original fit.
#[derive(Debug, Clone, Copy)]
pub struct UnitWeights;

impl WeightSampler for UnitWeights {
    fn draw(&self, _replicate: usize, n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    fn tag(&self) -> String {
        "unit".into()
    }
}

/// Divides by the empirical mean.
pub fn standardize_weights(mut w: Vec<f64>) -> Vec<f64> {
    let mean = compensated_sum(&w) / w.len() as f64;
    for v in w.iter_mut() {
        *v /= mean;
    }
    w
}

#[derive(Debug, Clone)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub lambda_times: Vec<f64>,
    pub workers: Option<usize>,
}

impl BootstrapOptions {
    pub fn new(replicates: usize) -> Self {
        Self {
            replicates,
            lambda_times: Vec::new(),
            workers: None,
        }
    }
}

/// Per-replicate estimates `(γ̂_b, Λ̂_b(t))`; `None` for replicates whose
/// refit failed or did not converge.
pub fn bootstrap_replicates(
    data: &ClusteredDataset,
    fit: &FitResult,
    ctrl: &FitControl,
    opts: &BootstrapOptions,
    sampler: &dyn WeightSampler,
) -> Result<Vec<Option<Vec<f64>>>> {
    if opts.replicates < 2 {
        return Err(FrailtyError::InvalidParameter(format!("bootstrap needs B >= 2, got {}", opts.replicates)));
    }
    ctrl.validate()?;
    let data = drop_incomplete(data);
    let base = Prepared::new(&data)?;
    let start = fit.free_parameters();
    let kind = fit.frailty.kind;
    let quad = ctrl.quadrature();
    let runs = map_indexed(opts.workers, opts.replicates, |b| {
        let mut prep = base.clone();
        prep.set_weights(standardize_weights(sampler.draw(b, base.n_clusters()))).ok()?;
        let problem = Problem::new(&prep, kind, quad);
        match solve(&problem, ctrl, start.clone()) {
            Ok(sol) if sol.converged => {
                let step = jumps_to_step(&prep, &sol.jumps, &sol.gamma[..prep.p]);
                let mut v = sol.gamma;
                v.extend(opts.lambda_times.iter().map(|&t| step.value(t)));
                Some(v)
            }
            Ok(sol) => {
                log::debug!("bootstrap replicate {b} stopped: {}", sol.reason.describe());
                None
            }
            Err(e) => {
                log::debug!("bootstrap replicate {b} failed: {e}");
                None
            }
        }
    });
    Ok(runs)
}

/// Empirical covariance of weighted-bootstrap refits, started from the
/// original estimate. Non-converged replicates are dropped and counted.
pub fn bootstrap_cov(
    data: &ClusteredDataset,
    fit: &FitResult,
    ctrl: &FitControl,
    opts: &BootstrapOptions,
    sampler: &dyn WeightSampler,
) -> Result<CovarianceEstimate> {
    let runs = bootstrap_replicates(data, fit, ctrl, opts, sampler)?;
    let ok: Vec<Vec<f64>> = runs.into_iter().flatten().collect();
    let requested = opts.replicates;
    if ok.len() < 2.max(requested / 2) {
        return Err(FrailtyError::TooFewConverged {
            converged: ok.len(),
            requested,
        });
    }
    if ok.len() < requested {
        log::warn!("{} of {requested} bootstrap replicates dropped", requested - ok.len());
    }
    let dim = ok[0].len();
    let count = ok.len() as f64;
    let dev: Vec<Vec<f64>> = ok.iter().map(|v| v.iter().zip(&ok[0]).map(|(a, b)| a - b).collect()).collect();
    let mean: Vec<f64> = (0..dim).map(|c| dev.iter().map(|v| v[c]).sum::<f64>() / count).collect();
    let mut matrix = DMatrix::zeros(dim, dim);
    for v in &dev {
        for r in 0..dim {
            for c in 0..dim {
                matrix[(r, c)] += (v[r] - mean[r]) * (v[c] - mean[c]) / (count - 1.0);
            }
        }
    }
    let mut labels = fit.parameter_labels();
    labels.extend(opts.lambda_times.iter().map(|&t| lambda_label(t)));
    let mut args: Vec<f64> = vec![requested as f64];
    args.extend(&opts.lambda_times);
    Ok(CovarianceEstimate {
        labels,
        matrix: symmetrize(matrix),
        method: CovarianceMethod::Bootstrap {
            requested,
            converged: ok.len(),
        },
        cache_key: cache_key(fit, &format!("bootstrap:{}", sampler.tag()), &args, ctrl),
    })
}

fn cache_key(fit: &FitResult, method: &str, args: &[f64], ctrl: &FitControl) -> String {
    let mut h = Sha256::new();
    h.update(fit.digest());
    h.update(method);
    for v in args {
        h.update(v.to_le_bytes());
    }
    ctrl.digest_into(&mut h);
    hex_string(&h.finalize())
}

/// Memoizes covariance estimates by (fit digest, method, arguments).
#[derive(Debug, Default)]
pub struct CovarianceCache {
    entries: HashMap<String, CovarianceEstimate>,
    computed: usize,
}

impl CovarianceCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of estimates actually computed (cache misses).
    pub fn computations(&self) -> usize {
        self.computed
    }

    pub fn sandwich(&mut self, data: &ClusteredDataset, fit: &FitResult, ctrl: &FitControl) -> Result<CovarianceEstimate> {
        let key = cache_key(fit, "sandwich", &[], ctrl);
        if let Some(hit) = self.entries.get(&key) {
            return Ok(hit.clone());
        }
        let est = sandwich_cov(data, fit, ctrl)?;
        self.computed += 1;
        self.entries.insert(key, est.clone());
        Ok(est)
    }

    pub fn bootstrap(
        &mut self,
        data: &ClusteredDataset,
        fit: &FitResult,
        ctrl: &FitControl,
        opts: &BootstrapOptions,
        sampler: &dyn WeightSampler,
    ) -> Result<CovarianceEstimate> {
        let mut args: Vec<f64> = vec![opts.replicates as f64];
        args.extend(&opts.lambda_times);
        let key = cache_key(fit, &format!("bootstrap:{}", sampler.tag()), &args, ctrl);
        if let Some(hit) = self.entries.get(&key) {
            return Ok(hit.clone());
        }
        let est = bootstrap_cov(data, fit, ctrl, opts, sampler)?;
        self.computed += 1;
        self.entries.insert(key, est.clone());
        Ok(est)
    }
}
