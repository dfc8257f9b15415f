//! Cox proportional hazards by partial likelihood with Breslow ties,
//! clusters ignored.

use nalgebra::{DMatrix, DVector};

use crate::data::ClusteredDataset;
use crate::error::{FrailtyError, Result};
use crate::fit::prepared::Prepared;
use crate::fit::StepFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct CoxFit {
    pub beta: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_HALVINGS: usize = 10;

/// Log partial likelihood, its gradient and the information matrix.
pub(crate) fn partial_likelihood(prep: &Prepared, beta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let p = prep.p;
    let lp = prep.linear_predictors(beta);
    let n = prep.n_obs();
    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    let mut ll = 0.0;
    let mut grad = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    let mut ptr = n;
    for k in (0..prep.n_fail_times()).rev() {
        let tau = prep.fail_times[k];
        while ptr > 0 && prep.time[ptr - 1] >= tau {
            ptr -= 1;
            let w = prep.weights[prep.cluster[ptr]] * lp[ptr].exp();
            let z = DVector::from_row_slice(prep.z_row(ptr));
            s0 += w;
            s1 += &z * w;
            s2 += &z * z.transpose() * w;
            if prep.status[ptr] && prep.k_obs[ptr] == k + 1 {
                let wc = prep.weights[prep.cluster[ptr]];
                ll += wc * lp[ptr];
                grad += &z * wc;
            }
        }
        let d = prep.d_weighted[k];
        if d > 0.0 {
            ll -= d * s0.ln();
            let mean = &s1 / s0;
            grad -= &mean * d;
            info += (&s2 / s0 - &mean * mean.transpose()) * d;
        }
    }
    (ll, grad, info)
}

pub(crate) fn cox_fit_prepared(prep: &Prepared, start: &[f64], tol: f64, max_iter: usize) -> Result<CoxFit> {
    let mut beta = DVector::from_column_slice(start);
    let (mut ll, mut grad, mut info) = partial_likelihood(prep, beta.as_slice());
    for it in 0..max_iter {
        if grad.amax() <= tol {
            return Ok(CoxFit {
                beta: beta.as_slice().to_vec(),
                loglik: ll,
                iterations: it,
                converged: true,
            });
        }
        let step = info.clone().cholesky().ok_or(FrailtyError::SingularInformation)?.solve(&grad);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = &beta + &step * scale;
            let eval = partial_likelihood(prep, cand.as_slice());
            if eval.0.is_finite() && eval.0 >= ll - 1e-12 * ll.abs() {
                accepted = Some((cand, eval));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, eval)) = accepted else {
            break;
        };
        beta = cand;
        (ll, grad, info) = eval;
    }
    let converged = grad.amax() <= tol;
    if !converged {
        log::warn!("Cox fit stopped after {max_iter} iterations with gradient {:.3e}", grad.amax());
    }
    Ok(CoxFit {
        beta: beta.as_slice().to_vec(),
        loglik: ll,
        iterations: max_iter,
        converged,
    })
}

/// Newton–Raphson from β = 0 with up to ten step halvings per iteration.
pub fn cox_fit(data: &ClusteredDataset, tol: f64, max_iter: usize) -> Result<CoxFit> {
    let prep = Prepared::new(data)?;
    cox_fit_prepared(&prep, &vec![0.0; prep.p], tol, max_iter)
}

/// Log partial likelihood at `beta`.
pub fn partial_loglik(data: &ClusteredDataset, beta: &[f64]) -> Result<f64> {
    Ok(partial_likelihood(&Prepared::new(data)?, beta).0)
}

/// Observed information of the partial likelihood at `beta`.
pub fn partial_information(data: &ClusteredDataset, beta: &[f64]) -> Result<DMatrix<f64>> {
    Ok(partial_likelihood(&Prepared::new(data)?, beta).2)
}

/// Breslow estimator `ΔΛ̂(τ_k) = d_k / Σ_{T_j ≥ τ_k} e^{βᵀZ_j}`.
pub fn breslow_baseline(data: &ClusteredDataset, beta: &[f64]) -> Result<StepFunction> {
    if data.n_events() == 0 {
        return Ok(StepFunction::zero());
    }
    let prep = Prepared::new(data)?;
    let risk = prep.risk_scores(beta);
    let mut s0 = 0.0;
    let mut ptr = prep.n_obs();
    let mut inc = vec![0.0; prep.n_fail_times()];
    for k in (0..prep.n_fail_times()).rev() {
        while ptr > 0 && prep.time[ptr - 1] >= prep.fail_times[k] {
            ptr -= 1;
            s0 += risk[ptr];
        }
        inc[k] = prep.d_weighted[k] / s0;
    }
    let scale = prep.baseline_scale(beta);
    let mut cum = Vec::with_capacity(inc.len());
    let mut acc = 0.0;
    for d in inc {
        acc += d * scale;
        cum.push(acc);
    }
    StepFunction::new(prep.fail_times.clone(), cum)
}

#[cfg(test)]
mod tests;
