use super::prepared::Prepared;
use super::recursion::BaselineJumps;
use crate::error::{FrailtyError, Result};
use crate::frailty::{MomentEvaluator, Need};

/// Cluster cumulative hazards `H_i = Σ_j Λ̂(T_j) e^{βᵀZ_j}` over full follow-up.
pub fn cluster_hazards(prep: &Prepared, risk: &[f64], lam_obs: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; prep.n_clusters()];
    for j in 0..prep.n_obs() {
        h[prep.cluster[j]] += lam_obs[j] * risk[j];
    }
    h
}

/// Weighted log-likelihood with the baseline held at `jumps`; a jump shared
/// by tied failures is split evenly among them.
pub fn loglik_value(prep: &Prepared, eval: &MomentEvaluator, beta: &[f64], jumps: &BaselineJumps) -> Result<f64> {
    let lp = prep.linear_predictors(beta);
    let risk: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
    let lam = jumps.at_observations(prep);
    let h = cluster_hazards(prep, &risk, &lam);
    let mut total = 0.0;
    for j in 0..prep.n_obs() {
        let w = prep.weights[prep.cluster[j]];
        if prep.status[j] && w > 0.0 {
            let k = prep.k_obs[j] - 1;
            let inc = jumps.increments[k];
            if !(inc > 0.0) {
                return Err(FrailtyError::NonFiniteValue("log-likelihood: zero baseline increment at a failure"));
            }
            total += w * ((inc / prep.d_count[k] as f64).ln() + lp[j]);
        }
    }
    for c in 0..prep.n_clusters() {
        let w = prep.weights[c];
        if w > 0.0 {
            total += w * eval.moments(prep.cluster_events[c], h[c], Need::Psi)?.log_phi1;
        }
    }
    if !total.is_finite() {
        return Err(FrailtyError::NonFiniteValue("log-likelihood"));
    }
    Ok(total)
}

/// Weighted per-cluster score contributions `(U_β, U_θ)` with the baseline
/// held at `jumps`; the θ entry is zero when `with_theta` is false.
/// `uncentred` gives the β score for the covariates as supplied, holding
/// the baseline fixed on that scale.
pub fn score_contributions(
    prep: &Prepared,
    eval: &MomentEvaluator,
    beta: &[f64],
    jumps: &BaselineJumps,
    with_theta: bool,
    uncentred: bool,
) -> Result<Vec<Vec<f64>>> {
    let p = prep.p;
    let risk = prep.risk_scores(beta);
    let lam = jumps.at_observations(prep);
    let h = cluster_hazards(prep, &risk, &lam);
    let need = if with_theta { Need::Score } else { Need::Psi };
    let mut out = Vec::with_capacity(prep.n_clusters());
    for c in 0..prep.n_clusters() {
        let w = prep.weights[c];
        let mut u = vec![0.0; p + 1];
        if w > 0.0 {
            let mo = eval.moments(prep.cluster_events[c], h[c], need)?;
            for &j in &prep.members[c] {
                let z = prep.z_row(j);
                let a = mo.psi * lam[j] * risk[j];
                for q in 0..p {
                    if prep.status[j] {
                        u[q] += z[q];
                    }
                    u[q] -= a * z[q];
                }
            }
            if uncentred {
                let excess = prep.cluster_events[c] as f64 - mo.psi * h[c];
                for q in 0..p {
                    u[q] += prep.z_center[q] * excess;
                }
            }
            if with_theta {
                u[p] = mo.dlog_theta;
            }
            for v in u.iter_mut() {
                *v *= w;
            }
        }
        out.push(u);
    }
    Ok(out)
}

pub fn sum_contributions(parts: &[Vec<f64>]) -> Vec<f64> {
    let mut s = vec![0.0; parts.first().map_or(0, |v| v.len())];
    for u in parts {
        for (a, b) in s.iter_mut().zip(u) {
            *a += b;
        }
    }
    s
}
