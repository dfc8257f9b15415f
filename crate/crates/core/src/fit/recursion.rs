use super::prepared::Prepared;
use crate::error::{FrailtyError, Result};
use crate::frailty::{ClusterMoments, MomentEvaluator, Need};

/// Baseline jumps at the distinct failure times and their running sums.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineJumps {
    pub increments: Vec<f64>,
    pub cum: Vec<f64>,
}

impl BaselineJumps {
    /// `Λ̂(T_j)` for every observation in sorted order.
    pub fn at_observations(&self, prep: &Prepared) -> Vec<f64> {
        prep.k_obs.iter().map(|&k| if k == 0 { 0.0 } else { self.cum[k - 1] }).collect()
    }
}

/// Forward recursion for the baseline jumps. The conditional frailty mean of
/// each cluster still at risk at `τ_k` is evaluated at its history up to
/// `τ_{k−1}` (empty history at `k = 1`). `visit(k, cluster, moments, R)` sees
/// every at-risk cluster term, with `R = Σ_{j at risk} e^{βᵀZ_j}`.
pub fn baseline_recursion<F>(prep: &Prepared, eval: &MomentEvaluator, risk: &[f64], need: Need, mut visit: F) -> Result<BaselineJumps>
where
    F: FnMut(usize, usize, &ClusterMoments, f64),
{
    let nc = prep.n_clusters();
    let kk = prep.n_fail_times();
    let mut r = vec![0.0; nc];
    let mut count = vec![0usize; nc];
    for (j, &c) in prep.cluster.iter().enumerate() {
        r[c] += risk[j];
        count[c] += 1;
    }
    let mut past = vec![0.0; nc];
    let mut events = vec![0u32; nc];
    let mut active: Vec<usize> = (0..nc).filter(|&c| prep.weights[c] > 0.0).collect();
    let mut slot = vec![usize::MAX; nc];
    for (s, &c) in active.iter().enumerate() {
        slot[c] = s;
    }

    let mut increments = Vec::with_capacity(kk);
    let mut cum = Vec::with_capacity(kk);
    let mut cum_prev = 0.0;
    let mut ptr = 0;
    let n = prep.n_obs();
    let detailed = need != Need::Psi;
    for k in 0..kk {
        let tau = prep.fail_times[k];
        while ptr < n && prep.time[ptr] < tau {
            let c = prep.cluster[ptr];
            r[c] -= risk[ptr];
            past[c] += cum_prev * risk[ptr];
            if prep.status[ptr] {
                events[c] += 1;
            }
            count[c] -= 1;
            if count[c] == 0 && slot[c] != usize::MAX {
                let s = slot[c];
                active.swap_remove(s);
                if s < active.len() {
                    slot[active[s]] = s;
                }
                slot[c] = usize::MAX;
            }
            ptr += 1;
        }
        let mut denom = 0.0;
        for &c in &active {
            let h = past[c] + cum_prev * r[c];
            if detailed {
                let mo = eval.moments(events[c], h, need)?;
                denom += prep.weights[c] * mo.psi * r[c];
                visit(k, c, &mo, r[c]);
            } else {
                denom += prep.weights[c] * eval.psi(events[c], h)? * r[c];
            }
        }
        let inc = prep.d_weighted[k] / denom;
        if !inc.is_finite() || inc < 0.0 {
            return Err(FrailtyError::NonFiniteValue("baseline hazard increment"));
        }
        cum_prev += inc;
        increments.push(inc);
        cum.push(cum_prev);
    }
    Ok(BaselineJumps { increments, cum })
}
