use std::collections::BTreeMap;

use crate::data::ClusteredDataset;
use crate::error::{FrailtyError, Result};

/// Estimator-ready layout: observations sorted by time, cluster indices
/// `0..n_clusters`, distinct failure times and per-cluster weights.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub p: usize,
    pub time: Vec<f64>,
    pub status: Vec<bool>,
    /// Row-major `n_obs × p`, centred by `z_center`.
    pub z: Vec<f64>,
    pub z_center: Vec<f64>,
    pub cluster: Vec<usize>,
    pub cluster_ids: Vec<u64>,
    pub members: Vec<Vec<usize>>,
    pub cluster_events: Vec<u32>,
    /// Distinct failure times `τ_1 < … < τ_K`.
    pub fail_times: Vec<f64>,
    /// Number of failure times `≤ T_j`; `Λ̂(T_j)` is the cumulative value at index `k_obs[j] − 1`.
    pub k_obs: Vec<usize>,
    pub weights: Vec<f64>,
    /// Failures tied at `τ_k`.
    pub d_count: Vec<u32>,
    /// `Σ_i w_i dN_i(τ_k)`.
    pub d_weighted: Vec<f64>,
    pub max_events: usize,
}

impl Prepared {
    pub fn new(data: &ClusteredDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(FrailtyError::InvalidData("empty dataset".into()));
        }
        let p = data.dim();
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| data.records[a].time.total_cmp(&data.records[b].time));

        let mut index: BTreeMap<u64, usize> = BTreeMap::new();
        for r in &data.records {
            let next = index.len();
            index.entry(r.cluster).or_insert(next);
        }
        let mut cluster_ids = vec![0u64; index.len()];
        for (&id, &k) in &index {
            cluster_ids[k] = id;
        }
        let n_clusters = cluster_ids.len();

        let n = data.len();
        let mut time = Vec::with_capacity(n);
        let mut status = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n * p);
        let mut cluster = Vec::with_capacity(n);
        let mut members = vec![Vec::new(); n_clusters];
        let mut cluster_events = vec![0u32; n_clusters];
        for (pos, &j) in order.iter().enumerate() {
            let r = &data.records[j];
            let c = index[&r.cluster];
            time.push(r.time);
            status.push(r.status);
            z.extend_from_slice(&r.covariates);
            cluster.push(c);
            members[c].push(pos);
            if r.status {
                cluster_events[c] += 1;
            }
        }
        let mut fail_times: Vec<f64> = Vec::new();
        for j in 0..n {
            if status[j] && fail_times.last() != Some(&time[j]) {
                fail_times.push(time[j]);
            }
        }
        if fail_times.is_empty() {
            return Err(FrailtyError::InvalidData("no observed failures".into()));
        }
        let mut z_center = vec![0.0; p];
        for row in z.chunks(p.max(1)).take(n) {
            for (c, v) in z_center.iter_mut().zip(row) {
                *c += v / n as f64;
            }
        }
        for row in z.chunks_mut(p.max(1)).take(n) {
            for (v, c) in row.iter_mut().zip(&z_center) {
                *v -= c;
            }
        }
        let mut d_count = vec![0u32; fail_times.len()];
        for j in 0..n {
            if status[j] {
                d_count[fail_times.partition_point(|&f| f < time[j])] += 1;
            }
        }
        let k_obs = time.iter().map(|&t| fail_times.partition_point(|&f| f <= t)).collect();
        let max_events = cluster_events.iter().copied().max().unwrap_or(0) as usize;
        let mut prep = Self {
            p,
            time,
            status,
            z,
            z_center,
            cluster,
            cluster_ids,
            members,
            cluster_events,
            fail_times,
            k_obs,
            weights: vec![1.0; n_clusters],
            d_count,
            d_weighted: Vec::new(),
            max_events,
        };
        prep.set_weights(vec![1.0; n_clusters])?;
        Ok(prep)
    }

    pub fn n_obs(&self) -> usize {
        self.time.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn n_fail_times(&self) -> usize {
        self.fail_times.len()
    }

    pub fn z_row(&self, j: usize) -> &[f64] {
        &self.z[j * self.p..(j + 1) * self.p]
    }

    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.n_clusters() || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(FrailtyError::InvalidParameter("cluster weights must be finite, nonnegative, one per cluster".into()));
        }
        let mut d = vec![0.0; self.fail_times.len()];
        for j in 0..self.n_obs() {
            if self.status[j] {
                d[self.k_obs[j] - 1] += weights[self.cluster[j]];
            }
        }
        self.weights = weights;
        self.d_weighted = d;
        Ok(())
    }

    /// Factor `e^{−βᵀz̄}` taking a baseline hazard for the centred covariates
    /// back to the original covariate scale.
    pub fn baseline_scale(&self, beta: &[f64]) -> f64 {
        (-self.z_center.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()).exp()
    }

    /// Exponentiated linear predictors `e^{βᵀZ_j}` in sorted order.
    pub fn risk_scores(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n_obs())
            .map(|j| self.z_row(j).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>().exp())
            .collect()
    }

    pub fn linear_predictors(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n_obs()).map(|j| self.z_row(j).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()).collect()
    }
}
