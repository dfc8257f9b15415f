//! Clustered right-censored survival data.

use std::collections::BTreeMap;

use crate::error::{FrailtyError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub cluster: u64,
    /// 1-based position within the cluster.
    pub member: u32,
    pub time: f64,
    pub status: bool,
    pub covariates: Vec<f64>,
}

/// Provenance attached by the generator; empty for ingested data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetMeta {
    pub config_digest: Option<String>,
    pub seed: Option<u64>,
    /// Solved censoring location parameter when a target rate was requested.
    pub censor_param: Option<f64>,
    /// Failure times that never reached the target cumulative hazard.
    pub n_unbounded: usize,
    /// Rows whose rounded time is zero.
    pub n_zero_times: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredDataset {
    pub records: Vec<Record>,
    pub covariate_names: Vec<String>,
    pub meta: DatasetMeta,
}

impl ClusteredDataset {
    /// Checks shapes and values; covariate names default to `Z1, Z2, …`.
    pub fn new(records: Vec<Record>, covariate_names: Option<Vec<String>>) -> Result<Self> {
        let p = records.first().map(|r| r.covariates.len()).unwrap_or(0);
        let names = covariate_names.unwrap_or_else(|| (1..=p).map(|k| format!("Z{k}")).collect());
        if names.len() != p {
            return Err(FrailtyError::InvalidData(format!("{} covariate names for {p} covariates", names.len())));
        }
        for (k, r) in records.iter().enumerate() {
            if r.covariates.len() != p {
                return Err(FrailtyError::InvalidData(format!("row {} has {} covariates, expected {p}", k + 1, r.covariates.len())));
            }
            if !r.time.is_finite() || r.covariates.iter().any(|z| !z.is_finite()) {
                return Err(FrailtyError::InvalidData(format!("row {} has a non-finite value", k + 1)));
            }
        }
        Ok(Self {
            records,
            covariate_names: names,
            meta: DatasetMeta::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_sizes().len()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.status).count()
    }

    pub fn censor_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        1.0 - self.n_events() as f64 / self.len() as f64
    }

    pub fn cluster_sizes(&self) -> BTreeMap<u64, usize> {
        let mut sizes = BTreeMap::new();
        for r in &self.records {
            *sizes.entry(r.cluster).or_insert(0) += 1;
        }
        sizes
    }

    pub fn avg_cluster_size(&self) -> f64 {
        let n = self.n_clusters();
        if n == 0 {
            0.0
        } else {
            self.len() as f64 / n as f64
        }
    }

    /// Adds `shift` to covariate column `col`.
    pub fn shift_covariate(&mut self, col: usize, shift: f64) {
        for r in &mut self.records {
            r.covariates[col] += shift;
        }
    }
}
