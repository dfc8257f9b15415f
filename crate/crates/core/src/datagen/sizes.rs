use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{FrailtyError, Result};

/// Cluster-size law.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusterSizeSpec {
    Fixed(usize),
    Explicit(Vec<usize>),
    /// Poisson(λ) conditioned on exceeding `k`.
    TruncatedPoisson { lambda: f64, k: usize },
    /// Weights `(m − l)^{-s}` on `{l+1, …, u}`.
    TruncatedZeta { s: f64, u: usize, l: usize },
    /// Uniform on `{l+1, …, u}`.
    DiscreteUniform { l: usize, u: usize },
}

impl ClusterSizeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FrailtyError::InvalidParameter(m.to_string()));
        match self {
            ClusterSizeSpec::Fixed(0) => bad("fixed cluster size must be positive"),
            ClusterSizeSpec::Explicit(v) if v.is_empty() || v.contains(&0) => bad("explicit cluster sizes must be positive"),
            ClusterSizeSpec::TruncatedPoisson { lambda, .. } if !(*lambda > 0.0) => bad("Poisson shape must be positive"),
            ClusterSizeSpec::TruncatedZeta { s, u, l } if !(*s > 1.0) || u <= l => bad("zeta law needs s > 1 and u > l"),
            ClusterSizeSpec::DiscreteUniform { l, u } if u <= l => bad("uniform cluster sizes need u > l"),
            _ => Ok(()),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, ClusterSizeSpec::Fixed(_))
    }

    pub fn describe(&self) -> String {
        match self {
            ClusterSizeSpec::Fixed(k) => format!("fixed({k})"),
            ClusterSizeSpec::Explicit(v) => format!("explicit({})", v.len()),
            ClusterSizeSpec::TruncatedPoisson { lambda, k } => format!("poisson({lambda}, {k})"),
            ClusterSizeSpec::TruncatedZeta { s, u, l } => format!("pareto({s}, {u}, {l})"),
            ClusterSizeSpec::DiscreteUniform { l, u } => format!("uniform({l}, {u})"),
        }
    }
}

fn zeta_weights(s: f64, u: usize, l: usize) -> Vec<f64> {
    (1..=u - l).map(|j| (j as f64).powf(-s)).collect()
}

/// Mean cluster size under the law.
pub fn expected_cluster_size(spec: &ClusterSizeSpec) -> f64 {
    match spec {
        ClusterSizeSpec::Fixed(k) => *k as f64,
        ClusterSizeSpec::Explicit(v) => v.iter().sum::<usize>() as f64 / v.len() as f64,
        ClusterSizeSpec::TruncatedPoisson { lambda, k } => {
            let lam = *lambda;
            // P(X ≤ k) and E[X; X ≤ k] from the pmf recursion
            let mut pmf = (-lam).exp();
            let mut below = pmf;
            let mut partial_mean = 0.0;
            for j in 1..=*k {
                pmf *= lam / j as f64;
                below += pmf;
                partial_mean += j as f64 * pmf;
            }
            (lam - partial_mean) / (1.0 - below)
        }
        ClusterSizeSpec::TruncatedZeta { s, u, l } => {
            let w = zeta_weights(*s, *u, *l);
            let total: f64 = w.iter().rev().sum();
            w.iter().enumerate().rev().map(|(j, wj)| (*l + j + 1) as f64 * wj).sum::<f64>() / total
        }
        ClusterSizeSpec::DiscreteUniform { l, u } => (1 + l + u) as f64 / 2.0,
    }
}

/// Draws `n` cluster sizes.
pub fn sample_cluster_sizes<R: Rng + ?Sized>(spec: &ClusterSizeSpec, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    spec.validate()?;
    match spec {
        ClusterSizeSpec::Fixed(k) => Ok(vec![*k; n]),
        ClusterSizeSpec::Explicit(v) => {
            if v.len() != n {
                return Err(FrailtyError::InvalidParameter(format!("{} explicit cluster sizes for {n} clusters", v.len())));
            }
            Ok(v.clone())
        }
        ClusterSizeSpec::TruncatedPoisson { lambda, k } => {
            let pois = Poisson::new(*lambda).map_err(|e| FrailtyError::InvalidParameter(e.to_string()))?;
            Ok((0..n)
                .map(|_| loop {
                    let x = pois.sample(rng) as usize;
                    if x > *k {
                        break x;
                    }
                })
                .collect())
        }
        ClusterSizeSpec::TruncatedZeta { s, u, l } => {
            let w = zeta_weights(*s, *u, *l);
            let total: f64 = w.iter().rev().sum();
            let mut cdf = Vec::with_capacity(w.len());
            let mut acc = 0.0;
            for wj in &w {
                acc += wj / total;
                cdf.push(acc);
            }
            Ok((0..n)
                .map(|_| {
                    let v: f64 = rng.random();
                    let j = cdf.partition_point(|&c| c < v).min(w.len() - 1);
                    l + j + 1
                })
                .collect())
        }
        ClusterSizeSpec::DiscreteUniform { l, u } => Ok((0..n).map(|_| rng.random_range(l + 1..=*u)).collect()),
    }
}
