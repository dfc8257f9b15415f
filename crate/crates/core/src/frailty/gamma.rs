use super::ClusterMoments;
use crate::numerics::{digamma, log_gamma};

// direct sums are exact and stable for moderate orders
const DIRECT_ORDER: u32 = 64;

pub(super) fn log_density(theta: f64, omega: f64) -> f64 {
    let a = 1.0 / theta;
    (a - 1.0) * omega.ln() - a * omega + a * a.ln() - log_gamma(a).unwrap_or(f64::NAN)
}

/// Shape-scale gamma with mean one, variance θ, written in terms of a = 1/θ.
#[derive(Debug, Clone)]
pub(super) struct GammaMoments {
    a: f64,
    lgam_a: f64,
    dig_a: f64,
}

impl GammaMoments {
    pub fn new(theta: f64) -> Self {
        let a = 1.0 / theta;
        Self {
            a,
            lgam_a: log_gamma(a).unwrap_or(f64::NAN),
            dig_a: digamma(a).unwrap_or(f64::NAN),
        }
    }

    fn log_rising(&self, m: u32) -> f64 {
        if m <= DIRECT_ORDER {
            (0..m).map(|k| (self.a + k as f64).ln()).sum()
        } else {
            log_gamma(self.a + m as f64).unwrap_or(f64::NAN) - self.lgam_a
        }
    }

    fn digamma_gap(&self, m: u32) -> f64 {
        if m <= DIRECT_ORDER {
            (0..m).map(|k| 1.0 / (self.a + k as f64)).sum()
        } else {
            digamma(self.a + m as f64).unwrap_or(f64::NAN) - self.dig_a
        }
    }

    pub fn log_moment(&self, m: u32, h: f64) -> f64 {
        let a = self.a;
        -a * (h / a).ln_1p() - m as f64 * (a + h).ln() + self.log_rising(m)
    }

    pub fn psi(&self, n: u32, h: f64) -> f64 {
        (self.a + n as f64) / (self.a + h)
    }

    pub fn moments(&self, n: u32, h: f64) -> ClusterMoments {
        let a = self.a;
        let psi = self.psi(n, h);
        let da = -(h / a).ln_1p() + (h - n as f64) / (a + h) + self.digamma_gap(n);
        ClusterMoments {
            log_phi1: self.log_moment(n, h),
            psi,
            psi_h: -psi / (a + h),
            dlog_theta: -a * a * da,
        }
    }
}
