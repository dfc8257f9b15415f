use super::ClusterMoments;
use crate::error::{FrailtyError, Result};

/// Power variance function frailty with `𝓛(s) = exp(−((1+s)^θ − 1)/θ)`.
///
/// `φ_m(s) = 𝓛(s) Σ_j c_{m,j} (1+s)^{jθ−m}`. The coefficients are held as
/// logarithms together with `r_{m,j} = (∂c_{m,j}/∂θ)/c_{m,j}` so that high
/// orders neither overflow nor cancel.
#[derive(Debug, Clone)]
pub(super) struct PvfMoments {
    theta: f64,
    log_c: Vec<Vec<f64>>,
    ratio: Vec<Vec<f64>>,
    coef: Vec<Vec<f64>>,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + (-(a - b).abs()).exp().ln_1p()
}

impl PvfMoments {
    pub fn new(theta: f64, max_order: usize) -> Self {
        let mut log_c = vec![vec![0.0]];
        let mut ratio = vec![vec![0.0]];
        for m in 1..=max_order {
            let prev_lc = &log_c[m - 1];
            let prev_r = &ratio[m - 1];
            let mut lc = vec![f64::NEG_INFINITY; m + 1];
            let mut r = vec![0.0; m + 1];
            for j in 1..=m {
                let left = prev_lc[j - 1];
                let q = (m - 1) as f64 - j as f64 * theta;
                let right = if j < m { prev_lc[j] + q.ln() } else { f64::NEG_INFINITY };
                let total = log_add(left, right);
                lc[j] = total;
                let w1 = (left - total).exp();
                let mut rj = 0.0;
                if left > f64::NEG_INFINITY {
                    rj += w1 * prev_r[j - 1];
                }
                if right > f64::NEG_INFINITY {
                    let w2 = (right - total).exp();
                    rj += w2 * (prev_r[j] - j as f64 / q);
                }
                r[j] = rj;
            }
            log_c.push(lc);
            ratio.push(r);
        }
        let coef = log_c.iter().map(|row| row.iter().map(|v| v.exp()).collect()).collect();
        Self { theta, log_c, ratio, coef }
    }

    fn log_lt(&self, l1: f64) -> f64 {
        -(self.theta * l1).exp_m1() / self.theta
    }

    fn dlog_lt(&self, l1: f64) -> f64 {
        let t = self.theta;
        let x = t * l1;
        let num = if x.abs() < 1e-3 {
            -x * x * (0.5 + x / 3.0 + x * x / 8.0)
        } else {
            x.exp_m1() - x.exp() * x
        };
        num / (t * t)
    }

    fn row(&self, m: u32) -> Result<(&[f64], &[f64])> {
        let m = m as usize;
        if m >= self.log_c.len() {
            return Err(FrailtyError::InvalidParameter(format!(
                "PVF derivative order {m} beyond the precomputed table ({})",
                self.log_c.len() - 1
            )));
        }
        Ok((&self.log_c[m], &self.ratio[m]))
    }

    /// `log S_m` and `(∂S_m/∂θ)/S_m` at `l1 = ln(1+s)`.
    fn log_sum(&self, m: u32, l1: f64, with_dtheta: bool) -> Result<(f64, f64)> {
        let (lc, r) = self.row(m)?;
        let start = if m == 0 { 0 } else { 1 };
        let term = |j: usize| lc[j] + (j as f64 * self.theta - m as f64) * l1;
        let peak = (start..lc.len()).map(term).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        let mut dtotal = 0.0;
        for j in start..lc.len() {
            let w = (term(j) - peak).exp();
            total += w;
            if with_dtheta {
                dtotal += w * (r[j] + j as f64 * l1);
            }
        }
        Ok((peak + total.ln(), dtotal / total))
    }

    pub fn log_moment(&self, m: u32, h: f64) -> Result<f64> {
        let l1 = h.ln_1p();
        Ok(self.log_lt(l1) + self.log_sum(m, l1, false)?.0)
    }

    /// `ψ = S_{n+1} / ((1+s) S_n)` by Horner's rule in `x = (1+s)^θ`, with
    /// the log-scale sums as fallback when that overflows.
    pub fn psi(&self, n: u32, h: f64) -> Result<f64> {
        let l1 = h.ln_1p();
        let _ = self.row(n + 1)?;
        let x = (self.theta * l1).exp();
        let horner = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &v| acc * x + v);
        let psi = horner(&self.coef[n as usize + 1]) / (horner(&self.coef[n as usize]) * (1.0 + h));
        if psi.is_finite() && psi > 0.0 {
            return Ok(psi);
        }
        Ok((self.log_sum(n + 1, l1, false)?.0 - self.log_sum(n, l1, false)?.0).exp())
    }

    pub fn moments(&self, n: u32, h: f64) -> Result<ClusterMoments> {
        let l1 = h.ln_1p();
        let (s0, ds0) = self.log_sum(n, l1, true)?;
        let (s1, _) = self.log_sum(n + 1, l1, false)?;
        let (s2, _) = self.log_sum(n + 2, l1, false)?;
        let psi = (s1 - s0).exp();
        Ok(ClusterMoments {
            log_phi1: self.log_lt(l1) + s0,
            psi,
            psi_h: psi * psi - (s2 - s0).exp(),
            dlog_theta: self.dlog_lt(l1) + ds0,
        })
    }

    #[cfg(test)]
    pub fn coefficient(&self, m: usize, j: usize) -> f64 {
        self.log_c[m][j].exp()
    }
}
