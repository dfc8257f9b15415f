use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{FrailtyError, Result};
use crate::numerics::{solve_root, RootBracket};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensorKind {
    /// Parameters `(mean, sd)`.
    Normal,
    /// Parameters `(mean, sd)` of the censoring time itself, not of its log.
    LogNormal,
    /// Parameters `(lower, upper)`.
    Uniform,
}

impl CensorKind {
    pub fn name(self) -> &'static str {
        match self {
            CensorKind::Normal => "normal",
            CensorKind::LogNormal => "lognormal",
            CensorKind::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(CensorKind::Normal),
            "lognormal" => Ok(CensorKind::LogNormal),
            "uniform" => Ok(CensorKind::Uniform),
            other => Err(FrailtyError::InvalidParameter(format!("unknown censoring distribution '{other}'"))),
        }
    }

    /// Index of the parameter solved for when a censoring rate is targeted.
    pub fn free_index(self) -> usize {
        match self {
            CensorKind::Uniform => 1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CensoringSpec {
    None,
    Distribution {
        kind: CensorKind,
        params: [f64; 2],
        /// When set, the free parameter in `params` is replaced by the solved value.
        target_rate: Option<f64>,
    },
    /// One censoring time per observation, in generation order.
    Explicit(Vec<f64>),
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn lognormal_log_params(mean: f64, sd: f64) -> (f64, f64) {
    let s2 = (sd * sd / (mean * mean)).ln_1p();
    (mean.ln() - 0.5 * s2, s2.sqrt())
}

/// Censoring CDF `G(t)`.
pub fn censor_cdf(kind: CensorKind, params: [f64; 2], t: f64) -> f64 {
    if t == f64::INFINITY {
        return 1.0;
    }
    match kind {
        CensorKind::Normal => std_normal_cdf((t - params[0]) / params[1]),
        CensorKind::LogNormal => {
            if t <= 0.0 {
                return 0.0;
            }
            let (mu, sigma) = lognormal_log_params(params[0], params[1]);
            std_normal_cdf((t.ln() - mu) / sigma)
        }
        CensorKind::Uniform => ((t - params[0]) / (params[1] - params[0])).clamp(0.0, 1.0),
    }
}

pub(crate) fn validate_params(kind: CensorKind, params: [f64; 2]) -> Result<()> {
    let ok = match kind {
        CensorKind::Normal => params[1] > 0.0 && params[0].is_finite(),
        CensorKind::LogNormal => params[0] > 0.0 && params[1] > 0.0,
        CensorKind::Uniform => params[1] > params[0],
    };
    if ok && params.iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(FrailtyError::InvalidParameter(format!("invalid {} censoring parameters {params:?}", kind.name())))
    }
}

/// One censoring draw; consumes exactly one variate from `rng`.
pub fn draw_censor<R: Rng + ?Sized>(kind: CensorKind, params: [f64; 2], rng: &mut R) -> f64 {
    match kind {
        CensorKind::Normal => {
            let z: f64 = StandardNormal.sample(rng);
            params[0] + params[1] * z
        }
        CensorKind::LogNormal => {
            let z: f64 = StandardNormal.sample(rng);
            let (mu, sigma) = lognormal_log_params(params[0], params[1]);
            (mu + sigma * z).exp()
        }
        CensorKind::Uniform => params[0] + (params[1] - params[0]) * rng.random::<f64>(),
    }
}

/// Solves `mean_i G(T_i) = target_rate` for the free censoring parameter:
/// the mean for normal and log-normal (sd fixed), the upper bound for
/// uniform (lower fixed).
pub fn solve_censor_param(failure_times: &[f64], kind: CensorKind, fixed_param: f64, target_rate: f64) -> Result<f64> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(FrailtyError::InvalidParameter(format!("censoring rate {target_rate} outside (0, 1)")));
    }
    let finite: Vec<f64> = failure_times.iter().copied().filter(|t| t.is_finite()).collect();
    if finite.is_empty() {
        return Err(FrailtyError::InvalidData("no finite failure times".into()));
    }
    let n = failure_times.len() as f64;
    let params = |free: f64| match kind {
        CensorKind::Uniform => [fixed_param, free],
        _ => [free, fixed_param],
    };
    let rate = |free: f64| failure_times.iter().map(|&t| censor_cdf(kind, params(free), t)).sum::<f64>() / n - target_rate;
    let lo_t = finite.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_t = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = match kind {
        CensorKind::Normal => (lo_t - 20.0 * fixed_param, hi_t + 20.0 * fixed_param),
        CensorKind::LogNormal => (lo_t.max(f64::MIN_POSITIVE) * 1e-6, hi_t * 1e6 + 20.0 * fixed_param),
        CensorKind::Uniform => {
            let base = fixed_param.max(0.0);
            (fixed_param + 1e-12 * base.max(1.0), fixed_param + (hi_t - fixed_param).max(1.0) * 1e9)
        }
    };
    let (flo, fhi) = (rate(lo), rate(hi));
    if !(flo >= 0.0 && fhi <= 0.0) {
        return Err(FrailtyError::NoSolution { rate: target_rate });
    }
    let scale = (hi_t - lo_t).abs().max(fixed_param.abs()).max(1.0);
    solve_root(rate, RootBracket::new(lo, hi)?, 1e-12 * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normal_symmetric_case() {
        let mu = solve_censor_param(&[10.0; 20], CensorKind::Normal, 1.0, 0.5).unwrap();
        assert!((mu - 10.0).abs() < 1e-8);
    }

    #[test]
    fn uniform_closed_form() {
        let up = solve_censor_param(&[1.0, 2.0, 3.0, 4.0], CensorKind::Uniform, 0.0, 0.5).unwrap();
        assert!((up - 5.0).abs() < 1e-8, "{up}");
    }

    #[test]
    fn lognormal_hits_rate() {
        let times: Vec<f64> = (1..=200).map(|k| k as f64 * 0.7).collect();
        let m = solve_censor_param(&times, CensorKind::LogNormal, 20.0, 0.3).unwrap();
        let r: f64 = times.iter().map(|&t| censor_cdf(CensorKind::LogNormal, [m, 20.0], t)).sum::<f64>() / 200.0;
        assert!((r - 0.3).abs() < 1e-9);
    }

    #[test]
    fn unreachable_rate() {
        // uniform censoring from 5 cannot censor failures that all occur before 5
        let e = solve_censor_param(&[1.0, 2.0], CensorKind::Uniform, 5.0, 0.5);
        assert!(matches!(e, Err(FrailtyError::NoSolution { .. })));
    }

    #[test]
    fn lognormal_draws_have_requested_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let x: Vec<f64> = (0..n).map(|_| draw_censor(CensorKind::LogNormal, [50.0, 10.0], &mut rng)).collect();
        let m = x.iter().sum::<f64>() / n as f64;
        let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        assert!((m - 50.0).abs() < 0.15, "{m}");
        assert!((sd - 10.0).abs() < 0.15, "{sd}");
    }

    #[test]
    fn cdf_edges() {
        assert_eq!(censor_cdf(CensorKind::Uniform, [0.0, 2.0], 3.0), 1.0);
        assert_eq!(censor_cdf(CensorKind::LogNormal, [1.0, 1.0], 0.0), 0.0);
        assert!((censor_cdf(CensorKind::Normal, [0.0, 1.0], 0.0) - 0.5).abs() < 1e-15);
    }
}
