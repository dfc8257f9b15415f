use super::integrated::IntegratedMoments;
use super::{gamma, pvf, stable, FrailtyKind, FrailtySpec};
use crate::error::{FrailtyError, Result};
use crate::numerics::{integrate_mapped, solve_root, QuadratureControl, RootBracket};

/// `(𝓛(s), 𝓛''(s))`.
fn lt_pair(spec: &FrailtySpec, s: f64, inner: Option<&IntegratedMoments>) -> Result<(f64, f64)> {
    let t = spec.theta;
    match spec.kind {
        FrailtyKind::Gamma => {
            let g = gamma::GammaMoments::new(t);
            Ok((g.log_moment(0, s).exp(), g.log_moment(2, s).exp()))
        }
        FrailtyKind::Pvf => {
            let p = pvf::PvfMoments::new(t, 2);
            Ok((p.log_moment(0, s)?.exp(), p.log_moment(2, s)?.exp()))
        }
        FrailtyKind::PositiveStable => Ok((stable::lt(t, 0, s)?, stable::lt(t, 2, s)?)),
        FrailtyKind::InverseGaussian => {
            // closed form exp((1 − √(1+2θs))/θ)
            let r = (1.0 + 2.0 * t * s).sqrt();
            let l = ((1.0 - r) / t).exp();
            let d2 = l * (1.0 / (r * r) + t / (r * r * r));
            Ok((l, d2))
        }
        FrailtyKind::LogNormal => {
            let q = inner.expect("log-normal Kendall integral needs an inner integrator");
            let raw = q.raw(0, s, 3, &QuadratureControl::tight());
            let k = raw.shift.exp();
            Ok((raw.value[0] * k, raw.value[2] * k))
        }
        FrailtyKind::None => Ok(((-s).exp(), (-s).exp())),
    }
}

/// Kendall's tau `4∫₀^∞ s 𝓛(s) 𝓛''(s) ds − 1` of the bivariate law induced
/// by the frailty.
pub fn kendall_tau(spec: &FrailtySpec, ctrl: &QuadratureControl) -> Result<f64> {
    match spec.kind {
        FrailtyKind::None => return Ok(0.0),
        FrailtyKind::Gamma if spec.is_degenerate() => return Ok(0.0),
        FrailtyKind::Gamma => return Ok(spec.theta / (spec.theta + 2.0)),
        FrailtyKind::PositiveStable => return Ok(1.0 - spec.theta),
        _ if spec.is_degenerate() => return Ok(0.0),
        _ => {}
    }
    kendall_integral(spec, ctrl)
}

pub(super) fn kendall_integral(spec: &FrailtySpec, ctrl: &QuadratureControl) -> Result<f64> {
    let inner = match spec.kind {
        FrailtyKind::LogNormal => Some(IntegratedMoments::lognormal(spec.theta, QuadratureControl::tight())),
        _ => None,
    };
    let inner = inner.as_ref();
    // map scale: the median point 𝓛(s) = ½ keeps slowly decaying transforms resolved
    let half = |s: f64| lt_pair(spec, s, inner).map(|p| p.0 - 0.5).unwrap_or(f64::NAN);
    let mut hi = 1.0;
    while half(hi) > 0.0 && hi < 1e300 {
        hi *= 4.0;
    }
    let scale = solve_root(half, RootBracket::new(0.0, hi)?, 1e-6 * hi).unwrap_or(1.0).max(1e-12);
    let mut failure = None;
    let r = integrate_mapped(
        |s: f64| match lt_pair(spec, s, inner) {
            Ok((l, d2)) if s > 0.0 && s.is_finite() => [s * l * d2],
            Ok(_) => [0.0],
            Err(e) => {
                failure = Some(e);
                [0.0]
            }
        },
        0.0,
        scale,
        ctrl,
        1,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let tau = 4.0 * r.value[0] - 1.0;
    if !tau.is_finite() {
        return Err(FrailtyError::NonFiniteValue("kendall tau"));
    }
    Ok(tau)
}
