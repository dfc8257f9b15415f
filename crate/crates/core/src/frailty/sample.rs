use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, InverseGaussian, StandardNormal};

use super::{FrailtyKind, FrailtySpec};
use crate::error::{FrailtyError, Result};

/// Positive stable variate with `E e^{−sX} = exp(−s^α)`.
pub(super) fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = PI * rng.random::<f64>();
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
    a * b
}

/// PVF variate as a sum of `k ≥ 1/θ` exponentially tilted positive stable
/// pieces, each accepted with probability at least `e^{-1}`.
fn pvf<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    let pieces = (1.0 / theta).ceil().max(1.0);
    let scale = (1.0 / (pieces * theta)).powf(1.0 / theta);
    let mut total = 0.0;
    for _ in 0..pieces as usize {
        loop {
            let x = scale * positive_stable(theta, rng);
            if rng.random::<f64>() <= (-x).exp() {
                total += x;
                break;
            }
        }
    }
    total
}

/// Draws `n` frailty variates.
pub fn sample<R: Rng + ?Sized>(spec: &FrailtySpec, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let t = spec.theta;
    if spec.is_degenerate() {
        return Ok(vec![1.0; n]);
    }
    let bad = |e: String| FrailtyError::InvalidParameter(e);
    match spec.kind {
        FrailtyKind::Gamma => {
            let g = Gamma::new(1.0 / t, t).map_err(|e| bad(e.to_string()))?;
            Ok((0..n).map(|_| g.sample(rng)).collect())
        }
        FrailtyKind::LogNormal => {
            let sd = t.sqrt();
            Ok((0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    (sd * z).exp()
                })
                .collect())
        }
        FrailtyKind::InverseGaussian => {
            let ig = InverseGaussian::new(1.0, 1.0 / t).map_err(|e| bad(e.to_string()))?;
            Ok((0..n).map(|_| ig.sample(rng)).collect())
        }
        FrailtyKind::Pvf => Ok((0..n).map(|_| pvf(t, rng)).collect()),
        FrailtyKind::PositiveStable => Ok((0..n).map(|_| positive_stable(t, rng)).collect()),
        FrailtyKind::None => Ok(vec![1.0; n]),
    }
}
