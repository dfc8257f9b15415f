//! Log-normal and inverse Gaussian frailties, whose Laplace-transform
//! derivatives are computed by quadrature.
//!
//! Moments are integrated in `x = ln ω`, centred at the mode of the
//! log-space integrand and scaled by its curvature there, then mapped to a
//! finite interval with `u = t/(1 − t²)`. The integrand is divided by its
//! value at the mode, so results are returned on the log scale.

use super::{ClusterMoments, Need};
use crate::error::{FrailtyError, Result};
use crate::numerics::{integrate_vec, QuadratureControl};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub(super) fn ln_log_density(theta: f64, omega: f64) -> f64 {
    let l = omega.ln();
    -l - 0.5 * (LN_2PI + theta.ln()) - l * l / (2.0 * theta)
}

pub(super) fn ln_dlog_density(theta: f64, omega: f64) -> f64 {
    let l = omega.ln();
    l * l / (2.0 * theta * theta) - 0.5 / theta
}

pub(super) fn ig_log_density(theta: f64, omega: f64) -> f64 {
    let d = omega - 1.0;
    -0.5 * (LN_2PI + theta.ln() + 3.0 * omega.ln()) - d * d / (2.0 * theta * omega)
}

pub(super) fn ig_dlog_density(theta: f64, omega: f64) -> f64 {
    let d = omega - 1.0;
    -0.5 / theta + d * d / (2.0 * theta * theta * omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Law {
    LogNormal,
    InverseGaussian,
}

#[derive(Debug, Clone)]
pub(super) struct IntegratedMoments {
    law: Law,
    theta: f64,
    log_norm: f64,
    ctrl: QuadratureControl,
}

/// Integrals `[φ_n, φ_{n+1}, φ_{n+2}, ∫ω^n e^{-hω} ∂f/∂θ]`, each divided by `e^{shift}`.
#[derive(Debug, Clone, Copy)]
pub(super) struct RawMoments {
    pub value: [f64; 4],
    pub shift: f64,
    pub converged: bool,
}

impl IntegratedMoments {
    pub fn lognormal(theta: f64, ctrl: QuadratureControl) -> Self {
        Self::new(Law::LogNormal, theta, ctrl)
    }

    pub fn inverse_gaussian(theta: f64, ctrl: QuadratureControl) -> Self {
        Self::new(Law::InverseGaussian, theta, ctrl)
    }

    fn new(law: Law, theta: f64, ctrl: QuadratureControl) -> Self {
        Self {
            law,
            theta,
            log_norm: -0.5 * (LN_2PI + theta.ln()),
            ctrl,
        }
    }

    /// Log of `ω^n e^{-hω} f(ω) ω` at `ω = e^x`.
    fn log_integrand(&self, n: f64, h: f64, x: f64) -> f64 {
        let hx = if h > 0.0 { h * x.exp() } else { 0.0 };
        let t = self.theta;
        match self.law {
            Law::LogNormal => n * x - hx + self.log_norm - x * x / (2.0 * t),
            Law::InverseGaussian => {
                let sh = (0.5 * x).sinh();
                (n - 0.5) * x - hx + self.log_norm - 2.0 * sh * sh / t
            }
        }
    }

    fn dlog_density(&self, omega: f64) -> f64 {
        match self.law {
            Law::LogNormal => ln_dlog_density(self.theta, omega),
            Law::InverseGaussian => ig_dlog_density(self.theta, omega),
        }
    }

    /// Mode of the log-space integrand and the curvature scale there.
    fn mode(&self, n: f64, h: f64) -> (f64, f64) {
        let t = self.theta;
        match self.law {
            Law::LogNormal => {
                // n − h e^x − x/θ is decreasing and concave: Newton from the right converges monotonically
                let mut x = t * n;
                if h > 0.0 && n > 0.0 {
                    let alt = (n / h).ln();
                    if alt >= 0.0 && alt < x {
                        x = alt;
                    }
                }
                for _ in 0..200 {
                    let ex = if h > 0.0 { h * x.exp() } else { 0.0 };
                    let g = n - ex - x / t;
                    let dg = -ex - 1.0 / t;
                    let step = g / dg;
                    x -= step;
                    if step.abs() <= 1e-13 * (1.0 + x.abs()) {
                        break;
                    }
                }
                let curv = if h > 0.0 { h * x.exp() } else { 0.0 } + 1.0 / t;
                (x, 1.0 / curv.sqrt())
            }
            Law::InverseGaussian => {
                let a = h + 0.5 / t;
                let b = n - 0.5;
                let c = 0.5 / t;
                let disc = (b * b + 4.0 * a * c).sqrt();
                // avoid cancellation when b < 0
                let w = if b >= 0.0 { (b + disc) / (2.0 * a) } else { 2.0 * c / (disc - b) };
                let curv = h * w + (w + 1.0 / w) / (2.0 * t);
                (w.ln(), 1.0 / curv.sqrt())
            }
        }
    }

    pub fn raw(&self, n: u32, h: f64, controlled: usize, ctrl: &QuadratureControl) -> RawMoments {
        let nf = n as f64;
        let (x0, sigma) = self.mode(nf, h);
        let shift = self.log_integrand(nf, h, x0);
        let r = integrate_vec(
            |t: f64| {
                let den = 1.0 - t * t;
                let u = t / den;
                let jac = (1.0 + t * t) / (den * den) * sigma;
                let x = x0 + sigma * u;
                let w = (self.log_integrand(nf, h, x) - shift).exp() * jac;
                if !(w > 0.0) || !w.is_finite() {
                    return [0.0; 4];
                }
                let omega = x.exp();
                [w, w * omega, w * omega * omega, w * self.dlog_density(omega)]
            },
            -1.0,
            1.0,
            ctrl,
            controlled,
        );
        RawMoments {
            value: r.value,
            shift,
            converged: r.converged,
        }
    }

    pub fn moments(&self, n: u32, h: f64, need: Need) -> Result<ClusterMoments> {
        let controlled = if need == Need::PsiSlope { 3 } else { 2 };
        let raw = self.raw(n, h, controlled, &self.ctrl);
        if !raw.converged {
            log::debug!("moment quadrature hit its evaluation budget at n = {n}, h = {h}");
        }
        let [i0, i1, i2, d] = raw.value;
        if !(i0 > 0.0) || !i0.is_finite() {
            return Err(FrailtyError::NumericalUnderflow("frailty moment quadrature"));
        }
        let psi = i1 / i0;
        Ok(ClusterMoments {
            log_phi1: i0.ln() + raw.shift,
            psi,
            psi_h: psi * psi - i2 / i0,
            dlog_theta: d / i0,
        })
    }
}
