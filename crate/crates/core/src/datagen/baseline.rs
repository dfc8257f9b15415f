use std::fmt;
use std::sync::Arc;

use crate::error::{FrailtyError, Result};
use crate::numerics::{expand_upper_bracket, integrate, solve_root, QuadratureControl, RootBracket};

pub type BaselineFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Upper limit of the bracket search for failure-time roots.
pub const BRACKET_CAP: f64 = 18_446_744_073_709_551_616.0;
const ROOT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineMode {
    InverseCumulative,
    Cumulative,
    Hazard,
}

impl BaselineMode {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMode::InverseCumulative => "Lambda_0_inv",
            BaselineMode::Cumulative => "Lambda_0",
            BaselineMode::Hazard => "lambda_0",
        }
    }
}

/// One of `Λ₀⁻¹`, `Λ₀` or `λ₀`, with a label for summaries and digests.
#[derive(Clone)]
pub struct BaselineSpec {
    pub mode: BaselineMode,
    pub label: String,
    f: BaselineFn,
}

impl fmt::Debug for BaselineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.mode.name(), self.label)
    }
}

impl BaselineSpec {
    pub fn new(mode: BaselineMode, label: impl Into<String>, f: BaselineFn) -> Self {
        Self { mode, label: label.into(), f }
    }

    pub fn inverse_cumulative(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(BaselineMode::InverseCumulative, label, Arc::new(f))
    }

    pub fn cumulative(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(BaselineMode::Cumulative, label, Arc::new(f))
    }

    pub fn hazard(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(BaselineMode::Hazard, label, Arc::new(f))
    }

    /// Weibull-type `Λ₀(t) = (ct)^d` in the requested mode.
    pub fn weibull(mode: BaselineMode, c: f64, d: f64) -> Self {
        match mode {
            BaselineMode::InverseCumulative => Self::inverse_cumulative(format!("t^(1/{d})/{c}"), move |t: f64| t.powf(1.0 / d) / c),
            BaselineMode::Cumulative => Self::cumulative(format!("({c}*t)^{d}"), move |t: f64| (c * t).powf(d)),
            BaselineMode::Hazard => Self::hazard(format!("{d}*({c}*t)^{d}/t"), move |t: f64| {
                if t <= 0.0 {
                    0.0
                } else {
                    d * (c * t).powf(d) / t
                }
            }),
        }
    }

    /// Hazard `a^{sin(bπt)} d(ct)^d / t`, a Weibull hazard with a periodic multiplier.
    pub fn oscillating(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::hazard(format!("{a}^sin({b}*pi*t)*{d}*({c}*t)^{d}/t"), move |t: f64| {
            if t <= 0.0 {
                0.0
            } else {
                a.powf((b * std::f64::consts::PI * t).sin()) * d * (c * t).powf(d) / t
            }
        })
    }

    /// The supplied function itself.
    pub fn raw(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    /// `Λ₀(t)` whichever form was supplied.
    pub fn cumulative_at(&self, t: f64, ctrl: &QuadratureControl) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        match self.mode {
            BaselineMode::Cumulative => Ok((self.f)(t)),
            BaselineMode::Hazard => Ok(integrate(|s| (self.f)(s), 0.0, t, ctrl).value),
            BaselineMode::InverseCumulative => {
                let g = |x: f64| (self.f)(x) - t;
                let br = expand_upper_bracket(g, 0.0, 1.0, BRACKET_CAP)
                    .ok_or(FrailtyError::BracketExpansionFailure { target: t })?;
                solve_root(|x| (self.f)(x) - t, br, 1e-15 * br.hi)
            }
        }
    }
}

/// Failure time solving `Λ₀(T) ω e^{linpred} = −ln u`. Returns `+∞` when the
/// cumulative hazard never reaches the target below [`BRACKET_CAP`].
pub fn failure_time(baseline: &BaselineSpec, u: f64, omega: f64, linpred: f64, ctrl: &QuadratureControl) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(FrailtyError::DomainError { function: "failure_time", arg: u });
    }
    if !(omega > 0.0) {
        return Err(FrailtyError::DomainError { function: "failure_time", arg: omega });
    }
    let target = -u.ln() * (-linpred).exp() / omega;
    let residual = |t: f64| -> f64 {
        let cum = match baseline.mode {
            BaselineMode::Hazard => integrate(|s| baseline.raw(s), 0.0, t, ctrl).value,
            _ => baseline.raw(t),
        };
        cum - target
    };
    match baseline.mode {
        BaselineMode::InverseCumulative => Ok(baseline.raw(target)),
        BaselineMode::Cumulative | BaselineMode::Hazard => {
            let Some(br) = expand_upper_bracket(residual, 0.0, 1.0, BRACKET_CAP) else {
                log::warn!("cumulative hazard stays below {target} up to t = 2^64; emitting an unbounded failure time");
                return Ok(f64::INFINITY);
            };
            let tol = ROOT_TOL * br.hi.max(1.0);
            solve_root(residual, RootBracket::new(br.lo, br.hi)?, tol)
        }
    }
}
