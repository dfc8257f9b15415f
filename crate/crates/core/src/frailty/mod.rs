//! Frailty distributions: densities, Laplace-transform derivatives and
//! their θ-derivatives, the ψ ratio used by the baseline-hazard recursion,
//! Kendall's tau, and variate sampling.
//!
//! Throughout, the *moment* of order `m` at `s` is the nonnegative integral
//! `φ_m(s) = ∫ ω^m e^{-sω} f(ω) dω = (-1)^m 𝓛^{(m)}(s)`.

mod gamma;
mod integrated;
mod kendall;
mod pvf;
mod sample;
mod stable;

use crate::error::{FrailtyError, Result};
use crate::numerics::QuadratureControl;

pub use kendall::kendall_tau;
pub use sample::sample;

/// Gamma/LN/IG parameters below this are treated as the degenerate ω ≡ 1.
pub const DEGENERATE_THETA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrailtyKind {
    Gamma,
    Pvf,
    LogNormal,
    InverseGaussian,
    PositiveStable,
    None,
}

impl FrailtyKind {
    pub fn name(self) -> &'static str {
        match self {
            FrailtyKind::Gamma => "gamma",
            FrailtyKind::Pvf => "pvf",
            FrailtyKind::LogNormal => "lognormal",
            FrailtyKind::InverseGaussian => "invgauss",
            FrailtyKind::PositiveStable => "posstab",
            FrailtyKind::None => "none",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gamma" => Ok(FrailtyKind::Gamma),
            "pvf" => Ok(FrailtyKind::Pvf),
            "lognormal" | "ln" | "lognorm" => Ok(FrailtyKind::LogNormal),
            "invgauss" | "ig" | "inversegaussian" => Ok(FrailtyKind::InverseGaussian),
            "posstab" | "ps" | "positivestable" => Ok(FrailtyKind::PositiveStable),
            "none" => Ok(FrailtyKind::None),
            other => Err(FrailtyError::InvalidParameter(format!("unknown frailty distribution '{other}'"))),
        }
    }

    /// Open box for θ used by the estimator.
    pub fn theta_bounds(self) -> (f64, f64) {
        match self {
            FrailtyKind::Pvf | FrailtyKind::PositiveStable => (1e-6, 1.0 - 1e-6),
            _ => (1e-6, 1e6),
        }
    }

    /// Starting θ giving Kendall's tau of about 0.3.
    pub fn initial_theta(self) -> f64 {
        match self {
            FrailtyKind::Gamma => 0.857,
            FrailtyKind::LogNormal => 1.172,
            FrailtyKind::InverseGaussian => 2.035,
            FrailtyKind::Pvf => 0.083,
            FrailtyKind::PositiveStable => 0.7,
            FrailtyKind::None => 0.0,
        }
    }

    pub fn is_estimable(self) -> bool {
        !matches!(self, FrailtyKind::PositiveStable)
    }
}

impl std::fmt::Display for FrailtyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A frailty distribution together with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrailtySpec {
    pub kind: FrailtyKind,
    pub theta: f64,
}

impl FrailtySpec {
    pub fn new(kind: FrailtyKind, theta: f64) -> Result<Self> {
        let ok = match kind {
            FrailtyKind::None => true,
            FrailtyKind::Gamma | FrailtyKind::LogNormal | FrailtyKind::InverseGaussian => theta >= 0.0 && theta.is_finite(),
            FrailtyKind::Pvf => theta > 0.0 && theta <= 1.0,
            FrailtyKind::PositiveStable => theta > 0.0 && theta < 1.0,
        };
        if !ok {
            return Err(FrailtyError::InvalidParameter(format!("theta = {theta} is outside the domain of {kind}")));
        }
        Ok(Self { kind, theta })
    }

    pub fn none() -> Self {
        Self {
            kind: FrailtyKind::None,
            theta: 0.0,
        }
    }

    pub fn gamma(theta: f64) -> Result<Self> {
        Self::new(FrailtyKind::Gamma, theta)
    }

    /// Same distribution family, different parameter. Unchecked: used inside
    /// the optimiser where the box already enforces validity.
    pub fn with_theta(self, theta: f64) -> Self {
        Self { theta, ..self }
    }

    /// True when the parameter sits at (or numerically at) the ω ≡ 1 limit.
    pub fn is_degenerate(&self) -> bool {
        match self.kind {
            FrailtyKind::None => true,
            FrailtyKind::Gamma | FrailtyKind::LogNormal | FrailtyKind::InverseGaussian => self.theta < DEGENERATE_THETA,
            FrailtyKind::Pvf => self.theta > 1.0 - DEGENERATE_THETA,
            FrailtyKind::PositiveStable => false,
        }
    }

    pub fn ensure_estimable(&self) -> Result<()> {
        if self.kind.is_estimable() {
            Ok(())
        } else {
            Err(FrailtyError::Unsupported(
                "positive stable frailty has infinite mean and cannot be estimated".into(),
            ))
        }
    }

    pub fn mean(&self) -> f64 {
        match self.kind {
            FrailtyKind::LogNormal => (self.theta / 2.0).exp(),
            FrailtyKind::PositiveStable => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// Variance of the frailty variates.
    pub fn variance(&self) -> f64 {
        let t = self.theta;
        match self.kind {
            FrailtyKind::Gamma | FrailtyKind::InverseGaussian => t,
            FrailtyKind::Pvf => 1.0 - t,
            FrailtyKind::LogNormal => (2.0 * t).exp() - t.exp(),
            FrailtyKind::PositiveStable => f64::INFINITY,
            FrailtyKind::None => 0.0,
        }
    }
}

impl std::fmt::Display for FrailtySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            FrailtyKind::None => f.write_str("none"),
            k => write!(f, "{}({})", k, self.theta),
        }
    }
}

/// Derivative order and argument of a Laplace-transform query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LtQuery {
    pub m: u32,
    pub s: f64,
}

impl LtQuery {
    pub fn new(m: u32, s: f64) -> Self {
        Self { m, s }
    }
}

fn sign(m: u32) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Density `f(ω; θ)`. The PVF and positive stable laws have no closed form
/// and are rejected.
pub fn density(spec: &FrailtySpec, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(FrailtyError::DomainError { function: "density", arg: omega });
    }
    match spec.kind {
        FrailtyKind::Gamma => Ok(gamma::log_density(spec.theta, omega).exp()),
        FrailtyKind::LogNormal => Ok(integrated::ln_log_density(spec.theta, omega).exp()),
        FrailtyKind::InverseGaussian => Ok(integrated::ig_log_density(spec.theta, omega).exp()),
        k => Err(FrailtyError::Unsupported(format!("no closed-form density for {k}"))),
    }
}

/// `∂f(ω; θ)/∂θ`, available for the log-normal and inverse Gaussian laws.
pub fn density_dtheta(spec: &FrailtySpec, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(FrailtyError::DomainError { function: "density_dtheta", arg: omega });
    }
    let t = spec.theta;
    match spec.kind {
        FrailtyKind::LogNormal => Ok(integrated::ln_log_density(t, omega).exp() * integrated::ln_dlog_density(t, omega)),
        FrailtyKind::InverseGaussian => Ok(integrated::ig_log_density(t, omega).exp() * integrated::ig_dlog_density(t, omega)),
        k => Err(FrailtyError::Unsupported(format!("density_dtheta is not provided for {k}"))),
    }
}

/// `𝓛^{(m)}(s)`.
pub fn lt(spec: &FrailtySpec, q: LtQuery, ctrl: &QuadratureControl) -> Result<f64> {
    check_query(q)?;
    if spec.kind == FrailtyKind::PositiveStable {
        return stable::lt(spec.theta, q.m, q.s).map(|v| v);
    }
    let eval = MomentEvaluator::new(spec, ctrl, q.m as usize)?;
    Ok(sign(q.m) * eval.log_moment(q.m, q.s)?.exp())
}

/// `∂𝓛^{(m)}(s)/∂θ`.
pub fn lt_dtheta(spec: &FrailtySpec, q: LtQuery, ctrl: &QuadratureControl) -> Result<f64> {
    check_query(q)?;
    if spec.kind == FrailtyKind::PositiveStable {
        return Err(FrailtyError::Unsupported("θ-derivatives are not provided for positive stable".into()));
    }
    let eval = MomentEvaluator::new(spec, ctrl, q.m as usize)?;
    let mo = eval.moments(q.m, q.s, Need::Score)?;
    Ok(sign(q.m) * mo.log_phi1.exp() * mo.dlog_theta)
}

/// `ψ = φ_{N+1}(H)/φ_N(H)`, the conditional frailty mean given `N` events
/// and cumulative hazard `H`.
pub fn psi(spec: &FrailtySpec, n_events: u32, h: f64, ctrl: &QuadratureControl) -> Result<f64> {
    spec.ensure_estimable()?;
    let eval = MomentEvaluator::new(spec, ctrl, n_events as usize)?;
    eval.psi(n_events, h)
}

fn check_query(q: LtQuery) -> Result<()> {
    if !(q.s >= 0.0) || !q.s.is_finite() {
        return Err(FrailtyError::DomainError { function: "lt", arg: q.s });
    }
    Ok(())
}

/// Which moment-derived quantities a caller needs; more costs more for the
/// quadrature-backed laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Need {
    /// `log φ_N` and `ψ`.
    Psi,
    /// Adds `∂ψ/∂H`.
    PsiSlope,
    /// Adds `∂ log φ_N / ∂θ`.
    Score,
}

/// Moment-derived quantities for one cluster state `(N, H)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClusterMoments {
    pub log_phi1: f64,
    pub psi: f64,
    /// `∂ψ/∂H = ψ² − φ_{N+2}/φ_N`.
    pub psi_h: f64,
    pub dlog_theta: f64,
}

enum Backend {
    Degenerate,
    Gamma(gamma::GammaMoments),
    Pvf(pvf::PvfMoments),
    Integrated(integrated::IntegratedMoments),
}

/// Evaluates cluster moments for a fixed frailty spec. Construction does the
/// per-θ precomputation (PVF coefficient tables, gamma constants) once.
pub struct MomentEvaluator {
    backend: Backend,
}

impl MomentEvaluator {
    /// `max_events` bounds the largest `N` that will be queried.
    pub fn new(spec: &FrailtySpec, ctrl: &QuadratureControl, max_events: usize) -> Result<Self> {
        if spec.kind == FrailtyKind::PositiveStable {
            return Err(FrailtyError::Unsupported(
                "positive stable frailty has infinite mean and cannot be estimated".into(),
            ));
        }
        let backend = if spec.is_degenerate() {
            Backend::Degenerate
        } else {
            match spec.kind {
                FrailtyKind::Gamma => Backend::Gamma(gamma::GammaMoments::new(spec.theta)),
                FrailtyKind::Pvf => Backend::Pvf(pvf::PvfMoments::new(spec.theta, max_events + 2)),
                FrailtyKind::LogNormal => Backend::Integrated(integrated::IntegratedMoments::lognormal(spec.theta, *ctrl)),
                FrailtyKind::InverseGaussian => {
                    Backend::Integrated(integrated::IntegratedMoments::inverse_gaussian(spec.theta, *ctrl))
                }
                FrailtyKind::None | FrailtyKind::PositiveStable => Backend::Degenerate,
            }
        };
        Ok(Self { backend })
    }

    pub fn is_integrated(&self) -> bool {
        matches!(self.backend, Backend::Integrated(_))
    }

    pub fn log_moment(&self, m: u32, h: f64) -> Result<f64> {
        match &self.backend {
            Backend::Degenerate => Ok(-h),
            Backend::Gamma(g) => Ok(g.log_moment(m, h)),
            Backend::Pvf(p) => p.log_moment(m, h),
            Backend::Integrated(q) => Ok(q.moments(m, h, Need::Psi)?.log_phi1),
        }
    }

    pub fn psi(&self, n: u32, h: f64) -> Result<f64> {
        match &self.backend {
            Backend::Degenerate => Ok(1.0),
            Backend::Gamma(g) => Ok(g.psi(n, h)),
            Backend::Pvf(p) => {
                if !(h >= 0.0) || !h.is_finite() {
                    return Err(FrailtyError::DomainError { function: "cluster moments", arg: h });
                }
                let psi = p.psi(n, h)?;
                if !(psi > 0.0) {
                    return Err(FrailtyError::NumericalUnderflow("frailty moment integrals"));
                }
                Ok(psi)
            }
            Backend::Integrated(_) => Ok(self.moments(n, h, Need::Psi)?.psi),
        }
    }

    pub fn moments(&self, n: u32, h: f64, need: Need) -> Result<ClusterMoments> {
        if !(h >= 0.0) || !h.is_finite() {
            return Err(FrailtyError::DomainError { function: "cluster moments", arg: h });
        }
        let mo = match &self.backend {
            Backend::Degenerate => ClusterMoments {
                log_phi1: -h,
                psi: 1.0,
                psi_h: 0.0,
                dlog_theta: 0.0,
            },
            Backend::Gamma(g) => g.moments(n, h),
            Backend::Pvf(p) => p.moments(n, h)?,
            Backend::Integrated(q) => q.moments(n, h, need)?,
        };
        if !(mo.psi > 0.0) || !mo.log_phi1.is_finite() {
            return Err(FrailtyError::NumericalUnderflow("frailty moment integrals"));
        }
        Ok(mo)
    }
}

#[cfg(test)]
mod tests;
