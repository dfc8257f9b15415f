use crate::error::{FrailtyError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpecialKind {
    LogGamma,
    Digamma,
    /// Partial sum `Σ_{j=1}^{terms} j^{-s}` with `s` taken from the argument.
    TruncatedZetaSum { terms: u64 },
}

pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(FrailtyError::DomainError { function: "log_gamma", arg: x });
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}

pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(FrailtyError::DomainError { function: "digamma", arg: x });
    }
    Ok(statrs::function::gamma::digamma(x))
}

/// `Σ_{j=1}^{terms} j^{-s}`, summed smallest terms first.
pub fn truncated_zeta_sum(s: f64, terms: u64) -> Result<f64> {
    if !s.is_finite() {
        return Err(FrailtyError::DomainError { function: "truncated_zeta_sum", arg: s });
    }
    Ok((1..=terms).rev().map(|j| (j as f64).powf(-s)).sum())
}

pub fn special(kind: SpecialKind, x: f64) -> Result<f64> {
    match kind {
        SpecialKind::LogGamma => log_gamma(x),
        SpecialKind::Digamma => digamma(x),
        SpecialKind::TruncatedZetaSum { terms } => truncated_zeta_sum(x, terms),
    }
}
