use crate::error::{FrailtyError, Result};

/// `𝓛^{(m)}(s)` of the positive stable law `𝓛(s) = exp(−s^θ)`, for `m ≤ 2`.
pub(super) fn lt(theta: f64, m: u32, s: f64) -> Result<f64> {
    if m == 0 {
        return Ok((-s.powf(theta)).exp());
    }
    if s <= 0.0 {
        return Err(FrailtyError::DomainError {
            function: "positive stable lt",
            arg: s,
        });
    }
    let st = s.powf(theta);
    let l = (-st).exp();
    match m {
        1 => Ok(-theta * st / s * l),
        2 => Ok(l * theta * st / (s * s) * (theta * st + 1.0 - theta)),
        _ => Err(FrailtyError::Unsupported(
            "positive stable derivatives above second order".into(),
        )),
    }
}
