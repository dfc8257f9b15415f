use nalgebra::DMatrix;

use crate::error::{FrailtyError, Result};

/// Default central-difference step for coordinate `x`: `ε^{1/3}·max(1, |x|)`.
pub fn default_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// Central-difference Jacobian of `f` at `x` with per-coordinate steps.
/// Row `r`, column `c` holds `∂f_r/∂x_c`.
pub fn numeric_gradient_with_steps<F>(mut f: F, x: &[f64], steps: &[f64]) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    assert_eq!(x.len(), steps.len());
    let mut probe = x.to_vec();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(x.len());
    for c in 0..x.len() {
        let h = steps[c];
        if !(h > 0.0) {
            return Err(FrailtyError::InvalidParameter(format!("step {h} must be positive")));
        }
        probe[c] = x[c] + h;
        let up = f(&probe);
        probe[c] = x[c] - h;
        let down = f(&probe);
        probe[c] = x[c];
        if up.len() != down.len() {
            return Err(FrailtyError::InvalidParameter("function output length changed".into()));
        }
        if up.iter().chain(down.iter()).any(|v| !v.is_finite()) {
            return Err(FrailtyError::NonFiniteValue("numeric_gradient probe"));
        }
        columns.push(up.iter().zip(&down).map(|(u, d)| (u - d) / (2.0 * h)).collect());
    }
    let rows = columns.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows, x.len(), |r, c| columns[c][r]))
}

/// Central-difference Jacobian. `step = None` uses [`default_step`] per
/// coordinate; `Some(h)` uses the absolute step `h` everywhere.
pub fn numeric_gradient<F>(f: F, x: &[f64], step: Option<f64>) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let steps: Vec<f64> = match step {
        Some(h) => vec![h; x.len()],
        None => x.iter().map(|&v| default_step(v)).collect(),
    };
    numeric_gradient_with_steps(f, x, &steps)
}

/// Alias kept for call sites that read better as "Jacobian".
pub fn numeric_jacobian<F>(f: F, x: &[f64], step: Option<f64>) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    numeric_gradient(f, x, step)
}
