//! Shared numerical kernels: bracketing root finder, adaptive Gauss–Kronrod
//! quadrature on finite and semi-infinite intervals, central-difference
//! Jacobians and a few special functions.

mod diff;
mod quad;
mod root;
mod special;
mod sum;

pub use sum::compensated_sum;
pub use diff::{default_step, numeric_gradient, numeric_gradient_with_steps, numeric_jacobian};
pub use quad::{integrate, integrate_mapped, integrate_vec, Integral, IntegralVec, QuadratureControl};
pub use root::{expand_upper_bracket, solve_root, RootBracket};
pub use special::{digamma, log_gamma, special, truncated_zeta_sum, SpecialKind};
