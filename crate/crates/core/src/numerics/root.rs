use crate::error::{FrailtyError, Result};

const MAX_ITER: usize = 200;

/// Closed interval on which a scalar function is expected to change sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
}

impl RootBracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(FrailtyError::InvalidParameter(format!(
                "bracket requires lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }
}

/// Brent's method: bisection safeguarded secant and inverse quadratic
/// interpolation. Returns once the bracket has shrunk below `tol` (plus a
/// few ulps of the iterate) or the function vanishes exactly.
pub fn solve_root<F>(mut f: F, bracket: RootBracket, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.is_nan() || fb.is_nan() {
        return Err(FrailtyError::NonFiniteValue("root bracket endpoint"));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(FrailtyError::NoSignChange { lo: a, hi: b });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
        if fb.is_nan() {
            return Err(FrailtyError::NonFiniteValue("root iterate"));
        }
    }
    Err(FrailtyError::MaxIterations {
        what: "Brent root finder",
        iterations: MAX_ITER,
    })
}

/// Starting from `[lo, start]`, doubles the upper end until `f` changes sign
/// relative to `f(lo)`. Gives up once the upper end exceeds `cap`.
pub fn expand_upper_bracket<F>(mut f: F, lo: f64, start: f64, cap: f64) -> Option<RootBracket>
where
    F: FnMut(f64) -> f64,
{
    let flo = f(lo);
    let mut hi = start.max(lo + f64::MIN_POSITIVE);
    let mut prev = lo;
    while hi <= cap {
        let fhi = f(hi);
        if fhi.is_nan() {
            return None;
        }
        if fhi == 0.0 || fhi.signum() != flo.signum() {
            return Some(RootBracket { lo: prev, hi });
        }
        prev = hi;
        hi *= 2.0;
    }
    None
}
