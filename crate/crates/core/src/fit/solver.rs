use nalgebra::{DMatrix, DVector};

use super::problem::Problem;
use super::recursion::BaselineJumps;
use super::{ConvergenceReason, FitControl, FitMethod, InnerSolve, TraceRecord};
use crate::error::{FrailtyError, Result};
use crate::numerics::{default_step, numeric_gradient_with_steps};

pub(crate) struct Solution {
    pub gamma: Vec<f64>,
    pub jumps: BaselineJumps,
    pub loglik: f64,
    pub iterations: usize,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    pub reason: ConvergenceReason,
}

pub(crate) fn solve(problem: &Problem, ctrl: &FitControl, mut start: Vec<f64>) -> Result<Solution> {
    problem.clamp(&mut start);
    match ctrl.fit_method {
        FitMethod::Loglik => solve_loglik(problem, ctrl, start),
        FitMethod::Score => solve_score(problem, ctrl, start),
    }
}

fn log_iteration(ctrl: &FitControl, it: usize, g: &[f64], ll: f64) {
    if ctrl.verbose {
        log::info!("iteration {it}: gamma = {g:?}, loglik = {ll:.6}");
    }
}

/// Current point of the quasi-Newton ascent at a fixed baseline.
struct Point {
    g: Vec<f64>,
    ll: f64,
    grad: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 40;
const MAX_STEP: f64 = 2.0;

/// BHHH start for the inverse Hessian: `(Σ UᵢUᵢᵀ)⁻¹` with a small ridge.
fn bhhh_inverse(parts: &[Vec<f64>]) -> DMatrix<f64> {
    let m = parts.first().map_or(0, Vec::len);
    let mut b = DMatrix::<f64>::zeros(m, m);
    for u in parts {
        let v = DVector::from_column_slice(u);
        b += &v * v.transpose();
    }
    let ridge = 1e-8 * b.trace().max(1e-300) / m.max(1) as f64;
    for i in 0..m {
        b[(i, i)] += ridge;
    }
    b.try_inverse().unwrap_or_else(|| DMatrix::identity(m, m))
}

/// Projected backtracking search along `H·∇` for an Armijo increase of
/// ℓ(·; jumps). Falls back to the gradient when `H·∇` is not an ascent direction.
fn line_search(problem: &Problem, jumps: &BaselineJumps, pt: &Point, h: &DMatrix<f64>) -> Option<(Vec<f64>, f64)> {
    let m = pt.g.len();
    let grad = DVector::from_column_slice(&pt.grad);
    let mut d = h * &grad;
    if grad.dot(&d) <= 0.0 {
        d = grad.clone();
    }
    let big = d.amax();
    if big > MAX_STEP {
        d *= MAX_STEP / big;
    }
    let mut alpha = 1.0;
    for _ in 0..MAX_BACKTRACK {
        let mut cand: Vec<f64> = (0..m).map(|i| pt.g[i] + alpha * d[i]).collect();
        problem.clamp(&mut cand);
        let s: f64 = (0..m).map(|i| (cand[i] - pt.g[i]) * pt.grad[i]).sum();
        if (0..m).all(|i| cand[i] == pt.g[i]) {
            return None;
        }
        if let Ok(ll) = problem.loglik(&cand, jumps) {
            if ll >= pt.ll + ARMIJO * s {
                return Some((cand, ll));
            }
        }
        alpha *= 0.5;
    }
    None
}

/// BFGS update of the inverse Hessian of −ℓ with step `s` and gradient
/// decrease `y`; skipped when the curvature condition fails.
fn bfgs_update(h: &mut DMatrix<f64>, s: &[f64], y: &[f64]) {
    let s = DVector::from_column_slice(s);
    let y = DVector::from_column_slice(y);
    let sy = s.dot(&y);
    if sy > 1e-12 * s.norm() * y.norm() {
        let hy = &*h * &y;
        let yhy = y.dot(&hy);
        *h = &*h + (&s * s.transpose()) * ((sy + yhy) / (sy * sy)) - (&hy * s.transpose() + &s * hy.transpose()) / sy;
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// One projected BFGS iteration on ℓ(·; jumps) with curvature pairs taken at
/// the same baseline. Returns false when no ascent step could be found.
fn bfgs_step(problem: &Problem, jumps: &BaselineJumps, pt: &mut Point, hinv: &mut Option<DMatrix<f64>>) -> Result<bool> {
    if hinv.is_none() {
        *hinv = Some(bhhh_inverse(&problem.contributions(&pt.g, jumps)?));
    }
    let h = hinv.as_mut().expect("initialized above");
    let Some((cand, ll)) = line_search(problem, jumps, pt, h) else {
        return Ok(false);
    };
    let new_grad = problem.gradient(&cand, jumps)?;
    bfgs_update(h, &diff(&cand, &pt.g), &diff(&pt.grad, &new_grad));
    *pt = Point {
        g: cand,
        ll,
        grad: new_grad,
    };
    Ok(true)
}

const FULL_INNER_MAX: usize = 200;

fn solve_loglik(problem: &Problem, ctrl: &FitControl, start: Vec<f64>) -> Result<Solution> {
    let mut jumps = problem.baseline(&start)?;
    let mut pt = Point {
        ll: problem.loglik(&start, &jumps)?,
        grad: problem.gradient(&start, &jumps)?,
        g: start,
    };
    let mut hinv: Option<DMatrix<f64>> = None;
    let mut trace = Vec::new();
    let n = problem.prep.n_clusters() as f64;
    for it in 1..=ctrl.max_iter {
        let prev = Point {
            g: pt.g.clone(),
            ll: pt.ll,
            grad: pt.grad.clone(),
        };
        let moved = match ctrl.inner {
            InnerSolve::SingleStep => {
                let mut found = None;
                for _ in 0..2 {
                    if hinv.is_none() {
                        hinv = Some(match profile_inverse(problem, &pt.g) {
                            Some(h) => h,
                            None => bhhh_inverse(&problem.contributions(&pt.g, &jumps)?),
                        });
                    }
                    found = line_search(problem, &jumps, &pt, hinv.as_ref().expect("initialized above"));
                    if found.is_some() {
                        break;
                    }
                    hinv = None;
                }
                if let Some((cand, ll)) = found {
                    pt.g = cand;
                    pt.ll = ll;
                    true
                } else {
                    false
                }
            }
            InnerSolve::Full => {
                let mut local = None;
                let mut any = false;
                for _ in 0..FULL_INNER_MAX {
                    let before = pt.ll;
                    if !bfgs_step(problem, &jumps, &mut pt, &mut local)? {
                        break;
                    }
                    any = true;
                    let gmax = pt.grad.iter().fold(0.0f64, |a, v| a.max(v.abs())) / n;
                    if gmax <= 1e-9 || (pt.ll - before).abs() <= 1e-14 * pt.ll.abs() {
                        break;
                    }
                }
                any
            }
        };
        // Both the inner improvement (baseline held) and the change across the
        // baseline refresh must be small.
        let inner_gain = pt.ll - prev.ll;
        jumps = problem.baseline(&pt.g)?;
        pt.ll = problem.loglik(&pt.g, &jumps)?;
        let delta = inner_gain.abs().max((pt.ll - prev.ll).abs());
        pt.grad = problem.gradient(&pt.g, &jumps)?;
        if ctrl.inner == InnerSolve::SingleStep && moved {
            // Curvature from profile scores on both sides of the baseline refresh.
            if let Some(h) = hinv.as_mut() {
                bfgs_update(h, &diff(&pt.g, &prev.g), &diff(&prev.grad, &pt.grad));
            }
        }
        trace.push(TraceRecord {
            gamma: pt.g.clone(),
            loglik: pt.ll,
        });
        log_iteration(ctrl, it, &pt.g, pt.ll);
        let reason = if ctrl.abs_tol > 0.0 && delta <= ctrl.abs_tol {
            Some(ConvergenceReason::AbsoluteLoglik)
        } else if ctrl.rel_tol > 0.0 && delta <= ctrl.rel_tol * pt.ll.abs() {
            Some(ConvergenceReason::RelativeLoglik)
        } else if !moved {
            Some(ConvergenceReason::LineSearchFailure)
        } else {
            None
        };
        if let Some(reason) = reason {
            let converged = reason != ConvergenceReason::LineSearchFailure || grad_small(problem, &pt.g, &jumps)?;
            return Ok(Solution {
                gamma: pt.g,
                jumps,
                loglik: pt.ll,
                iterations: it,
                trace,
                converged,
                reason,
            });
        }
    }
    Ok(Solution {
        gamma: pt.g,
        jumps,
        loglik: pt.ll,
        iterations: ctrl.max_iter,
        trace,
        converged: false,
        reason: ConvergenceReason::MaxIterations,
    })
}

/// Inverse of the negated, symmetrized profile-score Jacobian (scaled back to
/// the unnormalized score), when it is positive definite.
fn profile_inverse(problem: &Problem, g: &[f64]) -> Option<DMatrix<f64>> {
    let jac = profile_jacobian(problem, g).ok()?;
    let n = problem.prep.n_clusters() as f64;
    let a = -(&jac + jac.transpose()) * (0.5 * n);
    let chol = a.cholesky()?;
    Some(chol.inverse())
}

fn grad_small(problem: &Problem, g: &[f64], jumps: &BaselineJumps) -> Result<bool> {
    let n = problem.prep.n_clusters() as f64;
    Ok(problem.gradient(g, jumps)?.iter().all(|v| (v / n).abs() <= 1e-6))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Central-difference steps kept inside the θ box.
fn probe_steps(problem: &Problem, g: &[f64]) -> Vec<f64> {
    let mut steps: Vec<f64> = g.iter().map(|&v| default_step(v)).collect();
    if problem.with_theta() {
        let p = problem.prep.p;
        let (lo, hi) = problem.bounds();
        let room = (g[p] - lo).min(hi - g[p]);
        if room > 0.0 {
            steps[p] = steps[p].min(0.5 * room);
        } else {
            steps[p] = steps[p].min(0.5 * (hi - lo)) * 1e-3;
        }
    }
    steps
}

pub(crate) fn profile_jacobian(problem: &Problem, g: &[f64]) -> Result<DMatrix<f64>> {
    let steps = probe_steps(problem, g);
    let mut failure = None;
    let jac = numeric_gradient_with_steps(
        |x| {
            let mut probe = x.to_vec();
            problem.clamp(&mut probe);
            match problem.profile_score(&probe) {
                Ok((u, _)) => u,
                Err(e) => {
                    failure.get_or_insert(e);
                    vec![f64::NAN; x.len()]
                }
            }
        },
        g,
        &steps,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    jac
}

fn solve_score(problem: &Problem, ctrl: &FitControl, start: Vec<f64>) -> Result<Solution> {
    let m = start.len();
    let mut g = start;
    let (mut f, mut jumps) = problem.profile_score(&g)?;
    let mut trace = Vec::new();
    if ctrl.abs_tol > 0.0 && max_abs(&f) <= ctrl.abs_tol {
        let loglik = problem.loglik(&g, &jumps)?;
        return Ok(Solution {
            gamma: g,
            jumps,
            loglik,
            iterations: 0,
            trace,
            converged: true,
            reason: ConvergenceReason::AbsoluteScore,
        });
    }
    for it in 1..=ctrl.max_iter {
        let jac = profile_jacobian(problem, &g)?;
        let rhs = DVector::from_column_slice(&f);
        let step = jac.lu().solve(&rhs).ok_or(FrailtyError::SingularJacobian)?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(FrailtyError::SingularJacobian);
        }
        let norm0 = rhs.norm();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let mut cand: Vec<f64> = (0..m).map(|i| g[i] - alpha * step[i]).collect();
            problem.reflect(&mut cand);
            if let Ok((fc, jc)) = problem.profile_score(&cand) {
                let nc = fc.iter().map(|v| v * v).sum::<f64>().sqrt();
                if nc.is_finite() && nc <= (1.0 - ARMIJO * alpha) * norm0 {
                    accepted = Some((cand, fc, jc));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((cand, fc, jc)) = accepted else {
            let loglik = problem.loglik(&g, &jumps)?;
            let converged = max_abs(&f) <= 1e-6;
            return Ok(Solution {
                gamma: g,
                jumps,
                loglik,
                iterations: it - 1,
                trace,
                converged,
                reason: ConvergenceReason::LineSearchFailure,
            });
        };
        let rel = (0..m).map(|i| (cand[i] - g[i]).abs() / g[i].abs().max(1.0)).fold(0.0f64, f64::max);
        g = cand;
        f = fc;
        jumps = jc;
        let ll = problem.loglik(&g, &jumps)?;
        trace.push(TraceRecord {
            gamma: g.clone(),
            loglik: ll,
        });
        log_iteration(ctrl, it, &g, ll);
        let reason = if ctrl.abs_tol > 0.0 && max_abs(&f) <= ctrl.abs_tol {
            Some(ConvergenceReason::AbsoluteScore)
        } else if ctrl.rel_tol > 0.0 && rel <= ctrl.rel_tol {
            Some(ConvergenceReason::RelativeStep)
        } else {
            None
        };
        if let Some(reason) = reason {
            return Ok(Solution {
                gamma: g,
                jumps,
                loglik: ll,
                iterations: it,
                trace,
                converged: true,
                reason,
            });
        }
    }
    let loglik = problem.loglik(&g, &jumps)?;
    Ok(Solution {
        gamma: g,
        jumps,
        loglik,
        iterations: ctrl.max_iter,
        trace,
        converged: false,
        reason: ConvergenceReason::MaxIterations,
    })
}
