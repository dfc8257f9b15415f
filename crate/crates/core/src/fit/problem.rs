use super::objective::{loglik_value, score_contributions, sum_contributions};
use super::prepared::Prepared;
use super::recursion::{baseline_recursion, BaselineJumps};
use crate::error::Result;
use crate::frailty::{FrailtyKind, FrailtySpec, MomentEvaluator, Need};
use crate::numerics::QuadratureControl;

/// A prepared dataset paired with a frailty family: maps the packed
/// parameter vector γ (β, then θ unless the family is `None`) to baselines,
/// log-likelihoods and scores.
pub(crate) struct Problem<'a> {
    pub prep: &'a Prepared,
    pub kind: FrailtyKind,
    pub quad: QuadratureControl,
}

impl<'a> Problem<'a> {
    pub fn new(prep: &'a Prepared, kind: FrailtyKind, quad: QuadratureControl) -> Self {
        Self { prep, kind, quad }
    }

    pub fn with_theta(&self) -> bool {
        self.kind != FrailtyKind::None
    }

    pub fn n_params(&self) -> usize {
        self.prep.p + usize::from(self.with_theta())
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.kind.theta_bounds()
    }

    pub fn spec(&self, g: &[f64]) -> FrailtySpec {
        if self.with_theta() {
            FrailtySpec {
                kind: self.kind,
                theta: g[self.prep.p],
            }
        } else {
            FrailtySpec::none()
        }
    }

    pub fn evaluator(&self, g: &[f64]) -> Result<MomentEvaluator> {
        MomentEvaluator::new(&self.spec(g), &self.quad, self.prep.max_events + 2)
    }

    pub fn baseline(&self, g: &[f64]) -> Result<BaselineJumps> {
        let eval = self.evaluator(g)?;
        let risk = self.prep.risk_scores(&g[..self.prep.p]);
        baseline_recursion(self.prep, &eval, &risk, Need::Psi, |_, _, _, _| {})
    }

    pub fn loglik(&self, g: &[f64], jumps: &BaselineJumps) -> Result<f64> {
        loglik_value(self.prep, &self.evaluator(g)?, &g[..self.prep.p], jumps)
    }

    /// Per-cluster score contributions truncated to the free parameters.
    pub fn contributions(&self, g: &[f64], jumps: &BaselineJumps) -> Result<Vec<Vec<f64>>> {
        self.contributions_on(g, jumps, false)
    }

    pub fn contributions_on(&self, g: &[f64], jumps: &BaselineJumps, uncentred: bool) -> Result<Vec<Vec<f64>>> {
        let mut parts = score_contributions(self.prep, &self.evaluator(g)?, &g[..self.prep.p], jumps, self.with_theta(), uncentred)?;
        let m = self.n_params();
        for u in parts.iter_mut() {
            u.truncate(m);
        }
        Ok(parts)
    }

    pub fn gradient(&self, g: &[f64], jumps: &BaselineJumps) -> Result<Vec<f64>> {
        Ok(sum_contributions(&self.contributions(g, jumps)?))
    }

    /// Score with the baseline re-estimated at γ, divided by the number of clusters.
    pub fn profile_score(&self, g: &[f64]) -> Result<(Vec<f64>, BaselineJumps)> {
        let jumps = self.baseline(g)?;
        let n = self.prep.n_clusters() as f64;
        let u = self.gradient(g, &jumps)?.into_iter().map(|v| v / n).collect();
        Ok((u, jumps))
    }

    pub fn clamp(&self, g: &mut [f64]) {
        if self.with_theta() {
            let (lo, hi) = self.bounds();
            let t = &mut g[self.prep.p];
            *t = t.clamp(lo, hi);
        }
    }

    /// Reflects θ off the box edges, then clamps.
    pub fn reflect(&self, g: &mut [f64]) {
        if self.with_theta() {
            let (lo, hi) = self.bounds();
            let t = &mut g[self.prep.p];
            if *t < lo {
                *t = lo + (lo - *t);
            } else if *t > hi {
                *t = hi - (*t - hi);
            }
            *t = t.clamp(lo, hi);
        }
    }
}
