use super::FitResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveType {
    /// `exp(−Λ̂₀(t))`.
    Surv,
    /// `Λ̂₀(t)`.
    CumHaz,
}

impl CurveType {
    pub fn name(self) -> &'static str {
        match self {
            CurveType::Surv => "surv",
            CurveType::CumHaz => "cumhaz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub time: f64,
    /// Observations with `T ≥ time`.
    pub n_risk: usize,
    /// Failures in `(previous row, time]`.
    pub n_event: usize,
    pub value: f64,
}

/// Baseline survival or cumulative hazard with the risk set. Rows are the
/// failure times (plus censoring times with `include_censored`), or the
/// sorted `at_times` when given.
pub fn summarize_curve(fit: &FitResult, kind: CurveType, at_times: Option<&[f64]>, include_censored: bool) -> Vec<CurveRow> {
    let table = &fit.risk_table;
    let times: Vec<f64> = match at_times {
        Some(ts) => {
            let mut v = ts.to_vec();
            v.sort_by(f64::total_cmp);
            v
        }
        None => table.iter().filter(|r| include_censored || r.n_event > 0).map(|r| r.time).collect(),
    };
    // Prefix counts over the ordered risk table.
    let mut before = Vec::with_capacity(table.len() + 1);
    let mut ev_upto = Vec::with_capacity(table.len() + 1);
    before.push(0usize);
    ev_upto.push(0usize);
    for r in table {
        before.push(before.last().unwrap() + r.n_event + r.n_censor);
        ev_upto.push(ev_upto.last().unwrap() + r.n_event);
    }
    let total = *before.last().unwrap();
    let mut prev_events = 0;
    times
        .into_iter()
        .map(|t| {
            let lt = table.partition_point(|r| r.time < t);
            let le = table.partition_point(|r| r.time <= t);
            let events = ev_upto[le];
            let lam = fit.baseline.value(t);
            let row = CurveRow {
                time: t,
                n_risk: total - before[lt],
                n_event: events - prev_events,
                value: match kind {
                    CurveType::Surv => (-lam).exp(),
                    CurveType::CumHaz => lam,
                },
            };
            prev_events = events;
            row
        })
        .collect()
}
