use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean and sample standard deviation; `None` for the deviation with fewer
/// than two values.
pub fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Two-sided Student-t quantile `t_{1−α/2, df}`.
pub fn t_quantile(alpha: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).map_or(f64::NAN, |t| t.inverse_cdf(1.0 - alpha / 2.0))
}

fn t_two_sided_p(t: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).map_or(f64::NAN, |d| 2.0 * (1.0 - d.cdf(t.abs())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Mean with a 95% t interval (degenerate with one value).
pub fn mean_interval(values: &[f64]) -> Interval {
    let (m, sd) = mean_sd(values);
    let half = sd.map_or(0.0, |s| t_quantile(0.05, values.len() as f64 - 1.0) * s / (values.len() as f64).sqrt());
    Interval {
        estimate: m,
        lower: m - half,
        upper: m + half,
    }
}

/// Wilson score interval for `successes` out of `trials` at level 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> Interval {
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    Interval {
        estimate: p,
        lower: (centre - half).max(0.0),
        upper: (centre + half).min(1.0),
    }
}

/// Ordinary least squares `y = a + b x`; returns the slope with a 95% interval.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Interval {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    let half = t_quantile(0.05, n - 2.0) * se;
    Interval {
        estimate: b,
        lower: b - half,
        upper: b + half,
    }
}

/// Average ranks (1-based), ties sharing the mean rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub rho: f64,
    /// Two-sided p-value from the t approximation with `n − 2` degrees of freedom.
    pub p_value: f64,
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> Correlation {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    let rho = sxy / (sxx * syy).sqrt();
    let t = rho * ((n - 2.0) / (1.0 - rho * rho).max(f64::MIN_POSITIVE)).sqrt();
    Correlation {
        rho,
        p_value: t_two_sided_p(t, n - 2.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Welch's unequal-variance two-sample t test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> TTest {
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let va = sa.unwrap_or(0.0).powi(2) / a.len() as f64;
    let vb = sb.unwrap_or(0.0).powi(2) / b.len() as f64;
    let se = (va + vb).sqrt();
    if se == 0.0 {
        let same = ma == mb;
        return TTest {
            statistic: if same { 0.0 } else { f64::INFINITY },
            df: f64::INFINITY,
            p_value: if same { 1.0 } else { 0.0 },
        };
    }
    let statistic = (ma - mb) / se;
    let df = (va + vb).powi(2) / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    TTest {
        statistic,
        df,
        p_value: t_two_sided_p(statistic, df),
    }
}
