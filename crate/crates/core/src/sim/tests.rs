use super::*;
use crate::datagen::{BaselineMode, BaselineSpec};

fn small(n: usize) -> GenerationConfig {
    GenerationConfig::simulation_study(n, 2, FrailtySpec::gamma(2.0).unwrap(), 0)
}

#[test]
fn single_rep_without_errors_is_a_passthrough() {
    let mut cfg = SimulationConfig::new(1, small(60), 5);
    cfg.se = SeMethod::None;
    cfg.lambda_times = vec![60.0];
    let s = simulate(&cfg).unwrap();
    let data = generate(&GenerationConfig {
        seed: derive_seed(5, 0),
        ..small(60)
    })
    .unwrap();
    let fit = fit_model(&data, &FrailtySpec::gamma(1.0).unwrap(), &FitControl::default()).unwrap();
    assert_eq!(s.converged, 1);
    let names: Vec<&str> = s.rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["beta.Z1", "beta.Z2", "theta", "Lambda.60"]);
    for (row, v) in s.rows.iter().zip(fit.free_parameters().iter().chain([fit.baseline.value(60.0)].iter())) {
        assert_eq!(row.mean_hat, *v);
        assert!(row.sd_hat.is_none() && row.mean_se.is_none() && row.cov_95ci.is_none());
    }
}

#[test]
fn summary_is_independent_of_worker_count() {
    let run = |workers| {
        let mut cfg = SimulationConfig::new(4, small(40), 9);
        cfg.workers = Some(workers);
        cfg.lambda_times = vec![30.0, 90.0];
        simulate(&cfg).unwrap()
    };
    let (a, b) = (run(1), run(3));
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.mean_hat, y.mean_hat);
        assert_eq!(x.sd_hat, y.sd_hat);
        assert_eq!(x.mean_se, y.mean_se);
        assert_eq!(x.cov_95ci, y.cov_95ci);
    }
}

#[test]
fn coverage_rows_and_lambda_rows() {
    let mut cfg = SimulationConfig::new(5, small(50), 3);
    cfg.lambda_times = vec![30.0];
    let s = simulate(&cfg).unwrap();
    assert_eq!(s.converged + s.failed, 5);
    for r in &s.rows[..3] {
        let c = r.cov_95ci.unwrap();
        assert!((0.0..=1.0).contains(&c));
        let w = r.cov_interval.unwrap();
        assert!(w.lower <= c && c <= w.upper);
        assert!(r.mean_se.unwrap() > 0.0);
    }
    let lam = s.row("Lambda.30").unwrap();
    assert!(lam.mean_se.is_none() && lam.cov_95ci.is_none());
    assert!(s.runtime_total > 0.0 && s.runtime_mean > 0.0);
}

#[test]
fn true_hazard_matches_every_baseline_mode() {
    let times = [0.0, 30.0, 60.0, 90.0];
    let closed: Vec<f64> = times.iter().map(|t| (0.01f64 * t).powf(4.6)).collect();
    for mode in [BaselineMode::InverseCumulative, BaselineMode::Cumulative, BaselineMode::Hazard] {
        let cfg = GenerationConfig {
            baseline: BaselineSpec::weibull(mode, 0.01, 4.6),
            ..small(10)
        };
        let got = true_cumulative_hazard(&cfg, &times).unwrap();
        for (g, c) in got.iter().zip(&closed) {
            assert!((g - c).abs() <= 1e-12 * c.max(1.0), "{mode:?}: {g} vs {c}");
        }
    }
    assert!((closed[1] - 0.003933).abs() < 1e-6);
}

#[test]
fn invalid_study_settings() {
    assert!(simulate(&SimulationConfig::new(0, small(10), 0)).is_err());
    let bench = BenchmarkConfig::new(BenchOp::Generate, vec![10, 20, 30], vec![FrailtySpec::gamma(1.0).unwrap()], 1, 0);
    assert!(benchmark(&bench).is_err());
    let sweep = SweepConfig {
        param: TolParam::RelTol,
        values: vec![1e-3, 0.0],
        generation: small(10),
        control: FitControl::default(),
        reps: 1,
        seed: 0,
        workers: None,
    };
    assert!(tolerance_sweep(&sweep).is_err());
    assert_eq!(SeMethod::parse("bootstrap", 50).unwrap(), SeMethod::Bootstrap { replicates: 50 });
    assert!(SeMethod::parse("jackknife", 1).is_err());
}

#[test]
fn benchmark_reports_positive_timings_and_a_slope() {
    let cfg = BenchmarkConfig::new(BenchOp::Generate, vec![20, 40, 60, 80], vec![FrailtySpec::gamma(2.0).unwrap()], 2, 4);
    let r = benchmark(&cfg).unwrap();
    assert_eq!(r.timings.len(), 8);
    assert!(r.timings.iter().all(|t| t.seconds > 0.0));
    let s = r.slopes[0].slope;
    assert!(s.lower <= s.estimate && s.estimate <= s.upper);
}

#[test]
fn sweep_pairs_tolerances_and_reuses_datasets() {
    let base = FitControl::default();
    let c = TolParam::AbsTol.apply(&base, 1e-4);
    assert_eq!((c.abs_tol, c.rel_tol), (1e-4, 0.0));
    let c = TolParam::IntRelTol.apply(&base, 1e-3);
    assert_eq!((c.int_rel_tol, c.int_abs_tol), (1e-3, 0.0));
    assert_eq!(TolParam::parse("int-rel-tol").unwrap(), TolParam::IntRelTol);

    let cfg = SweepConfig {
        param: TolParam::RelTol,
        values: vec![1e-8, 1e-6],
        generation: small(50),
        control: base,
        reps: 3,
        seed: 2,
        workers: Some(1),
    };
    let r = tolerance_sweep(&cfg).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert_eq!(r.points.len(), 6);
    for k in 0..3 {
        let d: Vec<f64> = (0..3).map(|rep| (r.points[rep].residuals[k] - r.points[3 + rep].residuals[k]).abs()).collect();
        assert!(d.iter().all(|&v| v < 1e-3), "residual {k}: {d:?}");
    }
    assert!(r.rows[0].residual_theta.is_some());
    assert!(r.residual_change(0).p_value > 0.05);
}
