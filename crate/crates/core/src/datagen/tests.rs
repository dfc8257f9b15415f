use super::*;
use crate::frailty::{kendall_tau, FrailtyKind};
use proptest::prelude::*;

fn gamma2() -> FrailtySpec {
    FrailtySpec::new(FrailtyKind::Gamma, 2.0).unwrap()
}

#[test]
fn round_time_examples() {
    assert_eq!(round_times(&[87.95447, 2.4, 2.5], 10.0)[0], 90.0);
    assert_eq!(round_times(&[2.4], 1.0), vec![2.0]);
    assert_eq!(round_times(&[2.5], 1.0), vec![3.0]);
}

#[test]
fn example_config_shape_and_censoring() {
    let mut rates = Vec::new();
    for seed in 0..5 {
        let d = generate(&GenerationConfig::example(300, gamma2(), seed)).unwrap();
        assert_eq!(d.len(), 600);
        assert_eq!(d.n_clusters(), 300);
        rates.push(d.censor_rate());
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    assert!((mean - 0.40).abs() < 0.05, "{rates:?}");
}

#[test]
fn members_are_numbered_within_clusters() {
    let mut cfg = GenerationConfig::example(50, gamma2(), 3);
    cfg.sizes = ClusterSizeSpec::TruncatedPoisson { lambda: 2.0, k: 0 };
    let d = generate(&cfg).unwrap();
    let mut expected = 1;
    let mut current = 0;
    for r in &d.records {
        if r.cluster != current {
            current = r.cluster;
            expected = 1;
        }
        assert_eq!(r.member, expected);
        expected += 1;
    }
}

#[test]
fn baseline_modes_generate_the_same_data() {
    let mut out = Vec::new();
    for mode in [BaselineMode::InverseCumulative, BaselineMode::Cumulative, BaselineMode::Hazard] {
        let mut cfg = GenerationConfig::example(100, gamma2(), 2015);
        cfg.baseline = BaselineSpec::weibull(mode, 0.01, 4.6);
        out.push(generate(&cfg).unwrap());
    }
    for other in &out[1..] {
        for (a, b) in out[0].records.iter().zip(&other.records) {
            assert_eq!(a.covariates, b.covariates);
            assert_eq!(a.status, b.status);
            assert!((a.time - b.time).abs() < 1e-3, "{} vs {}", a.time, b.time);
        }
    }
}

#[test]
fn status_matches_latent_draws() {
    let (d, tr) = generate_with_trace(&GenerationConfig::example(200, gamma2(), 8)).unwrap();
    assert_eq!(tr.frailties.len(), 200);
    for (k, r) in d.records.iter().enumerate() {
        if r.status {
            assert_eq!(r.time, tr.failure_times[k]);
            assert!(tr.failure_times[k] <= tr.censor_times[k]);
        } else {
            assert_eq!(r.time, tr.censor_times[k]);
            assert!(tr.censor_times[k] < tr.failure_times[k]);
        }
    }
}

// asymptotic Kolmogorov distribution tail
fn ks_pvalue(d: f64, n: usize) -> f64 {
    let x = d * (n as f64).sqrt();
    let mut p = 0.0;
    for k in 1..100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * x * x).exp();
    }
    p.clamp(0.0, 1.0)
}

#[test]
fn independent_uncensored_times_follow_the_baseline() {
    let cfg = GenerationConfig {
        n_clusters: 5000,
        sizes: ClusterSizeSpec::Fixed(2),
        beta: vec![0.0],
        covariates: CovariateSpec::Normal { mean: 0.0, sd: 1.0 },
        frailty: FrailtySpec::none(),
        baseline: BaselineSpec::weibull(BaselineMode::Cumulative, 0.01, 4.6),
        censoring: CensoringSpec::None,
        round_base: None,
        seed: 21,
    };
    let d = generate(&cfg).unwrap();
    assert!(d.records.iter().all(|r| r.status));
    let mut t: Vec<f64> = d.records.iter().map(|r| r.time).collect();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = t.len();
    let mut dmax: f64 = 0.0;
    for (i, &x) in t.iter().enumerate() {
        let f = 1.0 - (-(0.01 * x).powf(4.6)).exp();
        dmax = dmax.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    assert!(ks_pvalue(dmax, n) > 0.01, "D = {dmax}");
}

#[test]
fn target_censoring_rate_is_achieved() {
    for seed in 0..10 {
        let mut cfg = GenerationConfig::example(300, gamma2(), 100 + seed);
        cfg.censoring = CensoringSpec::Distribution {
            kind: CensorKind::Normal,
            params: [0.0, 15.0],
            target_rate: Some(0.3),
        };
        let d = generate(&cfg).unwrap();
        let sd = (0.3 * 0.7 / 600.0f64).sqrt();
        assert!((d.censor_rate() - 0.3).abs() < 3.0 * sd, "seed {seed}: {}", d.censor_rate());
        assert!(d.meta.censor_param.is_some());
    }
    let mut cfg = GenerationConfig::example(300, gamma2(), 2015);
    cfg.censoring = CensoringSpec::Distribution {
        kind: CensorKind::Normal,
        params: [0.0, 15.0],
        target_rate: Some(0.3),
    };
    let d = generate(&cfg).unwrap();
    assert!((d.censor_rate() - 0.3).abs() < 0.02, "{}", d.censor_rate());
}

#[test]
fn pvf_with_target_rate_and_other_censoring_laws() {
    let mut cfg = GenerationConfig::example(300, FrailtySpec::new(FrailtyKind::Pvf, 0.3).unwrap(), 2015);
    for (kind, params) in [(CensorKind::Normal, [0.0, 15.0]), (CensorKind::LogNormal, [0.0, 20.0]), (CensorKind::Uniform, [0.0, 0.0])] {
        cfg.censoring = CensoringSpec::Distribution {
            kind,
            params,
            target_rate: Some(0.4),
        };
        let d = generate(&cfg).unwrap();
        assert!((d.censor_rate() - 0.4).abs() < 0.06, "{kind:?}: {}", d.censor_rate());
    }
}

#[test]
fn explicit_inputs() {
    let mut cfg = GenerationConfig::example(3, gamma2(), 1);
    cfg.beta = vec![0.5];
    cfg.covariates = CovariateSpec::Explicit(vec![vec![1.0], vec![0.0], vec![1.0], vec![0.0], vec![1.0], vec![0.0]]);
    cfg.censoring = CensoringSpec::Explicit(vec![0.0, 1e9, 0.0, 1e9, 0.0, 1e9]);
    let d = generate(&cfg).unwrap();
    assert_eq!(d.records[1].covariates, vec![0.0]);
    assert!(!d.records[0].status && d.records[1].status);

    cfg.sizes = ClusterSizeSpec::DiscreteUniform { l: 1, u: 3 };
    assert!(generate(&cfg).is_err());
}

#[test]
fn rounding_produces_exact_multiples_and_ties() {
    let mut cfg = GenerationConfig::example(100, gamma2(), 4);
    cfg.round_base = Some(10.0);
    let d = generate(&cfg).unwrap();
    for r in &d.records {
        assert_eq!((r.time / 10.0).round() * 10.0, r.time);
    }
    let mut t: Vec<f64> = d.records.iter().map(|r| r.time).collect();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t.dedup();
    assert!(t.len() < 100);
}

#[test]
fn oscillating_hazard_runs() {
    let mut cfg = GenerationConfig::example(100, gamma2(), 5);
    cfg.baseline = BaselineSpec::oscillating(2.0, 0.1, 0.01, 4.6);
    let d = generate(&cfg).unwrap();
    assert!(d.records.iter().all(|r| r.time.is_finite() && r.time > 0.0));
}

fn kendall_empirical(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let a = (pairs[i].0 - pairs[j].0) * (pairs[i].1 - pairs[j].1);
            s += if a > 0.0 { 1 } else if a < 0.0 { -1 } else { 0 };
        }
    }
    2.0 * s as f64 / (n * (n - 1)) as f64
}

#[test]
fn within_cluster_dependence_matches_kendall_tau() {
    let ctrl = QuadratureControl::tight();
    for spec in [
        gamma2(),
        FrailtySpec::new(FrailtyKind::Pvf, 0.3).unwrap(),
        FrailtySpec::new(FrailtyKind::LogNormal, 1.172).unwrap(),
        FrailtySpec::new(FrailtyKind::InverseGaussian, 2.035).unwrap(),
        FrailtySpec::new(FrailtyKind::PositiveStable, 0.6).unwrap(),
    ] {
        let cfg = GenerationConfig {
            n_clusters: 2000,
            sizes: ClusterSizeSpec::Fixed(2),
            beta: vec![0.0],
            covariates: CovariateSpec::Normal { mean: 0.0, sd: 1.0 },
            frailty: spec,
            baseline: BaselineSpec::weibull(BaselineMode::InverseCumulative, 0.01, 4.6),
            censoring: CensoringSpec::None,
            round_base: None,
            seed: 77,
        };
        let d = generate(&cfg).unwrap();
        let pairs: Vec<(f64, f64)> = d.records.chunks(2).map(|c| (c[0].time, c[1].time)).collect();
        let emp = kendall_empirical(&pairs);
        let tau = kendall_tau(&spec, &ctrl).unwrap();
        let n = pairs.len() as f64;
        let sd = (2.0 * (2.0 * n + 5.0) / (9.0 * n * (n - 1.0))).sqrt();
        assert!((emp - tau).abs() < 5.0 * sd, "{spec}: {emp} vs {tau}");
    }
}

#[test]
fn digest_and_determinism() {
    let cfg = GenerationConfig::example(20, gamma2(), 6);
    let a = generate(&cfg).unwrap();
    let b = generate(&cfg).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.seed = 7;
    assert_ne!(cfg.digest(), other.digest());
    assert_eq!(a.meta.config_digest.as_deref(), Some(cfg.digest().as_str()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rounded_values_are_multiples(t in 0.0f64..1e4, b in 0.01f64..100.0) {
        let r = round_times(&[t], b)[0];
        prop_assert_eq!((r / b).round() * b, r);
        prop_assert!((r - t).abs() <= 0.5 * b * (1.0 + 1e-12));
    }

    #[test]
    fn sizes_respect_support(l in 0usize..4, width in 1usize..6, seed in 0u64..1000) {
        let u = l + width;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for spec in [ClusterSizeSpec::DiscreteUniform { l, u }, ClusterSizeSpec::TruncatedZeta { s: 2.0, u, l }] {
            for m in sample_cluster_sizes(&spec, 50, &mut rng).unwrap() {
                prop_assert!(m > l && m <= u);
            }
        }
        for m in sample_cluster_sizes(&ClusterSizeSpec::TruncatedPoisson { lambda: 1.5, k: l }, 50, &mut rng).unwrap() {
            prop_assert!(m > l);
        }
    }
}
