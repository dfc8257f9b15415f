use super::*;
use crate::datagen::{generate, GenerationConfig};
use crate::frailty::FrailtySpec;
use crate::numerics::numeric_gradient;
use crate::testutil::{dataset, singletons};

/// Breslow partial log-likelihood by direct enumeration of risk sets.
fn brute_partial_loglik(times: &[f64], status: &[bool], z: &[Vec<f64>], beta: &[f64]) -> f64 {
    let lp = |j: usize| z[j].iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
    let mut ll = 0.0;
    for i in 0..times.len() {
        if status[i] {
            let s: f64 = (0..times.len()).filter(|&j| times[j] >= times[i]).map(|j| lp(j).exp()).sum();
            ll += lp(i) - s.ln();
        }
    }
    ll
}

fn grid_maximizer(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    let mut best = lo;
    let mut step = 0.01;
    while step > 1e-5 {
        let n = ((hi - lo) / step).round() as usize;
        best = (0..=n).map(|k| lo + k as f64 * step).max_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
        lo = best - step;
        hi = best + step;
        step /= 10.0;
    }
    best
}

#[test]
fn no_information_gives_zero() {
    let d = singletons(&[1.0, 2.0], &[true, true], &[0.0, 0.0]);
    let fit = cox_fit(&d, 1e-9, 20).unwrap();
    assert_eq!(fit.beta, vec![0.0]);
    assert!(fit.converged);
}

#[test]
fn four_subjects_match_grid_search() {
    let times = [1.0, 2.0, 3.0, 4.0];
    let status = [true; 4];
    let z = [1.0, 0.0, 1.0, 0.0];
    let zz: Vec<Vec<f64>> = z.iter().map(|v| vec![*v]).collect();
    let grid = grid_maximizer(|b| brute_partial_loglik(&times, &status, &zz, &[b]), -10.0, 10.0);
    let d = singletons(&times, &status, &z);
    let fit = cox_fit(&d, 1e-10, 50).unwrap();
    assert!(fit.converged);
    assert!((fit.beta[0] - grid).abs() < 1e-4, "{} vs {grid}", fit.beta[0]);
    let oracle = brute_partial_loglik(&times, &status, &zz, &fit.beta);
    assert!((fit.loglik - oracle).abs() < 1e-12);
}

#[test]
fn tied_partial_likelihood_matches_enumeration() {
    let times = [1.0, 1.0, 2.0, 3.0, 3.0, 4.0];
    let status = [true, true, false, true, true, false];
    let z: Vec<Vec<f64>> = vec![vec![0.3, 1.0], vec![-1.0, 0.0], vec![0.5, 1.0], vec![2.0, 0.0], vec![-0.2, 1.0], vec![0.1, 0.0]];
    let rows: Vec<_> = (0..6).map(|i| (i as u64 / 2, times[i], status[i], z[i].clone())).collect();
    let d = dataset(&rows);
    for beta in [[0.0, 0.0], [0.4, -0.7], [-1.2, 0.3]] {
        let got = partial_loglik(&d, &beta).unwrap();
        assert!((got - brute_partial_loglik(&times, &status, &z, &beta)).abs() < 1e-12);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let d = generate(&GenerationConfig::example(100, FrailtySpec::gamma(2.0).unwrap(), 3)).unwrap();
    let prep = Prepared::new(&d).unwrap();
    for beta in [[0.0, 0.0], [0.5, 1.0], [-0.3, 0.2]] {
        let (_, grad, info) = partial_likelihood(&prep, &beta);
        let num = numeric_gradient(|b| vec![partial_likelihood(&prep, b).0], &beta, None).unwrap();
        for q in 0..2 {
            assert!((grad[q] - num[(0, q)]).abs() < 1e-6, "{} vs {}", grad[q], num[(0, q)]);
        }
        let hess = numeric_gradient(|b| partial_likelihood(&prep, b).1.as_slice().to_vec(), &beta, None).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((info[(r, c)] + hess[(r, c)]).abs() < 1e-4 * info[(r, r)].abs().max(1.0));
            }
        }
    }
    let fit = cox_fit(&d, 1e-9, 50).unwrap();
    assert!(fit.converged);
    let num = numeric_gradient(|b| vec![partial_loglik(&d, b).unwrap()], &fit.beta, None).unwrap();
    assert!(num.amax() < 1e-6);
}

#[test]
fn example_dataset_start_is_finite_and_near_truth() {
    let d = generate(&GenerationConfig::example(300, FrailtySpec::gamma(2.0).unwrap(), 11)).unwrap();
    assert_eq!(d.len(), 600);
    let fit = cox_fit(&d, 1e-9, 50).unwrap();
    assert!(fit.converged && fit.beta.iter().all(|b| b.is_finite()));
    let info = partial_information(&d, &fit.beta).unwrap();
    let cov = info.try_inverse().unwrap();
    // Ignoring gamma frailty attenuates the coefficients toward zero.
    for (q, truth) in [2f64.ln(), 3f64.ln()].iter().enumerate() {
        let se = cov[(q, q)].sqrt();
        assert!(fit.beta[q] > 0.0 && fit.beta[q] < truth + 3.0 * se, "{:?}", fit.beta);
    }
}

#[test]
fn breslow_examples() {
    let d = singletons(&[1.0, 2.0], &[true, true], &[0.0, 0.0]);
    let b = breslow_baseline(&d, &[0.7]).unwrap();
    assert_eq!(b.times, vec![1.0, 2.0]);
    assert!((b.increments()[0] - 0.5).abs() < 1e-15 && (b.increments()[1] - 1.0).abs() < 1e-15);
    assert!((b.value(2.0) - 1.5).abs() < 1e-15);

    let d = singletons(&[1.0, 2.0, 3.0], &[false; 3], &[0.1, 0.2, 0.3]);
    assert!(breslow_baseline(&d, &[1.0]).unwrap().is_empty());
    assert_eq!(breslow_baseline(&d, &[1.0]).unwrap().value(5.0), 0.0);

    let d = singletons(&[1.0, 1.0, 2.0, 3.0], &[true, true, false, true], &[0.0; 4]);
    let b = breslow_baseline(&d, &[0.0]).unwrap();
    assert!((b.increments()[0] - 0.5).abs() < 1e-15);
}

#[test]
fn breslow_rescales_with_covariate_shift() {
    let mut d = generate(&GenerationConfig::example(50, FrailtySpec::gamma(1.0).unwrap(), 5)).unwrap();
    let beta = [0.4, -0.2];
    let before = breslow_baseline(&d, &beta).unwrap();
    d.shift_covariate(0, 2.0);
    let after = breslow_baseline(&d, &beta).unwrap();
    let factor = (-0.4f64 * 2.0).exp();
    for (a, b) in after.cum_values.iter().zip(&before.cum_values) {
        assert!((a - b * factor).abs() < 1e-12 * b.max(1.0));
    }
}
