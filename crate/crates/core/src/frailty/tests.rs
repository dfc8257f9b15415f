use super::*;
use crate::numerics::{integrate, log_gamma};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tight() -> QuadratureControl {
    QuadratureControl::tight()
}

fn spec(kind: FrailtyKind, theta: f64) -> FrailtySpec {
    FrailtySpec::new(kind, theta).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// ∫ ω^m e^{−sω} f(ω) dω straight off the density on the ω scale.
fn moment_by_density(spec: &FrailtySpec, m: u32, s: f64, lo: f64, hi: f64) -> f64 {
    let f = |w: f64| {
        if w <= 0.0 {
            0.0
        } else {
            w.powi(m as i32) * (-s * w).exp() * density(spec, w).unwrap()
        }
    };
    let ctrl = QuadratureControl::new(0.0, 1e-12, 2_000_000);
    integrate(f, lo, hi, &ctrl).value + integrate(f, hi, f64::INFINITY, &ctrl).value
}

// Zolotarev's integral form of the positive stable density with
// E e^{-sX} = exp(-s^α), tilted and scaled into the PVF law.
fn pvf_density(theta: f64, w: f64) -> f64 {
    let alpha = theta;
    let x = theta.powf(1.0 / theta) * w;
    let p = alpha / (1.0 - alpha);
    let xp = x.powf(-p);
    let a = |u: f64| {
        let v = ((alpha * u).sin().powf(alpha) * ((1.0 - alpha) * u).sin().powf(1.0 - alpha) / u.sin()).powf(1.0 / (1.0 - alpha));
        let e = v * xp;
        if e.is_finite() { e * (-e).exp() } else { 0.0 }
    };
    let ctrl = QuadratureControl::new(1e-300, 1e-13, 200_000);
    let inner = integrate(a, 0.0, std::f64::consts::PI, &ctrl).value;
    let f1 = p / (std::f64::consts::PI * x) * inner;
    theta.powf(1.0 / theta) * f1 * (-w + 1.0 / theta).exp()
}

#[test]
fn gamma_lt_matches_closed_form() {
    for &theta in &[0.1, 0.857, 2.0, 10.0] {
        let sp = spec(FrailtyKind::Gamma, theta);
        let a = 1.0 / theta;
        for m in 0..=6u32 {
            for &s in &[0.0, 0.5, 3.0, 40.0] {
                let lg = log_gamma(a + m as f64).unwrap() - log_gamma(a).unwrap();
                let exact = (lg + m as f64 * theta.ln() - (a + m as f64) * (theta * s).ln_1p()).exp();
                let got = lt(&sp, LtQuery::new(m, s), &tight()).unwrap();
                let sgn = if m % 2 == 0 { 1.0 } else { -1.0 };
                assert!(rel(got, sgn * exact) < 1e-12, "θ={theta} m={m} s={s}: {got} vs {exact}");
            }
        }
    }
}

#[test]
fn gamma_lt_matches_density_quadrature() {
    for &theta in &[0.3, 1.0, 3.0] {
        let sp = spec(FrailtyKind::Gamma, theta);
        for m in 0..=5u32 {
            for &s in &[0.0, 0.7, 4.0] {
                let num = moment_by_density(&sp, m, s, 0.0, 1.0);
                let got = lt(&sp, LtQuery::new(m, s), &tight()).unwrap().abs();
                assert!(rel(got, num) < 1e-6, "θ={theta} m={m} s={s}: {got} vs {num}");
            }
        }
    }
}

#[test]
fn pvf_low_order_coefficients() {
    let theta = 0.37;
    let p = pvf::PvfMoments::new(theta, 4);
    assert!((p.coefficient(1, 1) - 1.0).abs() < 1e-15);
    assert!((p.coefficient(2, 1) - (1.0 - theta)).abs() < 1e-15);
    assert!((p.coefficient(2, 2) - 1.0).abs() < 1e-15);
    assert!((p.coefficient(3, 1) - (1.0 - theta) * (2.0 - theta)).abs() < 1e-14);
    assert!((p.coefficient(3, 2) - 3.0 * (1.0 - theta)).abs() < 1e-14);
    assert!((p.coefficient(3, 3) - 1.0).abs() < 1e-15);
    for m in 1..=4 {
        assert!((p.coefficient(m, m) - 1.0).abs() < 1e-14);
    }
}

#[test]
fn pvf_lt_matches_finite_differences() {
    let theta = 0.4;
    let sp = spec(FrailtyKind::Pvf, theta);
    let l = |s: f64| (-((1.0 + s).powf(theta) - 1.0) / theta).exp();
    let s = 1.3;
    let h = 1e-3;
    let d1 = (l(s + h) - l(s - h)) / (2.0 * h);
    let d2 = (l(s + h) - 2.0 * l(s) + l(s - h)) / (h * h);
    let d3 = (l(s + 2.0 * h) - 2.0 * l(s + h) + 2.0 * l(s - h) - l(s - 2.0 * h)) / (2.0 * h * h * h);
    assert!(rel(lt(&sp, LtQuery::new(0, s), &tight()).unwrap(), l(s)) < 1e-14);
    assert!(rel(lt(&sp, LtQuery::new(1, s), &tight()).unwrap(), d1) < 1e-5);
    assert!(rel(lt(&sp, LtQuery::new(2, s), &tight()).unwrap(), d2) < 1e-5);
    assert!(rel(lt(&sp, LtQuery::new(3, s), &tight()).unwrap(), d3) < 1e-4);
}

#[test]
fn pvf_lt_matches_density_quadrature() {
    for &theta in &[0.3, 0.5, 0.7] {
        let f = |w: f64| if w <= 0.0 { 0.0 } else { pvf_density(theta, w) };
        let ctrl = QuadratureControl::new(0.0, 1e-11, 2_000_000);
        let mass = integrate(f, 0.0, 1.0, &ctrl).value + integrate(f, 1.0, f64::INFINITY, &ctrl).value;
        assert!((mass - 1.0).abs() < 1e-8, "θ={theta} mass {mass}");
        let sp = spec(FrailtyKind::Pvf, theta);
        for m in 0..=5u32 {
            for &s in &[0.0, 0.8, 3.0] {
                let g = |w: f64| w.powi(m as i32) * (-s * w).exp() * f(w);
                let num = integrate(g, 0.0, 1.0, &ctrl).value + integrate(g, 1.0, f64::INFINITY, &ctrl).value;
                let got = lt(&sp, LtQuery::new(m, s), &tight()).unwrap().abs();
                assert!(rel(got, num) < 1e-6, "θ={theta} m={m} s={s}: {got} vs {num}");
            }
        }
    }
}

#[test]
fn lognormal_raw_moments() {
    for &theta in &[0.05, 0.5, 1.172, 3.0] {
        let sp = spec(FrailtyKind::LogNormal, theta);
        for m in 0..=5u32 {
            let exact = (m as f64 * m as f64 * theta / 2.0).exp();
            let got = lt(&sp, LtQuery::new(m, 0.0), &tight()).unwrap().abs();
            assert!(rel(got, exact) < 1e-8, "θ={theta} m={m}: {got} vs {exact}");
        }
    }
}

#[test]
fn inverse_gaussian_raw_moments() {
    for &theta in &[0.05, 0.5, 2.035, 6.0] {
        let sp = spec(FrailtyKind::InverseGaussian, theta);
        let exact = [1.0, 1.0, 1.0 + theta, 1.0 + 3.0 * theta + 3.0 * theta * theta];
        for (m, e) in exact.iter().enumerate() {
            let got = lt(&sp, LtQuery::new(m as u32, 0.0), &tight()).unwrap().abs();
            assert!(rel(got, *e) < 1e-8, "θ={theta} m={m}: {got} vs {e}");
        }
    }
}

#[test]
fn inverse_gaussian_lt_matches_closed_form() {
    for &theta in &[0.2, 2.035, 9.0] {
        let sp = spec(FrailtyKind::InverseGaussian, theta);
        for &s in &[0.0, 0.4, 2.0, 25.0] {
            let r = (1.0 + 2.0 * theta * s).sqrt();
            let l = ((1.0 - r) / theta).exp();
            let d1 = -l / r;
            let d2 = l * (1.0 / (r * r) + theta / (r * r * r));
            assert!(rel(lt(&sp, LtQuery::new(0, s), &tight()).unwrap(), l) < 1e-8);
            assert!(rel(lt(&sp, LtQuery::new(1, s), &tight()).unwrap(), d1) < 1e-8);
            assert!(rel(lt(&sp, LtQuery::new(2, s), &tight()).unwrap(), d2) < 1e-8);
        }
    }
}

#[test]
fn quadrature_laws_match_density_quadrature() {
    for kind in [FrailtyKind::LogNormal, FrailtyKind::InverseGaussian] {
        for &theta in &[0.3, 1.5] {
            let sp = spec(kind, theta);
            for m in 0..=5u32 {
                for &s in &[0.0, 0.5, 1.0, 5.0, 20.0] {
                    let num = moment_by_density(&sp, m, s, 0.0, 1.0);
                    let got = lt(&sp, LtQuery::new(m, s), &tight()).unwrap().abs();
                    assert!(rel(got, num) < 1e-6, "{kind} θ={theta} m={m} s={s}: {got} vs {num}");
                }
            }
        }
    }
}

#[test]
fn complete_monotonicity() {
    let specs = [
        spec(FrailtyKind::Gamma, 0.8),
        spec(FrailtyKind::Pvf, 0.3),
        spec(FrailtyKind::LogNormal, 0.9),
        spec(FrailtyKind::InverseGaussian, 1.4),
        FrailtySpec::none(),
    ];
    for sp in &specs {
        for m in 0..=8u32 {
            for &s in &[0.0, 0.5, 1.0, 5.0, 20.0] {
                let v = lt(sp, LtQuery::new(m, s), &tight()).unwrap();
                let sgn = if m % 2 == 0 { 1.0 } else { -1.0 };
                assert!(sgn * v > 0.0, "{sp} m={m} s={s}: {v}");
            }
        }
    }
}

#[test]
fn lt_dtheta_matches_finite_differences() {
    let cases = [
        (FrailtyKind::Gamma, 0.857),
        (FrailtyKind::Gamma, 0.01),
        (FrailtyKind::Pvf, 0.4),
        (FrailtyKind::LogNormal, 1.172),
        (FrailtyKind::InverseGaussian, 2.035),
    ];
    for (kind, theta) in cases {
        let sp = spec(kind, theta);
        for m in 0..=4u32 {
            for &s in &[0.0, 0.6, 3.0] {
                let h = 1e-5 * theta;
                let up = lt(&sp.with_theta(theta + h), LtQuery::new(m, s), &tight()).unwrap();
                let dn = lt(&sp.with_theta(theta - h), LtQuery::new(m, s), &tight()).unwrap();
                let fd = (up - dn) / (2.0 * h);
                let got = lt_dtheta(&sp, LtQuery::new(m, s), &tight()).unwrap();
                assert!((got - fd).abs() <= 1e-5 * fd.abs().max(1e-3), "{kind} θ={theta} m={m} s={s}: {got} vs {fd}");
            }
        }
    }
}

#[test]
fn density_dtheta_matches_finite_differences() {
    for kind in [FrailtyKind::LogNormal, FrailtyKind::InverseGaussian] {
        let sp = spec(kind, 0.7);
        for &w in &[0.2, 1.0, 2.5] {
            let h = 1e-6;
            let fd = (density(&sp.with_theta(0.7 + h), w).unwrap() - density(&sp.with_theta(0.7 - h), w).unwrap()) / (2.0 * h);
            let got = density_dtheta(&sp, w).unwrap();
            assert!((got - fd).abs() < 1e-7, "{kind} ω={w}: {got} vs {fd}");
        }
    }
    assert!(matches!(density_dtheta(&spec(FrailtyKind::Gamma, 1.0), 1.0), Err(FrailtyError::Unsupported(_))));
}

#[test]
fn densities_integrate_to_one() {
    for sp in [spec(FrailtyKind::Gamma, 1.3), spec(FrailtyKind::LogNormal, 0.6), spec(FrailtyKind::InverseGaussian, 2.0)] {
        let mass = moment_by_density(&sp, 0, 0.0, 0.0, 1.0);
        assert!((mass - 1.0).abs() < 1e-8, "{sp}: {mass}");
    }
    assert!(matches!(density(&spec(FrailtyKind::Pvf, 0.5), 1.0), Err(FrailtyError::Unsupported(_))));
    assert!(matches!(density(&spec(FrailtyKind::PositiveStable, 0.5), 1.0), Err(FrailtyError::Unsupported(_))));
}

#[test]
fn pvf_psi_matches_full_moments() {
    for theta in [0.05, 0.3, 0.8] {
        let ev = MomentEvaluator::new(&spec(FrailtyKind::Pvf, theta), &tight(), 300).unwrap();
        for n in [0u32, 1, 2, 7, 40, 300] {
            for h in [0.0, 0.01, 0.7, 5.0, 300.0, 1e6] {
                let fast = ev.psi(n, h).unwrap();
                let full = ev.moments(n, h, Need::Psi).unwrap().psi;
                assert!(rel(fast, full) < 1e-12, "θ={theta} n={n} h={h}: {fast} vs {full}");
            }
        }
    }
}

#[test]
fn psi_gamma_closed_form() {
    let sp = spec(FrailtyKind::Gamma, 0.5);
    let got = psi(&sp, 3, 1.5, &QuadratureControl::default()).unwrap();
    assert!((got - (2.0 + 3.0) / (2.0 + 1.5)).abs() < 1e-15);
}

#[test]
fn psi_near_degenerate_is_unity() {
    let sp = spec(FrailtyKind::Gamma, 1e-6);
    let got = psi(&sp, 3, 1.5, &QuadratureControl::default()).unwrap();
    assert!((got - 1.0).abs() < 1e-4);
    for sp in [FrailtySpec::none(), spec(FrailtyKind::Gamma, 0.0), spec(FrailtyKind::Pvf, 1.0)] {
        assert_eq!(psi(&sp, 4, 2.0, &QuadratureControl::default()).unwrap(), 1.0);
    }
}

#[test]
fn psi_rejects_positive_stable() {
    let sp = spec(FrailtyKind::PositiveStable, 0.5);
    assert!(matches!(psi(&sp, 1, 1.0, &QuadratureControl::default()), Err(FrailtyError::Unsupported(_))));
}

#[test]
fn psi_integration_tolerance_controls_accuracy() {
    let moderate = QuadratureControl::new(0.0, 1e-5, 10_000);
    for sp in [spec(FrailtyKind::LogNormal, 1.172), spec(FrailtyKind::InverseGaussian, 2.035)] {
        for n in [0u32, 1, 3, 10, 40] {
            for &h in &[0.0, 0.3, 2.0, 15.0] {
                let b = psi(&sp, n, h, &tight()).unwrap();
                let coarse = psi(&sp, n, h, &QuadratureControl::default()).unwrap();
                let fine = psi(&sp, n, h, &moderate).unwrap();
                assert!(rel(coarse, b) < 0.05, "{sp} n={n} h={h}: {coarse} vs {b}");
                assert!(rel(fine, b) < 1e-5, "{sp} n={n} h={h}: {fine} vs {b}");
            }
        }
    }
}

#[test]
fn psi_slope_matches_finite_differences() {
    for sp in [spec(FrailtyKind::Gamma, 0.9), spec(FrailtyKind::Pvf, 0.5), spec(FrailtyKind::LogNormal, 0.8), spec(FrailtyKind::InverseGaussian, 1.7)] {
        let ev = MomentEvaluator::new(&sp, &tight(), 10).unwrap();
        for n in [0u32, 2, 6] {
            let h = 1.1;
            let d = 1e-5;
            let fd = (ev.psi(n, h + d).unwrap() - ev.psi(n, h - d).unwrap()) / (2.0 * d);
            let got = ev.moments(n, h, Need::PsiSlope).unwrap().psi_h;
            assert!((got - fd).abs() < 1e-6 * fd.abs().max(1.0), "{sp} n={n}: {got} vs {fd}");
        }
    }
}

#[test]
fn kendall_closed_forms() {
    let c = QuadratureControl::tight();
    assert!((kendall_tau(&spec(FrailtyKind::Gamma, 2.0), &c).unwrap() - 0.5).abs() < 1e-15);
    assert!((kendall_tau(&spec(FrailtyKind::PositiveStable, 0.4), &c).unwrap() - 0.6).abs() < 1e-15);
    assert_eq!(kendall_tau(&FrailtySpec::none(), &c).unwrap(), 0.0);
}

#[test]
fn kendall_integral_reproduces_closed_forms() {
    let c = QuadratureControl::tight();
    for &theta in &[0.1, 0.857, 4.0] {
        let got = kendall::kendall_integral(&spec(FrailtyKind::Gamma, theta), &c).unwrap();
        assert!((got - theta / (theta + 2.0)).abs() < 1e-8, "gamma θ={theta}: {got}");
    }
    for &theta in &[0.3, 0.7] {
        let got = kendall::kendall_integral(&spec(FrailtyKind::PositiveStable, theta), &c).unwrap();
        assert!((got - (1.0 - theta)).abs() < 1e-7, "stable θ={theta}: {got}");
    }
}

#[test]
fn kendall_inverse_gaussian_matches_exponential_integral_form() {
    // τ = 1/2 − 1/θ + (2/θ²) e^{2/θ} E₁(2/θ)
    let c = QuadratureControl::tight();
    for &theta in &[0.5, 2.035, 10.0] {
        let z = 2.0 / theta;
        let e1 = integrate(|t: f64| (-z * t).exp() / t, 1.0, f64::INFINITY, &c).value;
        let exact = 0.5 - 1.0 / theta + 2.0 / (theta * theta) * z.exp() * e1;
        let got = kendall_tau(&spec(FrailtyKind::InverseGaussian, theta), &c).unwrap();
        assert!((got - exact).abs() < 1e-8, "θ={theta}: {got} vs {exact}");
    }
}

#[test]
fn kendall_starting_values_near_three_tenths() {
    let c = QuadratureControl::tight();
    for kind in [FrailtyKind::Gamma, FrailtyKind::LogNormal, FrailtyKind::InverseGaussian, FrailtyKind::Pvf] {
        let t = kendall_tau(&spec(kind, kind.initial_theta()), &c).unwrap();
        assert!((t - 0.3).abs() < 5e-3, "{kind}: {t}");
    }
}

#[test]
fn kendall_limits() {
    let c = QuadratureControl::tight();
    for kind in [FrailtyKind::LogNormal, FrailtyKind::InverseGaussian] {
        let small = kendall_tau(&spec(kind, 1e-3), &c).unwrap();
        assert!(small.abs() < 2e-3, "{kind}: {small}");
    }
    let near_one = kendall_tau(&spec(FrailtyKind::Pvf, 0.999), &c).unwrap();
    assert!(near_one.abs() < 2e-3, "{near_one}");
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

#[test]
fn samplers_match_first_two_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 200_000;
    for (sp, var) in [
        (spec(FrailtyKind::Gamma, 0.8), 0.8),
        (spec(FrailtyKind::InverseGaussian, 0.6), 0.6),
        (spec(FrailtyKind::Pvf, 0.3), 0.7),
        (spec(FrailtyKind::Pvf, 0.08), 0.92),
    ] {
        let x = sample(&sp, n, &mut rng).unwrap();
        let (m, v) = mean_var(&x);
        assert!((m - 1.0).abs() < 5.0 * (var / n as f64).sqrt(), "{sp}: mean {m}");
        assert!((v - var).abs() < 0.05 * var, "{sp}: var {v}");
    }
    let sp = spec(FrailtyKind::LogNormal, 0.5);
    let x = sample(&sp, n, &mut rng).unwrap();
    let (m, v) = mean_var(&x);
    assert!((m - sp.mean()).abs() < 0.01, "{m}");
    assert!((v - sp.variance()).abs() < 0.05 * sp.variance(), "{v}");
}

#[test]
fn stable_and_pvf_samplers_match_laplace_transform() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 200_000;
    for &theta in &[0.3, 0.75] {
        let x = sample(&spec(FrailtyKind::PositiveStable, theta), n, &mut rng).unwrap();
        for &s in &[0.5, 2.0] {
            let emp = x.iter().map(|w| (-s * w).exp()).sum::<f64>() / n as f64;
            assert!((emp - (-f64::powf(s, theta)).exp()).abs() < 0.005, "θ={theta} s={s}: {emp}");
        }
        let sp = spec(FrailtyKind::Pvf, theta);
        let x = sample(&sp, n, &mut rng).unwrap();
        for &s in &[0.5, 2.0] {
            let emp = x.iter().map(|w| (-s * w).exp()).sum::<f64>() / n as f64;
            let l = lt(&sp, LtQuery::new(0, s), &tight()).unwrap();
            assert!((emp - l).abs() < 0.005, "pvf θ={theta} s={s}: {emp} vs {l}");
        }
    }
}

#[test]
fn samplers_are_deterministic_and_degenerate_cases_are_ones() {
    let sp = spec(FrailtyKind::InverseGaussian, 1.0);
    let a = sample(&sp, 50, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let b = sample(&sp, 50, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(a, b);
    for sp in [FrailtySpec::none(), spec(FrailtyKind::Gamma, 0.0), spec(FrailtyKind::Pvf, 1.0)] {
        assert!(sample(&sp, 10, &mut ChaCha8Rng::seed_from_u64(1)).unwrap().iter().all(|&w| w == 1.0));
    }
}

#[test]
fn spec_validation() {
    assert!(FrailtySpec::new(FrailtyKind::Gamma, -0.1).is_err());
    assert!(FrailtySpec::new(FrailtyKind::Pvf, 0.0).is_err());
    assert!(FrailtySpec::new(FrailtyKind::Pvf, 1.2).is_err());
    assert!(FrailtySpec::new(FrailtyKind::PositiveStable, 1.0).is_err());
    assert_eq!(FrailtyKind::parse("IG").unwrap(), FrailtyKind::InverseGaussian);
    assert!(FrailtyKind::parse("weibull").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_increases_with_events_and_decreases_with_hazard(
        kind in prop_oneof![Just(FrailtyKind::Gamma), Just(FrailtyKind::Pvf), Just(FrailtyKind::LogNormal), Just(FrailtyKind::InverseGaussian)],
        t in 0.05f64..0.95,
        n in 0u32..12,
        h in 0.0f64..20.0,
        dh in 0.05f64..5.0,
    ) {
        let theta = if kind == FrailtyKind::Pvf { t } else { 4.0 * t };
        let sp = spec(kind, theta);
        let c = tight();
        let base = psi(&sp, n, h, &c).unwrap();
        prop_assert!(psi(&sp, n + 1, h, &c).unwrap() > base);
        prop_assert!(psi(&sp, n, h + dh, &c).unwrap() < base);
    }

    #[test]
    fn gamma_psi_is_rational(theta in 0.01f64..20.0, n in 0u32..50, h in 0.0f64..100.0) {
        let sp = spec(FrailtyKind::Gamma, theta);
        let got = psi(&sp, n, h, &QuadratureControl::default()).unwrap();
        let exact = (1.0 / theta + n as f64) / (1.0 / theta + h);
        prop_assert!(rel(got, exact) < 1e-13);
    }

    #[test]
    fn pvf_coefficients_positive_and_top_is_one(theta in 0.01f64..0.99, m in 1usize..40) {
        let p = pvf::PvfMoments::new(theta, m);
        for j in 1..=m {
            prop_assert!(p.coefficient(m, j) > 0.0);
        }
        prop_assert!((p.coefficient(m, m) - 1.0).abs() < 1e-12);
    }
}

