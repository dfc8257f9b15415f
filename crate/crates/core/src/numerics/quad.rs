//! Globally adaptive 15-point Gauss–Kronrod quadrature.
//!
//! Semi-infinite ranges `[a, ∞)` are mapped onto `(0, 1)` through
//! `ω = a + c·t/(1−t)` with Jacobian `c/(1−t)²`; the plain [`integrate`]
//! entry point uses `c = 1`, [`integrate_mapped`] lets the caller place the
//! midpoint of the map (`t = 1/2 ↦ ω = a + c`) near the bulk of the
//! integrand. Error control is `err ≤ max(abs_tol, rel_tol·|value|)`.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
const RULE_POINTS: usize = 15;

/// Convergence controls for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureControl {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadratureControl {
    /// The estimator's permissive defaults: absolute 0, relative 1, 1000 evaluations.
    fn default() -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol: 1.0,
            max_evals: 1000,
        }
    }
}

impl QuadratureControl {
    pub fn new(abs_tol: f64, rel_tol: f64, max_evals: usize) -> Self {
        Self {
            abs_tol: abs_tol.max(0.0),
            rel_tol: rel_tol.max(0.0),
            max_evals: max_evals.max(1),
        }
    }

    /// Tight control used by tests and one-off evaluations.
    pub fn tight() -> Self {
        Self::new(1e-12, 1e-10, 200_000)
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
    /// `false` when the evaluation budget ran out before the tolerance was met.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralVec<const N: usize> {
    pub value: [f64; N],
    pub abs_err: [f64; N],
    pub evals: usize,
    pub converged: bool,
}

#[derive(Clone, Copy)]
struct Segment<const N: usize> {
    lo: f64,
    hi: f64,
    value: [f64; N],
    err: [f64; N],
}

fn kronrod15<const N: usize, F>(f: &mut F, lo: f64, hi: f64) -> Segment<N>
where
    F: FnMut(f64) -> [f64; N],
{
    let centr = 0.5 * (lo + hi);
    let hlgth = 0.5 * (hi - lo);
    let dhlgth = hlgth.abs();

    let mut fv1 = [[0.0; N]; 7];
    let mut fv2 = [[0.0; N]; 7];
    let fc = f(centr);
    let mut resg = [0.0; N];
    let mut resk = [0.0; N];
    let mut resabs = [0.0; N];
    for c in 0..N {
        resg[c] = fc[c] * WG[3];
        resk[c] = fc[c] * WGK[7];
        resabs[c] = resk[c].abs();
    }
    for j in 0..7 {
        let absc = hlgth * XGK[j];
        let f1 = f(centr - absc);
        let f2 = f(centr + absc);
        fv1[j] = f1;
        fv2[j] = f2;
        for c in 0..N {
            resk[c] += WGK[j] * (f1[c] + f2[c]);
            resabs[c] += WGK[j] * (f1[c].abs() + f2[c].abs());
            if j % 2 == 1 {
                resg[c] += WG[j / 2] * (f1[c] + f2[c]);
            }
        }
    }

    let mut value = [0.0; N];
    let mut err = [0.0; N];
    for c in 0..N {
        let reskh = resk[c] * 0.5;
        let mut resasc = WGK[7] * (fc[c] - reskh).abs();
        for j in 0..7 {
            resasc += WGK[j] * ((fv1[j][c] - reskh).abs() + (fv2[j][c] - reskh).abs());
        }
        value[c] = resk[c] * hlgth;
        let resabs_c = resabs[c] * dhlgth;
        resasc *= dhlgth;
        let mut e = ((resk[c] - resg[c]) * hlgth).abs();
        if resasc != 0.0 && e != 0.0 {
            e = resasc * (200.0 * e / resasc).powf(1.5).min(1.0);
        }
        if resabs_c > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            e = e.max(50.0 * f64::EPSILON * resabs_c);
        }
        err[c] = e;
    }
    Segment { lo, hi, value, err }
}

/// Adaptive integration of a vector-valued integrand on a finite interval.
/// Only the first `controlled` components take part in the stopping rule;
/// the rest ride along on the same partition.
fn adapt<const N: usize, F>(mut f: F, lo: f64, hi: f64, ctrl: &QuadratureControl, controlled: usize) -> IntegralVec<N>
where
    F: FnMut(f64) -> [f64; N],
{
    let controlled = controlled.clamp(1, N);
    let mut segments = vec![kronrod15(&mut f, lo, hi)];
    let mut evals = RULE_POINTS;
    loop {
        let mut value = [0.0; N];
        let mut abs_err = [0.0; N];
        for s in &segments {
            for c in 0..N {
                value[c] += s.value[c];
                abs_err[c] += s.err[c];
            }
        }
        let done = (0..controlled).all(|c| abs_err[c] <= ctrl.tolerance(value[c]));
        if done || evals + 2 * RULE_POINTS > ctrl.max_evals.max(RULE_POINTS) {
            let finite = value.iter().all(|v| v.is_finite());
            return IntegralVec {
                value,
                abs_err,
                evals,
                converged: done && finite,
            };
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .map(|(i, s)| (i, (0..controlled).map(|c| s.err[c]).fold(0.0, f64::max)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.lo + seg.hi);
        if !(mid > seg.lo && mid < seg.hi) {
            // interval exhausted at machine precision
            segments.push(seg);
            let mut value = [0.0; N];
            let mut abs_err = [0.0; N];
            for s in &segments {
                for c in 0..N {
                    value[c] += s.value[c];
                    abs_err[c] += s.err[c];
                }
            }
            return IntegralVec {
                value,
                abs_err,
                evals,
                converged: false,
            };
        }
        segments.push(kronrod15(&mut f, seg.lo, mid));
        segments.push(kronrod15(&mut f, mid, seg.hi));
        evals += 2 * RULE_POINTS;
    }
}

/// Integrates a vector-valued integrand over `[a, b]`, where `b` may be
/// `f64::INFINITY`. See [`adapt`] for the role of `controlled`.
pub fn integrate_vec<const N: usize, F>(f: F, a: f64, b: f64, ctrl: &QuadratureControl, controlled: usize) -> IntegralVec<N>
where
    F: FnMut(f64) -> [f64; N],
{
    if b.is_infinite() {
        integrate_mapped_vec(f, a, 1.0, ctrl, controlled)
    } else {
        adapt(f, a, b, ctrl, controlled)
    }
}

fn integrate_mapped_vec<const N: usize, F>(mut f: F, a: f64, scale: f64, ctrl: &QuadratureControl, controlled: usize) -> IntegralVec<N>
where
    F: FnMut(f64) -> [f64; N],
{
    adapt(
        |t: f64| {
            let one_minus = 1.0 - t;
            if one_minus <= 0.0 {
                return [0.0; N];
            }
            let omega = a + scale * t / one_minus;
            let jac = scale / (one_minus * one_minus);
            let mut v = f(omega);
            for x in v.iter_mut() {
                *x *= jac;
            }
            v
        },
        0.0,
        1.0,
        ctrl,
        controlled,
    )
}

/// Integrates `f` over `[a, b]`; `b = +∞` uses the `t/(1−t)` substitution.
/// Never aborts: when the budget is exhausted the best estimate is returned
/// with `converged = false`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, ctrl: &QuadratureControl) -> Integral
where
    F: FnMut(f64) -> f64,
{
    let r = integrate_vec(|x| [f(x)], a, b, ctrl, 1);
    Integral {
        value: r.value[0],
        abs_err: r.abs_err[0],
        evals: r.evals,
        converged: r.converged,
    }
}

/// Semi-infinite integral over `[a, ∞)` with the map `ω = a + scale·t/(1−t)`.
pub fn integrate_mapped<const N: usize, F>(f: F, a: f64, scale: f64, ctrl: &QuadratureControl, controlled: usize) -> IntegralVec<N>
where
    F: FnMut(f64) -> [f64; N],
{
    integrate_mapped_vec(f, a, scale, ctrl, controlled)
}
