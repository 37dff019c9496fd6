//! Coefficient-sum profiles `γ(N)`, the necessary coefficient bound, the
//! certified majorant, the Bloch translation and the witness search.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gapseries::{GapSeries, Term};
use crate::phase;
use crate::radius::Radius;
use crate::real::{from_u64, lit, to_f64, KahanSum, Real};
use crate::weights::Weight;

/// Slope below which a profile counts as bounded.
pub const FLAT_SLOPE: f64 = 0.02;
/// Slope above which a profile counts as growing.
pub const GROWTH_SLOPE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Bounded,
    Growing,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Member,
    NonMember,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MembershipReport<T> {
    /// `(N, γ_N)` at every frequency of the series.
    pub checkpoints: Vec<(u64, T)>,
    pub gamma_sup: T,
    /// Fitted slope of `γ/γ_first` against `log N` over the last quartile.
    pub slope: T,
    pub trend: Trend,
    pub verdict: Verdict,
}

/// Least-squares slope of `y` against `x`.
fn slope<T: Real>(pts: &[(T, T)]) -> T {
    let n = from_u64::<T>(pts.len() as u64);
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for &(x, y) in pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == T::zero() {
        T::zero()
    } else {
        sxy / sxx
    }
}

/// Classifies a profile `(N, value)` by the slope of `value` against `log N`
/// over its last quartile (at least two points), measured in units of the
/// first nonzero value.
pub fn classify<T: Real>(profile: &[(u64, T)]) -> (Trend, T) {
    let Some(base) = profile.iter().map(|p| p.1).find(|&g| g != T::zero()) else {
        return (Trend::Bounded, T::zero());
    };
    if profile.len() < 2 {
        return (Trend::Inconclusive, T::zero());
    }
    if profile.iter().any(|p| !p.1.is_finite()) {
        return (Trend::Growing, T::infinity());
    }
    let tail = profile.len().div_ceil(4);
    let tail = tail.max(2);
    let pts: Vec<(T, T)> = profile[profile.len() - tail..]
        .iter()
        .map(|&(n, g)| (from_u64::<T>(n).ln(), g / base))
        .collect();
    let s = slope(&pts);
    let trend = if s < lit(FLAT_SLOPE) {
        Trend::Bounded
    } else if s > lit(GROWTH_SLOPE) {
        Trend::Growing
    } else {
        Trend::Inconclusive
    };
    (trend, s)
}

fn verdict_of(trend: Trend) -> Verdict {
    match trend {
        Trend::Bounded => Verdict::Member,
        Trend::Growing => Verdict::NonMember,
        Trend::Inconclusive => Verdict::Inconclusive,
    }
}

/// `γ_N = Σ_{n_k <= N}|a_k| / g(N)` at every `N = n_k`, with the trend
/// verdict.
pub fn gamma_profile<T: Real>(s: &GapSeries<T>, w: &Weight<T>) -> MembershipReport<T> {
    let mut acc = KahanSum::new();
    let checkpoints: Vec<(u64, T)> = s
        .terms()
        .iter()
        .map(|t| {
            acc.add(t.a.norm());
            (t.n, acc.value() / w.g_of_freq(t.n))
        })
        .collect();
    report_from(checkpoints)
}

fn report_from<T: Real>(checkpoints: Vec<(u64, T)>) -> MembershipReport<T> {
    let gamma_sup = checkpoints.iter().fold(T::zero(), |m, p| m.max(p.1));
    let (mut trend, slope) = classify(&checkpoints);
    if !gamma_sup.is_finite() && trend == Trend::Bounded {
        trend = Trend::Inconclusive;
    }
    MembershipReport {
        checkpoints,
        gamma_sup,
        slope,
        trend,
        verdict: verdict_of(trend),
    }
}

/// `|a_k|/g(n_k)` per term.
pub fn coefficient_scores<T: Real>(s: &GapSeries<T>, w: &Weight<T>) -> Vec<(u64, T)> {
    s.terms().iter().map(|t| (t.n, t.a.norm() / w.g_of_freq(t.n))).collect()
}

/// `sup_k |a_k|/g(n_k)`. Unbounded growth certifies non-membership; a bounded
/// score certifies nothing.
pub fn coefficient_bound<T: Real>(s: &GapSeries<T>, w: &Weight<T>) -> T {
    coefficient_scores(s, w).iter().fold(T::zero(), |m, p| m.max(p.1))
}

/// Trend of the coefficient scores; `Growing` flags a non-member.
pub fn coefficient_trend<T: Real>(s: &GapSeries<T>, w: &Weight<T>) -> Trend {
    classify(&coefficient_scores(s, w)).0
}

/// Gap ratio used by the geometric tail estimates, capped at 2.
pub(crate) fn lambda_eff<T: Real>(lambda: T) -> T {
    lambda.min(lit(2.0))
}

/// Smallest `M >= 1` with `D̂²·2^{-M(λ'-1)} <= 1/2`, `λ' = min(λ, 2)`.
pub fn default_multiplier<T: Real>(d_hat: T, lambda: T) -> Result<u32> {
    let lam = lambda_eff(lambda);
    if !(lam > T::one()) || !(d_hat >= T::one()) || !d_hat.is_finite() {
        return Err(Error::Config(format!(
            "no split multiplier for D = {d_hat}, lambda = {lambda}"
        )));
    }
    let need = (lit::<T>(2.0) * d_hat.log2() + T::one()) / (lam - T::one());
    let mut m = need.ceil().max(T::one()).to_u32().unwrap_or(u32::MAX);
    // guard against rounding in the closed form
    while d_hat * d_hat * lit::<T>(2.0).powf(-T::from(m).unwrap() * (lam - T::one())) > lit(0.5) {
        m += 1;
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Majorant<T> {
    pub bound: T,
    pub head: T,
    pub tail: T,
    /// `N` with `r_N < r <= r_{N+1}`, `r_N = 2^{-1/N}`.
    pub n: u64,
    pub m: T,
    pub gamma_sup: T,
}

/// `Σ_{n_k <= NM}|a_k| + Σ_{n_k > NM} γ*·g(n_k)·r^{n_k}`, a pointwise bound
/// for `|u(re^{iφ})|`.
pub fn majorant_bound<T: Real>(s: &GapSeries<T>, w: &Weight<T>, r: &Radius<T>, m: Option<T>) -> Result<Majorant<T>> {
    if !(r.r() > T::zero()) {
        return Err(Error::Domain("majorant needs 0 < r < 1".into()));
    }
    let d_hat = w.doubling().d_hat;
    let lam = lambda_eff(s.lambda());
    let m = match m {
        Some(m) => {
            let q = d_hat * d_hat * lit::<T>(2.0).powf(-m * (lam - T::one()));
            if !(q < T::one()) {
                let need = lit::<T>(2.0) * d_hat.log2() / (lam - T::one());
                return Err(Error::Config(format!(
                    "split multiplier M = {m} must exceed {need} for a geometric tail"
                )));
            }
            m
        }
        None => T::from(default_multiplier(d_hat, s.lambda())?).unwrap(),
    };
    let n = (T::LN_2() / -r.ln_r()).ceil().max(T::one());
    let split = n * m;
    let gamma = gamma_profile(s, w).gamma_sup;
    let (mut head, mut tail) = (KahanSum::new(), KahanSum::new());
    for t in s.terms() {
        let nf = from_u64::<T>(t.n);
        if nf <= split {
            head.add(t.a.norm());
        } else {
            let ln_n = nf.ln();
            tail.add((w.ln_g_of_ln(ln_n) + r.ln_pow(ln_n)).exp());
        }
    }
    let tail = gamma * tail.value();
    Ok(Majorant {
        bound: head.value() + tail,
        head: head.value(),
        tail,
        n: n.to_u64().unwrap_or(u64::MAX),
        m,
        gamma_sup: gamma,
    })
}

/// A Bloch-type weight `μ`, held through its reciprocal `v = 1/μ`.
#[derive(Clone, Debug)]
pub struct BlochWeight<T> {
    v: Weight<T>,
}

impl<T: Real> BlochWeight<T> {
    /// `μ = 1/v` for an admissible weight `v`.
    pub fn from_reciprocal(v: Weight<T>) -> Self {
        Self { v }
    }

    /// `μ` sampled at knots `(r, μ(r))` starting at `r = 0`; `μ` must
    /// decrease strictly.
    pub fn from_mu_knots(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.windows(2).any(|p| !(p[1].1 < p[0].1)) || knots.iter().any(|k| !(k.1 > 0.0)) {
            return Err(Error::Domain("mu must be positive and strictly decreasing".into()));
        }
        let inv: Vec<(f64, f64)> = knots.iter().map(|&(r, mu)| (r, 1.0 / mu)).collect();
        Ok(Self {
            v: Weight::tabulated(&inv)?,
        })
    }

    pub fn mu(&self, r: &Radius<T>) -> T {
        (-self.v.ln_v_at(r)).exp()
    }

    pub fn reciprocal(&self) -> &Weight<T> {
        &self.v
    }
}

/// The series `Σ n_k a_k z^{n_k}` whose profile against `1/μ` decides
/// Bloch-type membership.
pub fn bloch_series<T: Real>(s: &GapSeries<T>) -> GapSeries<T> {
    let terms = s
        .terms()
        .iter()
        .map(|t| Term::new(t.n, t.a * Complex::new(from_u64::<T>(t.n), T::zero())))
        .collect();
    GapSeries::new(terms).expect("same frequencies as a valid series")
}

pub fn bloch_membership<T: Real>(s: &GapSeries<T>, mu: &BlochWeight<T>) -> MembershipReport<T> {
    gamma_profile(&bloch_series(s), mu.reciprocal())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness<T> {
    pub phi_star: T,
    pub alpha_hat: T,
    pub m: T,
    /// Number of terms in the prefix `n_k <= NM`.
    pub prefix: usize,
    pub grid: usize,
}

pub const DEFAULT_WITNESS_GRID: usize = 1 << 14;

/// Maximises `s_N(φ) = Σ_{n_k <= NM} Re(a_k r_N^{n_k} e^{i n_k φ})` at
/// `r_N = 2^{-1/N}` and reports `s_N(φ*)/Σ_{n_k <= NM}|a_k| r_N^{n_k}`.
pub fn kww_witness<T: Real>(s: &GapSeries<T>, w: &Weight<T>, n: u64, phi_samples: usize) -> Result<Witness<T>> {
    if n == 0 || phi_samples == 0 {
        return Err(Error::Domain("witness search needs N >= 1 and at least one sample".into()));
    }
    let m = from_u64::<T>(default_multiplier(w.doubling().d_hat, s.lambda())? as u64);
    // 1 - 2^{-1/N} = -expm1(-log 2 / N)
    let eps = -(-T::LN_2() / from_u64::<T>(n)).exp_m1();
    let r = Radius::from_u(-eps.ln())?;
    let split = from_u64::<T>(n) * m;
    let mut amp = Vec::new();
    for t in s.terms().iter().filter(|t| from_u64::<T>(t.n) <= split) {
        let p = to_f64(r.ln_pow(from_u64::<T>(t.n).ln()).exp());
        amp.push((t.n, to_f64(t.alpha()) * p, to_f64(t.beta()) * p, to_f64(t.a.norm()) * p));
    }
    let denom: f64 = amp.iter().map(|a| a.3).sum();
    if !(denom > 0.0) {
        return Err(Error::UndefinedWitness("prefix has no nonzero coefficients".into()));
    }
    let s_n = |phi: f64| -> f64 {
        let t = phase::turns(phi);
        amp.iter()
            .map(|&(n, a, b, _)| {
                let (s, c) = phase::turns_to_angle(t.wrapping_mul(n as u128)).sin_cos();
                a * c + b * s
            })
            .sum()
    };
    let max_deg = amp.last().map_or(1, |a| a.0);
    let grid = phi_samples.max((8 * max_deg.min(1 << 19)) as usize);
    let tau = std::f64::consts::TAU;
    let (best_j, best) = (0..grid)
        .into_par_iter()
        .map(|j| (j, s_n(tau * j as f64 / grid as f64)))
        .reduce(|| (0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
    // golden-section refinement inside the neighbouring cells
    let h = tau / grid as f64;
    let centre = tau * best_j as f64 / grid as f64;
    let (mut a, mut b) = (centre - h, centre + h);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (s_n(c), s_n(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = s_n(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = s_n(d);
        }
    }
    let (mut phi_star, mut top) = (centre, best);
    for (p, f) in [(c, fc), (d, fd)] {
        if f > top {
            phi_star = p;
            top = f;
        }
    }
    let phi_star = phase::turns_to_angle(phase::turns(phi_star));
    Ok(Witness {
        phi_star: lit(phi_star),
        alpha_hat: lit((top / denom).min(1.0)),
        m,
        prefix: amp.len(),
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::eval_circle;
    use crate::gapseries::{construct_counterexample, construct_example};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p1() -> Weight<f64> {
        Weight::power(1.0).unwrap()
    }

    fn lp1() -> Weight<f64> {
        Weight::log_power(1.0).unwrap()
    }

    #[test]
    fn example_is_member() {
        let ex = construct_example(&p1(), 2.0, 30).unwrap().series;
        let rep = gamma_profile(&ex, &p1());
        assert!(rep.gamma_sup <= 2.0);
        assert_eq!(rep.verdict, Verdict::Member);
    }

    #[test]
    fn counterexample_is_non_member() {
        let w = lp1();
        let ce = construct_counterexample(&w, 30).unwrap().series;
        let rep = gamma_profile(&ce, &w);
        let ln2 = std::f64::consts::LN_2;
        for (i, &(n, g)) in rep.checkpoints.iter().enumerate() {
            let k = i as f64 + 1.0;
            assert_eq!(n, 1u64 << (i + 1));
            let hand = (1..=i + 1).map(|j| 1.0 + j as f64 * ln2).sum::<f64>() / (1.0 + k * ln2);
            assert_relative_eq!(g, hand, max_relative = 1e-12);
        }
        assert_eq!(rep.verdict, Verdict::NonMember);
        assert_eq!(rep.trend, Trend::Growing);
    }

    #[test]
    fn separation_at_thirty() {
        let ex = construct_example(&lp1(), 2.0, 30).unwrap().series;
        let ce = construct_counterexample(&lp1(), 30).unwrap().series;
        let (a, b) = (gamma_profile(&ex, &lp1()), gamma_profile(&ce, &lp1()));
        assert_eq!(a.verdict, Verdict::Member);
        assert!(b.gamma_sup >= 5.0 * a.gamma_sup);
    }

    #[test]
    fn zero_series_is_member() {
        let z = GapSeries::from_pairs(&[(2, Complex::new(0.0, 0.0)), (8, Complex::new(0.0, 0.0))]).unwrap();
        let rep = gamma_profile(&z, &p1());
        assert!(rep.checkpoints.iter().all(|c| c.1 == 0.0));
        assert_eq!(rep.verdict, Verdict::Member);
        assert_eq!(gamma_profile(&GapSeries::empty(), &p1()).verdict, Verdict::Member);
        assert_eq!(coefficient_bound(&z, &p1()), 0.0);
    }

    #[test]
    fn coefficient_scores_examples() {
        for w in [p1(), lp1()] {
            let ex = construct_example(&w, 2.0, 10).unwrap().series;
            assert_relative_eq!(coefficient_bound(&ex, &w), 1.0, max_relative = 1e-14);
        }
        let w = lp1();
        let terms = (1..=40u32)
            .map(|k| Term::real(1u64 << k, w.g_of_freq(1u64 << k) * k as f64))
            .collect();
        let s = GapSeries::new(terms).unwrap();
        let scores = coefficient_scores(&s, &w);
        assert_relative_eq!(scores[39].1, 40.0, max_relative = 1e-12);
        assert_eq!(coefficient_trend(&s, &w), Trend::Growing);
    }

    #[test]
    fn multiplier_defaults() {
        assert_eq!(default_multiplier(2.0, 2.0).unwrap(), 3);
        assert_eq!(default_multiplier(2.0, f64::INFINITY).unwrap(), 3);
        assert_eq!(default_multiplier(1.0, 1.5).unwrap(), 2);
        assert!(default_multiplier(2.0, 1.0).is_err());
    }

    #[test]
    fn majorant_single_term() {
        let s = GapSeries::from_pairs(&[(2, Complex::new(3.0, -4.0))]).unwrap();
        let r = Radius::from_r(0.3).unwrap();
        let m = majorant_bound(&s, &p1(), &r, None).unwrap();
        assert_relative_eq!(m.bound, 5.0, max_relative = 1e-15);
        assert_eq!(m.tail, 0.0);
        assert!(matches!(majorant_bound(&s, &p1(), &r, Some(2.0)), Err(Error::Config(_))));
    }

    #[test]
    fn majorant_dominates_circle() {
        let w = p1();
        let ex = construct_example(&w, 2.0, 30).unwrap().series;
        let r = Radius::from_eps(2f64.powi(-10)).unwrap();
        let m = majorant_bound(&ex, &w, &r, None).unwrap();
        let sup = eval_circle(&ex, &r, 10_000).iter().fold(0f64, |a, &x| a.max(x.abs()));
        assert!(m.bound >= sup);
        let ratios: Vec<f64> = (2..=60)
            .map(|k| {
                let r = Radius::from_u(k as f64 * std::f64::consts::LN_2).unwrap();
                majorant_bound(&ex, &w, &r, None).unwrap().bound / w.v_at(&r)
            })
            .collect();
        assert!(ratios.iter().all(|&x| x < 40.0), "{ratios:?}");
    }

    #[test]
    fn bloch_examples() {
        let mu = BlochWeight::from_reciprocal(p1());
        let terms = (1..=40u32).map(|k| Term::real(1u64 << k, 1.0 / (1u64 << k) as f64)).collect();
        let rep = bloch_membership(&GapSeries::new(terms).unwrap(), &mu);
        assert!(rep.gamma_sup <= 2.0);
        assert_eq!(rep.verdict, Verdict::Member);
        for alpha in [0.5, 2.0] {
            let mu = BlochWeight::from_reciprocal(Weight::<f64>::power(alpha).unwrap());
            let terms = (1..=40u32)
                .map(|k| {
                    let n = (1u64 << k) as f64;
                    Term::real(1u64 << k, n.powf(alpha - 1.0))
                })
                .collect();
            let rep = bloch_membership(&GapSeries::new(terms).unwrap(), &mu);
            assert_eq!(rep.verdict, Verdict::Member, "alpha = {alpha}");
        }
        assert_eq!(bloch_membership(&GapSeries::empty(), &mu).verdict, Verdict::Member);
        assert!(BlochWeight::<f64>::from_mu_knots(&[(0.0, 1.0), (0.5, 2.0)]).is_err());
        let tab = BlochWeight::<f64>::from_mu_knots(&[(0.0, 1.0), (0.5, 0.5), (0.9, 0.1)]).unwrap();
        assert_relative_eq!(tab.mu(&Radius::from_r(0.5).unwrap()), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn witness_examples() {
        let w = p1();
        let one = GapSeries::from_pairs(&[(4, Complex::new(1.0, 0.0))]).unwrap();
        let wt = kww_witness(&one, &w, 8, 1024).unwrap();
        assert_eq!(wt.alpha_hat, 1.0);
        assert_eq!(wt.phi_star, 0.0);
        let two = GapSeries::from_pairs(&[(2, Complex::new(1.0, 0.0)), (8, Complex::new(1.0, 0.0))]).unwrap();
        let wt = kww_witness(&two, &w, 8, 1024).unwrap();
        assert_eq!(wt.alpha_hat, 1.0);
        let zero = GapSeries::from_pairs(&[(2, Complex::new(0.0, 0.0))]).unwrap();
        assert!(matches!(kww_witness(&zero, &w, 8, 64), Err(Error::UndefinedWitness(_))));
    }

    #[test]
    fn witness_random_complex() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let terms = (1..=12u32)
            .map(|k| Term::new(1u64 << k, Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
            .collect();
        let s = GapSeries::new(terms).unwrap();
        let wt = kww_witness(&s, &p1(), 1 << 10, DEFAULT_WITNESS_GRID).unwrap();
        assert!(wt.alpha_hat >= 0.05 && wt.alpha_hat <= 1.0, "{}", wt.alpha_hat);
    }

    fn random_series() -> impl Strategy<Value = GapSeries<f64>> {
        proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..20).prop_map(|cs| {
            let terms = cs.into_iter().enumerate().map(|(k, (re, im))| Term::new(1u64 << (k + 1), Complex::new(re, im))).collect();
            GapSeries::new(terms).unwrap()
        })
    }

    proptest! {
        #[test]
        fn scaling_equivariance(s in random_series(), re in -5.0f64..5.0, im in -5.0f64..5.0) {
            let c = Complex::new(re, im);
            prop_assume!(c.norm() > 1e-3);
            let w = lp1();
            let a = gamma_profile(&s, &w);
            let b = gamma_profile(&s.scale(c), &w);
            for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
                prop_assert!((y.1 - c.norm() * x.1).abs() <= 1e-12 * y.1.max(1e-300));
            }
            prop_assert_eq!(a.verdict, b.verdict);
        }

        #[test]
        fn two_sided_symmetry(s in random_series()) {
            let w = p1();
            prop_assert_eq!(gamma_profile(&s, &w), gamma_profile(&-&s, &w));
        }

        #[test]
        fn majorant_is_valid(s in random_series(), k in 1u32..30) {
            let w = p1();
            let r = Radius::from_u(k as f64 * 0.5).unwrap();
            let m = majorant_bound(&s, &w, &r, None).unwrap();
            let vals = eval_circle(&s, &r, 4096);
            let sup = vals.iter().fold(0f64, |a, &x| a.max(x.abs()));
            prop_assert!(sup <= m.bound * (1.0 + 1e-12));
        }

        #[test]
        fn witness_in_unit_interval(s in random_series()) {
            let nonzero = s.terms().iter().any(|t| t.a.norm() > 0.0);
            prop_assume!(nonzero);
            let wt = kww_witness(&s, &p1(), 64, 2048).unwrap();
            prop_assert!(wt.alpha_hat > 0.0 && wt.alpha_hat <= 1.0);
        }

        #[test]
        fn witness_positive_coefficients(cs in proptest::collection::vec(0.01f64..5.0, 1..10)) {
            let terms = cs.iter().enumerate().map(|(k, &a)| Term::real(3u64.pow(k as u32 + 1), a)).collect();
            let s = GapSeries::new(terms).unwrap();
            prop_assert_eq!(kww_witness(&s, &p1(), 1000, 1024).unwrap().alpha_hat, 1.0);
        }
    }
}
