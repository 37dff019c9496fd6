//! Hadamard gap series, padding, and the b-chain constructions.

use std::ops::Neg;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::{from_u64, lit, Real};
use crate::weights::{Weight, WeightSpec};

/// Largest admissible frequency.
pub const FREQ_CAP: u64 = 1 << 62;

/// Largest dyadic exponent whose frequency `2^b` fits under [`FREQ_CAP`].
pub const MAX_EXP: u32 = 62;

/// One term `a·z^n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Term<T> {
    pub n: u64,
    pub a: Complex<T>,
}

impl<T: Real> Term<T> {
    pub fn new(n: u64, a: Complex<T>) -> Self {
        Self { n, a }
    }

    pub fn real(n: u64, a: T) -> Self {
        Self::new(n, Complex::new(a, T::zero()))
    }

    /// Cosine coefficient of `Re(a z^n)`.
    pub fn alpha(&self) -> T {
        self.a.re
    }

    /// Sine coefficient of `Re(a z^n)`.
    pub fn beta(&self) -> T {
        -self.a.im
    }
}

/// A validated gap series: frequencies strictly increasing, at most
/// [`FREQ_CAP`], with minimal consecutive ratio `lambda > 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GapSeries<T> {
    terms: Vec<Term<T>>,
    lambda: T,
}

/// Checks the gap condition and returns the series.
pub fn validate_gap<T: Real>(terms: Vec<Term<T>>) -> Result<GapSeries<T>> {
    if terms.is_empty() {
        return Err(Error::Validation {
            index: 0,
            reason: "series has no terms".into(),
        });
    }
    GapSeries::new(terms)
}

impl<T: Real> GapSeries<T> {
    /// Like [`validate_gap`] but accepts an empty list.
    pub fn new(terms: Vec<Term<T>>) -> Result<Self> {
        let mut lambda = T::infinity();
        for (i, t) in terms.iter().enumerate() {
            if t.n == 0 {
                return Err(Error::Validation {
                    index: i,
                    reason: "frequencies must be positive".into(),
                });
            }
            if t.n > FREQ_CAP {
                return Err(Error::Capacity(format!(
                    "frequency {} at index {i} exceeds 2^62; use surrogate-phase mode",
                    t.n
                )));
            }
            if !(t.a.re.is_finite() && t.a.im.is_finite()) {
                return Err(Error::Validation {
                    index: i,
                    reason: "coefficient is not finite".into(),
                });
            }
            if i > 0 {
                let prev = terms[i - 1].n;
                if t.n <= prev {
                    return Err(Error::Validation {
                        index: i,
                        reason: format!("frequency {} does not exceed previous frequency {prev}", t.n),
                    });
                }
                lambda = lambda.min(from_u64::<T>(t.n) / from_u64::<T>(prev));
            }
        }
        Ok(Self { terms, lambda })
    }

    pub fn empty() -> Self {
        Self {
            terms: Vec::new(),
            lambda: T::infinity(),
        }
    }

    pub fn from_pairs(pairs: &[(u64, Complex<T>)]) -> Result<Self> {
        validate_gap(pairs.iter().map(|&(n, a)| Term::new(n, a)).collect())
    }

    pub fn terms(&self) -> &[Term<T>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Minimal ratio `n_{k+1}/n_k`; infinite for fewer than two terms.
    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn frequencies(&self) -> impl Iterator<Item = u64> + '_ {
        self.terms.iter().map(|t| t.n)
    }

    pub fn max_frequency(&self) -> u64 {
        self.terms.last().map_or(0, |t| t.n)
    }

    pub fn alphas(&self) -> Vec<T> {
        self.terms.iter().map(Term::alpha).collect()
    }

    pub fn betas(&self) -> Vec<T> {
        self.terms.iter().map(Term::beta).collect()
    }

    /// The first `len` terms.
    pub fn prefix(&self, len: usize) -> Self {
        Self::new(self.terms[..len.min(self.terms.len())].to_vec()).expect("prefix of a valid series")
    }

    /// `c·u`, coefficientwise.
    pub fn scale(&self, c: Complex<T>) -> Self {
        Self {
            terms: self.terms.iter().map(|t| Term::new(t.n, t.a * c)).collect(),
            lambda: self.lambda,
        }
    }

    /// Inserts zero terms so that every consecutive ratio lies in `(1, 4]`.
    pub fn pad(&self) -> Result<Self> {
        let mut out = Vec::with_capacity(self.terms.len());
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                let mut n = self.terms[i - 1].n;
                while n.checked_mul(4).is_some_and(|m| m < t.n) {
                    n *= 4;
                    if n > FREQ_CAP {
                        return Err(Error::Capacity("padding would exceed 2^62".into()));
                    }
                    out.push(Term::real(n, T::zero()));
                }
            }
            out.push(*t);
        }
        Self::new(out)
    }
}

impl<T: Real> Neg for &GapSeries<T> {
    type Output = GapSeries<T>;

    fn neg(self) -> GapSeries<T> {
        self.scale(Complex::new(-T::one(), T::zero()))
    }
}

/// The index chain `b_0 < b_1 < …` with `b_{n+1}` the least `l` satisfying
/// `g(2^l) > A·g(2^{b_n})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BIndexChain<T> {
    #[serde(rename = "A")]
    pub a: T,
    pub b: Vec<u32>,
    /// Set when the chain stopped before `count` entries.
    pub truncated: bool,
    pub note: Option<String>,
}

/// `b`-chain with `b_0 = 1`, stopping at the frequency cap.
pub fn build_b_chain<T: Real>(w: &Weight<T>, a: T, count: usize) -> Result<BIndexChain<T>> {
    build_b_chain_from(w, a, count, 1, MAX_EXP)
}

/// `b`-chain from an arbitrary seed `b0`, allowing exponents up to `max_exp`.
pub fn build_b_chain_from<T: Real>(
    w: &Weight<T>,
    a: T,
    count: usize,
    b0: u32,
    max_exp: u32,
) -> Result<BIndexChain<T>> {
    if !(a > T::one()) || !a.is_finite() {
        return Err(Error::Domain(format!("chain factor A must exceed 1, got {a}")));
    }
    if count == 0 {
        return Err(Error::Domain("chain length must be at least 1".into()));
    }
    if b0 > max_exp {
        return Err(Error::Capacity(format!("seed exponent {b0} exceeds {max_exp}")));
    }
    let jumps = |from: u32, to: u32| chain_step_holds(w, a, from, to);
    let mut b = vec![b0];
    let mut note = None;
    while b.len() < count {
        let cur = *b.last().unwrap();
        // gallop, then bisect: the predicate is monotone in the target
        let mut lo = cur;
        let mut step = 1u32;
        let hi = loop {
            let cand = cur.saturating_add(step).min(max_exp);
            if jumps(cur, cand) {
                break Some(cand);
            }
            if cand == max_exp {
                break None;
            }
            lo = cand;
            step = step.saturating_mul(2);
        };
        let Some(mut hi) = hi else {
            note = Some(format!(
                "chain stopped after {} entries: the next exponent would exceed {max_exp}",
                b.len()
            ));
            break;
        };
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if jumps(cur, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        b.push(hi);
    }
    Ok(BIndexChain {
        a,
        truncated: b.len() < count,
        b,
        note,
    })
}

/// Whether `g(2^to) > A·g(2^from)`.
pub(crate) fn chain_step_holds<T: Real>(w: &Weight<T>, a: T, from: u32, to: u32) -> bool {
    if let WeightSpec::Power { a: p } = w.spec() {
        // exact for the power family: 2^{p(to-from)} > A
        let gap = lit::<T>(*p) * T::from(to as i64 - from as i64).unwrap();
        return lit::<T>(2.0).powf(gap) > a;
    }
    let ln2 = T::LN_2();
    let ln_to = w.ln_g_of_ln(T::from(to).unwrap() * ln2);
    let ln_from = w.ln_g_of_ln(T::from(from).unwrap() * ln2);
    ln_to - ln_from > a.ln()
}

/// A constructed series together with its provenance.
#[derive(Clone, Debug)]
pub struct Construction<T> {
    pub series: GapSeries<T>,
    pub chain: Option<BIndexChain<T>>,
    pub requested: usize,
    pub truncated: bool,
    pub note: Option<String>,
}

/// Terms `(2^{b_k}, g(2^{b_k}))` for the chain built with factor `a`.
pub fn construct_example<T: Real>(w: &Weight<T>, a: T, count: usize) -> Result<Construction<T>> {
    construct_example_from(w, a, count, 1)
}

pub fn construct_example_from<T: Real>(w: &Weight<T>, a: T, count: usize, b0: u32) -> Result<Construction<T>> {
    let chain = build_b_chain_from(w, a, count, b0, MAX_EXP)?;
    let terms = chain
        .b
        .iter()
        .map(|&b| {
            let n = 1u64 << b;
            Term::real(n, w.g_of_freq(n))
        })
        .collect();
    Ok(Construction {
        series: validate_gap(terms)?,
        requested: count,
        truncated: chain.truncated,
        note: chain.note.clone(),
        chain: Some(chain),
    })
}

/// Terms `(2^k, g(2^k))` for `k = 1..=count`.
pub fn construct_counterexample<T: Real>(w: &Weight<T>, count: usize) -> Result<Construction<T>> {
    if count == 0 {
        return Err(Error::Domain("count must be at least 1".into()));
    }
    if count > MAX_EXP as usize {
        return Err(Error::Capacity(format!(
            "counterexample with {count} terms needs frequency 2^{count}, above 2^62"
        )));
    }
    let terms = (1..=count as u32)
        .map(|k| {
            let n = 1u64 << k;
            Term::real(n, w.g_of_freq(n))
        })
        .collect();
    Ok(Construction {
        series: validate_gap(terms)?,
        chain: None,
        requested: count,
        truncated: false,
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    fn freqs(s: &GapSeries<f64>) -> Vec<u64> {
        s.frequencies().collect()
    }

    #[test]
    fn lambda_examples() {
        let s = GapSeries::from_pairs(&[(2, c(1.0)), (4, c(1.0)), (8, c(1.0)), (16, c(1.0))]).unwrap();
        assert_eq!(s.lambda(), 2.0);
        let s = GapSeries::from_pairs(&[(2, c(1.0)), (3, c(1.0))]).unwrap();
        assert_eq!(s.lambda(), 1.5);
        let err = GapSeries::from_pairs(&[(4, c(1.0)), (4, c(1.0))]).unwrap_err();
        assert!(matches!(err, Error::Validation { index: 1, .. }));
        assert!(validate_gap::<f64>(vec![]).is_err());
        assert!(matches!(
            GapSeries::from_pairs(&[(FREQ_CAP + 1, c(1.0))]),
            Err(Error::Capacity(_))
        ));
        assert!(GapSeries::from_pairs(&[(0, c(1.0))]).is_err());
    }

    #[test]
    fn alpha_beta_split() {
        let t = Term::new(3, Complex::new(2.0, 5.0));
        assert_eq!((t.alpha(), t.beta()), (2.0, -5.0));
    }

    #[test]
    fn pad_examples() {
        let s = GapSeries::from_pairs(&[(2, c(1.0)), (1024, c(1.0))]).unwrap();
        let p = s.pad().unwrap();
        assert_eq!(freqs(&p), vec![2, 8, 32, 128, 512, 1024]);
        let s = GapSeries::from_pairs(&[(2, c(1.0)), (4, c(1.0))]).unwrap();
        assert_eq!(s.pad().unwrap(), s);
        let s = GapSeries::from_pairs(&[(1, c(1.0))]).unwrap();
        assert_eq!(s.pad().unwrap(), s);
        let s = GapSeries::from_pairs(&[(1, c(1.0)), (FREQ_CAP, c(2.0))]).unwrap();
        let p = s.pad().unwrap();
        assert!(p.lambda() > 1.0);
        assert!(p.terms().windows(2).all(|w| w[1].n <= 4 * w[0].n));
    }

    #[test]
    fn chain_power_one() {
        let w = Weight::<f64>::power(1.0).unwrap();
        let ch = build_b_chain(&w, 2.0, 6).unwrap();
        assert_eq!(ch.b, vec![1, 3, 5, 7, 9, 11]);
        assert!(!ch.truncated);
    }

    #[test]
    fn chain_power_two() {
        let w = Weight::<f64>::power(2.0).unwrap();
        let ch = build_b_chain(&w, 2.0, 6).unwrap();
        assert_eq!(ch.b, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn chain_log_power_matches_hand_solution() {
        // 1 + l log 2 > 2(1 + b log 2)  <=>  l > 2b + 1/log 2
        let w = Weight::<f64>::log_power(1.0).unwrap();
        let ch = build_b_chain(&w, 2.0, 10).unwrap();
        let mut hand = vec![1u32];
        while hand.len() < 10 {
            let b = *hand.last().unwrap() as f64;
            let l = (2.0 * b + 1.0 / std::f64::consts::LN_2).floor() as u32 + 1;
            if l > 62 {
                break;
            }
            hand.push(l);
        }
        assert_eq!(ch.b, hand);
        assert_eq!(ch.b, vec![1, 4, 10, 22, 46]);
        assert!(ch.truncated && ch.note.is_some());
    }

    #[test]
    fn chain_rejects_bad_factor() {
        let w = Weight::<f64>::power(1.0).unwrap();
        assert!(build_b_chain(&w, 1.0, 3).is_err());
        assert!(build_b_chain(&w, 2.0, 0).is_err());
    }

    #[test]
    fn chain_long_range() {
        let w = Weight::<f64>::power(1.0).unwrap();
        let ch = build_b_chain_from(&w, 2.0, 10_000, 1, u32::MAX).unwrap();
        assert_eq!(ch.b.len(), 10_000);
        assert!(ch.b.iter().enumerate().all(|(k, &b)| b == 1 + 2 * k as u32));
    }

    #[test]
    fn example_power_one() {
        let w = Weight::<f64>::power(1.0).unwrap();
        let ex = construct_example(&w, 2.0, 5).unwrap();
        assert_eq!(freqs(&ex.series), vec![2, 8, 32, 128, 512]);
        let coeffs: Vec<f64> = ex.series.alphas();
        assert_eq!(coeffs, vec![2.0, 8.0, 32.0, 128.0, 512.0]);
        let one = construct_example(&w, 2.0, 1).unwrap();
        assert_eq!(one.series.terms(), &[Term::real(2, 2.0)]);
    }

    #[test]
    fn example_log_power_ratios() {
        let w = Weight::<f64>::log_power(1.0).unwrap();
        let d = w.doubling().d_hat;
        let ex = construct_example(&w, 2.0, 25).unwrap();
        assert!(ex.truncated);
        for p in ex.series.terms().windows(2) {
            let ratio = p[1].a.re / p[0].a.re;
            assert!(ratio > 2.0 && ratio <= 2.0 * d * (1.0 + 1e-12), "{ratio}");
        }
    }

    #[test]
    fn counterexample_terms() {
        let w = Weight::<f64>::log_power(1.0).unwrap();
        let ce = construct_counterexample(&w, 3).unwrap();
        assert_eq!(freqs(&ce.series), vec![2, 4, 8]);
        assert_relative_eq!(ce.series.terms()[2].a.re, 1.0 + 3.0 * std::f64::consts::LN_2, max_relative = 1e-14);
        assert!(matches!(construct_counterexample(&w, 63), Err(Error::Capacity(_))));
        assert!(construct_counterexample(&w, 62).is_ok());
    }

    #[test]
    fn negation_and_scaling() {
        let s = GapSeries::from_pairs(&[(2, Complex::new(1.0, 2.0)), (5, c(-3.0))]).unwrap();
        let n = -&s;
        assert_eq!(n.terms()[0].a, Complex::new(-1.0, -2.0));
        assert_eq!(n.lambda(), s.lambda());
    }

    #[test]
    fn single_precision_series() {
        let w = Weight::<f32>::power(1.0).unwrap();
        let ex = construct_example(&w, 2.0f32, 4).unwrap();
        assert_eq!(ex.series.terms()[3].a.re, 128.0f32);
    }

    fn weights() -> impl Strategy<Value = Weight<f64>> {
        prop_oneof![
            (0.2f64..3.0).prop_map(|a| Weight::power(a).unwrap()),
            (0.2f64..3.0).prop_map(|a| Weight::log_power(a).unwrap()),
            ((0.5f64..2.0), 1u32..3).prop_map(|(a, d)| Weight::iterated_log(a, d).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn chain_is_minimal(w in weights(), a in 1.05f64..8.0) {
            let ch = build_b_chain(&w, a, 40).unwrap();
            let ln2 = std::f64::consts::LN_2;
            for p in ch.b.windows(2) {
                let (b, next) = (p[0], p[1]);
                let g = |l: u32| w.ln_g_of_ln(l as f64 * ln2);
                prop_assert!(g(next) - g(b) > a.ln() - 1e-12);
                prop_assert!(g(next - 1) - g(b) <= a.ln() + 1e-12);
            }
        }

        #[test]
        fn example_sum_bound(w in weights(), a in 1.2f64..6.0) {
            let ex = construct_example(&w, a, 40).unwrap();
            let mut sum = 0.0;
            for t in ex.series.terms() {
                sum += t.a.re;
                let g = w.eval_g(t.n as f64).unwrap();
                prop_assert!(sum <= a / (a - 1.0) * g * (1.0 + 1e-12));
            }
        }

        #[test]
        fn pad_contract(raw in proptest::collection::btree_set(1u64..(1u64 << 40), 1..12)) {
            let terms: Vec<Term<f64>> = raw.iter().enumerate().map(|(i, &n)| Term::real(n, i as f64 + 1.0)).collect();
            let s = GapSeries::new(terms).unwrap();
            let p = s.pad().unwrap();
            prop_assert!(p.terms().windows(2).all(|w| w[1].n > w[0].n && w[1].n <= 4 * w[0].n));
            let nonzero: Vec<_> = p.terms().iter().filter(|t| t.a.re != 0.0).cloned().collect();
            prop_assert_eq!(nonzero, s.terms().to_vec());
        }
    }
}
