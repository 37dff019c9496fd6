//! Evaluation of gap series near the boundary, circle statistics, Fourier
//! recovery and tail bounds.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gapseries::GapSeries;
use crate::membership::{default_multiplier, gamma_profile, lambda_eff};
use crate::phase;
use crate::radius::Radius;
use crate::real::{from_u64, lit, to_f64, KahanSum, Real};
use crate::weights::Weight;

/// Largest default number of circle samples.
pub const MAX_DEFAULT_SAMPLES: usize = 1 << 22;

/// Per-term amplitudes `r^{n_k}` and the constant parts of each term.
struct Amplitudes<T> {
    alpha: Vec<T>,
    beta: Vec<T>,
    freq: Vec<u64>,
}

fn amplitudes<T: Real>(s: &GapSeries<T>, r: &Radius<T>) -> Amplitudes<T> {
    let mut out = Amplitudes {
        alpha: Vec::new(),
        beta: Vec::new(),
        freq: Vec::new(),
    };
    for t in s.terms() {
        let p = r.ln_pow(from_u64::<T>(t.n).ln()).exp();
        if p == T::zero() || t.a == Complex::new(T::zero(), T::zero()) {
            continue;
        }
        out.alpha.push(t.alpha() * p);
        out.beta.push(t.beta() * p);
        out.freq.push(t.n);
    }
    out
}

impl<T: Real> Amplitudes<T> {
    /// `(cos, sin)` of `2π·n·i/m` for `i < len`, per term.
    fn offsets(&self, m: u64, len: usize) -> Vec<Vec<(f64, f64)>> {
        self.freq
            .iter()
            .map(|&n| {
                (0..len as u64)
                    .map(|i| {
                        let (s, c) = phase::grid_angle(n, i, m).sin_cos();
                        (c, s)
                    })
                    .collect()
            })
            .collect()
    }

    /// Adds `u(φ_j)` for `j = j0..j0 + out.len()`: each phasor is the exact
    /// anchor at `j0` times an exact offset from `offsets`.
    fn circle_chunk(&self, m: u64, j0: u64, offsets: &[Vec<(f64, f64)>], out: &mut [T]) {
        let mut acc = vec![KahanSum::new(); out.len()];
        for (k, offs) in offsets.iter().enumerate() {
            let (s0, c0) = phase::grid_angle(self.freq[k], j0, m).sin_cos();
            let (a, b) = (to_f64(self.alpha[k]), to_f64(self.beta[k]));
            for (slot, &(ci, si)) in acc.iter_mut().zip(offs) {
                let zr = c0 * ci - s0 * si;
                let zi = s0 * ci + c0 * si;
                slot.add(lit(a * zr + b * zi));
            }
        }
        for (o, a) in out.iter_mut().zip(acc) {
            *o = a.value();
        }
    }

    fn at(&self, angle: impl Fn(u64) -> f64) -> T {
        let mut acc = KahanSum::new();
        for k in 0..self.freq.len() {
            let (s, c) = angle(self.freq[k]).sin_cos();
            acc.add(self.alpha[k] * lit(c) + self.beta[k] * lit(s));
        }
        acc.value()
    }
}

/// `u(r e^{iφ})` with exact phase reduction.
pub fn eval_point<T: Real>(s: &GapSeries<T>, r: &Radius<T>, phi: T) -> T {
    let phi = to_f64(phi);
    let turns = phase::turns(phi);
    amplitudes(s, r).at(|n| phase::turns_to_angle(turns.wrapping_mul(n as u128)))
}

/// `u` at `φ_j = 2πj/m`, `j = 0..m`.
pub fn eval_circle<T: Real>(s: &GapSeries<T>, r: &Radius<T>, m: usize) -> Vec<T> {
    if m == 0 {
        return Vec::new();
    }
    let deg = effective_degree(s, r);
    if (m as u128) < 2 * deg as u128 + 1 {
        log::debug!("{m} circle samples cannot resolve effective degree {deg}");
    }
    let amp = amplitudes(s, r);
    let mm = m as u64;
    let mut out = vec![T::zero(); m];
    let offsets = amp.offsets(mm, CHUNK.min(m));
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        amp.circle_chunk(mm, (c * CHUNK) as u64, &offsets, chunk);
    });
    out
}

/// Samples per exactly anchored block of [`eval_circle`].
const CHUNK: usize = 256;

/// Effective degree at `r`: the largest frequency whose term still carries
/// relative weight `1e-17` of the coefficient mass.
pub fn effective_degree<T: Real>(s: &GapSeries<T>, r: &Radius<T>) -> u64 {
    let mags: Vec<(u64, T)> = s
        .terms()
        .iter()
        .map(|t| (t.n, t.a.norm() * r.ln_pow(from_u64::<T>(t.n).ln()).exp()))
        .collect();
    let total: T = mags.iter().map(|m| m.1).sum();
    let floor = total * lit(1e-17);
    mags.iter().filter(|m| m.1 > T::zero() && m.1 >= floor).map(|m| m.0).max().unwrap_or(0)
}

/// `4(2·deg + 1)` samples, at least 16 and at most [`MAX_DEFAULT_SAMPLES`].
pub fn default_samples<T: Real>(s: &GapSeries<T>, r: &Radius<T>) -> usize {
    let deg = effective_degree(s, r) as u128;
    (4 * (2 * deg + 1)).clamp(16, MAX_DEFAULT_SAMPLES as u128) as usize
}

/// Circle statistics at one radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileRow<T> {
    pub r: T,
    pub eps: T,
    pub samples: usize,
    /// Fewer samples than twice the effective degree.
    pub aliased: bool,
    pub sup_abs: T,
    pub max: T,
    pub min: T,
    pub mean_abs: T,
    pub l2: T,
    pub ratio_to_v: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleProfile<T> {
    pub rows: Vec<ProfileRow<T>>,
}

impl<T: Real> CircleProfile<T> {
    /// `max_r sup|u|/v(r)`: a lower estimate of the growth constant.
    pub fn k_hat(&self) -> T {
        self.rows.iter().fold(T::zero(), |m, r| m.max(r.ratio_to_v))
    }
}

/// Sampled statistics of `u` on each circle of `r_grid`. `samples` fixes the
/// count per circle, otherwise [`default_samples`] is used.
pub fn circle_profile<T: Real>(
    s: &GapSeries<T>,
    w: &Weight<T>,
    r_grid: &[Radius<T>],
    samples: Option<usize>,
) -> Result<CircleProfile<T>> {
    let mut rows = Vec::with_capacity(r_grid.len());
    for r in r_grid {
        let m = samples.unwrap_or_else(|| default_samples(s, r)).max(1);
        let vals = eval_circle(s, r, m);
        let mf = from_u64::<T>(m as u64);
        let (mut sup, mut max, mut min) = (T::zero(), -T::infinity(), T::infinity());
        let (mut abs_sum, mut sq_sum) = (KahanSum::new(), KahanSum::new());
        for &x in &vals {
            sup = sup.max(x.abs());
            max = max.max(x);
            min = min.min(x);
            abs_sum.add(x.abs());
            sq_sum.add(x * x);
        }
        rows.push(ProfileRow {
            r: r.r(),
            eps: r.eps(),
            samples: m,
            aliased: (m as u128) < 2 * effective_degree(s, r) as u128 + 1,
            sup_abs: sup,
            max,
            min,
            mean_abs: abs_sum.value() / mf,
            l2: (sq_sum.value() / mf).sqrt(),
            ratio_to_v: (sup.ln() - w.ln_v_at(r)).exp(),
        });
    }
    Ok(CircleProfile { rows })
}

/// Coefficients `a_n` from `m` equispaced samples of `u` on the circle of
/// radius `r`, for each requested frequency.
pub fn recover_coefficients<T: Real>(samples: &[T], r: &Radius<T>, freqs: &[u64]) -> Result<Vec<Complex<T>>> {
    let m = samples.len();
    if let Some(&top) = freqs.iter().max() {
        let required = 2u128 * top as u128;
        if (m as u128) <= required {
            return Err(Error::Aliasing {
                samples: m,
                freq: top,
                required: required.min(u64::MAX as u128) as u64,
            });
        }
    }
    if freqs.iter().any(|&n| n > 0) && !(r.r() > T::zero()) {
        return Err(Error::Domain("coefficient recovery needs r > 0".into()));
    }
    let mm = m as u64;
    let max_ln = lit::<T>(f64::MAX.ln());
    freqs
        .par_iter()
        .map(|&n| {
            let (mut re, mut im) = (KahanSum::new(), KahanSum::new());
            for (j, &u) in samples.iter().enumerate() {
                let (s, c) = phase::grid_angle(n, j as u64, mm).sin_cos();
                re.add(u * lit(c));
                im.add(-u * lit(s));
            }
            let norm = if n == 0 { T::one() } else { lit::<T>(2.0) } / from_u64::<T>(mm);
            let ln_scale = if n == 0 { T::zero() } else { -r.ln_pow(from_u64::<T>(n).ln()) };
            if ln_scale > max_ln - lit(1.0) {
                return Err(Error::Overflow(format!(
                    "r^-{n} overflows at r = {}; sample on a larger circle",
                    r.r()
                )));
            }
            let scale = ln_scale.exp() * norm;
            Ok(Complex::new(re.value() * scale, im.value() * scale))
        })
        .collect()
}

/// Certified bound on the part of the series beyond `N·M`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailBound<T> {
    /// `γ*·Σ_{n_k > NM} g(n_k) r^{n_k}`.
    pub bound: T,
    /// `γ*·D̂·2^{-M}·g(NM)/(1 - q)`, valid for `r <= 2^{-1/N}`.
    pub geometric_cap: T,
    /// Geometric ratio `D̂²·2^{-M(λ'-1)}`.
    pub q: T,
    pub m: T,
    pub split: T,
}

/// Bounds the tail `Σ_{n_k > N·M} |a_k| r^{n_k}` through the coefficient
/// profile. `m` defaults to [`default_multiplier`].
pub fn tail_bound<T: Real>(
    s: &GapSeries<T>,
    w: &Weight<T>,
    n_split: u64,
    r: &Radius<T>,
    m: Option<T>,
) -> Result<TailBound<T>> {
    if n_split == 0 {
        return Err(Error::Domain("split index N must be positive".into()));
    }
    let d_hat = w.doubling().d_hat;
    let lam = lambda_eff(s.lambda());
    let m = match m {
        Some(m) => m,
        None => T::from(default_multiplier(d_hat, s.lambda())?).unwrap(),
    };
    let q = d_hat * d_hat * lit::<T>(2.0).powf(-m * (lam - T::one()));
    if !(q < T::one()) {
        return Err(Error::Config(format!(
            "multiplier M = {m} leaves geometric ratio D^2 2^(-M(lambda-1)) = {q} >= 1"
        )));
    }
    let gamma = gamma_profile(s, w).gamma_sup;
    let split = from_u64::<T>(n_split) * m;
    let mut acc = KahanSum::new();
    for t in s.terms().iter().filter(|t| from_u64::<T>(t.n) > split) {
        let ln_n = from_u64::<T>(t.n).ln();
        acc.add((w.ln_g_of_ln(ln_n) + r.ln_pow(ln_n)).exp());
    }
    let geometric_cap =
        gamma * d_hat * lit::<T>(2.0).powf(-m) * w.g_unchecked(split.max(T::one())) / (T::one() - q);
    Ok(TailBound {
        bound: gamma * acc.value(),
        geometric_cap,
        q,
        m,
        split,
    })
}
