//! The weighted radial average `I_u(R, φ) = ∫_{1/2}^R u(re^{iφ}) dv/v²`, its
//! moments `c_j`, iterated-logarithm statistics and oscillation experiments.
//!
//! Moments are integrated in `w = log v(r)`, where the measure is `e^{-w} dw`.
//! Every series is handled through [`SpectralSeries`], so the same code runs
//! on exact phases and on surrogate phases beyond the frequency cap.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::circle_profile;
use crate::gapseries::GapSeries;
use crate::quadrature::{integrate, QuadOptions};
use crate::radius::Radius;
use crate::real::{from_u64, lit, to_f64, KahanSum, Real};
use crate::spectral::{surrogate_rng, PhaseSource, RayEvaluator, SpectralSeries};
use crate::weights::{Weight, WeightSpec};

/// Seed used when a run does not name one.
pub const DEFAULT_SEED: u64 = 1729;

/// Circle samples per radius when measuring `K̂` on exact series.
pub const K_HAT_CIRCLE_SAMPLES: usize = 1 << 15;

/// Beyond `u = log n + SPLIT_GAP`, `r^n` equals 1 to within `e^{-40}`.
const SPLIT_GAP: f64 = 40.0;

/// `e^{shift}·∫_{1/2}^{R} r^n dv/v²` with `R` given through `upper_u`
/// (`None` for `R = 1`) and `n` through `ln_n` (`None` for `n = 0`).
pub fn moment_scaled<T: Real>(
    w: &Weight<T>,
    ln_n: Option<T>,
    upper_u: Option<T>,
    shift: T,
    opts: &QuadOptions,
) -> Result<T> {
    let u_lo = T::LN_2();
    let u_hi = upper_u.unwrap_or(T::infinity());
    if !(u_hi > u_lo) {
        return Ok(T::zero());
    }
    let w_hi = w.ln_v_u(u_hi);
    // e^{shift} ∫_{w(ua)}^{w(u_hi)} e^{-w} dw
    let closed = |ua: T| -> T {
        let wa = w.ln_v_u(ua);
        (shift - wa).exp() * -(wa - w_hi).exp_m1()
    };
    let Some(ln_n) = ln_n else {
        return Ok(closed(u_lo));
    };
    let w_lo = w.ln_v_u(u_lo);
    let u_split = ln_n + lit(SPLIT_GAP);
    let u_top = u_hi.min(u_split);
    let peak = shift - w_lo + Radius::from_u(u_top)?.ln_pow(ln_n);
    if u_hi <= u_split && peak < T::min_positive_value().ln() {
        return Ok(T::zero());
    }
    // In t = u - log n the factor r^n = exp(-e^{-t}·log(1 - x)/(-x)) with
    // x = e^{-u} stays exact even when log n dwarfs t.
    let mut direct = T::zero();
    if u_top > u_lo {
        let (t_lo, t_top) = (u_lo - ln_n, u_top - ln_n);
        let mut breaks = vec![t_lo];
        for k in -10..=58 {
            let tk = T::from(k).unwrap() * T::LN_2();
            if tk > t_lo && tk < t_top {
                breaks.push(tk);
            }
        }
        breaks.push(t_top);
        let f = |t: T| -> T {
            let u = ln_n + t;
            let x = (-u).exp();
            let factor = if x > T::zero() { -(-x).ln_1p() / x } else { T::one() };
            let ln_pow = -(-t).exp() * factor;
            (shift - w.ln_v_u(u) + ln_pow).exp() * w.dln_v_u(u)
        };
        direct = integrate(f, &breaks, opts)?.value;
    }
    let tail = if u_hi > u_split { closed(u_split) } else { T::zero() };
    Ok(direct + tail)
}

/// `c = ∫_{1/2}^{R} r^n dv/v²`; `upper = None` means `R = 1`.
pub fn cj_moment<T: Real>(w: &Weight<T>, n: u64, upper: Option<&Radius<T>>) -> Result<T> {
    if let Some(r) = upper {
        if !(r.u() > T::LN_2()) {
            return Err(Error::Domain(format!("moment needs 1/2 < R <= 1, got R = {}", r.r())));
        }
    }
    let ln_n = (n > 0).then(|| from_u64::<T>(n).ln());
    moment_scaled(w, ln_n, upper.map(Radius::u), T::zero(), &QuadOptions::default())
}

/// `κ_j = c_j(R)·g(n_j)` for every term. When `full` holds the values at
/// `R = 1`, terms whose transition lies well below `R` reuse them.
pub fn scaled_moments<T: Real>(
    s: &SpectralSeries<T>,
    w: &Weight<T>,
    upper_u: Option<T>,
    full: Option<&[T]>,
    opts: &QuadOptions,
) -> Result<Vec<T>> {
    s.terms()
        .par_iter()
        .enumerate()
        .map(|(j, t)| {
            let shift = w.ln_g_of_ln(t.ln_freq);
            match (upper_u, full) {
                (Some(u), Some(full)) if u >= t.ln_freq + lit(SPLIT_GAP) => {
                    Ok(full[j] - (shift - w.ln_v_u(u)).exp())
                }
                _ => moment_scaled(w, Some(t.ln_freq), upper_u, shift, opts),
            }
        })
        .collect()
}

/// `|a_j|·c_j(R)` from the scaled moments.
fn amplitudes<T: Real>(s: &SpectralSeries<T>, w: &Weight<T>, kappa: &[T]) -> Vec<T> {
    s.terms()
        .iter()
        .zip(kappa)
        .map(|(t, &k)| {
            if t.ln_abs == T::neg_infinity() {
                T::zero()
            } else {
                k * (t.ln_abs - w.ln_g_of_ln(t.ln_freq)).exp()
            }
        })
        .collect()
}

fn cos_psi<T: Real>(s: &SpectralSeries<T>, angles: &[T]) -> Vec<T> {
    s.terms().iter().zip(angles).map(|(t, &a)| (a + t.arg).cos()).collect()
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = KahanSum::new();
    for (x, y) in a.iter().zip(b) {
        acc.add(*x * *y);
    }
    acc.value()
}

/// `I_u(R, φ)` by termwise integration.
pub fn weighted_average_with<T: Real>(
    s: &SpectralSeries<T>,
    w: &Weight<T>,
    r: &Radius<T>,
    src: &PhaseSource,
    opts: &QuadOptions,
) -> Result<T> {
    check_lower(r)?;
    let kappa = scaled_moments(s, w, Some(r.u()), None, opts)?;
    Ok(dot(&amplitudes(s, w, &kappa), &cos_psi(s, &s.angles(src)?)))
}

/// `I_u(R, φ)` for a gap series, `1/2 <= R < 1`.
pub fn weighted_average<T: Real>(s: &GapSeries<T>, w: &Weight<T>, r: &Radius<T>, phi: f64) -> Result<T> {
    weighted_average_with(&s.into(), w, r, &PhaseSource::Exact { phi }, &QuadOptions::default())
}

fn check_lower<T: Real>(r: &Radius<T>) -> Result<()> {
    if r.u() < T::LN_2() * (T::one() - lit::<T>(1e-15)) {
        return Err(Error::Domain(format!("weighted average needs R >= 1/2, got {}", r.r())));
    }
    Ok(())
}

/// Breakpoints in `w` at `u = log 2, log 2 + h, …, u_end`.
fn w_breaks<T: Real>(w: &Weight<T>, u_start: T, u_end: T, h: T) -> Vec<T> {
    let mut out = vec![w.ln_v_u(u_start)];
    let mut u = u_start + h;
    while u < u_end {
        out.push(w.ln_v_u(u));
        u += h;
    }
    out.push(w.ln_v_u(u_end));
    out.dedup();
    out
}

/// `∫ f(u(re^{iφ})/v) dw` between two radii along one ray.
fn ray_integral<T: Real>(
    ray: &RayEvaluator<T>,
    w: &Weight<T>,
    u_start: T,
    u_end: T,
    abs: bool,
    opts: &QuadOptions,
) -> Result<T> {
    if !(u_end > u_start) {
        return Ok(T::zero());
    }
    let f = |wv: T| -> T {
        let r = Radius::from_u(w.u_of_ln_v(wv)).expect("inverse weight is finite");
        let x = ray.scaled(&r, wv);
        if abs {
            x.abs()
        } else {
            x
        }
    };
    Ok(integrate(f, &w_breaks(w, u_start, u_end, lit(0.5)), opts)?.value)
}

/// `I_u(R, φ)` by integrating `u/v` in `w` along the ray; the cross-check for
/// [`weighted_average_with`].
pub fn weighted_average_direct<T: Real>(
    s: &SpectralSeries<T>,
    w: &Weight<T>,
    r: &Radius<T>,
    src: &PhaseSource,
    opts: &QuadOptions,
) -> Result<T> {
    check_lower(r)?;
    let ray = RayEvaluator::new(s, &s.angles(src)?);
    ray_integral(&ray, w, T::LN_2(), r.u(), false, opts)
}

/// `S_N(φ) = Σ_{j<=N} (α_j cos n_jφ + β_j sin n_jφ)·c_j(1)`.
pub fn partial_sum_with<T: Real>(
    s: &SpectralSeries<T>,
    w: &Weight<T>,
    src: &PhaseSource,
    n: usize,
    opts: &QuadOptions,
) -> Result<T> {
    if n >= s.len() {
        return Err(Error::Domain(format!("prefix index {n} beyond {} terms", s.len())));
    }
    let head = s.prefix(n + 1);
    let kappa = scaled_moments(&head, w, None, None, opts)?;
    Ok(dot(&amplitudes(&head, w, &kappa), &cos_psi(&head, &head.angles(src)?)))
}

pub fn partial_sum<T: Real>(s: &GapSeries<T>, w: &Weight<T>, phi: f64, n: usize) -> Result<T> {
    partial_sum_with(&s.into(), w, &PhaseSource::Exact { phi }, n, &QuadOptions::default())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LilStatistics<T> {
    pub ln_freq: Vec<T>,
    /// `log c_j` with `c_j = c_j(1)`.
    pub ln_c: Vec<T>,
    /// `c_j`; underflows to zero for frequencies far beyond the cap.
    pub c: Vec<T>,
    /// `c_j·g(n_j)`.
    pub c_g: Vec<T>,
    pub alpha_c: Vec<T>,
    pub beta_c: Vec<T>,
    /// `B_N = (½ Σ_{j<=N} (α_j c_j)² + (β_j c_j)²)^{1/2}`.
    pub b: Vec<T>,
    /// `M_N = max_{j<=N} ((α_j c_j)² + (β_j c_j)²)^{1/2}`.
    pub m: Vec<T>,
    /// `Σ_{j<=N} (α_j c_j)² / log g(n_N)`.
    pub ac_ratio: Vec<T>,
    /// `B` at least doubles over the computed range.
    pub b_growing: bool,
    /// `M_N (log log B_N)^{1/2} / B_N` trends down where defined.
    pub m_ratio_decreasing: bool,
}

impl<T: Real> LilStatistics<T> {
    /// `M_N (log log B_N)^{1/2} / B_N` for `B_N > e`.
    pub fn m_ratio(&self) -> Vec<(usize, T)> {
        self.b
            .iter()
            .zip(&self.m)
            .enumerate()
            .filter(|(_, (b, _))| **b > T::E())
            .map(|(n, (b, m))| (n, *m * b.ln().ln().sqrt() / *b))
            .collect()
    }
}

pub fn lil_statistics<T: Real>(s: &SpectralSeries<T>, w: &Weight<T>, opts: &QuadOptions) -> Result<LilStatistics<T>> {
    let kappa = scaled_moments(s, w, None, None, opts)?;
    Ok(stats_from(s, w, kappa))
}

fn stats_from<T: Real>(s: &SpectralSeries<T>, w: &Weight<T>, kappa: Vec<T>) -> LilStatistics<T> {
    let len = s.len();
    let mut st = LilStatistics {
        ln_freq: Vec::with_capacity(len),
        ln_c: Vec::with_capacity(len),
        c: Vec::with_capacity(len),
        c_g: kappa,
        alpha_c: Vec::with_capacity(len),
        beta_c: Vec::with_capacity(len),
        b: Vec::with_capacity(len),
        m: Vec::with_capacity(len),
        ac_ratio: Vec::with_capacity(len),
        b_growing: false,
        m_ratio_decreasing: false,
    };
    let (mut sq, mut asq) = (KahanSum::new(), KahanSum::new());
    let mut m = T::zero();
    for (t, &k) in s.terms().iter().zip(&st.c_g) {
        let ln_g = w.ln_g_of_ln(t.ln_freq);
        let (a, b) = t.alpha_beta_scaled(ln_g);
        let (a, b) = (a * k, b * k);
        st.ln_freq.push(t.ln_freq);
        st.ln_c.push(k.ln() - ln_g);
        st.c.push((k.ln() - ln_g).exp());
        st.alpha_c.push(a);
        st.beta_c.push(b);
        sq.add(a * a + b * b);
        asq.add(a * a);
        m = m.max((a * a + b * b).sqrt());
        st.b.push((lit::<T>(0.5) * sq.value()).sqrt());
        st.m.push(m);
        st.ac_ratio.push(asq.value() / ln_g);
    }
    if let (Some(&first), Some(&last)) = (st.b.first(), st.b.last()) {
        st.b_growing = first > T::zero() && last >= lit::<T>(2.0) * first;
    }
    let ratios = st.m_ratio();
    // (log log B)^{1/2} starts at zero just above B = e, so the trend is
    // read off the second half of the range.
    let tail = &ratios[ratios.len() / 2..];
    st.m_ratio_decreasing = tail.len() >= 2 && {
        let pts: Vec<(T, T)> = tail.iter().map(|&(n, r)| (from_u64::<T>(n as u64 + 1).ln(), r)).collect();
        let (first, last) = (pts[0].1, pts[pts.len() - 1].1);
        last < first && slope(&pts) < T::zero()
    };
    st
}

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

/// `S_N / (2 B_N² log log B_N)^{1/2}`, defined for `B_N > e`.
pub fn lil_ratio<T: Real>(s_n: T, b_n: T) -> Option<T> {
    (b_n > T::E()).then(|| s_n / (lit::<T>(2.0) * b_n * b_n * b_n.ln().ln()).sqrt())
}

/// `I / (log v · log log log v)^{1/2}`, defined for `log v >= e^e`.
pub fn main_normalizer<T: Real>(i: T, ln_v: T) -> Option<T> {
    (ln_v >= T::E().powf(T::E())).then(|| i / (ln_v * ln_v.ln().ln().ln()).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseMode {
    Exact,
    Surrogate,
}

#[derive(Clone, Debug)]
pub struct LilOptions {
    pub trials: usize,
    pub seed: u64,
    /// `None` picks exact phases when every frequency fits under the cap.
    pub mode: Option<PhaseMode>,
    /// Running maxima start at this prefix (clamped to half the series).
    pub burn_in: usize,
    /// Prefixes `N` at which `I_u(r_N, φ)` is computed. `None` means every
    /// prefix in exact mode and none in surrogate mode.
    pub i_prefixes: Option<Vec<usize>>,
    /// Number of log-spaced prefixes recorded as `S` rows per trial; every
    /// prefix is recorded when the series is no longer than this.
    pub s_rows: usize,
    pub quad: QuadOptions,
}

impl Default for LilOptions {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: DEFAULT_SEED,
            mode: None,
            burn_in: 100,
            i_prefixes: None,
            s_rows: 64,
            quad: QuadOptions::default(),
        }
    }
}

/// One sample of a trace: an `I_u` or `S_N` value at radius `R` for one phase
/// source.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow<T> {
    pub r: T,
    /// `log(1/(1 - R))`, which keeps radii near 1 distinct.
    pub u: T,
    pub ln_v: T,
    /// Angle in exact mode, stream index in surrogate mode.
    pub key: f64,
    /// Prefix index `N` when the row belongs to `r_N`.
    pub index: Option<usize>,
    pub value: T,
    pub normalized: Option<T>,
    pub running_max: Option<T>,
    /// `exact:I`, `exact:S`, `surrogate:I` or `surrogate:S`.
    pub mode: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceMeta {
    pub weight: WeightSpec,
    pub series_hash: String,
    pub terms: usize,
    pub seed: Option<u64>,
    pub trials: usize,
    pub burn_in: usize,
    pub r_convention: String,
    pub rel_tol: f64,
    /// Measured `sup sup|u|/v` used by the trivial bound.
    pub k_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationTrace<T> {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow<T>>,
}

impl<T: Real> OscillationTrace<T> {
    /// `I/(K̂ log v)`.
    pub fn trivial_ratio(&self, row: &TraceRow<T>) -> T {
        row.value / (lit::<T>(self.meta.k_hat) * row.ln_v)
    }

    /// `I` rows with `|I| > K̂·log v(R)·(1 + tol)`.
    pub fn trivial_bound_violations(&self, tol: f64) -> Vec<&TraceRow<T>> {
        let k = lit::<T>(self.meta.k_hat * (1.0 + tol));
        self.rows
            .iter()
            .filter(|r| r.mode.ends_with(":I") && r.value.abs() > k * r.ln_v)
            .collect()
    }

    /// `max_φ |I_u(r_N, φ) - S_N(φ)|` for every prefix with both values.
    pub fn difference_profile(&self) -> Vec<(usize, T)> {
        let mut pairs: BTreeMap<(usize, u64), (Option<T>, Option<T>)> = BTreeMap::new();
        for row in &self.rows {
            let Some(n) = row.index else { continue };
            let e = pairs.entry((n, row.key.to_bits())).or_default();
            if row.mode.ends_with(":I") {
                e.0 = Some(row.value);
            } else if row.mode.ends_with(":S") {
                e.1 = Some(row.value);
            }
        }
        let mut out: BTreeMap<usize, T> = BTreeMap::new();
        for ((n, _), (i, s)) in pairs {
            if let (Some(i), Some(s)) = (i, s) {
                let d = out.entry(n).or_insert(T::zero());
                *d = d.max((i - s).abs());
            }
        }
        out.into_iter().collect()
    }

    pub fn merge(&mut self, other: OscillationTrace<T>) {
        self.meta.k_hat = self.meta.k_hat.max(other.meta.k_hat);
        self.rows.extend(other.rows);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LilExperiment<T> {
    pub stats: LilStatistics<T>,
    pub trace: OscillationTrace<T>,
    pub mode: PhaseMode,
    /// Per trial, `max_{N >= burn-in} S_N/(2B_N² log log B_N)^{1/2}`.
    pub final_ratios: Vec<Option<T>>,
    /// Per trial, the largest normalized `I_u(r_N, φ)`.
    pub max_normalized_i: Vec<Option<T>>,
    pub burn_in: usize,
}

impl<T: Real> LilExperiment<T> {
    pub fn median_final_ratio(&self) -> Option<T> {
        let mut v: Vec<T> = self.final_ratios.iter().flatten().copied().collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = v.len();
        Some(if k % 2 == 1 {
            v[k / 2]
        } else {
            (v[k / 2 - 1] + v[k / 2]) * lit(0.5)
        })
    }
}

/// Log-spaced prefix indices in `[0, len)`, always including the last.
pub fn log_spaced(len: usize, count: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    if len <= count.max(1) {
        return (0..len).collect();
    }
    let mut out: Vec<usize> = (0..count)
        .map(|i| ((len as f64).powf(i as f64 / (count - 1).max(1) as f64) - 1.0).round() as usize)
        .map(|n| n.min(len - 1))
        .collect();
    out.push(len - 1);
    out.sort_unstable();
    out.dedup();
    out
}

/// Sources for `trials` runs: seeded angles uniform on `(-π, π]` or surrogate
/// streams.
pub fn phase_sources(mode: PhaseMode, seed: u64, trials: usize) -> Vec<PhaseSource> {
    (0..trials as u64)
        .map(|t| match mode {
            PhaseMode::Exact => {
                let x: f64 = surrogate_rng(seed, t).gen();
                PhaseSource::Exact {
                    phi: std::f64::consts::PI - std::f64::consts::TAU * x,
                }
            }
            PhaseMode::Surrogate => PhaseSource::Surrogate { seed, stream: t },
        })
        .collect()
}

/// Iterated-logarithm experiment over seeded phase trials, with radii
/// `r_N = 1 - 1/n_N`.
pub fn lil_experiment<T: Real>(s: &SpectralSeries<T>, w: &Weight<T>, opts: &LilOptions) -> Result<LilExperiment<T>> {
    if opts.trials == 0 {
        return Err(Error::Domain("experiment needs at least one trial".into()));
    }
    let mode = opts.mode.unwrap_or(if s.is_exact() {
        PhaseMode::Exact
    } else {
        PhaseMode::Surrogate
    });
    if mode == PhaseMode::Exact && !s.is_exact() {
        return Err(Error::Capacity(
            "exact phases need every frequency below 2^62; use surrogate-phase mode".into(),
        ));
    }
    let len = s.len();
    let full = scaled_moments(s, w, None, None, &opts.quad)?;
    let stats = stats_from(s, w, full.clone());
    let amp_full = amplitudes(s, w, &full);
    let i_prefixes: Vec<usize> = match (&opts.i_prefixes, mode) {
        (Some(p), _) => p.iter().copied().filter(|&n| n < len).collect(),
        (None, PhaseMode::Exact) => (0..len).collect(),
        (None, PhaseMode::Surrogate) => Vec::new(),
    };
    let i_amps: Vec<(usize, T, Vec<T>)> = i_prefixes
        .iter()
        .map(|&n| {
            let u = s.terms()[n].ln_freq;
            let kappa = scaled_moments(s, w, Some(u), Some(&full), &opts.quad)?;
            Ok((n, u, amplitudes(s, w, &kappa)))
        })
        .collect::<Result<_>>()?;
    let burn_in = opts.burn_in.min(len.saturating_sub(1) / 2);
    let s_rows: Vec<usize> = log_spaced(len, opts.s_rows);
    let sources = phase_sources(mode, opts.seed, opts.trials);
    let label = match mode {
        PhaseMode::Exact => "exact",
        PhaseMode::Surrogate => "surrogate",
    };
    let radius_of = |n: usize| -> Result<(Radius<T>, T)> {
        let r = Radius::from_u(s.terms()[n].ln_freq)?;
        Ok((r, w.ln_v_at(&r)))
    };

    type TrialOut<T> = (Vec<TraceRow<T>>, Option<T>, Option<T>);
    let per_trial: Vec<TrialOut<T>> = sources
        .par_iter()
        .map(|src| -> Result<TrialOut<T>> {
            let cos = cos_psi(s, &s.angles(src)?);
            let mut rows = Vec::new();
            let mut acc = KahanSum::new();
            let mut run_max: Option<T> = None;
            let mut next_row = s_rows.iter().peekable();
            for n in 0..len {
                acc.add(amp_full[n] * cos[n]);
                let ratio = lil_ratio(acc.value(), stats.b[n]);
                if n >= burn_in {
                    if let Some(x) = ratio {
                        run_max = Some(run_max.map_or(x, |m: T| m.max(x)));
                    }
                }
                if next_row.peek() == Some(&&n) {
                    next_row.next();
                    let (r, ln_v) = radius_of(n)?;
                    rows.push(TraceRow {
                        r: r.r(),
                        u: r.u(),
                        ln_v,
                        key: src.key(),
                        index: Some(n),
                        value: acc.value(),
                        normalized: ratio,
                        running_max: run_max,
                        mode: format!("{label}:S"),
                    });
                }
            }
            let mut i_max: Option<T> = None;
            for (n, _, amp) in &i_amps {
                let (r, ln_v) = radius_of(*n)?;
                let value = dot(amp, &cos);
                let normalized = main_normalizer(value, ln_v);
                if let Some(x) = normalized {
                    i_max = Some(i_max.map_or(x.abs(), |m: T| m.max(x.abs())));
                }
                rows.push(TraceRow {
                    r: r.r(),
                    u: r.u(),
                    ln_v,
                    key: src.key(),
                    index: Some(*n),
                    value,
                    normalized,
                    running_max: i_max,
                    mode: format!("{label}:I"),
                });
            }
            Ok((rows, run_max, i_max))
        })
        .collect::<Result<_>>()?;

    let u_max = i_amps.iter().map(|x| x.1).fold(T::LN_2(), T::max);
    let k_hat = if i_amps.is_empty() {
        0.0
    } else {
        measure_k_hat(s, w, &sources, u_max + lit(2.0), lit(0.05))?
    };
    let mut rows = Vec::new();
    let mut final_ratios = Vec::new();
    let mut max_normalized_i = Vec::new();
    for (r, f, i) in per_trial {
        rows.extend(r);
        final_ratios.push(f);
        max_normalized_i.push(i);
    }
    Ok(LilExperiment {
        stats,
        trace: OscillationTrace {
            meta: TraceMeta {
                weight: w.spec().clone(),
                series_hash: s.hash(),
                terms: len,
                seed: Some(opts.seed),
                trials: opts.trials,
                burn_in,
                r_convention: "r_N = 1 - 1/n_N".into(),
                rel_tol: opts.quad.rel_tol,
                k_hat,
            },
            rows,
        },
        mode,
        final_ratios,
        max_normalized_i,
        burn_in,
    })
}

/// `max |u|/v` over the rays of `sources` on a `u`-grid of step `h` up to
/// `u_max`, plus, for exact phases, dyadic circle profiles.
pub fn measure_k_hat<T: Real>(
    s: &SpectralSeries<T>,
    w: &Weight<T>,
    sources: &[PhaseSource],
    u_max: T,
    h: T,
) -> Result<f64> {
    let steps = to_f64((u_max / h).ceil()).max(1.0) as usize;
    let rays: Vec<f64> = sources
        .par_iter()
        .map(|src| -> Result<f64> {
            let ray = RayEvaluator::new(s, &s.angles(src)?);
            let mut best = 0f64;
            for k in 0..=steps {
                let r = Radius::from_u(h * from_u64::<T>(k as u64))?;
                best = best.max(to_f64(ray.scaled(&r, w.ln_v_at(&r)).abs()));
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let mut k_hat = rays.into_iter().fold(0f64, f64::max);
    if s.is_exact() && sources.iter().any(|p| matches!(p, PhaseSource::Exact { .. })) {
        let g = GapSeries::new(
            s.terms()
                .iter()
                .map(|t| {
                    crate::gapseries::Term::new(
                        t.freq.expect("exact series"),
                        num_complex::Complex::from_polar(t.ln_abs.exp(), t.arg),
                    )
                })
                .collect(),
        )?;
        let mut radii = Vec::new();
        let mut u = T::zero();
        while u <= u_max {
            radii.push(Radius::from_u(u)?);
            u += T::LN_2() * lit(0.5);
        }
        let prof = circle_profile(&g, w, &radii, Some(K_HAT_CIRCLE_SAMPLES))?;
        k_hat = k_hat.max(to_f64(prof.k_hat()));
    }
    Ok(k_hat)
}

#[derive(Clone, Debug)]
pub struct ContrastOptions<T> {
    /// Radii as `u = log(1/(1 - R))`, increasing.
    pub u_grid: Vec<T>,
    pub sources: Vec<PhaseSource>,
    pub quad: QuadOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContrastRow<T> {
    pub r: T,
    pub u: T,
    pub ln_v: T,
    /// `mean_φ I_{|u|}(R, φ) / log v(R)`.
    pub abs_ratio: T,
    /// `max_φ |I_u(R, φ)| / log v(R)`.
    pub max_i_ratio: T,
    /// Fraction of sources with `I_{|u|}/log v` above half the mean.
    pub frac_above_half: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct Contrast<T> {
    pub rows: Vec<ContrastRow<T>>,
    pub trace: OscillationTrace<T>,
}

/// Compares `I_{|u|}` with `I_u` across radii: the first stays comparable to
/// `log v(R)`, the second is expected to fall behind it.
pub fn oscillation_contrast<T: Real>(
    s: &SpectralSeries<T>,
    w: &Weight<T>,
    opts: &ContrastOptions<T>,
) -> Result<Contrast<T>> {
    if opts.sources.is_empty() {
        return Err(Error::Domain("contrast needs at least one phase source".into()));
    }
    let half = T::LN_2();
    let grid = &opts.u_grid;
    if grid.iter().any(|&u| u < half) || grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Domain("radius grid must increase from R >= 1/2".into()));
    }
    let full = scaled_moments(s, w, None, None, &opts.quad)?;
    let amps: Vec<Vec<T>> = grid
        .iter()
        .map(|&u| Ok(amplitudes(s, w, &scaled_moments(s, w, Some(u), Some(&full), &opts.quad)?)))
        .collect::<Result<_>>()?;
    // per source: (I_{|u|}(R_i), I_u(R_i)) for every radius
    let per_src: Vec<Vec<(T, T)>> = opts
        .sources
        .par_iter()
        .map(|src| -> Result<Vec<(T, T)>> {
            let angles = s.angles(src)?;
            let ray = RayEvaluator::new(s, &angles);
            let cos = cos_psi(s, &angles);
            let mut out = Vec::with_capacity(grid.len());
            let (mut prev, mut abs_acc) = (half, T::zero());
            for (i, &u) in grid.iter().enumerate() {
                abs_acc += ray_integral(&ray, w, prev, u, true, &opts.quad)?;
                prev = u;
                out.push((abs_acc, dot(&amps[i], &cos)));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let u_max = grid.last().copied().unwrap_or(half);
    let k_hat = measure_k_hat(s, w, &opts.sources, u_max + lit(2.0), lit(0.05))?;
    let nsrc = from_u64::<T>(opts.sources.len() as u64);
    let mut rows = Vec::new();
    let mut trace_rows = Vec::new();
    for (i, &u) in grid.iter().enumerate() {
        let r = Radius::from_u(u)?;
        let ln_v = w.ln_v_at(&r);
        let mean_abs = per_src.iter().map(|v| v[i].0).sum::<T>() / nsrc;
        let max_i = per_src.iter().fold(T::zero(), |m, v| m.max(v[i].1.abs()));
        let above = per_src
            .iter()
            .filter(|v| v[i].0 / ln_v > lit::<T>(0.5) * mean_abs / ln_v)
            .count();
        rows.push(ContrastRow {
            r: r.r(),
            u,
            ln_v,
            abs_ratio: mean_abs / ln_v,
            max_i_ratio: max_i / ln_v,
            frac_above_half: from_u64::<T>(above as u64) / nsrc,
        });
        for (src, v) in opts.sources.iter().zip(&per_src) {
            trace_rows.push(TraceRow {
                r: r.r(),
                u,
                ln_v,
                key: src.key(),
                index: None,
                value: v[i].1,
                normalized: main_normalizer(v[i].1, ln_v),
                running_max: None,
                mode: format!("{}:I", src.mode()),
            });
        }
    }
    let seed = opts.sources.iter().find_map(|p| match p {
        PhaseSource::Surrogate { seed, .. } => Some(*seed),
        PhaseSource::Exact { .. } => None,
    });
    Ok(Contrast {
        rows,
        trace: OscillationTrace {
            meta: TraceMeta {
                weight: w.spec().clone(),
                series_hash: s.hash(),
                terms: s.len(),
                seed,
                trials: opts.sources.len(),
                burn_in: 0,
                r_convention: "radius grid given in u = log(1/(1-R))".into(),
                rel_tol: opts.quad.rel_tol,
                k_hat,
            },
            rows: trace_rows,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbsAverageRow<T> {
    pub r: T,
    pub mean_abs_i: T,
    pub ratio: T,
}

/// `mean_φ I_{|u|}(R, φ)` over `m` equispaced angles, with its ratio to
/// `log v(R)`.
pub fn abs_average<T: Real>(
    s: &GapSeries<T>,
    w: &Weight<T>,
    r_grid: &[Radius<T>],
    m: usize,
) -> Result<Vec<AbsAverageRow<T>>> {
    if m == 0 {
        return Err(Error::Domain("abs_average needs at least one angle".into()));
    }
    let sources: Vec<PhaseSource> = (0..m)
        .map(|j| PhaseSource::Exact {
            phi: std::f64::consts::TAU * j as f64 / m as f64,
        })
        .collect();
    let opts = ContrastOptions {
        u_grid: r_grid.iter().map(Radius::u).collect(),
        sources,
        quad: QuadOptions::default().with_rel_tol(1e-7),
    };
    let c = oscillation_contrast(&s.into(), w, &opts)?;
    Ok(c.rows
        .iter()
        .map(|row| AbsAverageRow {
            r: row.r,
            mean_abs_i: row.abs_ratio * row.ln_v,
            ratio: row.abs_ratio,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SharpnessRow<T> {
    pub j: usize,
    /// `c_j·v(r_j)` with `r_j = 1 - 1/n_j`.
    pub c_v: T,
    /// `r_j^{n_j}`, the lower bound for `c_j·v(r_j)`.
    pub lower: T,
}

pub fn sharpness_check<T: Real>(
    s: &SpectralSeries<T>,
    w: &Weight<T>,
    opts: &QuadOptions,
) -> Result<Vec<SharpnessRow<T>>> {
    let kappa = scaled_moments(s, w, None, None, opts)?;
    s.terms()
        .iter()
        .zip(kappa)
        .enumerate()
        .map(|(j, (t, k))| {
            let r = Radius::from_u(t.ln_freq)?;
            Ok(SharpnessRow {
                j,
                c_v: k,
                lower: r.ln_pow(t.ln_freq).exp(),
            })
        })
        .collect()
}
