//! Log-domain view of a gap series, able to hold chains far beyond the
//! integer frequency cap, together with phase sources and a ray evaluator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gapseries::{build_b_chain_from, GapSeries, MAX_EXP};
use crate::phase;
use crate::radius::Radius;
use crate::real::{from_u64, lit, to_f64, KahanSum, Real};
use crate::weights::Weight;

/// `|a|·z^n` rotated by `arg`, stored through logarithms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralTerm<T> {
    pub ln_freq: T,
    /// The integer frequency when it fits under the cap.
    pub freq: Option<u64>,
    /// `log |a|`; `-∞` for a zero coefficient.
    pub ln_abs: T,
    pub arg: T,
}

impl<T: Real> SpectralTerm<T> {
    /// `(α, β)` scaled by `e^{-shift}`.
    pub fn alpha_beta_scaled(&self, shift: T) -> (T, T) {
        let m = (self.ln_abs - shift).exp();
        (m * self.arg.cos(), -m * self.arg.sin())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralSeries<T> {
    terms: Vec<SpectralTerm<T>>,
}

impl<T: Real> From<&GapSeries<T>> for SpectralSeries<T> {
    fn from(s: &GapSeries<T>) -> Self {
        let terms = s
            .terms()
            .iter()
            .map(|t| SpectralTerm {
                ln_freq: from_u64::<T>(t.n).ln(),
                freq: Some(t.n),
                ln_abs: t.a.norm().ln(),
                arg: t.a.arg(),
            })
            .collect();
        Self { terms }
    }
}

impl<T: Real> SpectralSeries<T> {
    pub fn new(terms: Vec<SpectralTerm<T>>) -> Result<Self> {
        for (i, p) in terms.windows(2).enumerate() {
            if !(p[1].ln_freq > p[0].ln_freq) {
                return Err(Error::Validation {
                    index: i + 1,
                    reason: "log-frequencies must increase strictly".into(),
                });
            }
        }
        Ok(Self { terms })
    }

    /// The b-chain example `(2^{b_k}, g(2^{b_k}))` without the frequency cap.
    pub fn example(w: &Weight<T>, a: T, count: usize) -> Result<Self> {
        let chain = build_b_chain_from(w, a, count, 1, u32::MAX)?;
        let ln2 = T::LN_2();
        let terms = chain
            .b
            .iter()
            .map(|&b| {
                let ln_freq = T::from(b).unwrap() * ln2;
                SpectralTerm {
                    ln_freq,
                    freq: (b <= MAX_EXP).then(|| 1u64 << b),
                    ln_abs: w.ln_g_of_ln(ln_freq),
                    arg: T::zero(),
                }
            })
            .collect();
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[SpectralTerm<T>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Whether every frequency is an integer under the cap.
    pub fn is_exact(&self) -> bool {
        self.terms.iter().all(|t| t.freq.is_some())
    }

    /// Number of leading terms with integer frequencies.
    pub fn exact_prefix(&self) -> usize {
        self.terms.iter().take_while(|t| t.freq.is_some()).count()
    }

    pub fn prefix(&self, len: usize) -> Self {
        Self {
            terms: self.terms[..len.min(self.terms.len())].to_vec(),
        }
    }

    /// Hex SHA-256 over the term data.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.terms {
            h.update(to_f64(t.ln_freq).to_bits().to_le_bytes());
            h.update(t.freq.unwrap_or(0).to_le_bytes());
            h.update(to_f64(t.ln_abs).to_bits().to_le_bytes());
            h.update(to_f64(t.arg).to_bits().to_le_bytes());
        }
        format!("{:x}", h.finalize())
    }

    /// Per-term angles `n_j φ` (exact) or i.i.d. uniform `θ_j` (surrogate).
    pub fn angles(&self, src: &PhaseSource) -> Result<Vec<T>> {
        match *src {
            PhaseSource::Exact { phi } => self
                .terms
                .iter()
                .enumerate()
                .map(|(j, t)| match t.freq {
                    Some(n) => Ok(lit(phase::reduce(n, phi))),
                    None => Err(Error::Capacity(format!(
                        "term {j} has a frequency above 2^62; use surrogate-phase mode"
                    ))),
                })
                .collect(),
            PhaseSource::Surrogate { seed, stream } => {
                let mut rng = surrogate_rng(seed, stream);
                Ok(self
                    .terms
                    .iter()
                    .map(|_| lit(rng.gen::<f64>() * std::f64::consts::TAU))
                    .collect())
            }
        }
    }
}

pub(crate) fn surrogate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Where the per-term angles come from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PhaseSource {
    /// `n_j φ` reduced exactly.
    Exact { phi: f64 },
    /// `θ_j` uniform on `[0, 2π)` from a seeded stream.
    Surrogate { seed: u64, stream: u64 },
}

impl PhaseSource {
    pub fn mode(&self) -> &'static str {
        match self {
            PhaseSource::Exact { .. } => "exact",
            PhaseSource::Surrogate { .. } => "surrogate",
        }
    }

    /// The angle, or the stream index for surrogate phases.
    pub fn key(&self) -> f64 {
        match *self {
            PhaseSource::Exact { phi } => phi,
            PhaseSource::Surrogate { stream, .. } => stream as f64,
        }
    }
}

/// `u(r e^{iφ})` along one ray, evaluated in scaled form.
///
/// Terms far below the current scale are folded into a running prefix sum,
/// terms far above it are cut off once their contribution is below `e^{-80}`.
#[derive(Clone, Debug)]
pub struct RayEvaluator<T> {
    ln_freq: Vec<T>,
    ln_abs: Vec<T>,
    cos_psi: Vec<T>,
    prefix_ref: Vec<T>,
    prefix_sum: Vec<T>,
}

const LOW_GAP: f64 = 40.0;
const HIGH_GAP: f64 = 6.0;
const NEGLIGIBLE: f64 = -80.0;

impl<T: Real> RayEvaluator<T> {
    pub fn new(s: &SpectralSeries<T>, angles: &[T]) -> Self {
        let n = s.len();
        let mut ev = Self {
            ln_freq: Vec::with_capacity(n),
            ln_abs: Vec::with_capacity(n),
            cos_psi: Vec::with_capacity(n),
            prefix_ref: Vec::with_capacity(n),
            prefix_sum: Vec::with_capacity(n),
        };
        let (mut m, mut q) = (T::neg_infinity(), T::zero());
        for (t, &theta) in s.terms().iter().zip(angles) {
            let c = (theta + t.arg).cos();
            ev.ln_freq.push(t.ln_freq);
            ev.ln_abs.push(t.ln_abs);
            ev.cos_psi.push(c);
            if t.ln_abs > m {
                q = if m == T::neg_infinity() { T::zero() } else { q * (m - t.ln_abs).exp() };
                m = t.ln_abs;
            }
            if t.ln_abs > T::neg_infinity() {
                q += (t.ln_abs - m).exp() * c;
            }
            ev.prefix_ref.push(m);
            ev.prefix_sum.push(q);
        }
        ev
    }

    /// `u(r e^{iφ})·e^{-ln_scale}`.
    pub fn scaled(&self, r: &Radius<T>, ln_scale: T) -> T {
        let u = r.u();
        let k = self.ln_freq.partition_point(|&f| f <= u - lit(LOW_GAP));
        let mut acc = KahanSum::new();
        if k > 0 && self.prefix_ref[k - 1] > T::neg_infinity() {
            acc.add(self.prefix_sum[k - 1] * (self.prefix_ref[k - 1] - ln_scale).exp());
        }
        for j in k..self.ln_freq.len() {
            if self.ln_abs[j] == T::neg_infinity() {
                continue;
            }
            let e = self.ln_abs[j] + r.ln_pow(self.ln_freq[j]) - ln_scale;
            if self.ln_freq[j] > u + lit(HIGH_GAP) && e < lit(NEGLIGIBLE) {
                break;
            }
            acc.add(e.exp() * self.cos_psi[j]);
        }
        acc.value()
    }
}
