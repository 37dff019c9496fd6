//! Run configuration. A run is fully determined by its [`RunConfig`]; the
//! hash of its canonical JSON form is stamped on every emitted file.

use std::path::{Path, PathBuf};

use gapflow::oscillation::{PhaseMode, DEFAULT_SEED};
use gapflow::weights::WeightSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

/// Where the series comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SeriesSource {
    /// The b-chain example with ratio `A`.
    Example {
        #[serde(rename = "A")]
        a: f64,
        count: usize,
    },
    /// `Σ g(2^k) cos 2^k φ`.
    Counterexample { count: usize },
    /// A series file, JSON or CSV.
    File { path: PathBuf },
    /// Terms `[n, re, im]` given inline.
    Inline { terms: Vec<(u64, f64, f64)> },
}

impl Default for SeriesSource {
    fn default() -> Self {
        Self::Example { a: 2.0, count: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub weight: WeightSpec,
    pub series: SeriesSource,
    /// Explicit radii; when absent the grid is `1 - 2^{-k}`, `k = 1..=radius_count`.
    pub radii: Option<Vec<f64>>,
    pub radius_count: usize,
    /// Circle samples per radius for `profile`.
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    /// Phase trials; `lil` defaults to 200 and `oscillate` to 32.
    pub trials: Option<usize>,
    /// Fixed angles for `oscillate`, used instead of seeded trials.
    pub phi: Vec<f64>,
    pub mode: Option<PhaseMode>,
    pub burn_in: usize,
    pub rel_tol: f64,
    /// Frequencies at which `weight` checks the integral inequality.
    pub lemma_n: Vec<u64>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            weight: WeightSpec::Power { a: 1.0 },
            series: SeriesSource::default(),
            radii: None,
            radius_count: 20,
            samples: None,
            seed: None,
            trials: None,
            phi: Vec::new(),
            mode: None,
            burn_in: 100,
            rel_tol: 1e-9,
            lemma_n: vec![100, 1_000, 10_000, 100_000, 1_000_000],
            out: None,
            format: Format::Json,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text).map_err(gapflow::Error::from)?)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// SHA-256 of the canonical JSON with the seed resolved. The output path
    /// is left out so that a run written elsewhere hashes the same.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.seed = Some(self.seed());
        canon.out = None;
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn hash_ignores_out_and_resolves_seed() {
        let a = RunConfig::default();
        let b = RunConfig {
            out: Some("x.json".into()),
            seed: Some(DEFAULT_SEED),
            ..RunConfig::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig {
            seed: Some(7),
            ..RunConfig::default()
        };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn partial_documents() {
        let c: RunConfig =
            serde_json::from_str(r#"{"weight":{"family":"log-power","a":1.0},"series":{"source":"counterexample","count":5}}"#)
                .unwrap();
        assert_eq!(c.series, SeriesSource::Counterexample { count: 5 });
        assert_eq!(c.radius_count, 20);
        assert!(serde_json::from_str::<RunConfig>(r#"{"weight":{"a":1.0}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus":1}"#).is_err());
    }
}
