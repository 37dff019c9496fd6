use gapflow::eval::circle_profile;
use gapflow::gapseries::{construct_counterexample, construct_example, Construction, GapSeries, Term};
use gapflow::io;
use gapflow::membership::{coefficient_bound, gamma_profile};
use gapflow::oscillation::{lil_experiment, oscillation_contrast, phase_sources, ContrastOptions, LilOptions, PhaseMode};
use gapflow::quadrature::QuadOptions;
use gapflow::radius::Radius;
use gapflow::spectral::{PhaseSource, SpectralSeries};
use gapflow::weights::{boundary_radii, Weight};
use gapflow::{Complex, Error, Result};
use serde_json::{json, Value};

use crate::config::{RunConfig, SeriesSource};

/// A command's result in both output formats.
pub struct Output {
    pub result: Value,
    pub csv: Vec<u8>,
}

fn weight(cfg: &RunConfig) -> Result<Weight<f64>> {
    Weight::from_spec(&cfg.weight)
}

fn radii(cfg: &RunConfig) -> Result<Vec<Radius<f64>>> {
    match &cfg.radii {
        Some(rs) => rs.iter().map(|&r| Radius::from_r(r)).collect(),
        None => Ok(boundary_radii(cfg.radius_count)),
    }
}

fn quad(cfg: &RunConfig) -> QuadOptions {
    QuadOptions {
        rel_tol: cfg.rel_tol,
        ..QuadOptions::default()
    }
}

fn construction(cfg: &RunConfig, w: &Weight<f64>) -> Result<Option<Construction<f64>>> {
    match &cfg.series {
        SeriesSource::Example { a, count } => construct_example(w, *a, *count).map(Some),
        SeriesSource::Counterexample { count } => construct_counterexample(w, *count).map(Some),
        _ => Ok(None),
    }
}

fn series(cfg: &RunConfig, w: &Weight<f64>) -> Result<GapSeries<f64>> {
    if let Some(c) = construction(cfg, w)? {
        if let Some(note) = &c.note {
            log::warn!("{note}");
        }
        return Ok(c.series);
    }
    match &cfg.series {
        SeriesSource::File { path } => io::read_series(path),
        SeriesSource::Inline { terms } => {
            GapSeries::new(terms.iter().map(|&(n, re, im)| Term::new(n, Complex::new(re, im))).collect())
        }
        _ => unreachable!("constructed sources handled above"),
    }
}

/// The example source is rebuilt past the frequency cap for phase experiments.
fn spectral(cfg: &RunConfig, w: &Weight<f64>) -> Result<SpectralSeries<f64>> {
    match &cfg.series {
        SeriesSource::Example { a, count } => SpectralSeries::example(w, *a, *count),
        _ => Ok((&series(cfg, w)?).into()),
    }
}

fn csv_with(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn weight_report(cfg: &RunConfig, hash: &str) -> Result<Output> {
    let w = weight(cfg)?;
    let grid = radii(cfg)?;
    let mut samples = Vec::with_capacity(grid.len());
    for r in &grid {
        let x = 1.0 / r.eps();
        samples.push((r.r(), x, w.v_at(r), w.eval_g(x)?));
    }
    let cert = w.doubling();
    let ys: Vec<f64> = (0..=40).map(|k| 2f64.powi(k)).collect();
    let a_hat = w.regularity_check(2.0, &ys)?;
    let lemma = cfg
        .lemma_n
        .iter()
        .map(|&n| {
            let s = Radius::from_eps(1.0 / n as f64)?;
            Ok(json!({ "n": n, "s": s.r(), "ratio": w.check_integral_lemma_at(n, &s)? }))
        })
        .collect::<Result<Vec<_>>>()?;
    let result = json!({
        "weight": cfg.weight,
        "samples": samples.iter().map(|&(r, x, v, g)| json!({ "r": r, "x": x, "v": v, "g": g })).collect::<Vec<_>>(),
        "doubling": cert,
        "regularity": { "q": 2.0, "a_hat": a_hat },
        "integral_lemma": lemma,
    });
    let csv = csv_with(|buf| {
        buf.extend(io::csv_comment(hash).bytes());
        buf.extend(b"r,x,v,g\n");
        for (r, x, v, g) in &samples {
            buf.extend(format!("{r},{x},{v},{g}\n").bytes());
        }
        Ok(())
    })?;
    Ok(Output { result, csv })
}

pub fn construct(cfg: &RunConfig, hash: &str) -> Result<Output> {
    let w = weight(cfg)?;
    let (s, extra) = match construction(cfg, &w)? {
        Some(c) => {
            if let Some(note) = &c.note {
                log::warn!("{note}");
            }
            let extra = json!({ "chain": c.chain, "requested": c.requested, "truncated": c.truncated, "note": c.note });
            (c.series, extra)
        }
        None => (series(cfg, &w)?, Value::Null),
    };
    let mut result = io::series_to_json(&s);
    result["weight"] = serde_json::to_value(&cfg.weight)?;
    result["construction"] = extra;
    let csv = csv_with(|buf| io::write_series_csv(buf, &s, hash))?;
    Ok(Output { result, csv })
}

pub fn membership(cfg: &RunConfig, hash: &str) -> Result<Output> {
    let w = weight(cfg)?;
    let s = series(cfg, &w)?;
    let rep = gamma_profile(&s, &w);
    let mut result = serde_json::to_value(&rep)?;
    result["coefficient_bound"] = json!(coefficient_bound(&s, &w));
    let csv = csv_with(|buf| io::write_membership_csv(buf, &rep, hash))?;
    Ok(Output { result, csv })
}

pub fn profile(cfg: &RunConfig, hash: &str) -> Result<Output> {
    let w = weight(cfg)?;
    let s = series(cfg, &w)?;
    let prof = circle_profile(&s, &w, &radii(cfg)?, cfg.samples)?;
    let aliased = prof.rows.iter().filter(|row| row.aliased).count();
    if aliased > 0 {
        log::warn!("{aliased} of {} circles sampled below their effective degree; sup values are lower bounds", prof.rows.len());
    }
    let mut result = serde_json::to_value(&prof)?;
    result["k_hat"] = json!(prof.k_hat());
    let csv = csv_with(|buf| io::write_profile_csv(buf, &prof, hash))?;
    Ok(Output { result, csv })
}

fn sources(cfg: &RunConfig, s: &SpectralSeries<f64>, default_trials: usize) -> Vec<PhaseSource> {
    if !cfg.phi.is_empty() {
        return cfg.phi.iter().map(|&phi| PhaseSource::Exact { phi }).collect();
    }
    let mode = cfg
        .mode
        .unwrap_or(if s.is_exact() { PhaseMode::Exact } else { PhaseMode::Surrogate });
    phase_sources(mode, cfg.seed(), cfg.trials.unwrap_or(default_trials))
}

pub fn oscillate(cfg: &RunConfig, hash: &str) -> Result<Output> {
    let w = weight(cfg)?;
    let s = spectral(cfg, &w)?;
    let u_grid: Vec<f64> = radii(cfg)?.iter().map(Radius::u).collect();
    let opts = ContrastOptions {
        u_grid,
        sources: sources(cfg, &s, 32),
        quad: quad(cfg),
    };
    let c = oscillation_contrast(&s, &w, &opts)?;
    let result = serde_json::to_value(&c)?;
    let csv = csv_with(|buf| io::write_trace_csv(buf, &c.trace, hash))?;
    Ok(Output { result, csv })
}

pub fn lil(cfg: &RunConfig, hash: &str) -> Result<Output> {
    let w = weight(cfg)?;
    let s = spectral(cfg, &w)?;
    if !cfg.phi.is_empty() {
        return Err(Error::Config("lil draws its phases from the seed; drop \"phi\"".into()));
    }
    let opts = LilOptions {
        trials: cfg.trials.unwrap_or(200),
        seed: cfg.seed(),
        mode: cfg.mode,
        burn_in: cfg.burn_in,
        quad: quad(cfg),
        ..LilOptions::default()
    };
    let ex = lil_experiment(&s, &w, &opts)?;
    let mut result = serde_json::to_value(&ex)?;
    result["median_final_ratio"] = json!(ex.median_final_ratio());
    let csv = csv_with(|buf| io::write_trace_csv(buf, &ex.trace, hash))?;
    Ok(Output { result, csv })
}
