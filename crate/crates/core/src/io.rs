//! File formats: series as JSON `{"terms":[[n,re,im],…]}` or CSV `n,re,im`,
//! weight knots as CSV `r,v`, and CSV exports of the reports.
//!
//! Every CSV written here starts with one comment line
//! `# schema=gapflow/1 config_hash=<hex>`; readers skip `#` lines and an
//! optional header row.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::eval::CircleProfile;
use crate::gapseries::{GapSeries, Term};
use crate::membership::MembershipReport;
use crate::oscillation::OscillationTrace;
use crate::real::{to_f64, Real};
use crate::SCHEMA;

/// `{"terms":[[n,re,im],…]}`.
pub fn series_to_json<T: Real>(s: &GapSeries<T>) -> Value {
    let terms: Vec<Value> = s
        .terms()
        .iter()
        .map(|t| json!([t.n, to_f64(t.a.re), to_f64(t.a.im)]))
        .collect();
    json!({ "terms": terms })
}

/// Reads the `terms` array of a series document.
pub fn series_from_json(v: &Value) -> Result<GapSeries<f64>> {
    let arr = v
        .get("terms")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Config("series document has no \"terms\" array".into()))?;
    let mut terms = Vec::with_capacity(arr.len());
    for (i, item) in arr.iter().enumerate() {
        let bad = || Error::Validation {
            index: i,
            reason: "expected [n, re, im] with a positive integer n".into(),
        };
        let t = item.as_array().ok_or_else(bad)?;
        if t.len() != 3 {
            return Err(bad());
        }
        let n = t[0].as_u64().ok_or_else(bad)?;
        let re = t[1].as_f64().ok_or_else(bad)?;
        let im = t[2].as_f64().ok_or_else(bad)?;
        terms.push(Term::new(n, Complex::new(re, im)));
    }
    GapSeries::new(terms)
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r)
}

/// Numeric rows of a CSV source; a non-numeric first row is taken as a header.
fn numeric_rows<R: Read>(r: R, width: usize) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::new();
    for (i, rec) in csv_reader(r).records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && rec.get(0).is_some_and(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() < width {
            return Err(Error::Config(format!("CSV row {} has {} columns, expected {width}", i + 1, rec.len())));
        }
        out.push(rec.iter().take(width).map(str::to_owned).collect());
    }
    Ok(out)
}

fn parse<F: std::str::FromStr>(cell: &str, row: usize) -> Result<F> {
    cell.parse()
        .map_err(|_| Error::Config(format!("cannot parse {cell:?} in CSV row {}", row + 1)))
}

/// Series from CSV rows `n, re, im`.
pub fn series_from_csv<R: Read>(r: R) -> Result<GapSeries<f64>> {
    let rows = numeric_rows(r, 3)?;
    let mut terms = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        terms.push(Term::new(
            parse(&row[0], i)?,
            Complex::new(parse(&row[1], i)?, parse(&row[2], i)?),
        ));
    }
    GapSeries::new(terms)
}

/// Series from a `.csv` file or a JSON document.
pub fn read_series(path: &Path) -> Result<GapSeries<f64>> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        series_from_csv(file)
    } else {
        series_from_json(&serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Knots `(r, v)` from a two-column CSV.
pub fn knots_from_csv<R: Read>(r: R) -> Result<Vec<(f64, f64)>> {
    numeric_rows(r, 2)?
        .iter()
        .enumerate()
        .map(|(i, row)| Ok((parse(&row[0], i)?, parse(&row[1], i)?)))
        .collect()
}

pub fn read_knots(path: &Path) -> Result<Vec<(f64, f64)>> {
    knots_from_csv(std::fs::File::open(path)?)
}

/// The comment line heading every CSV export.
pub fn csv_comment(config_hash: &str) -> String {
    format!("# schema={SCHEMA} config_hash={config_hash}\n")
}

fn writer<W: Write>(mut out: W, config_hash: &str) -> Result<csv::Writer<W>> {
    out.write_all(csv_comment(config_hash).as_bytes())?;
    Ok(csv::Writer::from_writer(out))
}

fn num<T: Real>(x: T) -> String {
    to_f64(x).to_string()
}

fn opt<T: Real>(x: Option<T>) -> String {
    x.map(num).unwrap_or_default()
}

/// Columns `n, re, im`.
pub fn write_series_csv<T: Real, W: Write>(out: W, s: &GapSeries<T>, config_hash: &str) -> Result<()> {
    let mut w = writer(out, config_hash)?;
    w.write_record(["n", "re", "im"])?;
    for t in s.terms() {
        w.write_record([t.n.to_string(), num(t.a.re), num(t.a.im)])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `N, gamma_N`.
pub fn write_membership_csv<T: Real, W: Write>(out: W, rep: &MembershipReport<T>, config_hash: &str) -> Result<()> {
    let mut w = writer(out, config_hash)?;
    w.write_record(["N", "gamma_N"])?;
    for (n, g) in &rep.checkpoints {
        w.write_record([n.to_string(), num(*g)])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `r, sup_abs, max, min, mean_abs, l2, ratio_to_v`.
pub fn write_profile_csv<T: Real, W: Write>(out: W, p: &CircleProfile<T>, config_hash: &str) -> Result<()> {
    let mut w = writer(out, config_hash)?;
    w.write_record(["r", "sup_abs", "max", "min", "mean_abs", "l2", "ratio_to_v"])?;
    for row in &p.rows {
        w.write_record([
            num(row.r),
            num(row.sup_abs),
            num(row.max),
            num(row.min),
            num(row.mean_abs),
            num(row.l2),
            num(row.ratio_to_v),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `R, phi_or_seed, I, normalized, mode`, followed by `N, u, log_v,
/// trivial_ratio, running_max`.
pub fn write_trace_csv<T: Real, W: Write>(out: W, t: &OscillationTrace<T>, config_hash: &str) -> Result<()> {
    let mut w = writer(out, config_hash)?;
    w.write_record([
        "R",
        "phi_or_seed",
        "I",
        "normalized",
        "mode",
        "N",
        "u",
        "log_v",
        "trivial_ratio",
        "running_max",
    ])?;
    for row in &t.rows {
        w.write_record([
            num(row.r),
            row.key.to_string(),
            num(row.value),
            opt(row.normalized),
            row.mode.clone(),
            row.index.map(|n| n.to_string()).unwrap_or_default(),
            num(row.u),
            num(row.ln_v),
            num(t.trivial_ratio(row)),
            opt(row.running_max),
        ])?;
    }
    w.flush()?;
    Ok(())
}
