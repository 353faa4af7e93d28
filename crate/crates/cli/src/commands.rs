use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use serde::Serialize;

use skelmax::geometry::{enumerate_faces, AxisRole};
use skelmax::io::{read_test_function, write_csv, write_grid_values_with_meta, Encoding};
use skelmax::operators::{skeleton_maximal_field, OperatorConfig, TestFunction};
use skelmax::scaling::{
    norm_scan, predicted_exponent, unit_center, weak_type_scan, Candidate, ExponentPrediction, ScanSettings,
    ScanSummary,
};
use skelmax::selection::coplanar_growth_experiment;
use skelmax::stats::LogLogFit;

use crate::config::{ExperimentConfig, TOOL};

fn operator_config(c: &ExperimentConfig, delta: f64) -> Result<OperatorConfig> {
    Ok(OperatorConfig::new(c.n, c.k, delta)?
        .with_width_factor(c.width_factor)?
        .with_backend(c.backend)?)
}

fn output_file(c: &ExperimentConfig, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(&c.output_dir).with_context(|| format!("creating {}", c.output_dir.display()))?;
    let path = c.output_dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

fn preamble(c: &ExperimentConfig) -> Vec<String> {
    c.meta().into_iter().map(|(k, v)| format!("{k}: {v}")).collect()
}

/// The configuration as recorded in summaries: output location dropped so
/// reruns elsewhere produce identical bytes.
fn recorded(c: &ExperimentConfig) -> ExperimentConfig {
    let mut r = c.clone();
    r.output_dir = PathBuf::new();
    r
}

fn write_json<T: Serialize>(path: &Path, mut w: BufWriter<File>, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct FaceRecord<'a> {
    index: usize,
    free_axes: Vec<usize>,
    roles: &'a [AxisRole],
    lo: &'a [f64],
    hi: &'a [f64],
    tool: &'static str,
    config_hash: &'a str,
}

pub fn faces(c: &ExperimentConfig, center: &[f64], r: f64, to_file: bool) -> Result<bool> {
    let center = if center.is_empty() { unit_center(c.n) } else { center.to_vec() };
    let faces = enumerate_faces(c.n, c.k, &center, r)?;
    let hash = c.hash();
    let mut out: Box<dyn Write> = if to_file {
        Box::new(output_file(c, "faces.jsonl")?.1)
    } else {
        Box::new(std::io::stdout().lock())
    };
    for (index, face) in faces.iter().enumerate() {
        let b = face.as_box();
        let rec = FaceRecord {
            index,
            free_axes: face.free_axes().collect(),
            roles: face.roles(),
            lo: b.lo(),
            hi: b.hi(),
            tool: TOOL,
            config_hash: &hash,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(true)
}

pub fn eval(c: &ExperimentConfig, input: &Path, encoding: &str) -> Result<bool> {
    let encoding = match encoding {
        "csv" => Encoding::Csv,
        "f64le" => Encoding::F64le,
        other => bail!("unknown encoding {other:?}, expected csv or f64le"),
    };
    if c.delta_list.len() != 1 {
        bail!("eval takes exactly one delta, got {}", c.delta_list.len());
    }
    let cfg = operator_config(c, c.delta_list[0])?;
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let (n, f) = read_test_function(BufReader::new(file)).with_context(|| format!("reading {}", input.display()))?;
    if n != c.n {
        bail!("input has dimension {n} but the configuration has n = {}", c.n);
    }
    if let TestFunction::Boxes(e) = &f {
        if e.is_empty() {
            info!("input is the zero function");
        }
    }
    let field = skeleton_maximal_field(&cfg, &f)?;
    let name = match encoding {
        Encoding::Csv => "field.csv",
        Encoding::F64le => "field.bin",
    };
    let (path, w) = output_file(c, name)?;
    let meta: BTreeMap<String, String> = c.meta().into_iter().collect();
    write_grid_values_with_meta(w, field.grid(), field.values(), encoding, &meta)?;
    info!("wrote {}", path.display());
    Ok(true)
}

#[derive(Serialize)]
struct ScanReport<'a> {
    tool: &'static str,
    config_hash: String,
    config: ExperimentConfig,
    prediction: &'a ExponentPrediction,
    summary: &'a ScanSummary,
    intercept: f64,
    points: &'a [(f64, f64)],
}

pub fn scan(c: &ExperimentConfig) -> Result<bool> {
    c.validate_operator()?;
    let prediction = predicted_exponent(c.p, c.q, c.n, c.k)?;
    if c.candidates.is_empty() {
        bail!("no candidates selected");
    }
    let settings = ScanSettings {
        width_factor: c.width_factor,
        backend: c.backend,
        domain: c.norm_domain,
        seed: c.seed,
        ..ScanSettings::new(c.n, c.k, c.p, c.q)
    };
    let series = norm_scan(&c.delta_list, &c.candidates, &settings)?;
    let summary = ScanSummary::evaluate(&prediction, &series.fit, c.tolerance);

    let (path, w) = output_file(c, "scan.csv")?;
    write_csv(w, &preamble(c), &series.rows)?;
    info!("wrote {}", path.display());
    let (path, w) = output_file(c, "summary.json")?;
    let report = ScanReport {
        tool: TOOL,
        config_hash: c.hash(),
        config: recorded(c),
        prediction: &prediction,
        summary: &summary,
        intercept: series.fit.intercept,
        points: &series.points,
    };
    write_json(&path, w, &report)?;
    info!("wrote {}", path.display());
    eprintln!(
        "{} regime: fitted slope {:.4}, predicted {:.4} (tolerance {}): {}",
        summary.regime,
        summary.fitted_slope,
        summary.predicted_exponent,
        summary.tolerance,
        if summary.pass { "pass" } else { "FAIL" }
    );
    Ok(summary.pass)
}

#[derive(Serialize)]
struct SelectReport<'a> {
    tool: &'static str,
    config_hash: String,
    n: usize,
    k: usize,
    trials: usize,
    predicted_exponent: f64,
    means: &'a [(usize, f64)],
    fit: Option<&'a LogLogFit>,
    tolerance: f64,
    /// Fitted slope at most the predicted exponent plus the tolerance;
    /// absent when fewer than three sizes were run.
    pass: Option<bool>,
}

pub fn select(c: &ExperimentConfig) -> Result<bool> {
    c.validate_selection()?;
    let exp = coplanar_growth_experiment(c.n, c.k, &c.m_list, c.trials, c.seed)?;
    let s = &exp.summary;
    let pass = s.fit.as_ref().map(|f| f.slope <= s.predicted_exponent + c.tolerance);

    let (path, w) = output_file(c, "select.csv")?;
    write_csv(w, &preamble(c), &exp.rows)?;
    info!("wrote {}", path.display());
    let (path, w) = output_file(c, "select_summary.json")?;
    let report = SelectReport {
        tool: TOOL,
        config_hash: c.hash(),
        n: c.n,
        k: c.k,
        trials: c.trials,
        predicted_exponent: s.predicted_exponent,
        means: &s.means,
        fit: s.fit.as_ref(),
        tolerance: c.tolerance,
        pass,
    };
    write_json(&path, w, &report)?;
    info!("wrote {}", path.display());
    if let Some(f) = &s.fit {
        eprintln!(
            "greedy max-coplanar slope {:.4}, bound {:.4}",
            f.slope,
            s.predicted_exponent + c.tolerance
        );
    }
    Ok(pass.unwrap_or(true))
}

#[derive(Serialize)]
struct WeakRow {
    candidate: Candidate,
    delta: f64,
    lambda: f64,
    q: f64,
    exponent: f64,
    level_set_measure: f64,
    implied_constant: f64,
}

pub fn weaktype(c: &ExperimentConfig) -> Result<bool> {
    c.validate_operator()?;
    if c.candidates.is_empty() {
        bail!("no candidates selected");
    }
    if c.lambdas.is_empty() {
        bail!("no thresholds selected");
    }
    let x0 = unit_center(c.n);
    let mut rows = Vec::new();
    for &cand in &c.candidates {
        for &delta in &c.delta_list {
            let cfg = operator_config(c, delta)?;
            let e = match cand.build(c.n, c.k, delta, &x0, c.seed)? {
                TestFunction::Boxes(e) => e,
                TestFunction::Grid(_) => bail!("candidate {} is not a set", cand.name()),
            };
            let table = weak_type_scan(&e, &c.lambdas, c.q, &cfg)?;
            rows.extend(table.rows.iter().map(|r| WeakRow {
                candidate: cand,
                delta: r.delta,
                lambda: r.lambda,
                q: table.q,
                exponent: table.exponent,
                level_set_measure: r.level_set_measure,
                implied_constant: r.implied_constant,
            }));
        }
    }
    let (path, w) = output_file(c, "weaktype.csv")?;
    write_csv(w, &preamble(c), &rows)?;
    info!("wrote {}", path.display());
    Ok(true)
}
