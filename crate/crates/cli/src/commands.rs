//! The `generate`, `run`, `grid` and `report` subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use fedgl::io::{write_edge_list, write_trace_csv};
use fedgl::{GraphFamily, GraphMetrics, RunScores};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::dataset::{write_bytes, write_file, Access, Dataset, Manifest, SiloStore};
use crate::error::{CliError, Result};
use crate::methods::{run_method, Method, MethodOutput};

/// Writes a synthetic dataset for `cfg` into `out`.
pub fn cmd_generate(cfg: &Config, out: &Path) -> Result<Manifest> {
    let ds = Dataset::generate(cfg, cfg.seed)?;
    ds.write(cfg, out)?;
    SiloStore::open(out)?.manifest()
}

/// Result of [`cmd_run`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub method: Method,
    pub seed: u64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stepsize_passed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    pub fs_local: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fs_consensus: Option<f64>,
}

/// Where a command finds its data: an existing dataset directory, or a
/// fresh one generated from the config under `<out>/data`.
fn open_dataset(cfg: &Config, data: Option<&Path>, out: &Path) -> Result<PathBuf> {
    match data {
        Some(dir) => Ok(dir.to_path_buf()),
        None => {
            let dir = out.join("data");
            cmd_generate(cfg, &dir)?;
            Ok(dir)
        }
    }
}

struct Loaded {
    store: SiloStore,
    manifest: Manifest,
    family: GraphFamily,
    summaries: Vec<fedgl::DistanceVector>,
}

fn load(dir: &Path, audit: Option<Arc<Mutex<Vec<Access>>>>) -> Result<Loaded> {
    let mut store = SiloStore::open(dir)?;
    if let Some(log) = audit {
        store = store.with_audit(log);
    }
    let manifest = store.manifest()?;
    let summaries = (0..manifest.clients).map(|i| store.client_summary(i)).collect::<Result<Vec<_>>>()?;
    let family = store.family(&manifest)?;
    Ok(Loaded { store, manifest, family, summaries })
}

/// Runs `method` on a dataset and writes graphs, metrics and, for ppgl, the
/// round trace into `out`.
///
/// All reads of client data happen before learning starts; `audit`, if
/// given, receives every file access.
pub fn cmd_run(
    cfg: &Config,
    data: Option<&Path>,
    method: Method,
    out: &Path,
    audit: Option<Arc<Mutex<Vec<Access>>>>,
) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = open_dataset(cfg, data, out)?;
    let Loaded { store, manifest, family, summaries } = load(&dir, audit)?;
    let cfg = &cfg.with_data(&manifest);
    store.mark_solve_started();
    let output = run_method(method, summaries, cfg)?;
    let scores = output.score(&family, cfg.edge_threshold)?;

    write_file(&out.join("config.toml"), &cfg.to_toml())?;
    let graphs = out.join("graphs");
    for (i, g) in output.locals.iter().enumerate() {
        if method != Method::Global {
            write_file(&graphs.join(format!("client_{}.edges", i + 1)), &write_edge_list(g))?;
        }
    }
    if let Some(c) = &output.consensus {
        let name = if method == Method::Global { "global.edges" } else { "consensus.edges" };
        write_file(&graphs.join(name), &write_edge_list(c))?;
    }
    if method == Method::Ppgl {
        let mut buf = Vec::new();
        write_trace_csv(&output.trace, manifest.clients, &mut buf)?;
        write_bytes(&out.join("trace.csv"), &buf)?;
    }
    write_bytes(&out.join("metrics.csv"), &metrics_csv(&output, &manifest, &scores)?)?;

    let summary = RunSummary {
        method,
        seed: manifest.seed,
        converged: output.converged,
        iterations: output.iterations,
        stepsize_passed: output.stepsize.map(|s| s.passed),
        lipschitz_bound: output.stepsize.map(|s| s.lipschitz),
        gamma: output.gamma.clone(),
        fs_local: scores.local_avg.fs,
        fs_consensus: scores.consensus.as_ref().map(|m| m.fs),
    };
    write_file(&out.join("summary.toml"), &toml::to_string(&summary).expect("summary serializes"))?;
    Ok(summary)
}

/// Column header of `metrics.csv`.
pub const METRICS_HEADER: [&str; 9] = ["method", "target", "seed", "N", "q", "precision", "recall", "fs", "re"];

fn metrics_csv(output: &MethodOutput, manifest: &Manifest, scores: &RunScores) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER)?;
    let sizes = &manifest.samples;
    let all_n = if sizes.iter().all(|n| *n == sizes[0]) {
        sizes[0].to_string()
    } else {
        sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
    };
    let mut row = |target: String, n: String, m: &GraphMetrics| {
        w.write_record([
            output.method.name().to_string(),
            target,
            manifest.seed.to_string(),
            n,
            manifest.q.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.fs.to_string(),
            m.re.map(|r| r.to_string()).unwrap_or_default(),
        ])
    };
    for (i, m) in scores.per_client.iter().enumerate() {
        row(format!("client_{}", i + 1), sizes[i].to_string(), m)?;
    }
    row("local_avg".into(), all_n.clone(), &scores.local_avg)?;
    if let Some(m) = &scores.consensus {
        row("consensus".into(), all_n, m)?;
    }
    w.into_inner().map_err(|e| CliError::Io { path: "metrics.csv".into(), source: e.into_error() })
}

/// One grid point of [`cmd_grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub beta: f64,
    pub nu: f64,
    pub lambda: f64,
    pub local: GraphMetrics,
    pub consensus: GraphMetrics,
}

/// Runs ppgl over `grid_beta x grid_nu x grid_lambda` and ranks the points
/// by averaged local FS and by consensus FS. Writes `grid.csv` and `best.csv`.
pub fn cmd_grid(cfg: &Config, data: Option<&Path>, out: &Path) -> Result<Vec<GridRow>> {
    cfg.validate()?;
    let dir = open_dataset(cfg, data, out)?;
    let Loaded { store, manifest, family, summaries } = load(&dir, None)?;
    let cfg = &cfg.with_data(&manifest);
    store.mark_solve_started();
    let points: Vec<(f64, f64, f64)> = cfg
        .grid_beta
        .iter()
        .flat_map(|&b| cfg.grid_nu.iter().flat_map(move |&n| cfg.grid_lambda.iter().map(move |&l| (b, n, l))))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(beta, nu, lambda)| {
            let point = Config { beta, nu, lambda, ..cfg.clone() };
            let output = run_method(Method::Ppgl, summaries.clone(), &point)?;
            let scores = output.score(&family, cfg.edge_threshold)?;
            Ok(GridRow { beta, nu, lambda, local: scores.local_avg, consensus: scores.consensus.expect("ppgl has a consensus") })
        })
        .collect::<Result<Vec<_>>>()?;

    write_file(&out.join("config.toml"), &cfg.to_toml())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["beta", "nu", "lambda", "fs_local", "fs_consensus", "re_local", "re_consensus"])?;
    for r in &rows {
        w.write_record(grid_fields(r))?;
    }
    write_bytes(&out.join("grid.csv"), &finish(w)?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["ranked_by", "beta", "nu", "lambda", "fs_local", "fs_consensus", "re_local", "re_consensus"])?;
    for (name, key) in [("local", (|r: &GridRow| r.local.fs) as fn(&GridRow) -> f64), ("consensus", |r| r.consensus.fs)] {
        let best = argmax(&rows, key).expect("grid is nonempty");
        let mut fields = vec![name.to_string()];
        fields.extend(grid_fields(best));
        w.write_record(fields)?;
    }
    write_bytes(&out.join("best.csv"), &finish(w)?)?;
    Ok(rows)
}

/// First row with the largest key.
pub fn argmax(rows: &[GridRow], key: fn(&GridRow) -> f64) -> Option<&GridRow> {
    rows.iter().fold(None, |best: Option<&GridRow>, r| match best {
        Some(b) if key(b) >= key(r) => Some(b),
        _ => Some(r),
    })
}

fn grid_fields(r: &GridRow) -> Vec<String> {
    let re = |m: &GraphMetrics| m.re.map(|v| v.to_string()).unwrap_or_default();
    vec![
        r.beta.to_string(),
        r.nu.to_string(),
        r.lambda.to_string(),
        r.local.fs.to_string(),
        r.consensus.fs.to_string(),
        re(&r.local),
        re(&r.consensus),
    ]
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| CliError::Io { path: "csv buffer".into(), source: e.into_error() })
}

#[derive(Debug, Deserialize)]
struct MetricsRow {
    method: String,
    target: String,
    precision: f64,
    recall: f64,
    fs: f64,
    re: Option<f64>,
}

/// Mean metrics of one (method, target) pair over several runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub target: String,
    pub runs: usize,
    pub fs_mean: f64,
    pub fs_std: f64,
    pub precision_mean: f64,
    pub recall_mean: f64,
    pub re_mean: Option<f64>,
}

/// Aggregates the `local_avg` and `consensus` rows of the `metrics.csv`
/// files in `runs` and writes the summary to `out`.
pub fn cmd_report(runs: &[PathBuf], out: &Path) -> Result<Vec<ReportRow>> {
    if runs.is_empty() {
        return Err(CliError::Config("report needs at least one results directory".into()));
    }
    let mut groups: BTreeMap<(String, String), Vec<MetricsRow>> = BTreeMap::new();
    for dir in runs {
        let path = dir.join("metrics.csv");
        let text = fs::read(&path).map_err(CliError::io(&path))?;
        for row in csv::Reader::from_reader(text.as_slice()).deserialize::<MetricsRow>() {
            let row = row?;
            if row.target == "local_avg" || row.target == "consensus" {
                groups.entry((row.method.clone(), row.target.clone())).or_default().push(row);
            }
        }
    }
    let report: Vec<ReportRow> = groups
        .into_iter()
        .map(|((method, target), rows)| {
            let n = rows.len() as f64;
            let mean = |f: fn(&MetricsRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
            let fs_mean = mean(|r| r.fs);
            let fs_std = if rows.len() > 1 {
                (rows.iter().map(|r| (r.fs - fs_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let res: Vec<f64> = rows.iter().filter_map(|r| r.re).collect();
            ReportRow {
                method,
                target,
                runs: rows.len(),
                fs_mean,
                fs_std,
                precision_mean: mean(|r| r.precision),
                recall_mean: mean(|r| r.recall),
                re_mean: (!res.is_empty()).then(|| res.iter().sum::<f64>() / res.len() as f64),
            }
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "target", "runs", "fs_mean", "fs_std", "precision_mean", "recall_mean", "re_mean"])?;
    for r in &report {
        w.write_record([
            r.method.clone(),
            r.target.clone(),
            r.runs.to_string(),
            r.fs_mean.to_string(),
            r.fs_std.to_string(),
            r.precision_mean.to_string(),
            r.recall_mean.to_string(),
            r.re_mean.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    write_bytes(out, &finish(w)?)?;
    Ok(report)
}
