use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cdqaoa_core::portfolio::PortfolioInstance;
use cdqaoa_core::qaoa::{build_ansatz, optimize};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunKey, SweepSpec};
use crate::{BenchError, Result};

/// One CSV row. Failed runs keep their key columns, leave the metric
/// columns empty and carry an error code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub instance_id: String,
    pub method: String,
    pub topology: String,
    pub p: usize,
    pub cvar_alpha: f64,
    pub seed: u64,
    pub r: Option<f64>,
    pub p_gs: Option<f64>,
    pub feasible_mass: Option<f64>,
    pub best_cvar: Option<f64>,
    pub cnot_count: Option<u64>,
    pub two_qubit_count: Option<u64>,
    pub depth_model: Option<u64>,
    pub evals_used: Option<usize>,
    pub wall_ms: f64,
    /// Set when `r` lies outside [0, 1]; `r` is never clamped.
    pub r_unclamped: bool,
    pub error: String,
}

fn run_one(spec: &SweepSpec, id: &str, inst: &PortfolioInstance, key: &RunKey) -> Row {
    let cfg = spec.ansatz_config(key);
    let clock = Instant::now();
    let outcome = build_ansatz(&cfg, inst).and_then(|prog| optimize(&prog, &cfg));
    let mut row = Row {
        instance_id: id.to_string(),
        method: key.method.name().to_string(),
        topology: key.topology.map_or("none", |t| t.name()).to_string(),
        p: key.p,
        cvar_alpha: key.cvar_alpha,
        seed: cfg.seed,
        r: None,
        p_gs: None,
        feasible_mass: None,
        best_cvar: None,
        cnot_count: None,
        two_qubit_count: None,
        depth_model: None,
        evals_used: None,
        wall_ms: 0.0,
        r_unclamped: false,
        error: String::new(),
    };
    match outcome {
        Ok(res) => {
            row.r = Some(res.metrics.r);
            row.p_gs = Some(res.metrics.p_gs);
            row.feasible_mass = Some(res.metrics.feasible_mass);
            row.best_cvar = Some(res.best_cvar);
            row.cnot_count = Some(res.gate_cost.cnot_count);
            row.two_qubit_count = Some(res.gate_cost.two_qubit_count);
            row.depth_model = Some(res.gate_cost.depth);
            row.evals_used = Some(res.evals);
            row.r_unclamped = res.metrics.r_out_of_range;
        }
        Err(e) => row.error = e.code().to_string(),
    }
    row.wall_ms = (clock.elapsed().as_secs_f64() * 1e3).round();
    row
}

/// Runs every cell on `jobs` worker threads (0 = rayon default). Rows come
/// back in canonical key order whatever the completion order.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<Row>> {
    spec.validate()?;
    let instances = spec.instances()?;
    let keys = spec.run_keys(instances.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        keys.par_iter()
            .map(|key| {
                let (id, inst) = &instances[key.instance];
                run_one(spec, id, inst, key)
            })
            .collect()
    }))
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(ROW_HEADER)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

pub const ROW_HEADER: [&str; 17] = [
    "instance_id",
    "method",
    "topology",
    "p",
    "cvar_alpha",
    "seed",
    "r",
    "p_gs",
    "feasible_mass",
    "best_cvar",
    "cnot_count",
    "two_qubit_count",
    "depth_model",
    "evals_used",
    "wall_ms",
    "r_unclamped",
    "error",
];

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(ROW_HEADER.iter().copied()) {
        return Err(BenchError::Config(format!(
            "{}: unexpected CSV header",
            path.display()
        )));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Mean and sample standard deviation of one column within a cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub topology: String,
    pub p: usize,
    pub cvar_alpha: f64,
    pub runs: usize,
    pub errors: usize,
    pub r_mean: f64,
    pub r_std: f64,
    pub p_gs_mean: f64,
    pub p_gs_std: f64,
    pub feasible_mass_mean: f64,
    pub feasible_mass_std: f64,
    pub best_cvar_mean: f64,
    pub best_cvar_std: f64,
    pub cnot_count_mean: f64,
    pub two_qubit_count_mean: f64,
    pub depth_model_mean: f64,
    pub evals_used_mean: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-cell statistics over instances, cells ordered by
/// `(method, topology, p, cvar_alpha)`.
pub fn summarize(rows: &[Row]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(String, String, usize, u64), Vec<&Row>> = BTreeMap::new();
    for row in rows {
        cells
            .entry((row.method.clone(), row.topology.clone(), row.p, row.cvar_alpha.to_bits()))
            .or_default()
            .push(row);
    }
    cells
        .into_iter()
        .map(|((method, topology, p, alpha), rs)| {
            let ok: Vec<&Row> = rs.iter().copied().filter(|r| r.error.is_empty()).collect();
            let col = |f: &dyn Fn(&Row) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
            let (r_mean, r_std) = mean_std(&col(&|r| r.r));
            let (p_gs_mean, p_gs_std) = mean_std(&col(&|r| r.p_gs));
            let (feasible_mass_mean, feasible_mass_std) = mean_std(&col(&|r| r.feasible_mass));
            let (best_cvar_mean, best_cvar_std) = mean_std(&col(&|r| r.best_cvar));
            SummaryRow {
                method,
                topology,
                p,
                cvar_alpha: f64::from_bits(alpha),
                runs: rs.len(),
                errors: rs.len() - ok.len(),
                r_mean,
                r_std,
                p_gs_mean,
                p_gs_std,
                feasible_mass_mean,
                feasible_mass_std,
                best_cvar_mean,
                best_cvar_std,
                cnot_count_mean: mean_std(&col(&|r| r.cnot_count.map(|v| v as f64))).0,
                two_qubit_count_mean: mean_std(&col(&|r| r.two_qubit_count.map(|v| v as f64))).0,
                depth_model_mean: mean_std(&col(&|r| r.depth_model.map(|v| v as f64))).0,
                evals_used_mean: mean_std(&col(&|r| r.evals_used.map(|v| v as f64))).0,
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in summary {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

/// `results.csv` → `results_summary.csv`.
pub fn summary_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    csv_path.with_file_name(format!("{stem}_summary.csv"))
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutput {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub rows: usize,
    pub failed: usize,
}

pub fn cmd_sweep(spec: &SweepSpec, jobs: usize, out: &Path) -> Result<SweepOutput> {
    let rows = run_sweep(spec, jobs)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    write_rows(out, &rows)?;
    let summary = summary_path(out);
    write_summary(&summary, &summarize(&rows))?;
    Ok(SweepOutput {
        csv: out.to_path_buf(),
        summary,
        rows: rows.len(),
        failed: rows.iter().filter(|r| !r.error.is_empty()).count(),
    })
}

/// CSV text with the `wall_ms` column removed, for determinism checks.
pub fn strip_wall_clock(csv_text: &str) -> Result<String> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(csv_text.as_bytes());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut drop: Option<usize> = None;
    for rec in r.records() {
        let rec = rec?;
        let idx = *drop.get_or_insert_with(|| rec.iter().position(|h| h == "wall_ms").unwrap_or(usize::MAX));
        w.write_record(rec.iter().enumerate().filter(|(i, _)| *i != idx).map(|(_, f)| f))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| BenchError::Config(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
