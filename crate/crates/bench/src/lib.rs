//! Benchmark harness: instance generation, exact feasible-subspace oracles,
//! method sweeps written as CSV, and figure-style series pivoted from them.

use std::path::{Path, PathBuf};

pub mod config;
pub mod report;
pub mod sweep;

pub use config::SweepSpec;
pub use report::cmd_report;
pub use sweep::{cmd_sweep, run_sweep, Row, SummaryRow};

use cdqaoa_core::portfolio::{
    cost_of_bitstring, default_penalty, exact_extrema, penalty_separation, to_ising, PortfolioInstance,
};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] cdqaoa_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
}

impl BenchError {
    pub fn code(&self) -> &'static str {
        match self {
            BenchError::Core(e) => e.code(),
            BenchError::Csv(_) => "csv",
            BenchError::Json(_) => "json",
            BenchError::Io { .. } => "io",
            BenchError::Config(_) => "config",
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// Writes one JSON file per instance into `out_dir`, named by instance id.
pub fn cmd_generate(spec: &SweepSpec, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| BenchError::io(out_dir, e))?;
    let mut written = Vec::new();
    for (id, inst) in spec.instances()? {
        let path = out_dir.join(format!("{id}.json"));
        inst.save(&path)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub instance_id: String,
    pub n_assets: usize,
    pub budget: usize,
    pub scanned: u64,
    pub e_min: f64,
    pub e_max: f64,
    pub argmin: String,
    pub argmax: String,
    /// Classical cost of `argmin`, recomputed from μ and Σ.
    pub argmin_cost: f64,
    pub degenerate: bool,
    pub penalty_alpha: f64,
    /// Lowest infeasible minus lowest feasible penalized energy.
    pub penalty_ground_gap: f64,
    /// Lowest infeasible minus highest feasible penalized energy.
    pub penalty_strict_gap: f64,
}

pub fn oracle_report(instance_id: &str, inst: &PortfolioInstance) -> Result<OracleReport> {
    inst.validate()?;
    let ising = to_ising(inst)?;
    let ex = exact_extrema(&ising, inst.n_assets, inst.budget)?;
    let alpha = default_penalty(inst);
    let sep = penalty_separation(inst, alpha)?;
    // self-consistency of the Ising form with the classical cost
    let from_ising = cost_of_bitstring(&ising, &ex.argmin)?;
    let argmin_cost = inst.cost(ex.argmin.bits);
    debug_assert!((from_ising - argmin_cost).abs() < 1e-9);
    Ok(OracleReport {
        instance_id: instance_id.to_string(),
        n_assets: inst.n_assets,
        budget: inst.budget,
        scanned: ex.scanned,
        e_min: ex.e_min,
        e_max: ex.e_max,
        argmin: ex.argmin.to_string(),
        argmax: ex.argmax.to_string(),
        argmin_cost,
        degenerate: ex.is_degenerate(),
        penalty_alpha: alpha,
        penalty_ground_gap: sep.ground_gap(),
        penalty_strict_gap: sep.strict_gap(),
    })
}

/// Reads an instance file; errors name the path.
pub fn load_instance(path: &Path) -> Result<PortfolioInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    Ok(PortfolioInstance::from_json(&text)?)
}

pub fn cmd_oracle(path: &Path) -> Result<OracleReport> {
    let inst = load_instance(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    oracle_report(&id, &inst)
}
