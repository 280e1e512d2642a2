use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::sweep::{read_rows, summarize, SummaryRow};
use crate::{BenchError, Result};

fn alpha_tag(alpha: f64) -> String {
    format!("{alpha}").replace('.', "p")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Pivots a sweep CSV into plot-ready series:
///
/// - `ratio_alpha_<α>.csv`: mean/std of r against p per method, one file per
///   CVaR level (`ratio_alpha_0p25.csv` for α = 0.25);
/// - `gate_counts.csv`: mean CNOT count, two-qubit count and model depth
///   against p per method;
/// - `success_probability.csv`: mean P_GS and feasible mass against p per
///   method and CVaR level;
/// - `report.txt`: the same numbers as aligned text.
///
/// Returns the files written. An empty CSV yields header-only files.
pub fn cmd_report(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_rows(csv_path)?;
    let summary = summarize(&rows);
    std::fs::create_dir_all(out_dir).map_err(|e| BenchError::io(out_dir, e))?;
    let mut written = Vec::new();

    let mut by_alpha: BTreeMap<u64, Vec<&SummaryRow>> = BTreeMap::new();
    for s in &summary {
        by_alpha.entry(s.cvar_alpha.to_bits()).or_default().push(s);
    }
    for (bits, cells) in &by_alpha {
        let alpha = f64::from_bits(*bits);
        let mut text = String::from("method,topology,p,r_mean,r_std,runs\n");
        for s in cells {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{}",
                s.method,
                s.topology,
                s.p,
                fmt(s.r_mean),
                fmt(s.r_std),
                s.runs - s.errors
            );
        }
        let path = out_dir.join(format!("ratio_alpha_{}.csv", alpha_tag(alpha)));
        write_text(&path, &text)?;
        written.push(path);
    }

    // gate counts do not depend on the CVaR level; average over all cells
    let mut counts: BTreeMap<(String, String, usize), Vec<&SummaryRow>> = BTreeMap::new();
    for s in &summary {
        counts
            .entry((s.method.clone(), s.topology.clone(), s.p))
            .or_default()
            .push(s);
    }
    let mut text = String::from("method,topology,p,cnot_count,two_qubit_count,depth_model\n");
    for ((method, topology, p), cells) in &counts {
        let avg = |f: fn(&SummaryRow) -> f64| {
            let vals: Vec<f64> = cells.iter().map(|s| f(s)).filter(|v| !v.is_nan()).collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        };
        let _ = writeln!(
            text,
            "{method},{topology},{p},{},{},{}",
            fmt(avg(|s| s.cnot_count_mean)),
            fmt(avg(|s| s.two_qubit_count_mean)),
            fmt(avg(|s| s.depth_model_mean))
        );
    }
    let path = out_dir.join("gate_counts.csv");
    write_text(&path, &text)?;
    written.push(path);

    let mut text = String::from("method,topology,cvar_alpha,p,p_gs_mean,p_gs_std,feasible_mass_mean\n");
    for s in &summary {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{}",
            s.method,
            s.topology,
            s.cvar_alpha,
            s.p,
            fmt(s.p_gs_mean),
            fmt(s.p_gs_std),
            fmt(s.feasible_mass_mean)
        );
    }
    let path = out_dir.join("success_probability.csv");
    write_text(&path, &text)?;
    written.push(path);

    let mut text = format!("source: {}\nruns: {}\n\n", csv_path.display(), rows.len());
    let _ = writeln!(
        text,
        "{:<8} {:<9} {:>6} {:>2} {:>8} {:>8} {:>8} {:>8} {:>7} {:>7}",
        "method", "topology", "alpha", "p", "r", "r_std", "p_gs", "feas", "cnot", "depth"
    );
    for s in &summary {
        let _ = writeln!(
            text,
            "{:<8} {:<9} {:>6} {:>2} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>7.0} {:>7.0}",
            s.method,
            s.topology,
            s.cvar_alpha,
            s.p,
            s.r_mean,
            s.r_std,
            s.p_gs_mean,
            s.feasible_mass_mean,
            s.cnot_count_mean,
            s.depth_model_mean
        );
    }
    let path = out_dir.join("report.txt");
    write_text(&path, &text)?;
    written.push(path);
    Ok(written)
}
