use std::path::Path;
use std::process::ExitCode;

use csfair::metrics::MetricsReport;
use csfair::trainer::{sweep, SweepCell};
use serde::Serialize;

use super::config::resolve;
use super::{env_seed, parse_list};
use crate::args::SweepArgs;
use crate::error::{CliError, CliResult};
use crate::prepare::{prepare, DataInfo};
use crate::record::{write_atomic, write_json, ResultRecord, SCHEMA_VERSION};

pub const CSV_HEADER: [&str; 15] = [
    "alpha", "beta", "seed", "regularizer", "acc", "auc", "dp", "eo", "eodd", "ppv_gap", "prule", "bfp", "bfn",
    "abcc", "status",
];

#[derive(Serialize)]
struct FailedCell<'a> {
    schema_version: u32,
    alpha: f64,
    beta: f64,
    seed: u64,
    status: &'a str,
    error: &'a str,
}

fn metric_fields(m: &MetricsReport) -> Vec<String> {
    [m.acc, m.auc, m.dp, m.eo, m.eodd, m.ppv_gap, m.prule, m.bfp, m.bfn, m.abcc]
        .iter()
        .map(|v| v.map_or_else(String::new, |v| v.to_string()))
        .collect()
}

fn write_cell(dir: &Path, index: usize, cell: &SweepCell, info: &DataInfo) -> CliResult<()> {
    let path = dir.join(format!("cell_{index:04}.json"));
    match &cell.outcome {
        Ok(run) => write_json(&path, &ResultRecord::from_run(run, info.clone())),
        Err(e) => write_json(
            &path,
            &FailedCell {
                schema_version: SCHEMA_VERSION,
                alpha: cell.alpha,
                beta: cell.beta,
                seed: cell.seed,
                status: "failed",
                error: e,
            },
        ),
    }
}

/// Renders the sweep table; failed cells keep empty metric fields.
pub fn render_csv(cells: &[SweepCell], regularizer: &str) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for cell in cells {
        let mut row = vec![cell.alpha.to_string(), cell.beta.to_string(), cell.seed.to_string(), regularizer.into()];
        match &cell.outcome {
            Ok(run) => {
                row.extend(metric_fields(&run.metrics));
                row.push("ok".into());
            }
            Err(_) => {
                row.extend(std::iter::repeat_n(String::new(), 10));
                row.push("failed".into());
            }
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::runtime(e.to_string()))
}

pub fn run(args: SweepArgs) -> CliResult<ExitCode> {
    let alphas: Vec<f64> = parse_list(&args.alphas, "alphas")?;
    let betas: Vec<f64> = parse_list(&args.betas, "betas")?;
    let seeds: Vec<u64> = match &args.seeds {
        Some(s) => parse_list(s, "seeds")?,
        None => vec![env_seed()?.unwrap_or(0)],
    };
    if args.jobs == 0 {
        return Err(CliError::config("--jobs must be at least 1"));
    }
    let base = resolve(&args.flags, Some(seeds[0]))?;
    for (name, v) in alphas.iter().map(|a| ("alphas", *a)).chain(betas.iter().map(|b| ("betas", *b))) {
        if !(v.is_finite() && v >= 0.0) {
            return Err(CliError::config(format!("--{name}: values must be finite and non-negative, got {v}")));
        }
    }
    let data = prepare(&args.data)?;
    let cells = sweep(&base, &alphas, &betas, &seeds, &data.train, &data.test, args.jobs)?;

    let cell_dir = args.out_dir.join("cells");
    std::fs::create_dir_all(&cell_dir)?;
    for (i, cell) in cells.iter().enumerate() {
        write_cell(&cell_dir, i, cell, &data.info)?;
        if let Err(e) = &cell.outcome {
            eprintln!("cell alpha={} beta={} seed={} failed: {e}", cell.alpha, cell.beta, cell.seed);
        }
    }
    write_atomic(&args.out_dir.join("sweep.csv"), &render_csv(&cells, base.regularizer.name())?)?;
    let ok = cells.iter().filter(|c| c.is_ok()).count();
    println!("{ok}/{} cells succeeded; table written to {}", cells.len(), args.out_dir.join("sweep.csv").display());
    Ok(if ok > 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
