use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::Serialize;

use csfair::data::{synthetic_table, RawColumn, SyntheticSpec, SYNTHETIC_GENERATOR_VERSION};

use super::env_seed;
use crate::args::GenSynthArgs;
use crate::error::{CliError, CliResult};
use crate::record::{write_atomic, write_json};

#[derive(Serialize)]
struct Meta {
    generator_version: u32,
    n_per_cell: usize,
    bias: f64,
    dim: usize,
    seed: u64,
    rows: usize,
}

/// `data.csv` → `data.schema.json` / `data.meta.json`.
pub fn sidecar(csv: &Path, suffix: &str) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "synthetic".into());
    csv.with_file_name(format!("{stem}.{suffix}.json"))
}

pub fn run(args: GenSynthArgs) -> CliResult<ExitCode> {
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let spec = SyntheticSpec { n_per_cell: args.n_per_cell, bias: args.bias, dim: args.dim, seed };
    let (table, schema) = synthetic_table(&spec)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = schema.feature_columns.iter().map(|c| c.name.clone()).collect();
    header.push(schema.sensitive_columns[0].clone());
    header.push(schema.label_column.clone());
    w.write_record(&header)?;
    for i in 0..table.len() {
        let mut row: Vec<String> = table
            .features
            .iter()
            .map(|c| match c {
                RawColumn::Numeric(v) => v[i].to_string(),
                RawColumn::Categorical(v) => v[i].clone(),
            })
            .collect();
        row.push(table.sensitive[i][0].to_string());
        row.push(table.labels[i].to_string());
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::runtime(e.to_string()))?;
    write_atomic(&args.out, &String::from_utf8(bytes).map_err(|e| CliError::runtime(e.to_string()))?)?;

    let schema_path = sidecar(&args.out, "schema");
    write_json(&schema_path, &schema)?;
    let meta = Meta {
        generator_version: SYNTHETIC_GENERATOR_VERSION,
        n_per_cell: spec.n_per_cell,
        bias: spec.bias,
        dim: spec.dim,
        seed,
        rows: table.len(),
    };
    write_json(&sidecar(&args.out, "meta"), &meta)?;
    println!("wrote {} rows to {} (schema {})", table.len(), args.out.display(), schema_path.display());
    Ok(ExitCode::SUCCESS)
}
