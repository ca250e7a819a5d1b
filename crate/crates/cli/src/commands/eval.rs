use std::process::ExitCode;

use csfair::model::MlpParams;
use csfair::trainer::evaluate_model;

use crate::args::EvalArgs;
use crate::error::{CliError, CliResult};
use crate::prepare::prepare;
use crate::record::{summary_line, write_json, EvalRecord, SCHEMA_VERSION};

pub fn run(args: EvalArgs) -> CliResult<ExitCode> {
    if !args.model.is_file() {
        return Err(CliError::config(format!("--model: file `{}` not found", args.model.display())));
    }
    if !(args.threshold > 0.0 && args.threshold < 1.0) {
        return Err(CliError::config(format!("--threshold must lie in (0, 1), got {}", args.threshold)));
    }
    let model = MlpParams::load(&args.model)
        .map_err(|e| CliError::config(format!("--model `{}`: {e}", args.model.display())))?;
    let data = prepare(&args.data)?;
    if model.input_dim() != data.test.n_features() {
        return Err(CliError::config(format!(
            "model expects {} input features but the data has {}",
            model.input_dim(),
            data.test.n_features()
        )));
    }
    let metrics = evaluate_model(&model, &data.test, args.threshold)?;
    let record = EvalRecord {
        schema_version: SCHEMA_VERSION,
        model: args.model.display().to_string(),
        data: data.info,
        metrics,
    };
    match &args.out {
        Some(path) => {
            write_json(path, &record)?;
            println!("{}", summary_line(&record.metrics));
        }
        None => println!("{}", serde_json::to_string_pretty(&record)?),
    }
    Ok(ExitCode::SUCCESS)
}
