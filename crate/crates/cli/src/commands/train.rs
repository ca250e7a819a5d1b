use std::process::ExitCode;

use csfair::trainer::train;

use super::config::resolve;
use crate::args::TrainArgs;
use crate::error::CliResult;
use crate::prepare::prepare;
use crate::record::{summary_line, write_json, ResultRecord};

pub fn run(args: TrainArgs) -> CliResult<ExitCode> {
    let config = resolve(&args.flags, args.seed)?;
    let data = prepare(&args.data)?;
    let result = train(&config, &data.train, &data.test)?;
    write_json(&args.out, &ResultRecord::from_run(&result, data.info))?;
    if let Some(path) = &args.save_model {
        result.model.save(path)?;
    }
    println!(
        "{} reg={} alpha={} beta={} seed={} epochs={}",
        summary_line(&result.metrics),
        config.regularizer.name(),
        config.alpha,
        config.beta,
        config.seed,
        result.epochs_run()
    );
    Ok(ExitCode::SUCCESS)
}
