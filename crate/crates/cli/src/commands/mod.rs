pub mod config;
pub mod eval;
pub mod gen_synth;
pub mod sweep;
pub mod train;
pub mod verify;

use crate::error::{CliError, CliResult};

/// Parses a comma-separated list, naming `flag` on failure.
pub fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> CliResult<Vec<T>> {
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::config(format!("--{flag} must list at least one value")));
    }
    items
        .iter()
        .map(|s| s.parse().map_err(|_| CliError::config(format!("--{flag}: cannot parse `{s}`"))))
        .collect()
}

/// `CSFAIR_SEED` if set.
pub fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var("CSFAIR_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::config(format!("CSFAIR_SEED: cannot parse `{v}` as a seed"))),
        Err(_) => Ok(None),
    }
}
