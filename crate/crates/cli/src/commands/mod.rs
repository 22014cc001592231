pub mod limit_law;
pub mod matrix;
pub mod measure;
pub mod simulate;
pub mod surface;

use std::path::Path;

use bindep::dataset::Dataset;
use bindep::inference::{self, InferenceOptions};

use crate::error::CliError;
use crate::Global;

pub const DEFAULT_NA: &str = "NA,,.";

/// Splits the `--na` list; an empty item stands for the empty field.
pub fn na_tokens(spec: &str) -> Vec<String> {
    spec.split(',').map(str::to_string).collect()
}

/// Reads a comma-separated file with a header row.
pub fn read_dataset(path: &Path, na: &[String]) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let names: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(CliError::usage(format!("{}: missing header row", path.display())));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(record.iter().map(|f| f.trim().to_string()).collect::<Vec<_>>());
    }
    Dataset::from_rows(names, rows, na).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn inference_options(g: &Global) -> Result<InferenceOptions, CliError> {
    let d = InferenceOptions::default();
    let opts = InferenceOptions {
        level: g.level.unwrap_or(d.level),
        method: g.method.map_or(d.method, Into::into),
        strategy: g.strategy.map_or(d.strategy, Into::into),
        mc_draws: g.mc_draws.unwrap_or(inference::DEFAULT_MC_DRAWS),
        seed: g.seed.unwrap_or(d.seed),
        grid_step: g.grid_step.unwrap_or(inference::DEFAULT_GRID_STEP),
    };
    opts.validate()?;
    Ok(opts)
}

pub fn check_mode_flags(g: &Global) -> Result<(), CliError> {
    if g.hac_bandwidth.is_some() && g.mode != Some(crate::ModeArg::Timeseries) {
        return Err(CliError::usage("--hac-bandwidth needs --mode timeseries"));
    }
    Ok(())
}
