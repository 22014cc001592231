use std::io::Write;
use std::path::PathBuf;

use bindep::dataset::{measure_matrix, MatrixOptions, MatrixReport};
use bindep::estimation::SampleMode;
use bindep::measures::MeasureKind;
use clap::Args;

use super::{check_mode_flags, inference_options, na_tokens, read_dataset, DEFAULT_NA};
use crate::error::CliError;
use crate::output::{self, num, optional};
use crate::{Format, Global};

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// CSV file with a header row and one binary column per variable.
    #[arg(long)]
    pub data: PathBuf,
    /// Missing-value tokens, comma separated.
    #[arg(long, default_value = DEFAULT_NA)]
    pub na: String,
    /// Every measure instead of C, Q and φ.
    #[arg(long, conflicts_with = "measures")]
    pub all: bool,
    /// Measures to compute, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub measures: Option<Vec<String>>,
    /// Skip the confidence intervals.
    #[arg(long)]
    pub no_ci: bool,
}

pub fn compute(g: &Global, a: &MatrixArgs) -> Result<MatrixReport, CliError> {
    check_mode_flags(g)?;
    let ds = read_dataset(&a.data, &na_tokens(&a.na))?;
    if ds.n_columns() < 2 {
        return Err(CliError::usage(format!(
            "{} needs at least two columns",
            a.data.display()
        )));
    }
    let measures = if a.all {
        MeasureKind::all()
    } else if let Some(list) = &a.measures {
        list.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
    } else {
        MatrixOptions::default().measures
    };
    let inf = inference_options(g)?;
    let opts = MatrixOptions {
        measures,
        intervals: !a.no_ci,
        level: inf.level,
        method: inf.method,
        strategy: inf.strategy,
        mode: g.mode.map_or(SampleMode::Iid, Into::into),
        hac_bandwidth: g.hac_bandwidth,
        mc_draws: inf.mc_draws,
        grid_step: inf.grid_step,
        seed: inf.seed,
    };
    Ok(measure_matrix(&ds, &opts)?)
}

pub fn run(g: &Global, a: &MatrixArgs) -> Result<(), CliError> {
    let report = compute(g, a)?;
    output::warn(&report.warnings);
    let digits = output::digits(g);
    let mut out = output::sink(g)?;
    let k = report.names.len();
    match g.format {
        Format::Json => output::json(&mut out, &report)?,
        Format::Csv => {
            let mut w = output::csv_writer(&mut out);
            w.write_record(["measure", "row", "column", "value", "lower", "upper", "n"])?;
            for mm in &report.matrices {
                for i in 0..k {
                    for j in 0..k {
                        let bound = |b: &Option<Vec<Vec<bindep::dataset::Entry>>>| {
                            b.as_ref().map_or(String::new(), |m| optional(m[i][j].0, digits))
                        };
                        w.write_record([
                            mm.measure.name(),
                            report.names[i].clone(),
                            report.names[j].clone(),
                            optional(mm.values[i][j].0, digits),
                            bound(&mm.lower),
                            bound(&mm.upper),
                            report.effective_n[i][j].to_string(),
                        ])?;
                    }
                }
            }
            w.flush()?;
        }
        Format::Text => {
            let mut header = vec![String::new()];
            header.extend(report.names.iter().cloned());
            let grid = |cell: &dyn Fn(usize, usize) -> String| -> Vec<Vec<String>> {
                (0..k)
                    .map(|i| {
                        let mut row = vec![report.names[i].clone()];
                        row.extend((0..k).map(|j| cell(i, j)));
                        row
                    })
                    .collect()
            };
            for mm in &report.matrices {
                writeln!(out, "{}", mm.measure.name())?;
                output::table(&mut out, &header, &grid(&|i, j| optional(mm.values[i][j].0, digits.min(4))))?;
                if let (Some(lo), Some(hi)) = (&mm.lower, &mm.upper) {
                    writeln!(out, "{} {}% CI ({})", mm.measure.name(), num(report.level * 100.0, 3), report.method)?;
                    let cell = |i: usize, j: usize| match (lo[i][j].0, hi[i][j].0) {
                        (Some(l), Some(u)) => format!("[{}, {}]", num(l, 3), num(u, 3)),
                        _ => "NA".into(),
                    };
                    output::table(&mut out, &header, &grid(&cell))?;
                }
                writeln!(out)?;
            }
            writeln!(out, "effective n")?;
            output::table(&mut out, &header, &grid(&|i, j| report.effective_n[i][j].to_string()))?;
        }
    }
    out.flush()?;
    Ok(())
}
