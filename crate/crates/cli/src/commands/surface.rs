use std::io::Write;

use bindep::simulation::{comparison_surface, SurfaceMeasure, SurfaceRow};
use clap::Args;

use crate::error::CliError;
use crate::output::{self, num};
use crate::{Format, Global};

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    /// The measure held fixed and its value, e.g. "cole=0.7".
    #[arg(long)]
    pub fix: String,
    /// Number of grid points per margin; margins are i/(grid + 1).
    #[arg(long, default_value_t = 99)]
    pub grid: usize,
}

pub fn parse_fix(s: &str) -> Result<(SurfaceMeasure, f64), CliError> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("--fix expects measure=value, got '{s}'")))?;
    let measure: SurfaceMeasure = name.trim().parse()?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("'{value}' is not a number")))?;
    Ok((measure, value))
}

pub fn compute(a: &SurfaceArgs) -> Result<Vec<SurfaceRow>, CliError> {
    let (measure, value) = parse_fix(&a.fix)?;
    Ok(comparison_surface(measure, value, a.grid)?)
}

pub fn run(g: &Global, a: &SurfaceArgs) -> Result<(), CliError> {
    let rows = compute(a)?;
    let skipped = a.grid * a.grid - rows.len();
    if skipped > 0 {
        eprintln!("{} of {} margin pairs skipped: value not attainable", skipped, a.grid * a.grid);
    }
    let digits = output::digits(g);
    let mut out = output::sink(g)?;
    let cells = |r: &SurfaceRow| {
        [r.p, r.q, r.r, r.yule_q, r.phi, r.cole]
            .iter()
            .map(|&x| num(x, digits))
            .collect::<Vec<_>>()
    };
    const HEADER: [&str; 6] = ["p", "q", "r", "yule_q", "phi", "cole"];
    match g.format {
        Format::Json => output::json(&mut out, &rows)?,
        Format::Csv => {
            let mut w = output::csv_writer(&mut out);
            w.write_record(HEADER)?;
            for r in &rows {
                w.write_record(cells(r))?;
            }
            w.flush()?;
        }
        Format::Text => {
            let body: Vec<Vec<String>> = rows.iter().map(cells).collect();
            output::table(&mut out, &HEADER.map(String::from), &body)?;
        }
    }
    out.flush()?;
    Ok(())
}
