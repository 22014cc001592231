use std::fs::File;
use std::io::{self, Write};

use serde::Serialize;

use crate::error::CliError;
use crate::Global;

/// `x` with `digits` significant digits; non-finite values as `inf`, `-inf`, `nan`.
pub fn num(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&mag) {
        return format!("{:.*e}", digits - 1, x);
    }
    let decimals = (digits as i32 - 1 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn optional(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "NA".into(), |v| num(v, digits))
}

pub fn digits(g: &Global) -> usize {
    if g.full_precision {
        17
    } else {
        6
    }
}

/// Standard output or the file given by `--output`.
pub fn sink(g: &Global) -> Result<Box<dyn Write>, CliError> {
    match &g.output {
        Some(path) => Ok(Box::new(io::BufWriter::new(File::create(path).map_err(|e| {
            CliError::usage(format!("cannot create {}: {e}", path.display()))
        })?))),
        None => Ok(Box::new(io::BufWriter::new(io::stdout().lock()))),
    }
}

pub fn json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn csv_writer(out: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::Writer::from_writer(out)
}

/// Writes rows of cells as a left-aligned text table.
pub fn table(out: &mut dyn Write, header: &[String], rows: &[Vec<String>]) -> io::Result<()> {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&width)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    writeln!(out, "{}", line(header))?;
    for row in rows {
        writeln!(out, "{}", line(row))?;
    }
    Ok(())
}

pub fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}
