use std::io::Write;
use std::path::PathBuf;

use bindep::estimation::{
    default_bandwidth, omega_hac, omega_iid, BoundaryFlags, LongRunCovariance, MomentEstimates, OmegaSource,
    PairedBinarySample, SampleMode,
};
use bindep::inference::{self, IntervalEstimate, WaldMeasure};
use bindep::joint::ContingencyTable;
use bindep::measures::{self, MeasureKind, MeasureValue};
use clap::Args;
use serde::{Deserialize, Serialize};

use super::{check_mode_flags, inference_options, na_tokens, read_dataset, DEFAULT_NA};
use crate::error::CliError;
use crate::output::{self, num};
use crate::{Format, Global};

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[arg(long, requires_all = ["n10", "n01", "n00"])]
    pub n11: Option<u64>,
    #[arg(long)]
    pub n10: Option<u64>,
    #[arg(long)]
    pub n01: Option<u64>,
    #[arg(long)]
    pub n00: Option<u64>,
    /// A 2×2 block of counts, e.g. "197 2; 139 19".
    #[arg(long, conflicts_with_all = ["n11", "data"])]
    pub table: Option<String>,
    /// CSV file with a header row and two binary columns (or pick them with --columns).
    #[arg(long, conflicts_with = "n11")]
    pub data: Option<PathBuf>,
    /// The two columns of --data to use, e.g. "ALC,MAR".
    #[arg(long, requires = "data", value_delimiter = ',', num_args = 2)]
    pub columns: Option<Vec<String>>,
    /// Missing-value tokens of --data, comma separated.
    #[arg(long, default_value = DEFAULT_NA)]
    pub na: String,
    /// Measures to report; all by default.
    #[arg(long, value_delimiter = ',')]
    pub measures: Option<Vec<String>>,
    /// Skip the confidence intervals.
    #[arg(long)]
    pub no_ci: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub table: ContingencyTable,
    pub n: u64,
    pub mode: SampleMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_source: Option<OmegaSource>,
    pub measures: Vec<MeasureValue>,
    pub intervals: Vec<IntervalEstimate>,
    pub flags: BoundaryFlags,
    pub warnings: Vec<String>,
}

enum Input {
    Table(ContingencyTable),
    Sample(PairedBinarySample),
}

fn input(a: &MeasureArgs, mode: SampleMode) -> Result<(Input, Vec<String>), CliError> {
    if let (Some(n11), Some(n10), Some(n01), Some(n00)) = (a.n11, a.n10, a.n01, a.n00) {
        return Ok((Input::Table(ContingencyTable::new(n11, n10, n01, n00)?), Vec::new()));
    }
    if let Some(t) = &a.table {
        let t: ContingencyTable = t.replace(';', "\n").parse()?;
        return Ok((Input::Table(t), Vec::new()));
    }
    let Some(path) = &a.data else {
        return Err(CliError::usage("give the counts (--n11 … --n00), --table or --data"));
    };
    let ds = read_dataset(path, &na_tokens(&a.na))?;
    let (i, j) = match &a.columns {
        Some(cols) => {
            let find = |name: &String| {
                ds.names()
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| CliError::usage(format!("no column '{name}' in {}", path.display())))
            };
            (find(&cols[0])?, find(&cols[1])?)
        }
        None if ds.n_columns() == 2 => (0, 1),
        None => {
            return Err(CliError::usage(format!(
                "{} has {} columns; choose two with --columns",
                path.display(),
                ds.n_columns()
            )))
        }
    };
    let pairs = ds.pair(i, j);
    let mut warnings = Vec::new();
    let dropped = ds.n_rows() - pairs.len();
    if dropped > 0 {
        warnings.push(format!("{dropped} rows with a missing value dropped"));
    }
    if pairs.is_empty() {
        return Err(CliError::usage("no rows with both values present"));
    }
    Ok((Input::Sample(PairedBinarySample::new(pairs, mode)?), warnings))
}

pub fn compute(g: &Global, a: &MeasureArgs) -> Result<MeasureReport, CliError> {
    check_mode_flags(g)?;
    let mode: SampleMode = g.mode.map_or(SampleMode::Iid, Into::into);
    let (input, mut warnings) = input(a, mode)?;
    let (m, sample) = match &input {
        Input::Table(t) => (MomentEstimates::from_table(t)?, None),
        Input::Sample(s) => (MomentEstimates::from_sample(s), Some(s)),
    };
    if mode == SampleMode::TimeSeries && sample.is_none() {
        return Err(CliError::usage(
            "--mode timeseries needs ordered observations (--data), not a table",
        ));
    }
    let kinds: Vec<MeasureKind> = match &a.measures {
        Some(list) => list.iter().map(|s| s.parse()).collect::<Result<_, _>>()?,
        None => MeasureKind::all(),
    };
    let d = m.distribution().map_err(|e| {
        CliError::Numerical(format!("measures are undefined for table {{{}}}: {e}", m.table))
    })?;
    let mut values = Vec::new();
    for kind in kinds {
        match measures::evaluate(&d, kind) {
            Ok(v) => values.push(v),
            Err(e) => warnings.push(format!("{kind}: {e}")),
        }
    }

    let mut intervals = Vec::new();
    let mut omega_source = None;
    if !a.no_ci {
        let opts = inference_options(g)?;
        if m.flags.any() {
            warnings.push(format!(
                "table {{{}}} has an empty cell; confidence intervals suppressed",
                m.table.to_string().replace('\n', "; ")
            ));
        } else {
            let omega: LongRunCovariance = match sample {
                Some(s) if mode == SampleMode::TimeSeries => {
                    let bw = g.hac_bandwidth.unwrap_or_else(|| default_bandwidth(s.len()));
                    omega_hac(s, bw)?
                }
                _ => omega_iid(&m)?,
            };
            omega_source = Some(omega.source);
            intervals.push(inference::ci(WaldMeasure::Phi, &m, &omega, opts.level, opts.method)?);
            intervals.push(inference::ci_c(&m, &omega, &opts)?);
            intervals.push(inference::ci(WaldMeasure::YuleQ, &m, &omega, opts.level, opts.method)?);
            for iv in &intervals {
                warnings.extend(iv.diagnostics.warnings.iter().map(|w| format!("{}: {w}", iv.measure)));
            }
        }
    }
    Ok(MeasureReport {
        table: m.table,
        n: m.n,
        mode,
        omega_source,
        measures: values,
        intervals,
        flags: m.flags,
        warnings,
    })
}

pub fn run(g: &Global, a: &MeasureArgs) -> Result<(), CliError> {
    let report = compute(g, a)?;
    output::warn(&report.warnings);
    let digits = output::digits(g);
    let mut out = output::sink(g)?;
    let interval_of = |kind: MeasureKind| {
        let name = match kind {
            MeasureKind::Phi => "phi",
            MeasureKind::Cole => "cole",
            MeasureKind::YuleQ => "yule_q",
            _ => return None,
        };
        report.intervals.iter().find(|iv| iv.measure == name)
    };
    match g.format {
        Format::Json => output::json(&mut out, &report)?,
        Format::Csv => {
            let mut w = output::csv_writer(&mut out);
            w.write_record(["measure", "estimate", "lower", "upper", "level", "method"])?;
            for v in &report.measures {
                let iv = interval_of(v.kind);
                w.write_record([
                    v.kind.name(),
                    num(v.value, digits),
                    iv.map_or(String::new(), |iv| num(iv.lower, digits)),
                    iv.map_or(String::new(), |iv| num(iv.upper, digits)),
                    iv.map_or(String::new(), |iv| num(iv.level, digits)),
                    iv.map_or(String::new(), |iv| iv.method.to_string()),
                ])?;
            }
            w.flush()?;
        }
        Format::Text => {
            let t = &report.table;
            writeln!(out, "table  n11={} n10={} n01={} n00={}  (n = {})", t.n11, t.n10, t.n01, t.n00, report.n)?;
            let ci_head = report
                .intervals
                .first()
                .map_or(String::new(), |iv| format!("{}% CI ({})", num(iv.level * 100.0, 3), iv.method));
            let rows: Vec<Vec<String>> = report
                .measures
                .iter()
                .map(|v| {
                    vec![
                        v.kind.name(),
                        num(v.value, digits),
                        interval_of(v.kind).map_or(String::new(), |iv| {
                            let flag = if iv.non_interval_flag { " *" } else { "" };
                            format!("[{}, {}]{flag}", num(iv.lower, digits), num(iv.upper, digits))
                        }),
                    ]
                })
                .collect();
            output::table(&mut out, &["measure".into(), "estimate".into(), ci_head], &rows)?;
            if report.intervals.iter().any(|iv| iv.non_interval_flag) {
                writeln!(out, "* the acceptance region has gaps; the hull is shown")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
