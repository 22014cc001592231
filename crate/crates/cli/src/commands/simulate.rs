use std::io::{self, Write};
use std::path::PathBuf;

use bindep::inference::{CombinationStrategy, Method};
use bindep::simulation::{run_coverage_with_progress, CoverageCell, CoverageConfig, CoverageMeasure, OmegaChoice};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::{self, num, optional};
use crate::{Format, Global, ModeArg};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML file with the design; missing keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub sample_sizes: Option<Vec<usize>>,
    /// Cole's C under all four combination strategies, side by side.
    #[arg(long)]
    pub strategy_compare: bool,
    /// Print the design and exit without simulating.
    #[arg(long)]
    pub dry_run: bool,
    /// Report progress on standard error.
    #[arg(long)]
    pub progress: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub measure: CoverageMeasure,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<CombinationStrategy>,
    pub n: usize,
    pub cells: usize,
    pub missing: usize,
    #[serde(with = "bindep::extended::option")]
    pub mean_coverage: Option<f64>,
    #[serde(with = "bindep::extended::option")]
    pub min_coverage: Option<f64>,
    #[serde(with = "bindep::extended::option")]
    pub mean_lower_violation: Option<f64>,
    #[serde(with = "bindep::extended::option")]
    pub mean_upper_violation: Option<f64>,
    #[serde(with = "bindep::extended::option")]
    pub mean_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub config: CoverageConfig,
    pub design_cells: usize,
    pub summary: Vec<SummaryRow>,
}

pub fn load_config(g: &Global, a: &SimulateArgs) -> Result<CoverageConfig, CliError> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            toml::from_str::<CoverageConfig>(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        }
        None => CoverageConfig::default(),
    };
    if let Some(r) = a.replications {
        cfg.replications = r;
    }
    if let Some(n) = &a.sample_sizes {
        cfg.sample_sizes = n.clone();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(l) = g.level {
        cfg.level = l;
    }
    if let Some(m) = g.method {
        cfg.methods = vec![m.into()];
    }
    if let Some(s) = g.strategy {
        cfg.strategies = vec![s.into()];
    }
    if let Some(d) = g.mc_draws {
        cfg.mc_draws = d;
    }
    if let Some(s) = g.grid_step {
        cfg.grid_step = s;
    }
    match (g.mode, g.hac_bandwidth) {
        (Some(ModeArg::Timeseries), bw) => cfg.omega = OmegaChoice::Hac { bandwidth: bw },
        (_, Some(_)) => return Err(CliError::usage("--hac-bandwidth needs --mode timeseries")),
        _ => {}
    }
    if a.strategy_compare {
        if g.strategy.is_some() {
            return Err(CliError::usage("--strategy-compare runs every strategy; drop --strategy"));
        }
        cfg.measures = vec![CoverageMeasure::Cole];
        cfg.strategies = CombinationStrategy::ALL.to_vec();
    }
    cfg.validate().map_err(|e| {
        let origin = a.config.as_ref().map_or("configuration".into(), |p| p.display().to_string());
        CliError::usage(format!("{origin}: {e}"))
    })?;
    Ok(cfg)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summarize(cells: &[CoverageCell]) -> Vec<SummaryRow> {
    let mut keys: Vec<(CoverageMeasure, Method, Option<CombinationStrategy>, usize)> = Vec::new();
    for c in cells {
        let k = (c.measure, c.method, c.strategy, c.n);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(measure, method, strategy, n)| {
            let group: Vec<&CoverageCell> = cells
                .iter()
                .filter(|c| (c.measure, c.method, c.strategy, c.n) == (measure, method, strategy, n))
                .collect();
            let ok: Vec<&&CoverageCell> = group.iter().filter(|c| !c.missing).collect();
            let pick = |f: fn(&CoverageCell) -> Option<f64>| ok.iter().filter_map(|c| f(c)).collect::<Vec<f64>>();
            let cov = pick(|c| c.coverage);
            SummaryRow {
                measure,
                method,
                strategy,
                n,
                cells: group.len(),
                missing: group.len() - ok.len(),
                mean_coverage: mean(&cov),
                min_coverage: cov.iter().copied().reduce(f64::min),
                mean_lower_violation: mean(&pick(|c| c.lower_violation)),
                mean_upper_violation: mean(&pick(|c| c.upper_violation)),
                mean_length: mean(&pick(|c| c.mean_length)),
            }
        })
        .collect()
}

fn label(measure: CoverageMeasure, strategy: Option<CombinationStrategy>) -> String {
    match strategy {
        Some(s) => format!("{}[{}]", measure.name(), s.name()),
        None => measure.name().to_string(),
    }
}

fn write_cells(path: &PathBuf, format: Format, cells: &[CoverageCell], compare: bool, digits: usize) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::usage(format!("cannot create {}: {e}", path.display())))?;
    let mut out: Box<dyn Write> = Box::new(io::BufWriter::new(file));
    if format == Format::Json {
        output::json(&mut out, &cells)?;
        out.flush()?;
        return Ok(());
    }
    let mut w = output::csv_writer(&mut out);
    if compare {
        let k = CombinationStrategy::ALL.len();
        let mut header = vec!["p".to_string(), "q".into(), "r".into(), "n".into(), "method".into(), "true_value".into()];
        for s in CombinationStrategy::ALL {
            header.push(format!("coverage_{}", s.name()));
            header.push(format!("length_{}", s.name()));
        }
        w.write_record(&header)?;
        for chunk in cells.chunks(k) {
            let c = &chunk[0];
            let mut row = vec![num(c.p, digits), num(c.q, digits), num(c.r, digits), c.n.to_string(), c.method.to_string(), num(c.true_value, digits)];
            for s in chunk {
                row.push(optional(s.coverage, digits));
                row.push(optional(s.mean_length, digits));
            }
            w.write_record(&row)?;
        }
    } else {
        w.write_record([
            "p", "q", "r", "n", "measure", "method", "strategy", "true_value", "coverage", "lower_violation",
            "upper_violation", "mean_length", "retained_fraction", "missing",
        ])?;
        for c in cells {
            w.write_record([
                num(c.p, digits),
                num(c.q, digits),
                num(c.r, digits),
                c.n.to_string(),
                c.measure.name().into(),
                c.method.to_string(),
                c.strategy.map_or(String::new(), |s| s.name().into()),
                num(c.true_value, digits),
                optional(c.coverage, digits),
                optional(c.lower_violation, digits),
                optional(c.upper_violation, digits),
                optional(c.mean_length, digits),
                num(c.retained_fraction, digits),
                c.missing.to_string(),
            ])?;
        }
    }
    w.flush()?;
    drop(w);
    out.flush()?;
    Ok(())
}

pub fn run(g: &Global, a: &SimulateArgs) -> Result<(), CliError> {
    let cfg = load_config(g, a)?;
    let design = cfg.cells()?.len();
    let digits = output::digits(g);
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    if a.dry_run {
        let per_cell = cfg.measures.iter().map(|m| if *m == CoverageMeasure::Cole { cfg.strategies.len() } else { 1 }).sum::<usize>()
            * cfg.methods.len();
        match g.format {
            Format::Json => output::json(&mut out, &SimulateReport { config: cfg.clone(), design_cells: design, summary: Vec::new() })?,
            _ => writeln!(
                out,
                "{} marginal pairs × {} r-values × {} sample sizes = {design} design cells; {} intervals per replication; {} replications",
                cfg.marginals.len(),
                if cfg.r_values.is_empty() { cfg.r_count } else { cfg.r_values.len() },
                cfg.sample_sizes.len(),
                per_cell,
                cfg.replications
            )?,
        }
        out.flush()?;
        return Ok(());
    }
    let progress = a.progress;
    let cells = run_coverage_with_progress(&cfg, |done, total| {
        if progress {
            eprint!("\rcell {done}/{total}");
            if done == total {
                eprintln!();
            }
        }
    })?;
    if let Some(path) = &g.output {
        write_cells(path, g.format, &cells, a.strategy_compare, digits)?;
    }
    let summary = summarize(&cells);
    match g.format {
        Format::Json => output::json(&mut out, &SimulateReport { config: cfg, design_cells: design, summary })?,
        Format::Csv => {
            let mut w = output::csv_writer(&mut out);
            w.write_record(["measure", "method", "strategy", "n", "cells", "missing", "mean_coverage", "min_coverage", "mean_lower_violation", "mean_upper_violation", "mean_length"])?;
            for s in &summary {
                w.write_record([
                    s.measure.name().into(),
                    s.method.to_string(),
                    s.strategy.map_or(String::new(), |x| x.name().into()),
                    s.n.to_string(),
                    s.cells.to_string(),
                    s.missing.to_string(),
                    optional(s.mean_coverage, digits),
                    optional(s.min_coverage, digits),
                    optional(s.mean_lower_violation, digits),
                    optional(s.mean_upper_violation, digits),
                    optional(s.mean_length, digits),
                ])?;
            }
            w.flush()?;
        }
        Format::Text if a.strategy_compare => {
            let mut header = vec!["n".to_string(), "method".into()];
            for s in CombinationStrategy::ALL {
                header.push(format!("{} cov", s.name()));
                header.push(format!("{} len", s.name()));
            }
            let mut rows = Vec::new();
            for chunk in summary.chunks(CombinationStrategy::ALL.len()) {
                let mut row = vec![chunk[0].n.to_string(), chunk[0].method.to_string()];
                for s in chunk {
                    row.push(optional(s.mean_coverage, 3));
                    row.push(optional(s.mean_length, 3));
                }
                rows.push(row);
            }
            output::table(&mut out, &header, &rows)?;
        }
        Format::Text => {
            let header: Vec<String> = ["interval", "method", "n", "cells", "missing", "mean cov", "min cov", "below", "above", "length"]
                .map(String::from)
                .to_vec();
            let rows: Vec<Vec<String>> = summary
                .iter()
                .map(|s| {
                    vec![
                        label(s.measure, s.strategy),
                        s.method.to_string(),
                        s.n.to_string(),
                        s.cells.to_string(),
                        s.missing.to_string(),
                        optional(s.mean_coverage, 3),
                        optional(s.min_coverage, 3),
                        optional(s.mean_lower_violation, 3),
                        optional(s.mean_upper_violation, 3),
                        optional(s.mean_length, 3),
                    ]
                })
                .collect();
            output::table(&mut out, &header, &rows)?;
        }
    }
    out.flush()?;
    Ok(())
}
