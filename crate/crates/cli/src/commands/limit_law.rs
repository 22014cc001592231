use std::io::Write;

use bindep::inference::{CCase, LawKind};
use bindep::simulation::{histogram, ks_distance, replicate_limit_law};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::{self, num};
use crate::{Format, Global};

#[derive(Debug, Args)]
pub struct LimitLawArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub q: f64,
    /// Value of Cole's C.
    #[arg(long, allow_hyphen_values = true)]
    pub c: f64,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub replications: usize,
    #[arg(long, default_value_t = 60)]
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub center: f64,
    /// Density of the simulated `Ĉ − C`.
    pub empirical: f64,
    /// Density of the limit law of `Ĉ − C`.
    pub law: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLawReport {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub c: f64,
    pub n: usize,
    pub case: CCase,
    pub replications: usize,
    pub dropped: usize,
    pub mean_error: f64,
    pub median_error: f64,
    pub law_sd: f64,
    pub ks: f64,
    pub histogram: Vec<Bin>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

pub fn compute(g: &Global, a: &LimitLawArgs) -> Result<LimitLawReport, CliError> {
    let seed = g.seed.unwrap_or(0);
    let draws = g.mc_draws.unwrap_or(bindep::inference::DEFAULT_MC_DRAWS);
    let rep = replicate_limit_law(a.p, a.q, a.c, a.n, a.replications, seed, draws)?;
    let errors: Vec<f64> = rep.estimates.iter().map(|x| x - a.c).collect();
    if errors.is_empty() {
        return Err(CliError::Numerical("every replication hit an empty cell".into()));
    }
    let sd = rep.law.sd();
    let (lo, hi) = (-5.0 * sd, 5.0 * sd);
    let width = (hi - lo) / a.bins.max(1) as f64;
    let emp = histogram(&errors, a.bins, lo, hi);
    let law_density: Vec<f64> = match &rep.law.kind {
        LawKind::MonteCarlo { draws } => histogram(draws, a.bins, lo, hi)
            .iter()
            .map(|&(_, c)| c as f64 / (draws.len() as f64 * width))
            .collect(),
        _ => emp.iter().map(|&(x, _)| rep.law.pdf(x).unwrap_or(f64::NAN)).collect(),
    };
    let total = errors.len() as f64;
    Ok(LimitLawReport {
        p: rep.p,
        q: rep.q,
        r: rep.r,
        c: a.c,
        n: rep.n,
        case: rep.case,
        replications: a.replications,
        dropped: rep.dropped,
        mean_error: errors.iter().sum::<f64>() / total,
        median_error: median(errors.clone()),
        law_sd: sd,
        ks: ks_distance(&errors, |x| rep.law.cdf(x)),
        histogram: emp
            .iter()
            .zip(law_density)
            .map(|(&(center, count), law)| Bin {
                center,
                empirical: count as f64 / (total * width),
                law,
            })
            .collect(),
    })
}

pub fn run(g: &Global, a: &LimitLawArgs) -> Result<(), CliError> {
    let report = compute(g, a)?;
    let digits = output::digits(g);
    let mut out = output::sink(g)?;
    match g.format {
        Format::Json => output::json(&mut out, &report)?,
        Format::Csv => {
            let mut w = output::csv_writer(&mut out);
            w.write_record(["center", "empirical", "law"])?;
            for b in &report.histogram {
                w.write_record([num(b.center, digits), num(b.empirical, digits), num(b.law, digits)])?;
            }
            w.flush()?;
        }
        Format::Text => {
            writeln!(
                out,
                "p = {}, q = {}, r = {}, C = {}, n = {}, case {:?}",
                num(report.p, digits),
                num(report.q, digits),
                num(report.r, digits),
                num(report.c, digits),
                report.n,
                report.case
            )?;
            writeln!(
                out,
                "{} replications ({} dropped); mean(Ĉ − C) = {}, median(Ĉ − C) = {}, law sd = {}, KS = {}",
                report.replications,
                report.dropped,
                num(report.mean_error, digits),
                num(report.median_error, digits),
                num(report.law_sd, digits),
                num(report.ks, digits)
            )?;
            let rows: Vec<Vec<String>> = report
                .histogram
                .iter()
                .map(|b| vec![num(b.center, digits), num(b.empirical, digits), num(b.law, digits)])
                .collect();
            output::table(&mut out, &["centre".into(), "empirical".into(), "law".into()], &rows)?;
        }
    }
    out.flush()?;
    Ok(())
}
