//! Many binary columns with missing values, and pairwise measure matrices
//! computed under pairwise deletion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{default_bandwidth, omega_hac, omega_iid, MomentEstimates, PairedBinarySample, SampleMode};
use crate::inference::{self, CombinationStrategy, InferenceOptions, Method, WaldMeasure};
use crate::measures::{self, MeasureKind};
use crate::seed;

/// Named binary columns over a shared row index; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<Option<bool>>>,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<Option<bool>>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Parse(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::Parse(format!("duplicate column name '{name}'")));
            }
        }
        if let Some(first) = columns.first() {
            if let Some((i, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != first.len()) {
                return Err(Error::Parse(format!(
                    "column '{}' has {} rows, expected {}",
                    names[i],
                    c.len(),
                    first.len()
                )));
            }
        }
        Ok(Self { names, columns })
    }

    /// Builds a dataset from rows of tokens. `0` and `1` are values, any token
    /// in `na_tokens` is missing, anything else is an error.
    pub fn from_rows<S: AsRef<str>>(
        names: Vec<String>,
        rows: impl IntoIterator<Item = Vec<S>>,
        na_tokens: &[String],
    ) -> Result<Self> {
        let mut columns = vec![Vec::new(); names.len()];
        for (line, row) in rows.into_iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::Parse(format!(
                    "data row {}: {} fields, expected {}",
                    line + 1,
                    row.len(),
                    names.len()
                )));
            }
            for (j, token) in row.iter().enumerate() {
                let token = token.as_ref();
                let v = match token {
                    "0" => Some(false),
                    "1" => Some(true),
                    t if na_tokens.iter().any(|na| na == t) => None,
                    t => {
                        return Err(Error::Parse(format!(
                            "data row {}, column '{}': '{t}' is not 0, 1 or a missing-value token",
                            line + 1,
                            names[j]
                        )))
                    }
                };
                columns[j].push(v);
            }
        }
        Self::new(names, columns)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[Option<bool>] {
        &self.columns[j]
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Rows where both columns are observed, in row order.
    pub fn pair(&self, i: usize, j: usize) -> Vec<(u8, u8)> {
        self.columns[i]
            .iter()
            .zip(&self.columns[j])
            .filter_map(|(x, y)| Some((x.as_ref().copied()? as u8, y.as_ref().copied()? as u8)))
            .collect()
    }

    pub fn effective_n(&self, i: usize, j: usize) -> usize {
        self.columns[i]
            .iter()
            .zip(&self.columns[j])
            .filter(|(x, y)| x.is_some() && y.is_some())
            .count()
    }
}

/// Options of [`measure_matrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixOptions {
    pub measures: Vec<MeasureKind>,
    /// Confidence intervals are computed for C, Q and φ when set.
    pub intervals: bool,
    pub level: f64,
    pub method: Method,
    pub strategy: CombinationStrategy,
    pub mode: SampleMode,
    pub hac_bandwidth: Option<usize>,
    pub mc_draws: usize,
    pub grid_step: f64,
    pub seed: u64,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        Self {
            measures: vec![MeasureKind::Cole, MeasureKind::YuleQ, MeasureKind::Phi],
            intervals: true,
            level: 0.9,
            method: Method::Fisher,
            strategy: CombinationStrategy::Full,
            mode: SampleMode::Iid,
            hac_bandwidth: None,
            mc_draws: inference::DEFAULT_MC_DRAWS,
            grid_step: inference::DEFAULT_GRID_STEP,
            seed: 0,
        }
    }
}

/// A possibly missing matrix entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Entry(#[serde(with = "crate::extended::option")] pub Option<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureMatrix {
    pub measure: MeasureKind,
    pub values: Vec<Vec<Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<Vec<Entry>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<Vec<Entry>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub names: Vec<String>,
    pub effective_n: Vec<Vec<u64>>,
    pub matrices: Vec<MeasureMatrix>,
    pub level: f64,
    pub method: Method,
    pub warnings: Vec<String>,
}

fn wald_of(kind: MeasureKind) -> Option<WaldMeasure> {
    match kind {
        MeasureKind::YuleQ => Some(WaldMeasure::YuleQ),
        MeasureKind::Phi => Some(WaldMeasure::Phi),
        _ => None,
    }
}

fn has_interval(kind: MeasureKind) -> bool {
    matches!(kind, MeasureKind::Cole | MeasureKind::YuleQ | MeasureKind::Phi)
}

struct PairResult {
    n: u64,
    values: Vec<(Option<f64>, Option<(f64, f64)>)>,
    warnings: Vec<String>,
}

fn pair_result(ds: &Dataset, i: usize, j: usize, opts: &MatrixOptions) -> PairResult {
    let (a, b) = (&ds.names[i], &ds.names[j]);
    let pairs = ds.pair(i, j);
    let n = pairs.len() as u64;
    let empty = |w: String| PairResult {
        n,
        values: vec![(None, None); opts.measures.len()],
        warnings: vec![w],
    };
    if pairs.len() < 2 {
        return empty(format!("{a} × {b}: only {n} overlapping rows, pair skipped"));
    }
    let sample = PairedBinarySample::new(pairs, opts.mode).expect("values are binary");
    let m = MomentEstimates::from_sample(&sample);
    let d = match m.distribution() {
        Ok(d) => d,
        Err(e) => return empty(format!("{a} × {b}: {e}, pair skipped")),
    };
    let mut warnings = Vec::new();
    let omega = if !opts.intervals {
        None
    } else if !m.is_interior() {
        warnings.push(format!(
            "{a} × {b}: table {} has an empty cell, intervals suppressed",
            m.table
        ));
        None
    } else {
        let o = match opts.mode {
            SampleMode::Iid => omega_iid(&m),
            SampleMode::TimeSeries => {
                omega_hac(&sample, opts.hac_bandwidth.unwrap_or_else(|| default_bandwidth(sample.len())))
            }
        };
        match o {
            Ok(o) => Some(o),
            Err(e) => {
                warnings.push(format!("{a} × {b}: {e}, intervals suppressed"));
                None
            }
        }
    };
    let values = opts
        .measures
        .iter()
        .map(|&kind| {
            let value = match measures::evaluate(&d, kind) {
                Ok(v) => Some(v.value),
                Err(e) => {
                    warnings.push(format!("{a} × {b}: {kind}: {e}"));
                    None
                }
            };
            let interval = match (&omega, has_interval(kind)) {
                (Some(o), true) => {
                    let iv = match wald_of(kind) {
                        Some(w) => inference::ci(w, &m, o, opts.level, opts.method),
                        None => inference::ci_c(
                            &m,
                            o,
                            &InferenceOptions {
                                level: opts.level,
                                method: opts.method,
                                strategy: opts.strategy,
                                mc_draws: opts.mc_draws,
                                seed: seed::derive(opts.seed, &[i as u64, j as u64]),
                                grid_step: opts.grid_step,
                            },
                        ),
                    };
                    match iv {
                        Ok(iv) => {
                            for w in &iv.diagnostics.warnings {
                                warnings.push(format!("{a} × {b}: {kind}: {w}"));
                            }
                            Some((iv.lower, iv.upper))
                        }
                        Err(e) => {
                            warnings.push(format!("{a} × {b}: {kind} interval: {e}"));
                            None
                        }
                    }
                }
                _ => None,
            };
            (value, interval)
        })
        .collect();
    PairResult { n, values, warnings }
}

/// Measures (and intervals) for every pair of columns. Pairs are evaluated in
/// parallel and assembled in a fixed order, so the report is deterministic.
pub fn measure_matrix(ds: &Dataset, opts: &MatrixOptions) -> Result<MatrixReport> {
    let k = ds.n_columns();
    if k < 2 {
        return Err(Error::Config(format!("need at least two columns, got {k}")));
    }
    if opts.measures.is_empty() {
        return Err(Error::Config("no measures requested".into()));
    }
    if opts.intervals {
        InferenceOptions {
            level: opts.level,
            method: opts.method,
            strategy: opts.strategy,
            mc_draws: opts.mc_draws,
            seed: opts.seed,
            grid_step: opts.grid_step,
        }
        .validate()?;
    }
    let index: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let results: Vec<PairResult> = index
        .par_iter()
        .map(|&(i, j)| pair_result(ds, i, j, opts))
        .collect();

    let mut effective_n = vec![vec![0u64; k]; k];
    for (i, row) in effective_n.iter_mut().enumerate() {
        row[i] = ds.column(i).iter().filter(|v| v.is_some()).count() as u64;
    }
    let blank = || vec![vec![Entry(None); k]; k];
    let mut matrices: Vec<MeasureMatrix> = opts
        .measures
        .iter()
        .map(|&kind| {
            let with_ci = opts.intervals && has_interval(kind);
            MeasureMatrix {
                measure: kind,
                values: blank(),
                lower: with_ci.then(blank),
                upper: with_ci.then(blank),
            }
        })
        .collect();
    for mm in &mut matrices {
        if has_interval(mm.measure) {
            for i in 0..k {
                mm.values[i][i] = Entry(Some(1.0));
            }
        }
    }
    let mut warnings = Vec::new();
    for (&(i, j), res) in index.iter().zip(results) {
        effective_n[i][j] = res.n;
        effective_n[j][i] = res.n;
        for (mm, (value, interval)) in matrices.iter_mut().zip(res.values) {
            mm.values[i][j] = Entry(value);
            mm.values[j][i] = Entry(value);
            if let (Some(lo), Some(hi)) = (&mut mm.lower, &mut mm.upper) {
                let (l, u) = (interval.map(|x| x.0), interval.map(|x| x.1));
                lo[i][j] = Entry(l);
                lo[j][i] = Entry(l);
                hi[i][j] = Entry(u);
                hi[j][i] = Entry(u);
            }
        }
        warnings.extend(res.warnings);
    }
    Ok(MatrixReport {
        names: ds.names.clone(),
        effective_n,
        matrices,
        level: opts.level,
        method: opts.method,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(s: &str) -> Vec<Option<bool>> {
        s.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect()
    }

    fn ds(cols: &[&str]) -> Dataset {
        let names = (0..cols.len()).map(|i| format!("v{i}")).collect();
        Dataset::new(names, cols.iter().map(|c| col(c)).collect()).unwrap()
    }

    #[test]
    fn rejects_duplicates_and_bad_tokens() {
        assert!(Dataset::new(vec!["a".into(), "a".into()], vec![vec![], vec![]]).is_err());
        let na = vec!["NA".to_string()];
        let e = Dataset::from_rows(vec!["a".into()], vec![vec!["2"]], &na);
        assert!(matches!(e, Err(Error::Parse(_))));
        let ok = Dataset::from_rows(vec!["a".into(), "b".into()], vec![vec!["1", "NA"], vec!["0", "1"]], &na).unwrap();
        assert_eq!(ok.column(1), &[None, Some(true)]);
        assert!(Dataset::from_rows(vec!["a".into()], vec![vec!["na"]], &na).is_err());
    }

    #[test]
    fn effective_n_matches_hand_count() {
        let d = ds(&["1101.10011", "10.1101.01", "0.11.01100"]);
        let count = |a: &str, b: &str| a.chars().zip(b.chars()).filter(|(x, y)| *x != '.' && *y != '.').count();
        let cols = ["1101.10011", "10.1101.01", "0.11.01100"];
        let rep = measure_matrix(
            &d,
            &MatrixOptions {
                intervals: false,
                ..Default::default()
            },
        )
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(rep.effective_n[i][j] as usize, count(cols[i], cols[j]));
            }
        }
    }

    #[test]
    fn identical_and_complementary_columns() {
        let a = "110100101100111010011011";
        let not_a: String = a.chars().map(|c| if c == '1' { '0' } else { '1' }).collect();
        let d = ds(&[a, a, &not_a]);
        let rep = measure_matrix(
            &d,
            &MatrixOptions {
                measures: MeasureKind::all(),
                intervals: false,
                ..Default::default()
            },
        )
        .unwrap();
        for mm in &rep.matrices {
            if matches!(mm.measure, MeasureKind::Cole | MeasureKind::YuleQ | MeasureKind::Phi | MeasureKind::Tetrachoric) {
                assert_eq!(mm.values[0][1].0, Some(1.0), "{}", mm.measure);
                assert_eq!(mm.values[0][2].0, Some(-1.0), "{}", mm.measure);
            }
        }
    }

    #[test]
    fn matrices_are_symmetric_with_unit_diagonal() {
        let d = ds(&[
            "1101011010010110100101101010010101110100101",
            "1001011011010100100111101000010101010110101",
            "0111010.10011010010110100110.1011010010..01",
            "1100110010110.100101101001011001010110100.1",
        ]);
        let rep = measure_matrix(
            &d,
            &MatrixOptions {
                mc_draws: 1000,
                ..Default::default()
            },
        )
        .unwrap();
        for mm in &rep.matrices {
            for i in 0..4 {
                assert_eq!(mm.values[i][i].0, Some(1.0));
                for j in 0..4 {
                    assert_eq!(mm.values[i][j].0.map(f64::to_bits), mm.values[j][i].0.map(f64::to_bits));
                    let lo = mm.lower.as_ref().unwrap();
                    assert_eq!(lo[i][j].0.map(f64::to_bits), lo[j][i].0.map(f64::to_bits));
                }
            }
        }
        let json = serde_json::to_string(&rep).unwrap();
        let back: MatrixReport = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    #[test]
    fn sparse_pairs_are_skipped_with_warning() {
        let d = ds(&["1..0", ".1.1", "0110"]);
        let rep = measure_matrix(
            &d,
            &MatrixOptions {
                intervals: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(rep.effective_n[0][1], 1);
        assert_eq!(rep.matrices[0].values[0][1].0, None);
        assert!(rep.warnings.iter().any(|w| w.contains("v0 × v1")));
    }
}
