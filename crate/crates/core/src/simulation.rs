//! Random binary pairs, coverage experiments for the confidence intervals,
//! replication of the limit laws of Ĉ and measure comparison surfaces.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{omega_hac, omega_iid, omega_population, default_bandwidth, MomentEstimates, PairedBinarySample, SampleMode};
use crate::inference::{self, AsymptoticLaw, CCase, CombinationStrategy, InferenceOptions, McSpec, Method, WaldMeasure};
use crate::joint::{fh_bounds, JointBinaryDistribution};
use crate::measures;
use crate::seed;

fn draw_pair<R: Rng>(cum: &[f64; 3], rng: &mut R) -> (u8, u8) {
    let u: f64 = rng.random();
    if u < cum[0] {
        (1, 1)
    } else if u < cum[1] {
        (1, 0)
    } else if u < cum[2] {
        (0, 1)
    } else {
        (0, 0)
    }
}

fn cumulative(d: &JointBinaryDistribution) -> [f64; 3] {
    let [a, b, c, _] = d.cells();
    [a, a + b, a + b + c]
}

/// `n` iid draws from the four-cell distribution `d`, by inversion of a
/// uniform from a ChaCha8 stream keyed by `seed`.
pub fn sample_joint(d: &JointBinaryDistribution, n: usize, seed: u64) -> Result<PairedBinarySample> {
    if n == 0 {
        return Err(Error::Config("sample size must be positive".into()));
    }
    let cum = cumulative(d);
    let mut rng = seed::rng(seed, &[]);
    let pairs = (0..n).map(|_| draw_pair(&cum, &mut rng)).collect();
    PairedBinarySample::new(pairs, SampleMode::Iid)
}

/// A stationary Markov chain with marginal distribution `d`: each step
/// repeats the previous pair with probability `persistence` and otherwise
/// draws a fresh pair from `d`.
pub fn sample_sticky_chain(
    d: &JointBinaryDistribution,
    n: usize,
    persistence: f64,
    seed: u64,
) -> Result<PairedBinarySample> {
    if n == 0 {
        return Err(Error::Config("sample size must be positive".into()));
    }
    if !(0.0..1.0).contains(&persistence) {
        return Err(Error::Config(format!("persistence {persistence} must lie in [0, 1)")));
    }
    let cum = cumulative(d);
    let mut rng = seed::rng(seed, &[]);
    let mut pairs = Vec::with_capacity(n);
    let mut current = draw_pair(&cum, &mut rng);
    pairs.push(current);
    for _ in 1..n {
        let stay: f64 = rng.random();
        if stay >= persistence {
            current = draw_pair(&cum, &mut rng);
        }
        pairs.push(current);
    }
    PairedBinarySample::new(pairs, SampleMode::TimeSeries)
}

/// `count` equally spaced joint probabilities inside the Fréchet–Hoeffding
/// range, leaving `inset` times the range width free at both ends.
pub fn r_grid(p: f64, q: f64, count: usize, inset: f64) -> Result<Vec<f64>> {
    let b = fh_bounds(p, q)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    if !(inset > 0.0 && inset < 0.5) {
        return Err(Error::Config(format!("inset {inset} must lie in (0, 0.5)")));
    }
    let w = b.width();
    let (lo, hi) = (b.lower + inset * w, b.upper - inset * w);
    if count == 1 {
        return Ok(vec![0.5 * (lo + hi)]);
    }
    let step = (hi - lo) / (count - 1) as f64;
    Ok((0..count).map(|k| lo + k as f64 * step).collect())
}

/// Measures whose intervals are checked in coverage runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMeasure {
    YuleQ,
    Phi,
    Cole,
}

impl CoverageMeasure {
    pub fn name(&self) -> &'static str {
        match self {
            CoverageMeasure::YuleQ => "yule_q",
            CoverageMeasure::Phi => "phi",
            CoverageMeasure::Cole => "cole",
        }
    }

    fn true_value(&self, d: &JointBinaryDistribution) -> f64 {
        match self {
            CoverageMeasure::YuleQ => measures::yule_q(d),
            CoverageMeasure::Phi => measures::phi(d),
            CoverageMeasure::Cole => measures::cole(d),
        }
    }
}

/// Which Ω the intervals in a coverage run use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum OmegaChoice {
    #[default]
    Iid,
    /// HAC with the given bandwidth, or the default bandwidth if `None`.
    Hac { bandwidth: Option<usize> },
}

/// How the data of a coverage run are generated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum DataGenerator {
    #[default]
    Iid,
    StickyChain { persistence: f64 },
}

/// Design of a coverage experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageConfig {
    pub marginals: Vec<(f64, f64)>,
    pub r_count: usize,
    /// Fraction of the Fréchet–Hoeffding range left out at either end.
    pub r_inset: f64,
    /// Explicit joint probabilities; overrides the grid when non-empty.
    pub r_values: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub level: f64,
    pub measures: Vec<CoverageMeasure>,
    pub methods: Vec<Method>,
    pub strategies: Vec<CombinationStrategy>,
    pub seed: u64,
    pub mc_draws: usize,
    pub grid_step: f64,
    pub generator: DataGenerator,
    pub omega: OmegaChoice,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            marginals: vec![(0.05, 0.5), (0.1, 0.9), (0.2, 0.2), (0.3, 0.7), (0.4, 0.8)],
            r_count: 39,
            r_inset: 1.0 / 20.0,
            r_values: Vec::new(),
            sample_sizes: vec![100, 500, 2000],
            replications: 1000,
            level: 0.9,
            measures: vec![CoverageMeasure::YuleQ, CoverageMeasure::Phi, CoverageMeasure::Cole],
            methods: vec![Method::Standard, Method::Fisher],
            strategies: vec![CombinationStrategy::Full],
            seed: 1,
            mc_draws: inference::DEFAULT_MC_DRAWS,
            grid_step: inference::DEFAULT_GRID_STEP,
            generator: DataGenerator::Iid,
            omega: OmegaChoice::Iid,
        }
    }
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: String| Err(Error::Config(format!("{name}: {msg}")));
        if self.replications == 0 {
            return field("replications", "must be at least 1".into());
        }
        if !(self.r_inset > 0.0 && self.r_inset < 0.5) {
            return field("r_inset", format!("{} must lie in (0, 0.5)", self.r_inset));
        }
        if self.marginals.is_empty() {
            return field("marginals", "at least one pair is needed".into());
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return field("sample_sizes", "need at least one positive sample size".into());
        }
        if self.measures.is_empty() || self.methods.is_empty() {
            return field("measures", "need at least one measure and one method".into());
        }
        if self.measures.contains(&CoverageMeasure::Cole) && self.strategies.is_empty() {
            return field("strategies", "need at least one strategy for cole".into());
        }
        if let DataGenerator::StickyChain { persistence } = self.generator {
            if !(0.0..1.0).contains(&persistence) {
                return field("generator", format!("persistence {persistence} must lie in [0, 1)"));
            }
        }
        InferenceOptions {
            level: self.level,
            method: Method::Fisher,
            strategy: CombinationStrategy::Full,
            mc_draws: self.mc_draws,
            seed: self.seed,
            grid_step: self.grid_step,
        }
        .validate()?;
        for (i, cell) in self.cells()?.iter().enumerate() {
            if !cell.dist.is_interior() {
                return field(
                    "r_values",
                    format!("cell {i} ({}, {}, {}) is not strictly interior", cell.p, cell.q, cell.r),
                );
            }
        }
        Ok(())
    }

    /// Every `(p, q, r, n)` of the design, in a fixed order.
    pub fn cells(&self) -> Result<Vec<DesignCell>> {
        let mut out = Vec::new();
        for &(p, q) in &self.marginals {
            let rs = if self.r_values.is_empty() {
                r_grid(p, q, self.r_count, self.r_inset)?
            } else {
                self.r_values.clone()
            };
            for (r_index, &r) in rs.iter().enumerate() {
                let dist = JointBinaryDistribution::new(p, q, r)?;
                for &n in &self.sample_sizes {
                    out.push(DesignCell {
                        p,
                        q,
                        r,
                        r_index,
                        n,
                        dist,
                    });
                }
            }
        }
        Ok(out)
    }

    /// The interval variants evaluated in every replication.
    fn variants(&self) -> Vec<(CoverageMeasure, Method, Option<CombinationStrategy>)> {
        let mut v = Vec::new();
        for &measure in &self.measures {
            for &method in &self.methods {
                if measure == CoverageMeasure::Cole {
                    for &s in &self.strategies {
                        v.push((measure, method, Some(s)));
                    }
                } else {
                    v.push((measure, method, None));
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignCell {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub r_index: usize,
    pub n: usize,
    pub dist: JointBinaryDistribution,
}

/// Coverage statistics of one interval variant in one design cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub r_index: usize,
    pub n: usize,
    pub measure: CoverageMeasure,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<CombinationStrategy>,
    pub true_value: f64,
    pub replications: usize,
    pub retained: usize,
    /// Retained runs whose interval could not be computed.
    pub failed: usize,
    pub retained_fraction: f64,
    /// Fewer than half of the runs were usable; the rates are not reported.
    pub missing: bool,
    #[serde(with = "crate::extended::option")]
    pub coverage: Option<f64>,
    /// The true value lies below the interval.
    #[serde(with = "crate::extended::option")]
    pub lower_violation: Option<f64>,
    /// The true value lies above the interval.
    #[serde(with = "crate::extended::option")]
    pub upper_violation: Option<f64>,
    #[serde(with = "crate::extended::option")]
    pub mean_length: Option<f64>,
}

/// Outcome of one interval in one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Dropped,
    Failed,
    Interval { lower: f64, upper: f64 },
}

/// Seeds used by replication `rep` of design cell `cell`: the sample seed and
/// the Monte Carlo seed of the Cole intervals.
pub fn replication_seeds(master: u64, cell: usize, rep: usize) -> (u64, u64) {
    let base = seed::derive(master, &[cell as u64, rep as u64]);
    (base, seed::derive(base, &[0x4d43]))
}

fn replicate(
    cfg: &CoverageConfig,
    cell: &DesignCell,
    cell_index: usize,
    rep: usize,
    variants: &[(CoverageMeasure, Method, Option<CombinationStrategy>)],
) -> Vec<Outcome> {
    let (data_seed, mc_seed) = replication_seeds(cfg.seed, cell_index, rep);
    let sample = match cfg.generator {
        DataGenerator::Iid => sample_joint(&cell.dist, cell.n, data_seed),
        DataGenerator::StickyChain { persistence } => {
            sample_sticky_chain(&cell.dist, cell.n, persistence, data_seed)
        }
    };
    let dropped = || vec![Outcome::Dropped; variants.len()];
    let Ok(sample) = sample else {
        return dropped();
    };
    let m = MomentEstimates::from_sample(&sample);
    if !m.is_interior() {
        return dropped();
    }
    let omega = match cfg.omega {
        OmegaChoice::Iid => omega_iid(&m),
        OmegaChoice::Hac { bandwidth } => {
            let bw = bandwidth.unwrap_or_else(|| default_bandwidth(sample.len()));
            omega_hac(&sample.with_mode(SampleMode::TimeSeries), bw)
        }
    };
    let Ok(omega) = omega else {
        return vec![Outcome::Failed; variants.len()];
    };
    variants
        .iter()
        .map(|&(measure, method, strategy)| {
            let iv = match measure {
                CoverageMeasure::YuleQ => inference::ci(WaldMeasure::YuleQ, &m, &omega, cfg.level, method),
                CoverageMeasure::Phi => inference::ci(WaldMeasure::Phi, &m, &omega, cfg.level, method),
                CoverageMeasure::Cole => inference::ci_c(
                    &m,
                    &omega,
                    &InferenceOptions {
                        level: cfg.level,
                        method,
                        strategy: strategy.unwrap_or_default(),
                        mc_draws: cfg.mc_draws,
                        seed: mc_seed,
                        grid_step: cfg.grid_step,
                    },
                ),
            };
            match iv {
                Ok(iv) => Outcome::Interval {
                    lower: iv.lower,
                    upper: iv.upper,
                },
                Err(_) => Outcome::Failed,
            }
        })
        .collect()
}

/// Runs the coverage experiment. Replications run in parallel; results are
/// aggregated in replication order, so the report does not depend on the
/// number of worker threads.
pub fn run_coverage(cfg: &CoverageConfig) -> Result<Vec<CoverageCell>> {
    run_coverage_with_progress(cfg, |_, _| {})
}

/// [`run_coverage`] with a callback invoked after each design cell.
pub fn run_coverage_with_progress(
    cfg: &CoverageConfig,
    mut progress: impl FnMut(usize, usize),
) -> Result<Vec<CoverageCell>> {
    cfg.validate()?;
    let cells = cfg.cells()?;
    let variants = cfg.variants();
    let mut report = Vec::with_capacity(cells.len() * variants.len());
    for (ci, cell) in cells.iter().enumerate() {
        let outcomes: Vec<Vec<Outcome>> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| replicate(cfg, cell, ci, rep, &variants))
            .collect();
        for (vi, &(measure, method, strategy)) in variants.iter().enumerate() {
            let truth = measure.true_value(&cell.dist);
            let (mut retained, mut failed, mut covered, mut below, mut above) = (0, 0, 0, 0, 0);
            let mut length = 0.0;
            for o in &outcomes {
                match o[vi] {
                    Outcome::Dropped => {}
                    Outcome::Failed => {
                        retained += 1;
                        failed += 1;
                    }
                    Outcome::Interval { lower, upper } => {
                        retained += 1;
                        length += upper - lower;
                        if truth < lower {
                            below += 1;
                        } else if truth > upper {
                            above += 1;
                        } else {
                            covered += 1;
                        }
                    }
                }
            }
            let usable = retained - failed;
            let fraction = retained as f64 / cfg.replications as f64;
            let missing = fraction < 0.5 || usable == 0;
            let rate = |k: usize| (!missing).then(|| k as f64 / usable as f64);
            report.push(CoverageCell {
                p: cell.p,
                q: cell.q,
                r: cell.r,
                r_index: cell.r_index,
                n: cell.n,
                measure,
                method,
                strategy,
                true_value: truth,
                replications: cfg.replications,
                retained,
                failed,
                retained_fraction: fraction,
                missing,
                coverage: rate(covered),
                lower_violation: rate(below),
                upper_violation: rate(above),
                mean_length: (!missing).then(|| length / usable as f64),
            });
        }
        progress(ci + 1, cells.len());
    }
    Ok(report)
}

/// Joint probability at which Cole's C equals `c`.
pub fn r_for_cole(p: f64, q: f64, c: f64) -> Result<f64> {
    let b = fh_bounds(p, q)?;
    if !(-1.0..=1.0).contains(&c) {
        return Err(Error::Domain(format!("C = {c} must lie in [-1, 1]")));
    }
    let pq = p * q;
    Ok(if c >= 0.0 {
        pq + c * (b.upper - pq)
    } else {
        pq + c * (pq - b.lower)
    })
}

/// Joint probability at which φ equals `v`; `None` outside the attainable range.
pub fn r_for_phi(p: f64, q: f64, v: f64) -> Result<Option<f64>> {
    let b = fh_bounds(p, q)?;
    let r = p * q + v * (p * (1.0 - p) * q * (1.0 - q)).sqrt();
    Ok((r >= b.lower - 1e-15 && r <= b.upper + 1e-15).then(|| r.clamp(b.lower, b.upper)))
}

/// Joint probability at which Yule's Q equals `v ∈ (−1, 1)`.
pub fn r_for_yule_q(p: f64, q: f64, v: f64) -> Result<f64> {
    let b = fh_bounds(p, q)?;
    if !(v > -1.0 && v < 1.0) {
        return Err(Error::Domain(format!("Q = {v} must lie in (-1, 1)")));
    }
    let k = (1.0 + v) / (1.0 - v);
    if v == 0.0 {
        return Ok(p * q);
    }
    // r(1 − p − q + r) = k (p − r)(q − r)
    let a2 = 1.0 - k;
    let a1 = 1.0 - p - q + k * (p + q);
    let a0 = -k * p * q;
    let disc = (a1 * a1 - 4.0 * a2 * a0).max(0.0).sqrt();
    // Numerically stable pair of roots.
    let t = -0.5 * (a1 + a1.signum() * disc);
    let roots = [t / a2, a0 / t];
    roots
        .into_iter()
        .filter(|r| r.is_finite())
        .min_by(|x, y| {
            let dist = |r: f64| (b.lower - r).max(r - b.upper).max(0.0);
            dist(*x).total_cmp(&dist(*y))
        })
        .map(|r| r.clamp(b.lower, b.upper))
        .ok_or_else(|| Error::Domain("no admissible root".into()))
}

/// One point of a comparison surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub yule_q: f64,
    pub phi: f64,
    pub cole: f64,
}

/// The measure held fixed on a comparison surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceMeasure {
    Cole,
    YuleQ,
    Phi,
}

impl std::str::FromStr for SurfaceMeasure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cole" | "c" => Ok(SurfaceMeasure::Cole),
            "yule_q" | "q" => Ok(SurfaceMeasure::YuleQ),
            "phi" => Ok(SurfaceMeasure::Phi),
            _ => Err(Error::Parse(format!("cannot fix measure '{s}' (cole|yule_q|phi)"))),
        }
    }
}

/// For `p, q ∈ {i/(g+1) : 1 ≤ i ≤ g}`, finds the `r` at which `fixed` takes
/// `value` and evaluates Q, φ and C there. Marginal pairs where the value is
/// not attainable are skipped.
pub fn comparison_surface(fixed: SurfaceMeasure, value: f64, grid: usize) -> Result<Vec<SurfaceRow>> {
    if !(value > -1.0 && value < 1.0) {
        return Err(Error::Domain(format!("fixed value {value} must lie in (-1, 1)")));
    }
    if grid == 0 {
        return Err(Error::Config("grid must have at least one point".into()));
    }
    let step = (grid + 1) as f64;
    let mut rows = Vec::new();
    for i in 1..=grid {
        let p = i as f64 / step;
        for j in 1..=grid {
            let q = j as f64 / step;
            let r = match fixed {
                SurfaceMeasure::Cole => Some(r_for_cole(p, q, value)?),
                SurfaceMeasure::YuleQ => Some(r_for_yule_q(p, q, value)?),
                SurfaceMeasure::Phi => r_for_phi(p, q, value)?,
            };
            let Some(r) = r else { continue };
            let Ok(d) = JointBinaryDistribution::new(p, q, r) else {
                continue;
            };
            rows.push(SurfaceRow {
                p,
                q,
                r,
                yule_q: measures::yule_q(&d),
                phi: measures::phi(&d),
                cole: measures::cole(&d),
            });
        }
    }
    Ok(rows)
}

/// Simulated `Ĉ` next to its limit law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLawReplication {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub c_true: f64,
    pub n: usize,
    pub case: CCase,
    /// `Ĉ` of each retained replication.
    pub estimates: Vec<f64>,
    /// Replications dropped because an estimated cell was empty.
    pub dropped: usize,
    /// Limit law of `Ĉ − C` at the true parameters.
    pub law: AsymptoticLaw,
}

const CASE_TOLERANCE: f64 = 1e-12;

/// Draws `m` samples of size `n` with Cole's C equal to `c_true` and records `Ĉ`.
pub fn replicate_limit_law(
    p: f64,
    q: f64,
    c_true: f64,
    n: usize,
    m: usize,
    seed: u64,
    mc_draws: usize,
) -> Result<LimitLawReplication> {
    let r = r_for_cole(p, q, c_true)?;
    let d = JointBinaryDistribution::new(p, q, r)?;
    if !d.is_interior() {
        return Err(Error::Domain(format!(
            "C = {c_true} at (p, q) = ({p}, {q}) is not strictly inside the parameter space"
        )));
    }
    if n == 0 || m == 0 {
        return Err(Error::Config("n and M must be positive".into()));
    }
    let sigma = r - p * q;
    let case = if sigma.abs() <= CASE_TOLERANCE {
        CCase::Zero
    } else if sigma > 0.0 {
        if (p - q).abs() <= CASE_TOLERANCE {
            CCase::PositiveEqualMarginals
        } else {
            CCase::PositiveRegular
        }
    } else if (p + q - 1.0).abs() <= CASE_TOLERANCE {
        CCase::NegativeComplementMarginals
    } else {
        CCase::NegativeRegular
    };
    let omega = omega_population(&d)?;
    let law = inference::law_c_at(
        p,
        q,
        r,
        &omega,
        n as u64,
        case,
        McSpec {
            draws: mc_draws,
            seed: seed::derive(seed, &[u64::MAX]),
        },
    )?;
    let results: Vec<Option<f64>> = (0..m)
        .into_par_iter()
        .map(|rep| {
            let s = sample_joint(&d, n, seed::derive(seed, &[rep as u64])).ok()?;
            let est = MomentEstimates::from_sample(&s);
            est.is_interior().then(|| inference::cole_hat(&est))
        })
        .collect();
    let estimates: Vec<f64> = results.iter().flatten().copied().collect();
    Ok(LimitLawReplication {
        p,
        q,
        r,
        c_true,
        n,
        case,
        dropped: m - estimates.len(),
        estimates,
        law,
    })
}

/// Equal-width histogram over `[lo, hi]`, returned as `(bin centre, count)`.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<(f64, u64)> {
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        if v < lo || v > hi || !v.is_finite() {
            continue;
        }
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (lo + (k as f64 + 0.5) * width, c))
        .collect()
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}
