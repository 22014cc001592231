//! Asymptotic laws, hypothesis tests and confidence intervals for Yule's Q,
//! the φ coefficient and Cole's C.
//!
//! Q and φ are asymptotically normal and get Wald intervals. Ĉ has a limit law
//! that changes with the sign of σ and with whether `p = q` (or `p = 1 − q`),
//! so its intervals are built by inverting a test that combines the
//! candidate laws with auxiliary tests on σ and the marginals.

use std::cell::OnceCell;
use std::fmt;
use std::str::FromStr;

use nalgebra::{RowVector2, Vector3, Vector4};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{JacobianSet, LongRunCovariance, MomentEstimates};
use crate::normal;
use crate::seed;

/// Default number of draws for simulated limit laws.
pub const DEFAULT_MC_DRAWS: usize = 100_000;
/// Default spacing of the candidate grid for Cole's C.
pub const DEFAULT_GRID_STEP: f64 = 0.001;

/// Wald intervals on the original scale or on the Fisher scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Standard,
    #[default]
    Fisher,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Standard => "standard",
            Method::Fisher => "fisher",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(Method::Standard),
            "fisher" => Ok(Method::Fisher),
            _ => Err(Error::Parse(format!("unknown method '{s}' (standard|fisher)"))),
        }
    }
}

/// How the component p-values of the test for Cole's C are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinationStrategy {
    /// `2 min{ max[2 min(p_=, p_pq), p_≠], p_σ }`
    #[default]
    Full,
    /// `max[2 min(p_=, p_pq), p_≠]`
    NoSigmaTest,
    /// `2 min{ max[p_=, p_≠], p_σ }`
    NoPqTest,
    /// `max[p_=, p_≠]`
    Basic,
}

impl CombinationStrategy {
    pub const ALL: [CombinationStrategy; 4] = [
        CombinationStrategy::Full,
        CombinationStrategy::NoSigmaTest,
        CombinationStrategy::NoPqTest,
        CombinationStrategy::Basic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CombinationStrategy::Full => "full",
            CombinationStrategy::NoSigmaTest => "no_sigma_test",
            CombinationStrategy::NoPqTest => "no_pq_test",
            CombinationStrategy::Basic => "basic",
        }
    }

    fn uses_sigma(&self) -> bool {
        matches!(self, CombinationStrategy::Full | CombinationStrategy::NoPqTest)
    }

    fn uses_pq(&self) -> bool {
        matches!(self, CombinationStrategy::Full | CombinationStrategy::NoSigmaTest)
    }

    /// Combined p-value for `c0 ≠ 0`.
    pub fn combine(&self, p_eq: f64, p_neq: f64, p_pq: f64, p_sigma: f64) -> f64 {
        let inner = if self.uses_pq() {
            clip(2.0 * p_eq.min(p_pq))
        } else {
            p_eq
        };
        let outer = inner.max(p_neq);
        if self.uses_sigma() {
            clip(2.0 * outer.min(p_sigma))
        } else {
            clip(outer)
        }
    }

    /// Combined p-value for `c0 = 0`.
    pub fn combine_zero(&self, p_zero: f64, p_sigma_two_sided: f64) -> f64 {
        if self.uses_sigma() {
            clip(2.0 * p_zero.min(p_sigma_two_sided))
        } else {
            clip(p_zero)
        }
    }
}

impl fmt::Display for CombinationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CombinationStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "full" => Ok(CombinationStrategy::Full),
            "no_sigma_test" | "no_sigma" => Ok(CombinationStrategy::NoSigmaTest),
            "no_pq_test" | "no_pq" => Ok(CombinationStrategy::NoPqTest),
            "basic" => Ok(CombinationStrategy::Basic),
            _ => Err(Error::Parse(format!(
                "unknown strategy '{s}' (full|no_sigma_test|no_pq_test|basic)"
            ))),
        }
    }
}

fn clip(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Settings shared by the tests and intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceOptions {
    pub level: f64,
    pub method: Method,
    pub strategy: CombinationStrategy,
    pub mc_draws: usize,
    pub seed: u64,
    pub grid_step: f64,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self {
            level: 0.9,
            method: Method::Fisher,
            strategy: CombinationStrategy::Full,
            mc_draws: DEFAULT_MC_DRAWS,
            seed: 0,
            grid_step: DEFAULT_GRID_STEP,
        }
    }
}

impl InferenceOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level {} must lie in (0, 1)", self.level)));
        }
        if self.mc_draws == 0 {
            return Err(Error::Config("at least one Monte Carlo draw is needed".into()));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 0.5) {
            return Err(Error::Config(format!(
                "grid step {} must lie in (0, 0.5]",
                self.grid_step
            )));
        }
        Ok(())
    }
}

/// Distribution of `θ̂ − θ` in large samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LawKind {
    Gaussian {
        variance: f64,
    },
    /// `base_sd · Z · (scale_plus if Z > 0 else scale_minus)`.
    HalfNormalMix {
        scale_plus: f64,
        scale_minus: f64,
        base_sd: f64,
    },
    /// Sorted draws from the limit functional.
    MonteCarlo {
        draws: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticLaw {
    pub kind: LawKind,
    pub n: u64,
}

impl AsymptoticLaw {
    fn gaussian(variance: f64, n: u64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Singular(format!(
                "asymptotic variance {variance:e} is not positive"
            )));
        }
        Ok(Self {
            kind: LawKind::Gaussian { variance },
            n,
        })
    }

    /// Standard deviation for the Gaussian and half-normal laws, the sample
    /// standard deviation of the draws otherwise.
    pub fn sd(&self) -> f64 {
        match &self.kind {
            LawKind::Gaussian { variance } => variance.sqrt(),
            LawKind::HalfNormalMix {
                scale_plus,
                scale_minus,
                base_sd,
            } => {
                // E[L] and E[L²] of the two-sided half-normal mixture
                let m1 = base_sd * (scale_plus - scale_minus) / (2.0 * std::f64::consts::PI).sqrt();
                let m2 = base_sd * base_sd * (scale_plus.powi(2) + scale_minus.powi(2)) / 2.0;
                (m2 - m1 * m1).sqrt()
            }
            LawKind::MonteCarlo { draws } => {
                let n = draws.len() as f64;
                let mean = draws.iter().sum::<f64>() / n;
                (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
            }
        }
    }

    /// Multiplies the limit variable by `k > 0`.
    pub fn scaled(&self, k: f64) -> Self {
        let kind = match &self.kind {
            LawKind::Gaussian { variance } => LawKind::Gaussian {
                variance: variance * k * k,
            },
            LawKind::HalfNormalMix {
                scale_plus,
                scale_minus,
                base_sd,
            } => LawKind::HalfNormalMix {
                scale_plus: *scale_plus,
                scale_minus: *scale_minus,
                base_sd: base_sd * k,
            },
            LawKind::MonteCarlo { draws } => LawKind::MonteCarlo {
                draws: draws.iter().map(|x| x * k).collect(),
            },
        };
        Self { kind, n: self.n }
    }

    /// `P(L ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            LawKind::Gaussian { variance } => normal::cdf(x / variance.sqrt()),
            LawKind::HalfNormalMix {
                scale_plus,
                scale_minus,
                base_sd,
            } => {
                if x >= 0.0 {
                    normal::cdf(x / (base_sd * scale_plus))
                } else {
                    normal::cdf(x / (base_sd * scale_minus))
                }
            }
            LawKind::MonteCarlo { draws } => {
                draws.partition_point(|&d| d <= x) as f64 / draws.len() as f64
            }
        }
    }

    /// `P(L < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match &self.kind {
            LawKind::MonteCarlo { draws } => {
                draws.partition_point(|&d| d < x) as f64 / draws.len() as f64
            }
            _ => self.cdf(x),
        }
    }

    /// Equal-tailed two-sided p-value of an observed `θ̂ − θ₀ = t`.
    pub fn two_sided_p(&self, t: f64) -> f64 {
        match &self.kind {
            LawKind::Gaussian { variance } => clip(2.0 * normal::sf(t.abs() / variance.sqrt())),
            _ => clip(2.0 * self.cdf(t).min(1.0 - self.cdf_left(t))),
        }
    }

    /// Density for the closed-form laws; `None` for simulated laws.
    pub fn pdf(&self, x: f64) -> Option<f64> {
        match &self.kind {
            LawKind::Gaussian { variance } => {
                let s = variance.sqrt();
                Some(normal::pdf(x / s) / s)
            }
            LawKind::HalfNormalMix {
                scale_plus,
                scale_minus,
                base_sd,
            } => {
                let s = if x >= 0.0 {
                    base_sd * scale_plus
                } else {
                    base_sd * scale_minus
                };
                Some(normal::pdf(x / s) / s)
            }
            LawKind::MonteCarlo { .. } => None,
        }
    }
}

/// Outcome of a hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub hypothesis: String,
    pub statistic: f64,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<CComponents>,
}

/// Component p-values of the test for Cole's C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CComponents {
    /// Under `p = q` (or `p = 1 − q` for negative values).
    #[serde(default, with = "crate::extended::option")]
    pub p_eq: Option<f64>,
    /// Under the regular Gaussian law.
    #[serde(default, with = "crate::extended::option")]
    pub p_neq: Option<f64>,
    /// Test of the marginal restriction.
    #[serde(default, with = "crate::extended::option")]
    pub p_pq: Option<f64>,
    /// Test on the sign of σ (two-sided when `c0 = 0`).
    pub p_sigma: f64,
    /// Half-normal mixture test at `c0 = 0`.
    #[serde(default, with = "crate::extended::option")]
    pub p_zero: Option<f64>,
    pub strategy: CombinationStrategy,
}

impl CComponents {
    /// Recomputes the combined p-value from the components.
    pub fn combined(&self) -> f64 {
        match self.p_zero {
            Some(p0) => self.strategy.combine_zero(p0, self.p_sigma),
            None => self.strategy.combine(
                self.p_eq.unwrap_or(0.0),
                self.p_neq.unwrap_or(0.0),
                self.p_pq.unwrap_or(0.0),
                self.p_sigma,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Construction {
    ClosedForm,
    GridInversion { steps_per_unit: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<CombinationStrategy>,
    /// Monte Carlo draws actually generated.
    pub mc_draws: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// A point estimate with a two-sided confidence set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub measure: String,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: Method,
    pub construction: Construction,
    /// Some candidate between `lower` and `upper` was rejected.
    pub non_interval_flag: bool,
    pub n: u64,
    pub diagnostics: Diagnostics,
}

impl IntervalEstimate {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// `arctanh z`.
pub fn fisher(z: f64) -> Result<f64> {
    if !(z > -1.0 && z < 1.0) {
        return Err(Error::Domain(format!(
            "Fisher transform needs |z| < 1, got {z}"
        )));
    }
    Ok(z.atanh())
}

/// `tanh x`.
pub fn fisher_inv(x: f64) -> f64 {
    x.tanh()
}

fn z_two_sided(level: f64) -> f64 {
    normal::inv_cdf(0.5 + level / 2.0)
}

fn check_inputs(m: &MomentEstimates, omega: &LongRunCovariance) -> Result<JacobianSet> {
    m.require_interior()?;
    if omega.omega.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Domain("Ω has non-finite entries".into()));
    }
    JacobianSet::at(m.p_hat, m.q_hat, m.r_hat)
}

fn quad(omega: &LongRunCovariance, v: Vector3<f64>) -> f64 {
    omega.quad(&v)
}

/// Law of `Q̂ − Q`.
pub fn law_q(m: &MomentEstimates, omega: &LongRunCovariance) -> Result<AsymptoticLaw> {
    let j = check_inputs(m, omega)?;
    AsymptoticLaw::gaussian(quad(omega, j.j_g.transpose()) / m.n as f64, m.n)
}

/// Law of `½ log OR̂ − ½ log OR`, the Fisher transform of Q̂.
pub fn law_zq(m: &MomentEstimates, omega: &LongRunCovariance) -> Result<AsymptoticLaw> {
    let j = check_inputs(m, omega)?;
    AsymptoticLaw::gaussian(quad(omega, j.j_h.transpose()) / m.n as f64, m.n)
}

fn phi_hat(m: &MomentEstimates) -> f64 {
    m.sigma_hat / (m.p_hat * (1.0 - m.p_hat) * m.q_hat * (1.0 - m.q_hat)).sqrt()
}

fn yule_q_hat(m: &MomentEstimates) -> f64 {
    let t = &m.table;
    let (x, y) = (t.n11 as f64 * t.n00 as f64, t.n10 as f64 * t.n01 as f64);
    (x - y) / (x + y)
}

fn half_log_or_hat(m: &MomentEstimates) -> f64 {
    let t = &m.table;
    0.5 * ((t.n11 as f64).ln() + (t.n00 as f64).ln() - (t.n10 as f64).ln() - (t.n01 as f64).ln())
}

/// `Ĉ` with the positive normalisation used whenever `σ̂ ≥ 0`.
pub fn cole_hat(m: &MomentEstimates) -> f64 {
    if m.sigma_hat >= 0.0 {
        m.sigma_hat / m.m_plus_hat
    } else {
        m.sigma_hat / m.m_minus_hat
    }
}

/// Law of `φ̂ − φ`.
pub fn law_phi(m: &MomentEstimates, omega: &LongRunCovariance) -> Result<AsymptoticLaw> {
    let j = check_inputs(m, omega)?;
    AsymptoticLaw::gaussian(quad(omega, j.j_l.transpose()) / m.n as f64, m.n)
}

/// Law of `atanh φ̂ − atanh φ`, with `γ_φ = 1/(1 − φ̂²)`.
pub fn law_zphi(m: &MomentEstimates, omega: &LongRunCovariance) -> Result<AsymptoticLaw> {
    let phi = phi_hat(m);
    let gamma = 1.0 / (1.0 - phi * phi);
    Ok(law_phi(m, omega)?.scaled(gamma))
}

/// The five regimes of the limit law of Ĉ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CCase {
    /// `σ = 0`
    Zero,
    /// `σ > 0, p ≠ q`
    PositiveRegular,
    /// `σ > 0, p = q`
    PositiveEqualMarginals,
    /// `σ < 0, p ≠ 1 − q`
    NegativeRegular,
    /// `σ < 0, p = 1 − q`
    NegativeComplementMarginals,
}

impl CCase {
    /// The regime that holds exactly at `(p, q, σ)`.
    pub fn classify(p: f64, q: f64, sigma: f64) -> Self {
        if sigma == 0.0 {
            CCase::Zero
        } else if sigma > 0.0 {
            if p == q {
                CCase::PositiveEqualMarginals
            } else {
                CCase::PositiveRegular
            }
        } else if p + q == 1.0 {
            CCase::NegativeComplementMarginals
        } else {
            CCase::NegativeRegular
        }
    }
}

/// Monte Carlo settings for the simulated laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSpec {
    pub draws: usize,
    pub seed: u64,
}

/// Law of `Ĉ − C` in regime `case`, evaluated at `(p, q, r)` with Ω and `n`.
pub fn law_c_at(
    p: f64,
    q: f64,
    r: f64,
    omega: &LongRunCovariance,
    n: u64,
    case: CCase,
    mc: McSpec,
) -> Result<AsymptoticLaw> {
    let j = JacobianSet::at(p, q, r)?;
    let nf = n as f64;
    let m_plus = p.min(q) - p * q;
    let m_minus = p * q - (p + q - 1.0).max(0.0);
    match case {
        CCase::Zero => {
            let base_sd = (quad(omega, j.delta) / nf).sqrt();
            if !(base_sd > 0.0) {
                return Err(Error::Singular("ΔᵀΩΔ is not positive".into()));
            }
            Ok(AsymptoticLaw {
                kind: LawKind::HalfNormalMix {
                    scale_plus: 1.0 / m_plus,
                    scale_minus: 1.0 / m_minus,
                    base_sd,
                },
                n,
            })
        }
        CCase::PositiveRegular => {
            let a = j.lambda_plus * j.j_h_plus;
            AsymptoticLaw::gaussian(quad(omega, a.transpose()) / nf, n)
        }
        CCase::NegativeRegular => {
            let a = j.lambda_minus * j.j_h_minus;
            AsymptoticLaw::gaussian(quad(omega, a.transpose()) / nf, n)
        }
        CCase::PositiveEqualMarginals | CCase::NegativeComplementMarginals => {
            if mc.draws == 0 {
                return Err(Error::Config("at least one Monte Carlo draw is needed".into()));
            }
            let root = omega.sqrt();
            let jf = j.j_f * root;
            let (lambda, positive) = if case == CCase::PositiveEqualMarginals {
                (j.lambda_plus, true)
            } else {
                (j.lambda_minus, false)
            };
            let draws = simulate_functional(&jf, lambda, positive, nf.sqrt(), mc);
            Ok(AsymptoticLaw {
                kind: LawKind::MonteCarlo { draws },
                n,
            })
        }
    }
}

fn simulate_functional(
    jf: &nalgebra::Matrix4x3<f64>,
    lambda: RowVector2<f64>,
    positive: bool,
    sqrt_n: f64,
    mc: McSpec,
) -> Vec<f64> {
    let mut rng = seed::rng(mc.seed, &[0x4c41_5743]);
    let mut draws: Vec<f64> = (0..mc.draws)
        .map(|_| {
            let z = Vector3::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            );
            let v: Vector4<f64> = jf * z;
            let second = if positive {
                v[0].min(v[1]) - v[2]
            } else if v[0] > -v[1] {
                v[2] - (v[0] + v[1])
            } else {
                v[2]
            };
            (lambda[0] * v[3] + lambda[1] * second) / sqrt_n
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    draws
}

/// Law of `Ĉ − C` at the plug-in estimates. `case = None` picks the regime
/// holding exactly at the estimates.
pub fn law_c(
    m: &MomentEstimates,
    omega: &LongRunCovariance,
    case: Option<CCase>,
    mc: McSpec,
) -> Result<AsymptoticLaw> {
    check_inputs(m, omega)?;
    let case = case.unwrap_or_else(|| CCase::classify(m.p_hat, m.q_hat, m.sigma_hat));
    law_c_at(m.p_hat, m.q_hat, m.r_hat, omega, m.n, case, mc)
}

/// Which hypothesis about σ to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaHypothesis {
    NonNegative,
    NonPositive,
    Zero,
}

/// Gaussian test on `σ = r − pq`.
pub fn test_sigma_sign(
    m: &MomentEstimates,
    omega: &LongRunCovariance,
    hypothesis: SigmaHypothesis,
) -> Result<TestResult> {
    let j = check_inputs(m, omega)?;
    let sd = (quad(omega, j.delta) / m.n as f64).sqrt();
    let z = m.sigma_hat / sd;
    let (p, text) = match hypothesis {
        SigmaHypothesis::NonNegative => (normal::cdf(z), "sigma >= 0"),
        SigmaHypothesis::NonPositive => (normal::sf(z), "sigma <= 0"),
        SigmaHypothesis::Zero => (clip(2.0 * normal::cdf(z).min(normal::sf(z))), "sigma = 0"),
    };
    Ok(TestResult {
        hypothesis: text.into(),
        statistic: z,
        p_value: clip(p),
        components: None,
    })
}

/// Restriction on the marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalHypothesis {
    /// `p = q`
    Equal,
    /// `p = 1 − q`
    Complement,
}

/// Two-sided Gaussian test of `p = q` or `p = 1 − q`.
pub fn test_pq(
    m: &MomentEstimates,
    omega: &LongRunCovariance,
    hypothesis: MarginalHypothesis,
) -> Result<TestResult> {
    m.require_interior()?;
    let o = &omega.omega;
    let (stat, var, text) = match hypothesis {
        MarginalHypothesis::Equal => (
            m.p_hat - m.q_hat,
            o[0][0] - 2.0 * o[0][1] + o[1][1],
            "p = q",
        ),
        MarginalHypothesis::Complement => (
            m.p_hat + m.q_hat - 1.0,
            o[0][0] + 2.0 * o[0][1] + o[1][1],
            "p = 1 - q",
        ),
    };
    let sd = (var / m.n as f64).sqrt();
    let (z, p) = if stat == 0.0 {
        (0.0, 1.0)
    } else if !(sd > 0.0) {
        (stat.signum() * f64::INFINITY, 0.0)
    } else {
        let z = stat / sd;
        (z, clip(2.0 * normal::sf(z.abs())))
    };
    Ok(TestResult {
        hypothesis: text.into(),
        statistic: z,
        p_value: p,
        components: None,
    })
}

/// Which measure a Wald test or interval refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaldMeasure {
    YuleQ,
    Phi,
}

impl WaldMeasure {
    fn name(&self) -> &'static str {
        match self {
            WaldMeasure::YuleQ => "yule_q",
            WaldMeasure::Phi => "phi",
        }
    }
}

/// Point estimate, its transform, and the law of the transformed estimator.
fn wald_parts(
    measure: WaldMeasure,
    m: &MomentEstimates,
    omega: &LongRunCovariance,
    method: Method,
) -> Result<(f64, f64, f64)> {
    let point = match measure {
        WaldMeasure::YuleQ => yule_q_hat(m),
        WaldMeasure::Phi => phi_hat(m),
    };
    let (center, law) = match (measure, method) {
        (WaldMeasure::YuleQ, Method::Standard) => (point, law_q(m, omega)?),
        (WaldMeasure::YuleQ, Method::Fisher) => (half_log_or_hat(m), law_zq(m, omega)?),
        (WaldMeasure::Phi, Method::Standard) => (point, law_phi(m, omega)?),
        (WaldMeasure::Phi, Method::Fisher) => (fisher(point)?, law_zphi(m, omega)?),
    };
    Ok((point, center, law.sd()))
}

/// Two-sided Wald test of `θ = theta0` for Q or φ.
pub fn test_measure(
    measure: WaldMeasure,
    m: &MomentEstimates,
    omega: &LongRunCovariance,
    theta0: f64,
    method: Method,
) -> Result<TestResult> {
    let (_, center, sd) = wald_parts(measure, m, omega, method)?;
    let target = match method {
        Method::Standard => theta0,
        Method::Fisher => fisher(theta0)?,
    };
    let z = (center - target) / sd;
    Ok(TestResult {
        hypothesis: format!("{} = {theta0}", measure.name()),
        statistic: z,
        p_value: clip(2.0 * normal::sf(z.abs())),
        components: None,
    })
}

/// Wald interval for Q or φ; Fisher intervals are built on the transformed
/// scale and mapped back.
pub fn ci(
    measure: WaldMeasure,
    m: &MomentEstimates,
    omega: &LongRunCovariance,
    level: f64,
    method: Method,
) -> Result<IntervalEstimate> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level {level} must lie in (0, 1)")));
    }
    let (point, center, sd) = wald_parts(measure, m, omega, method)?;
    let z = z_two_sided(level);
    let (lower, upper) = match method {
        Method::Standard => (center - z * sd, center + z * sd),
        Method::Fisher => (fisher_inv(center - z * sd), fisher_inv(center + z * sd)),
    };
    Ok(IntervalEstimate {
        measure: measure.name().into(),
        point,
        lower,
        upper,
        level,
        method,
        construction: Construction::ClosedForm,
        non_interval_flag: false,
        n: m.n,
        diagnostics: Diagnostics::default(),
    })
}

/// Everything the test for Cole's C needs, computed once per data set.
struct CTester {
    m: MomentEstimates,
    omega: LongRunCovariance,
    c_hat: f64,
    z_hat: f64,
    gamma: f64,
    method: Method,
    mc: McSpec,
    law_pos_regular: AsymptoticLaw,
    law_neg_regular: AsymptoticLaw,
    law_zero: AsymptoticLaw,
    law_pos_equal: OnceCell<AsymptoticLaw>,
    law_neg_complement: OnceCell<AsymptoticLaw>,
    p_pq_equal: f64,
    p_pq_complement: f64,
    p_sigma_nonneg: f64,
    p_sigma_nonpos: f64,
    p_sigma_zero: f64,
}

impl CTester {
    fn new(m: &MomentEstimates, omega: &LongRunCovariance, method: Method, mc: McSpec) -> Result<Self> {
        // Orient the table so that p̂ ≤ q̂; the combined test is symmetric in
        // X and Y and this makes the computation bit-identical under a swap.
        let (m, omega) = if m.table.n10 > m.table.n01 {
            (m.swapped(), omega.swapped())
        } else {
            (*m, *omega)
        };
        check_inputs(&m, &omega)?;
        let c_hat = cole_hat(&m);
        let (z_hat, gamma) = match method {
            Method::Standard => (c_hat, 1.0),
            Method::Fisher => (fisher(c_hat)?, 1.0 / (1.0 - c_hat * c_hat)),
        };
        let (p, q, r, n) = (m.p_hat, m.q_hat, m.r_hat, m.n);
        let law = |case| law_c_at(p, q, r, &omega, n, case, mc).map(|l| l.scaled(gamma));
        Ok(Self {
            law_pos_regular: law(CCase::PositiveRegular)?,
            law_neg_regular: law(CCase::NegativeRegular)?,
            law_zero: law(CCase::Zero)?,
            law_pos_equal: OnceCell::new(),
            law_neg_complement: OnceCell::new(),
            p_pq_equal: test_pq(&m, &omega, MarginalHypothesis::Equal)?.p_value,
            p_pq_complement: test_pq(&m, &omega, MarginalHypothesis::Complement)?.p_value,
            p_sigma_nonneg: test_sigma_sign(&m, &omega, SigmaHypothesis::NonNegative)?.p_value,
            p_sigma_nonpos: test_sigma_sign(&m, &omega, SigmaHypothesis::NonPositive)?.p_value,
            p_sigma_zero: test_sigma_sign(&m, &omega, SigmaHypothesis::Zero)?.p_value,
            m,
            omega,
            c_hat,
            z_hat,
            gamma,
            method,
            mc,
        })
    }

    fn statistic(&self, c0: f64) -> Result<f64> {
        Ok(match self.method {
            Method::Standard => self.c_hat - c0,
            Method::Fisher => self.z_hat - fisher(c0)?,
        })
    }

    fn degenerate_law(&self, positive: bool) -> Result<&AsymptoticLaw> {
        let (cell, case) = if positive {
            (&self.law_pos_equal, CCase::PositiveEqualMarginals)
        } else {
            (&self.law_neg_complement, CCase::NegativeComplementMarginals)
        };
        if let Some(l) = cell.get() {
            return Ok(l);
        }
        let mc = McSpec {
            draws: self.mc.draws,
            seed: seed::derive(self.mc.seed, &[if positive { 1 } else { 2 }]),
        };
        let law = law_c_at(
            self.m.p_hat,
            self.m.q_hat,
            self.m.r_hat,
            &self.omega,
            self.m.n,
            case,
            mc,
        )?
        .scaled(self.gamma);
        Ok(cell.get_or_init(|| law))
    }

    fn draws_used(&self) -> usize {
        self.law_pos_equal.get().map_or(0, |_| self.mc.draws)
            + self.law_neg_complement.get().map_or(0, |_| self.mc.draws)
    }

    /// Full test. Always evaluates the simulated law.
    fn test(&self, c0: f64, strategy: CombinationStrategy) -> Result<TestResult> {
        let t = self.statistic(c0)?;
        let components = if c0 == 0.0 {
            let p_zero = self.law_zero.two_sided_p(t);
            CComponents {
                p_eq: None,
                p_neq: None,
                p_pq: None,
                p_sigma: self.p_sigma_zero,
                p_zero: Some(p_zero),
                strategy,
            }
        } else {
            let positive = c0 > 0.0;
            let p_eq = self.degenerate_law(positive)?.two_sided_p(t);
            let (regular, p_pq, p_sigma) = if positive {
                (&self.law_pos_regular, self.p_pq_equal, self.p_sigma_nonneg)
            } else {
                (&self.law_neg_regular, self.p_pq_complement, self.p_sigma_nonpos)
            };
            CComponents {
                p_eq: Some(p_eq),
                p_neq: Some(regular.two_sided_p(t)),
                p_pq: Some(p_pq),
                p_sigma,
                p_zero: None,
                strategy,
            }
        };
        Ok(TestResult {
            hypothesis: format!("cole = {c0}"),
            statistic: t,
            p_value: components.combined(),
            components: Some(components),
        })
    }

    /// Accept/reject decision at level `alpha`, simulating the degenerate
    /// law only when it can change the outcome.
    fn accepts(&self, c0: f64, strategy: CombinationStrategy, alpha: f64) -> Result<bool> {
        let t = self.statistic(c0)?;
        if c0 == 0.0 {
            let p = strategy.combine_zero(self.law_zero.two_sided_p(t), self.p_sigma_zero);
            return Ok(p >= alpha);
        }
        let positive = c0 > 0.0;
        let (regular, p_pq, p_sigma) = if positive {
            (&self.law_pos_regular, self.p_pq_equal, self.p_sigma_nonneg)
        } else {
            (&self.law_neg_regular, self.p_pq_complement, self.p_sigma_nonpos)
        };
        let p_neq = regular.two_sided_p(t);
        let low = strategy.combine(0.0, p_neq, p_pq, p_sigma) >= alpha;
        let high = strategy.combine(1.0, p_neq, p_pq, p_sigma) >= alpha;
        if low == high {
            return Ok(low);
        }
        let p_eq = self.degenerate_law(positive)?.two_sided_p(t);
        Ok(strategy.combine(p_eq, p_neq, p_pq, p_sigma) >= alpha)
    }
}

/// Combined test of `C = c0` for `c0 ∈ (−1, 1)`.
pub fn test_c(
    m: &MomentEstimates,
    omega: &LongRunCovariance,
    c0: f64,
    opts: &InferenceOptions,
) -> Result<TestResult> {
    if !(c0 > -1.0 && c0 < 1.0) {
        return Err(Error::Domain(format!("c0 = {c0} must lie in (-1, 1)")));
    }
    let tester = CTester::new(
        m,
        omega,
        opts.method,
        McSpec {
            draws: opts.mc_draws,
            seed: opts.seed,
        },
    )?;
    tester.test(c0, opts.strategy)
}

/// Confidence set for Cole's C by inverting [`test_c`] on the grid
/// `{i/h : |i| < h}` with `h = round(1/grid_step)`. The reported interval is
/// the hull of the accepted candidates.
pub fn ci_c(
    m: &MomentEstimates,
    omega: &LongRunCovariance,
    opts: &InferenceOptions,
) -> Result<IntervalEstimate> {
    opts.validate()?;
    let tester = CTester::new(
        m,
        omega,
        opts.method,
        McSpec {
            draws: opts.mc_draws,
            seed: opts.seed,
        },
    )?;
    let h = (1.0 / opts.grid_step).round() as i64;
    let alpha = 1.0 - opts.level;
    let mut accepted = Vec::with_capacity(2 * h as usize);
    for i in (1 - h)..h {
        let c0 = i as f64 / h as f64;
        accepted.push((c0, tester.accepts(c0, opts.strategy, alpha)?));
    }
    let first = accepted.iter().position(|a| a.1);
    let last = accepted.iter().rposition(|a| a.1);
    let mut diagnostics = Diagnostics {
        strategy: Some(opts.strategy),
        mc_draws: tester.draws_used(),
        seed: Some(opts.seed),
        warnings: Vec::new(),
    };
    let (lower, upper, non_interval) = match (first, last) {
        (Some(a), Some(b)) => {
            let gap = accepted[a..=b].iter().any(|x| !x.1);
            if gap {
                diagnostics
                    .warnings
                    .push("the acceptance set is not an interval; reporting its hull".into());
            }
            (accepted[a].0, accepted[b].0, gap)
        }
        _ => {
            diagnostics
                .warnings
                .push("every candidate value was rejected; reporting the point estimate".into());
            (tester.c_hat, tester.c_hat, false)
        }
    };
    Ok(IntervalEstimate {
        measure: "cole".into(),
        point: tester.c_hat,
        lower,
        upper,
        level: opts.level,
        method: opts.method,
        construction: Construction::GridInversion {
            steps_per_unit: h as u64,
        },
        non_interval_flag: non_interval,
        n: m.n,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::omega_iid;
    use crate::joint::ContingencyTable;

    fn smallpox() -> (MomentEstimates, LongRunCovariance) {
        let m = MomentEstimates::from_table(&ContingencyTable::new(197, 2, 139, 19).unwrap()).unwrap();
        let o = omega_iid(&m).unwrap();
        (m, o)
    }

    fn table(n11: u64, n10: u64, n01: u64, n00: u64) -> (MomentEstimates, LongRunCovariance) {
        let m = MomentEstimates::from_table(&ContingencyTable::new(n11, n10, n01, n00).unwrap()).unwrap();
        let o = omega_iid(&m).unwrap();
        (m, o)
    }

    #[test]
    fn fisher_round_trip() {
        assert_eq!(fisher(0.0).unwrap(), 0.0);
        assert!((fisher_inv(fisher(0.86).unwrap()) - 0.86).abs() < 1e-14);
        assert!(fisher(1.0).is_err());
        assert!(fisher(-1.5).is_err());
    }

    #[test]
    fn fisher_of_q_is_half_log_odds_ratio() {
        let (m, _) = smallpox();
        let q = yule_q_hat(&m);
        assert!((fisher(q).unwrap() - half_log_or_hat(&m)).abs() < 1e-12);
        assert!((half_log_or_hat(&m) - 0.5 * (3743.0f64 / 278.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn wald_intervals_match_reported_values() {
        let (m, o) = smallpox();
        let q_f = ci(WaldMeasure::YuleQ, &m, &o, 0.9, Method::Fisher).unwrap();
        assert!((q_f.lower - 0.59).abs() <= 0.01 && (q_f.upper - 0.96).abs() <= 0.01);
        let q_s = ci(WaldMeasure::YuleQ, &m, &o, 0.9, Method::Standard).unwrap();
        assert!((q_s.lower - 0.70).abs() <= 0.01 && (q_s.upper - 1.02).abs() <= 0.01);
        assert!(q_s.upper > 1.0);
        for method in [Method::Standard, Method::Fisher] {
            let p = ci(WaldMeasure::Phi, &m, &o, 0.9, method).unwrap();
            assert!((p.lower - 0.16).abs() <= 0.01 && (p.upper - 0.30).abs() <= 0.01);
        }
    }

    #[test]
    fn wald_duality() {
        let (m, o) = table(60, 30, 25, 85);
        for method in [Method::Standard, Method::Fisher] {
            for measure in [WaldMeasure::YuleQ, WaldMeasure::Phi] {
                let iv = ci(measure, &m, &o, 0.9, method).unwrap();
                for i in 1..399 {
                    let theta = -0.995 + i as f64 * 0.005;
                    let t = test_measure(measure, &m, &o, theta, method).unwrap();
                    let strictly_inside = theta > iv.lower + 1e-9 && theta < iv.upper - 1e-9;
                    let strictly_outside = theta < iv.lower - 1e-9 || theta > iv.upper + 1e-9;
                    if strictly_inside {
                        assert!(t.p_value > 0.1);
                    }
                    if strictly_outside {
                        assert!(t.p_value < 0.1);
                    }
                }
            }
        }
    }

    #[test]
    fn law_scaling_and_symmetry() {
        let (m, o) = table(60, 30, 25, 85);
        let (m4, o4) = table(240, 120, 100, 340);
        let v1 = law_q(&m, &o).unwrap().sd();
        let v4 = law_q(&m4, &o4).unwrap().sd();
        assert!((v1 / v4 - 2.0).abs() < 1e-12);
        let (ms, os) = (m.swapped(), o.swapped());
        assert!((law_q(&ms, &os).unwrap().sd() - v1).abs() < 1e-15);
        assert!((law_phi(&ms, &os).unwrap().sd() - law_phi(&m, &o).unwrap().sd()).abs() < 1e-15);
    }

    #[test]
    fn phi_variance_at_independence() {
        let (m, o) = table(25, 25, 25, 25);
        let law = law_phi(&m, &o).unwrap();
        let delta = Vector3::new(-0.5, -0.5, 1.0);
        let expected = o.quad(&delta) / (0.0625 * 100.0);
        assert!((law.sd().powi(2) - expected).abs() < 1e-15);
        assert_eq!(law_zphi(&m, &o).unwrap().sd(), law.sd());
    }

    #[test]
    fn sigma_and_marginal_tests() {
        let (m, o) = table(25, 25, 25, 25);
        let t = test_sigma_sign(&m, &o, SigmaHypothesis::NonNegative).unwrap();
        assert_eq!(t.p_value, 0.5);
        let (m, o) = smallpox();
        let one = test_sigma_sign(&m, &o, SigmaHypothesis::NonPositive).unwrap();
        assert!(one.p_value < 0.01);
        let two = test_sigma_sign(&m, &o, SigmaHypothesis::Zero).unwrap();
        assert!((two.p_value - 2.0 * one.p_value).abs() < 1e-15);
        assert!(test_pq(&m, &o, MarginalHypothesis::Equal).unwrap().p_value < 1e-6);
        let (m, o) = table(30, 10, 10, 50);
        assert_eq!(test_pq(&m, &o, MarginalHypothesis::Equal).unwrap().p_value, 1.0);
    }

    #[test]
    fn half_normal_mix_is_sign_balanced() {
        let (m, o) = table(40, 20, 60, 80);
        let law = law_c(&m, &o, Some(CCase::Zero), McSpec { draws: 10, seed: 1 }).unwrap();
        assert_eq!(law.cdf(0.0), 0.5);
        assert_eq!(law.cdf(-1e-300), law.cdf_left(0.0));
    }

    #[test]
    fn c_test_components_recombine() {
        let (m, o) = smallpox();
        let opts = InferenceOptions {
            mc_draws: 20_000,
            seed: 5,
            ..Default::default()
        };
        for c0 in [-0.4, 0.0, 0.3, 0.7, 0.95] {
            let t = test_c(&m, &o, c0, &opts).unwrap();
            let c = t.components.unwrap();
            assert_eq!(c.combined(), t.p_value);
            assert!((0.0..=1.0).contains(&t.p_value));
        }
    }

    #[test]
    fn c_test_at_estimate_respects_sigma_bound() {
        let (m, o) = smallpox();
        let opts = InferenceOptions {
            mc_draws: 20_000,
            method: Method::Standard,
            ..Default::default()
        };
        let c_hat = cole_hat(&m);
        let t = test_c(&m, &o, c_hat, &opts).unwrap();
        let c = t.components.unwrap();
        assert_eq!(c.p_neq, Some(1.0));
        assert!(t.p_value >= (2.0 * c.p_sigma).min(1.0) - 1e-15);
    }

    #[test]
    fn c_intervals_match_reported_values() {
        let (m, o) = smallpox();
        let mut opts = InferenceOptions {
            seed: 11,
            ..Default::default()
        };
        let f = ci_c(&m, &o, &opts).unwrap();
        assert!((f.point - 0.83).abs() < 0.005);
        assert!((f.lower - 0.44).abs() <= 0.02 && (f.upper - 0.96).abs() <= 0.02, "{f:?}");
        opts.method = Method::Standard;
        let s = ci_c(&m, &o, &opts).unwrap();
        assert!((s.lower - 0.61).abs() <= 0.02 && (s.upper - 1.00).abs() <= 0.02, "{s:?}");
    }

    #[test]
    fn c_interval_is_swap_invariant_and_reproducible() {
        let (m, o) = table(52, 18, 20, 110);
        let (ms, os) = (m.swapped(), o.swapped());
        let opts = InferenceOptions {
            mc_draws: 5_000,
            seed: 3,
            ..Default::default()
        };
        let a = ci_c(&m, &o, &opts).unwrap();
        let b = ci_c(&ms, &os, &opts).unwrap();
        assert_eq!((a.lower, a.upper), (b.lower, b.upper));
        assert_eq!(a, ci_c(&m, &o, &opts).unwrap());
        for c0 in [-0.5, 0.0, 0.2, 0.6] {
            assert_eq!(
                test_c(&m, &o, c0, &opts).unwrap().p_value,
                test_c(&ms, &os, c0, &opts).unwrap().p_value
            );
        }
    }

    #[test]
    fn lazy_decisions_agree_with_full_test() {
        let (m, o) = table(45, 15, 14, 126);
        let opts = InferenceOptions {
            mc_draws: 5_000,
            seed: 9,
            ..Default::default()
        };
        let tester = CTester::new(&m, &o, opts.method, McSpec { draws: 5_000, seed: 9 }).unwrap();
        for strategy in CombinationStrategy::ALL {
            for i in -19..20 {
                let c0 = i as f64 / 20.0;
                let full = tester.test(c0, strategy).unwrap().p_value >= 0.1;
                assert_eq!(tester.accepts(c0, strategy, 0.1).unwrap(), full, "c0 = {c0}");
            }
        }
    }

    #[test]
    fn independent_data_interval_contains_zero() {
        let (m, o) = table(1250, 1250, 1250, 1250);
        let opts = InferenceOptions {
            mc_draws: 5_000,
            ..Default::default()
        };
        let iv = ci_c(&m, &o, &opts).unwrap();
        assert!(iv.contains(0.0));
    }

    #[test]
    fn strategies_parse_and_nest() {
        for s in CombinationStrategy::ALL {
            assert_eq!(s.name().parse::<CombinationStrategy>().unwrap(), s);
        }
        // Dropping a Bonferroni step never lowers the p-value.
        let p = CombinationStrategy::Full.combine(0.03, 0.2, 0.01, 0.4);
        assert!(CombinationStrategy::NoSigmaTest.combine(0.03, 0.2, 0.01, 0.4) >= p / 2.0);
        assert_eq!(CombinationStrategy::Basic.combine(0.03, 0.2, 0.01, 0.4), 0.2);
    }

    #[test]
    fn interval_serialises() {
        let (m, o) = smallpox();
        let iv = ci(WaldMeasure::YuleQ, &m, &o, 0.9, Method::Fisher).unwrap();
        let s = serde_json::to_string(&iv).unwrap();
        let back: IntervalEstimate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, iv);
    }
}
