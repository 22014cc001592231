//! Population dependence measures for two binary events.
//!
//! Everything here is a pure function of a [`JointBinaryDistribution`]. The
//! cell probabilities are written `a = r`, `b = p − r`, `c = q − r` and
//! `d = 1 − p − q + r`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::{fh_bounds, JointBinaryDistribution, PerfectDependence};
use crate::tetrachoric;

/// The measures that can be evaluated on a joint distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "g")]
pub enum MeasureKind {
    Covariance,
    Phi,
    Cole,
    YuleQ,
    /// Generalised Yule coefficient with exponent `g ∈ (0, 1]`.
    YuleG(f64),
    OddsRatio,
    Msc,
    CramersV,
    TschuprowT,
    PearsonCc,
    DistanceCor,
    ChatterjeeXi,
    Uncertainty,
    Tetrachoric,
}

impl MeasureKind {
    /// Yule's coefficient of colligation `Y = Q_{1/2}`.
    pub const YULE_Y: MeasureKind = MeasureKind::YuleG(0.5);

    /// Every measure, with Yule's `Y` standing in for the generalised family.
    pub fn all() -> Vec<MeasureKind> {
        use MeasureKind::*;
        vec![
            Covariance,
            Phi,
            Cole,
            YuleQ,
            Self::YULE_Y,
            OddsRatio,
            Msc,
            CramersV,
            TschuprowT,
            PearsonCc,
            DistanceCor,
            ChatterjeeXi,
            Uncertainty,
            Tetrachoric,
        ]
    }

    pub fn name(&self) -> String {
        use MeasureKind::*;
        match self {
            Covariance => "covariance".into(),
            Phi => "phi".into(),
            Cole => "cole".into(),
            YuleQ => "yule_q".into(),
            YuleG(g) if *g == 0.5 => "yule_y".into(),
            YuleG(g) => format!("yule_g({g})"),
            OddsRatio => "odds_ratio".into(),
            Msc => "msc".into(),
            CramersV => "cramers_v".into(),
            TschuprowT => "tschuprow_t".into(),
            PearsonCc => "pearson_cc".into(),
            DistanceCor => "distance_cor".into(),
            ChatterjeeXi => "chatterjee_xi".into(),
            Uncertainty => "uncertainty".into(),
            Tetrachoric => "tetrachoric".into(),
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for MeasureKind {
    type Err = Error;

    /// Accepts the names produced by [`MeasureKind::name`] plus a few aliases
    /// (`c`, `q`, `y`, `or`, `v`, `t`, `pc`, `tc`, `u`, `yule_g=0.75`).
    fn from_str(s: &str) -> Result<Self> {
        use MeasureKind::*;
        let lower = s.trim().to_ascii_lowercase();
        let generalised = lower
            .strip_prefix("yule_g(")
            .and_then(|rest| rest.strip_suffix(')'))
            .or_else(|| lower.strip_prefix("yule_g="))
            .or_else(|| lower.strip_prefix("g="));
        if let Some(g) = generalised {
            let g: f64 = g
                .parse()
                .map_err(|_| Error::Parse(format!("invalid exponent in '{s}'")))?;
            check_exponent(g)?;
            return Ok(YuleG(g));
        }
        Ok(match lower.as_str() {
            "cov" | "covariance" => Covariance,
            "phi" => Phi,
            "c" | "cole" => Cole,
            "q" | "yule_q" => YuleQ,
            "y" | "yule_y" => Self::YULE_Y,
            "or" | "odds_ratio" => OddsRatio,
            "msc" => Msc,
            "v" | "cramers_v" => CramersV,
            "t" | "tschuprow_t" => TschuprowT,
            "pc" | "pearson_cc" => PearsonCc,
            "dcor" | "distance_cor" => DistanceCor,
            "xi" | "chatterjee_xi" => ChatterjeeXi,
            "u" | "uncertainty" => Uncertainty,
            "tc" | "tetrachoric" => Tetrachoric,
            _ => return Err(Error::Parse(format!("unknown measure '{s}'"))),
        })
    }
}

/// A measure evaluated on a distribution. The odds ratio may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub kind: MeasureKind,
    #[serde(with = "crate::extended")]
    pub value: f64,
}

/// The odds ratio, which is infinite under perfect positive dependence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OddsRatio {
    Finite(f64),
    Infinite,
}

impl OddsRatio {
    pub fn as_f64(&self) -> f64 {
        match self {
            OddsRatio::Finite(x) => *x,
            OddsRatio::Infinite => f64::INFINITY,
        }
    }

    /// `½ log OR`, the Fisher transform of Yule's Q. Fails at 0 and ∞.
    pub fn half_log(&self) -> Result<f64> {
        match self {
            OddsRatio::Finite(x) if *x > 0.0 => Ok(0.5 * x.ln()),
            _ => Err(Error::Domain(
                "log odds ratio is undefined under perfect dependence".into(),
            )),
        }
    }
}

fn cells(d: &JointBinaryDistribution) -> (f64, f64, f64, f64) {
    let [a, b, c, d] = d.cells();
    (a, b, c, d)
}

/// `r − pq`.
pub fn covariance(d: &JointBinaryDistribution) -> f64 {
    d.covariance()
}

fn marginal_variance_product(d: &JointBinaryDistribution) -> f64 {
    let (a, b, c, dd) = cells(d);
    (a + b) * (c + dd) * (a + c) * (b + dd)
}

/// Pearson correlation of the two indicators.
pub fn phi(d: &JointBinaryDistribution) -> f64 {
    let v = covariance(d) / marginal_variance_product(d).sqrt();
    v.clamp(-1.0, 1.0)
}

/// The values of φ under perfect negative and perfect positive dependence.
pub fn phi_bounds(p: f64, q: f64) -> Result<(f64, f64)> {
    let b = fh_bounds(p, q)?;
    let s = (p * (1.0 - p) * q * (1.0 - q)).sqrt();
    let pq = p * q;
    Ok((((b.lower - pq) / s).max(-1.0), ((b.upper - pq) / s).min(1.0)))
}

/// `min(p, q) − pq`, the largest attainable covariance.
pub fn m_plus(d: &JointBinaryDistribution) -> f64 {
    let (a, b, c, dd) = cells(d);
    // p ≤ q exactly when b ≤ c
    if b <= c {
        (a + b) * (b + dd)
    } else {
        (a + c) * (c + dd)
    }
}

/// `pq − max(0, p + q − 1)`, the modulus of the smallest attainable covariance.
pub fn m_minus(d: &JointBinaryDistribution) -> f64 {
    let (a, b, c, dd) = cells(d);
    // p + q ≤ 1 exactly when a ≤ d
    if a <= dd {
        (a + b) * (a + c)
    } else {
        (c + dd) * (b + dd)
    }
}

/// Cole's C: the covariance normalised by its Fréchet–Hoeffding bound on the
/// side of its sign.
pub fn cole(d: &JointBinaryDistribution) -> f64 {
    match d.perfect_dependence() {
        PerfectDependence::Positive => return 1.0,
        PerfectDependence::Negative => return -1.0,
        PerfectDependence::None => {}
    }
    let s = covariance(d);
    let v = if s >= 0.0 { s / m_plus(d) } else { s / m_minus(d) };
    v.clamp(-1.0, 1.0)
}

/// Yule's Q, `(ad − bc)/(ad + bc)`.
pub fn yule_q(d: &JointBinaryDistribution) -> f64 {
    match d.perfect_dependence() {
        PerfectDependence::Positive => return 1.0,
        PerfectDependence::Negative => return -1.0,
        PerfectDependence::None => {}
    }
    let (a, b, c, dd) = cells(d);
    let (x, y) = (a * dd, b * c);
    ((x - y) / (x + y)).clamp(-1.0, 1.0)
}

fn check_exponent(g: f64) -> Result<()> {
    if !(g > 0.0 && g <= 1.0) {
        return Err(Error::Domain(format!("exponent g = {g} must lie in (0, 1]")));
    }
    Ok(())
}

/// `((ad)^g − (bc)^g)/((ad)^g + (bc)^g)`; `g = 1` is Yule's Q, `g = 1/2` Yule's Y.
pub fn yule_g(d: &JointBinaryDistribution, g: f64) -> Result<f64> {
    check_exponent(g)?;
    if g == 1.0 {
        return Ok(yule_q(d));
    }
    match d.perfect_dependence() {
        PerfectDependence::Positive => return Ok(1.0),
        PerfectDependence::Negative => return Ok(-1.0),
        PerfectDependence::None => {}
    }
    let (a, b, c, dd) = cells(d);
    let (x, y) = ((a * dd).powf(g), (b * c).powf(g));
    Ok(((x - y) / (x + y)).clamp(-1.0, 1.0))
}

/// `ad/(bc)`.
pub fn odds_ratio(d: &JointBinaryDistribution) -> OddsRatio {
    match d.perfect_dependence() {
        PerfectDependence::Positive => OddsRatio::Infinite,
        PerfectDependence::Negative => OddsRatio::Finite(0.0),
        PerfectDependence::None => {
            let (a, b, c, dd) = cells(d);
            OddsRatio::Finite(a * dd / (b * c))
        }
    }
}

/// `Q = (OR − 1)/(OR + 1)`.
pub fn or_to_q(or: OddsRatio) -> Result<f64> {
    match or {
        OddsRatio::Infinite => Ok(1.0),
        OddsRatio::Finite(x) if x >= 0.0 && x.is_finite() => Ok((x - 1.0) / (x + 1.0)),
        OddsRatio::Finite(x) => Err(Error::Domain(format!("odds ratio {x} is invalid"))),
    }
}

/// `OR = (1 + Q)/(1 − Q)`.
pub fn q_to_or(q: f64) -> Result<OddsRatio> {
    if !(-1.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("Q = {q} must lie in [-1, 1]")));
    }
    if q == 1.0 {
        Ok(OddsRatio::Infinite)
    } else {
        Ok(OddsRatio::Finite((1.0 + q) / (1.0 - q)))
    }
}

/// Contingency-table based coefficients; in the 2×2 case all are functions of φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContingencyCoefficients {
    /// Mean square contingency, `χ²/n`.
    pub msc: f64,
    pub cramers_v: f64,
    pub tschuprow_t: f64,
    pub pearson_cc: f64,
}

pub fn contingency_coefficients(d: &JointBinaryDistribution) -> ContingencyCoefficients {
    let f = phi(d);
    let msc = f * f;
    ContingencyCoefficients {
        msc,
        cramers_v: f.abs(),
        tschuprow_t: f.abs(),
        pearson_cc: (msc / (1.0 + msc)).sqrt(),
    }
}

/// Distance correlation, Chatterjee's ξ and the symmetric uncertainty coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FurtherMeasures {
    pub distance_cor: f64,
    pub chatterjee_xi: f64,
    pub uncertainty: f64,
}

fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum()
}

/// `U = 2(H(X) + H(Y) − H(X, Y))/(H(X) + H(Y))` with natural logarithms.
pub fn uncertainty(d: &JointBinaryDistribution) -> f64 {
    let (p, q) = (d.p(), d.q());
    let hx = entropy(&[p, 1.0 - p]);
    let hy = entropy(&[q, 1.0 - q]);
    let hxy = entropy(&d.cells());
    (2.0 * (hx + hy - hxy) / (hx + hy)).clamp(0.0, 1.0)
}

pub fn further_measures(d: &JointBinaryDistribution) -> FurtherMeasures {
    let f = phi(d);
    FurtherMeasures {
        distance_cor: f.abs(),
        chatterjee_xi: f * f,
        uncertainty: uncertainty(d),
    }
}

/// Evaluates a single measure.
pub fn evaluate(d: &JointBinaryDistribution, kind: MeasureKind) -> Result<MeasureValue> {
    use MeasureKind::*;
    let value = match kind {
        Covariance => covariance(d),
        Phi => phi(d),
        Cole => cole(d),
        YuleQ => yule_q(d),
        YuleG(g) => yule_g(d, g)?,
        OddsRatio => odds_ratio(d).as_f64(),
        Msc => contingency_coefficients(d).msc,
        CramersV => contingency_coefficients(d).cramers_v,
        TschuprowT => contingency_coefficients(d).tschuprow_t,
        PearsonCc => contingency_coefficients(d).pearson_cc,
        DistanceCor => phi(d).abs(),
        ChatterjeeXi => phi(d).powi(2),
        Uncertainty => uncertainty(d),
        Tetrachoric => tetrachoric::tetrachoric(d)?,
    };
    Ok(MeasureValue { kind, value })
}

/// Evaluates every measure in [`MeasureKind::all`].
pub fn evaluate_all(d: &JointBinaryDistribution) -> Result<Vec<MeasureValue>> {
    MeasureKind::all().into_iter().map(|k| evaluate(d, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jd(p: f64, q: f64, r: f64) -> JointBinaryDistribution {
        JointBinaryDistribution::new(p, q, r).unwrap()
    }

    fn smallpox() -> JointBinaryDistribution {
        JointBinaryDistribution::from_cells([
            197.0 / 357.0,
            2.0 / 357.0,
            139.0 / 357.0,
            19.0 / 357.0,
        ])
        .unwrap()
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(covariance(&jd(0.5, 0.5, 0.25)), 0.0);
        assert_eq!(covariance(&jd(0.5, 0.5, 0.5)), 0.25);
        let expected = 197.0 / 357.0 - 199.0 * 336.0 / (357.0 * 357.0);
        assert!((covariance(&smallpox()) - expected).abs() < 1e-15);
        assert!((expected - 0.02719).abs() < 1e-5);
    }

    #[test]
    fn phi_examples() {
        assert!((phi(&smallpox()) - 0.23).abs() < 0.005);
        assert_eq!(phi(&jd(0.5, 0.5, 0.5)), 1.0);
        assert!(phi(&jd(0.3, 0.9, 0.27)).abs() < 1e-15);
    }

    #[test]
    fn phi_bounds_examples() {
        assert_eq!(phi_bounds(0.5, 0.5).unwrap(), (-1.0, 1.0));
        let (lo, hi) = phi_bounds(0.2, 0.2).unwrap();
        assert!((lo + 0.25).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
        // p = 1 − q makes perfect negative dependence reach −1.
        let (lo, hi) = phi_bounds(0.1, 0.9).unwrap();
        assert!((lo + 1.0).abs() < 1e-15);
        assert!((hi - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn cole_examples() {
        assert!((cole(&smallpox()) - 0.83).abs() < 0.005);
        assert_eq!(cole(&jd(0.3, 0.7, 0.3)), 1.0);
        assert_eq!(cole(&jd(0.5, 0.5, 0.25)), 0.0);
        assert!((cole(&jd(0.4, 0.4, 0.16 + 0.5 * 0.24)) - 0.5).abs() < 1e-14);
        assert!((cole(&jd(0.3, 0.7, 0.21 - 0.5 * 0.21)) + 0.5).abs() < 1e-14);
    }

    #[test]
    fn yule_examples() {
        let sp = smallpox();
        assert!((yule_q(&sp) - 0.86).abs() < 0.005);
        assert_eq!(yule_q(&jd(0.5, 0.5, 0.25)), 0.0);
        assert_eq!(yule_q(&jd(0.3, 0.7, 0.3)), 1.0);
        assert_eq!(yule_q(&jd(0.6, 0.6, 0.2)), -1.0);
        assert!((yule_g(&sp, 0.5).unwrap() - 0.57).abs() < 0.005);
        assert_eq!(yule_g(&sp, 1.0).unwrap(), yule_q(&sp));
        assert_eq!(yule_g(&jd(0.5, 0.5, 0.25), 0.3).unwrap(), 0.0);
        assert!(yule_g(&sp, 0.0).is_err());
        assert!(yule_g(&sp, 1.5).is_err());
    }

    #[test]
    fn odds_ratio_examples() {
        let or = odds_ratio(&smallpox()).as_f64();
        assert!((or - 3743.0 / 278.0).abs() < 1e-12);
        assert!((odds_ratio(&jd(0.5, 0.5, 0.25)).as_f64() - 1.0).abs() < 1e-15);
        assert_eq!(odds_ratio(&jd(0.3, 0.7, 0.3)), OddsRatio::Infinite);
        let d = jd(0.4, 0.7, 0.3);
        let inv = odds_ratio(&d.complement_b()).as_f64();
        assert!((inv * odds_ratio(&d).as_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn q_or_bijection() {
        assert_eq!(or_to_q(OddsRatio::Finite(1.0)).unwrap(), 0.0);
        assert!((or_to_q(OddsRatio::Finite(3743.0 / 278.0)).unwrap() - 0.8617).abs() < 1e-4);
        assert_eq!(q_to_or(-1.0).unwrap(), OddsRatio::Finite(0.0));
        assert_eq!(q_to_or(1.0).unwrap(), OddsRatio::Infinite);
        assert_eq!(or_to_q(OddsRatio::Infinite).unwrap(), 1.0);
        let sp = smallpox();
        assert!((or_to_q(odds_ratio(&sp)).unwrap() - yule_q(&sp)).abs() < 1e-12);
        assert!(q_to_or(1.2).is_err());
    }

    #[test]
    fn contingency_examples() {
        assert!((contingency_coefficients(&smallpox()).cramers_v - 0.23).abs() < 0.005);
        let c = contingency_coefficients(&jd(0.5, 0.5, 0.25));
        assert_eq!((c.msc, c.cramers_v, c.tschuprow_t, c.pearson_cc), (0.0, 0.0, 0.0, 0.0));
        let c = contingency_coefficients(&jd(0.5, 0.5, 0.5));
        assert!((c.pearson_cc - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn further_examples() {
        let f = further_measures(&jd(0.5, 0.5, 0.25));
        assert_eq!((f.distance_cor, f.chatterjee_xi), (0.0, 0.0));
        assert!(f.uncertainty.abs() < 1e-15);
        let f = further_measures(&jd(0.5, 0.5, 0.5));
        assert_eq!((f.distance_cor, f.chatterjee_xi), (1.0, 1.0));
        assert!((f.uncertainty - 1.0).abs() < 1e-15);
        let f = further_measures(&smallpox());
        assert!((f.distance_cor - 0.2326).abs() < 1e-3);
        assert!((f.chatterjee_xi - 0.0541).abs() < 1e-3);
    }

    /// Entropy-based oracle written from the definition with explicit sums.
    #[test]
    fn uncertainty_matches_mutual_information() {
        let d = smallpox();
        let (p, q) = (d.p(), d.q());
        let joint = d.cells();
        let px = [p, p, 1.0 - p, 1.0 - p];
        let py = [q, 1.0 - q, q, 1.0 - q];
        let mi: f64 = (0..4).map(|i| joint[i] * (joint[i] / (px[i] * py[i])).ln()).sum();
        let hx = -(p * p.ln() + (1.0 - p) * (1.0 - p).ln());
        let hy = -(q * q.ln() + (1.0 - q) * (1.0 - q).ln());
        assert!((uncertainty(&d) - 2.0 * mi / (hx + hy)).abs() < 1e-13);
    }

    #[test]
    fn measure_names_round_trip() {
        for k in MeasureKind::all() {
            assert_eq!(k.name().parse::<MeasureKind>().unwrap(), k);
        }
        assert_eq!("yule_g(0.75)".parse::<MeasureKind>().unwrap(), MeasureKind::YuleG(0.75));
        assert!("nope".parse::<MeasureKind>().is_err());
        assert!("yule_g=2".parse::<MeasureKind>().is_err());
    }

    #[test]
    fn odds_ratio_value_serialises_infinity() {
        let v = MeasureValue {
            kind: MeasureKind::OddsRatio,
            value: f64::INFINITY,
        };
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.contains("\"inf\""));
        let back: MeasureValue = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
