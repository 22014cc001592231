//! Joint distributions of two binary events, 2×2 contingency tables and the
//! Fréchet–Hoeffding bounds on the joint probability.
//!
//! A [`JointBinaryDistribution`] is stored through its four cell probabilities
//!
//! ```text
//!            B        B̄
//!   A        r        p − r
//!   Ā        q − r    1 − p − q + r
//! ```
//!
//! so that flipping an event is a permutation of cells and therefore exact.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cells closer to zero than this count as empty when detecting perfect dependence.
pub const CELL_TOLERANCE: f64 = 1e-12;

/// Joint probabilities outside the Fréchet–Hoeffding bounds by at most this
/// much are clamped onto the bound instead of being rejected.
pub const FH_CLAMP_TOLERANCE: f64 = 1e-12;

/// Sharp bounds on `P(A ∩ B)` given the marginals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetBounds {
    pub lower: f64,
    pub upper: f64,
}

impl FrechetBounds {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, r: f64) -> bool {
        self.lower <= r && r <= self.upper
    }
}

fn check_marginal(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("{name} = {x} must lie in (0, 1)")));
    }
    Ok(())
}

/// Fréchet–Hoeffding bounds `(max(0, p + q − 1), min(p, q))`.
pub fn fh_bounds(p: f64, q: f64) -> Result<FrechetBounds> {
    check_marginal("p", p)?;
    check_marginal("q", q)?;
    Ok(FrechetBounds {
        lower: (p + q - 1.0).max(0.0),
        upper: p.min(q),
    })
}

/// Which extreme of the Fréchet–Hoeffding range a distribution sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerfectDependence {
    Positive,
    Negative,
    None,
}

/// Population distribution of `(1_A, 1_B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointBinaryDistribution {
    /// `[P(A∩B), P(A∩B̄), P(Ā∩B), P(Ā∩B̄)]`
    cells: [f64; 4],
}

impl JointBinaryDistribution {
    /// Builds the distribution from marginals `p`, `q` and joint probability `r`.
    pub fn new(p: f64, q: f64, r: f64) -> Result<Self> {
        let bounds = fh_bounds(p, q)?;
        if !r.is_finite() {
            return Err(Error::Domain(format!("r = {r} is not finite")));
        }
        if r < bounds.lower - FH_CLAMP_TOLERANCE || r > bounds.upper + FH_CLAMP_TOLERANCE {
            return Err(Error::Domain(format!(
                "r = {r} outside the Fréchet–Hoeffding bounds [{}, {}]",
                bounds.lower, bounds.upper
            )));
        }
        let r = r.clamp(bounds.lower, bounds.upper);
        let mut cells = [r, p - r, q - r, 1.0 - p - q + r];
        // Land exactly on the bound that was hit.
        if r == bounds.upper {
            if p <= q {
                cells[1] = 0.0;
            }
            if q <= p {
                cells[2] = 0.0;
            }
        }
        if r == bounds.lower && p + q >= 1.0 {
            cells[3] = 0.0;
        }
        for c in cells.iter_mut() {
            if *c < 0.0 {
                *c = 0.0;
            }
        }
        Ok(Self { cells })
    }

    /// Builds the distribution from the four cell probabilities
    /// `[P(A∩B), P(A∩B̄), P(Ā∩B), P(Ā∩B̄)]`.
    pub fn from_cells(cells: [f64; 4]) -> Result<Self> {
        if cells.iter().any(|c| !c.is_finite() || *c < -FH_CLAMP_TOLERANCE) {
            return Err(Error::Domain(format!("invalid cell probabilities {cells:?}")));
        }
        let cells = cells.map(|c| c.max(0.0));
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("cell probabilities sum to {total}, not 1")));
        }
        let d = Self { cells };
        check_marginal("p", d.p())?;
        check_marginal("q", d.q())?;
        Ok(d)
    }

    /// `P(A)`
    pub fn p(&self) -> f64 {
        self.cells[0] + self.cells[1]
    }

    /// `P(B)`
    pub fn q(&self) -> f64 {
        self.cells[0] + self.cells[2]
    }

    /// `P(A ∩ B)`
    pub fn r(&self) -> f64 {
        self.cells[0]
    }

    pub fn cells(&self) -> [f64; 4] {
        self.cells
    }

    pub fn bounds(&self) -> FrechetBounds {
        let (p, q) = (self.p(), self.q());
        FrechetBounds {
            lower: (p + q - 1.0).max(0.0),
            upper: p.min(q),
        }
    }

    /// `P(A∩B)P(Ā∩B̄) − P(A∩B̄)P(Ā∩B)`, which equals `r − pq`.
    pub fn covariance(&self) -> f64 {
        let [a, b, c, d] = self.cells;
        a * d - b * c
    }

    pub fn is_positively_dependent(&self) -> bool {
        self.covariance() >= 0.0
    }

    pub fn is_negatively_dependent(&self) -> bool {
        self.covariance() <= 0.0
    }

    pub fn is_independent(&self) -> bool {
        self.covariance() == 0.0
    }

    /// Perfect dependence is read off the cells: an empty off-diagonal cell
    /// means `r = min(p, q)`, an empty diagonal cell means `r = max(0, p + q − 1)`.
    pub fn perfect_dependence(&self) -> PerfectDependence {
        let [a, b, c, d] = self.cells;
        if b <= CELL_TOLERANCE || c <= CELL_TOLERANCE {
            PerfectDependence::Positive
        } else if a <= CELL_TOLERANCE || d <= CELL_TOLERANCE {
            PerfectDependence::Negative
        } else {
            PerfectDependence::None
        }
    }

    /// Strictly inside the Fréchet–Hoeffding range.
    pub fn is_interior(&self) -> bool {
        self.perfect_dependence() == PerfectDependence::None
    }

    /// The distribution of `(A, B̄)`: `(p, 1 − q, p − r)`.
    pub fn complement_b(&self) -> Self {
        let [a, b, c, d] = self.cells;
        Self {
            cells: [b, a, d, c],
        }
    }

    /// The distribution of `(B, A)`.
    pub fn swap(&self) -> Self {
        let [a, b, c, d] = self.cells;
        Self {
            cells: [a, c, b, d],
        }
    }

    /// Multiplies the rows by `rows` and the columns by `cols`, then renormalises.
    pub fn with_rescaled_margins(&self, rows: [f64; 2], cols: [f64; 2]) -> Result<Self> {
        if rows.iter().chain(cols.iter()).any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Domain("scaling constants must be positive".into()));
        }
        let [a, b, c, d] = self.cells;
        let scaled = [
            a * rows[0] * cols[0],
            b * rows[0] * cols[1],
            c * rows[1] * cols[0],
            d * rows[1] * cols[1],
        ];
        let total: f64 = scaled.iter().sum();
        Self::from_cells(scaled.map(|x| x / total))
    }

    /// Orders two distributions with identical marginals by the strength of
    /// their positive dependence. `Greater` means `self` is stronger positively
    /// (equivalently weaker negatively) dependent than `other`.
    ///
    /// The ordering is only defined for equal marginals; anything else is rejected.
    pub fn compare_dependence(&self, other: &Self) -> Result<Ordering> {
        if (self.p() - other.p()).abs() > FH_CLAMP_TOLERANCE
            || (self.q() - other.q()).abs() > FH_CLAMP_TOLERANCE
        {
            return Err(Error::Domain(
                "dependence ordering requires identical marginal probabilities".into(),
            ));
        }
        self.r()
            .partial_cmp(&other.r())
            .ok_or_else(|| Error::Domain("non-comparable joint probabilities".into()))
    }
}

/// Absolute frequencies of a 2×2 table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// A ∩ B
    pub n11: u64,
    /// A ∩ B̄
    pub n10: u64,
    /// Ā ∩ B
    pub n01: u64,
    /// Ā ∩ B̄
    pub n00: u64,
}

impl ContingencyTable {
    pub fn new(n11: u64, n10: u64, n01: u64, n00: u64) -> Result<Self> {
        let t = Self { n11, n10, n01, n00 };
        if t.total() == 0 {
            return Err(Error::Domain("contingency table is empty".into()));
        }
        Ok(t)
    }

    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    /// Row total for `A`.
    pub fn n1_(&self) -> u64 {
        self.n11 + self.n10
    }

    /// Column total for `B`.
    pub fn n_1(&self) -> u64 {
        self.n11 + self.n01
    }

    /// Relative frequencies as a population distribution. Fails when a margin
    /// is empty or full.
    pub fn to_distribution(&self) -> Result<JointBinaryDistribution> {
        let n = self.total() as f64;
        JointBinaryDistribution::from_cells([
            self.n11 as f64 / n,
            self.n10 as f64 / n,
            self.n01 as f64 / n,
            self.n00 as f64 / n,
        ])
    }

    /// Exact test on the counts.
    pub fn perfect_dependence(&self) -> PerfectDependence {
        if self.n10 == 0 || self.n01 == 0 {
            PerfectDependence::Positive
        } else if self.n11 == 0 || self.n00 == 0 {
            PerfectDependence::Negative
        } else {
            PerfectDependence::None
        }
    }
}

impl fmt::Display for ContingencyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.n11, self.n10)?;
        write!(f, "{} {}", self.n01, self.n00)
    }
}

/// Parses a 2×2 block such as `"197 2\n139 19"` or `"197,2\n139,19"`.
impl FromStr for ContingencyTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rows: Vec<Vec<&str>> = s
            .lines()
            .map(|line| {
                line.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|tok| !tok.is_empty())
                    .collect::<Vec<_>>()
            })
            .filter(|row| !row.is_empty())
            .collect();
        if rows.len() != 2 || rows.iter().any(|row| row.len() != 2) {
            return Err(Error::Parse(
                "expected a 2x2 block of counts (two rows of two values)".into(),
            ));
        }
        let parse = |tok: &str| {
            tok.parse::<u64>()
                .map_err(|_| Error::Parse(format!("'{tok}' is not a non-negative integer count")))
        };
        Self::new(
            parse(rows[0][0])?,
            parse(rows[0][1])?,
            parse(rows[1][0])?,
            parse(rows[1][1])?,
        )
    }
}
