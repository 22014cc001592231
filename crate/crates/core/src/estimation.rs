//! Sample moments of `W = (X, Y, XY)`, their long-run covariance and the
//! Jacobians of the maps from moments to measures.

use nalgebra::{Matrix2x3, Matrix3, Matrix4x3, RowVector2, RowVector3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::{ContingencyTable, JointBinaryDistribution};

/// How the observations were generated. Time-series mode is asserted by the
/// user; nothing checks the mixing conditions behind it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    #[default]
    Iid,
    TimeSeries,
}

/// An ordered sequence of binary pairs `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedBinarySample {
    pairs: Vec<(u8, u8)>,
    mode: SampleMode,
}

impl PairedBinarySample {
    pub fn new(pairs: Vec<(u8, u8)>, mode: SampleMode) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Sample("sample is empty".into()));
        }
        if let Some(i) = pairs.iter().position(|&(x, y)| x > 1 || y > 1) {
            return Err(Error::Sample(format!(
                "observation {i} is {:?}, values must be 0 or 1",
                pairs[i]
            )));
        }
        Ok(Self { pairs, mode })
    }

    pub fn from_bools(x: &[bool], y: &[bool], mode: SampleMode) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Sample(format!(
                "columns have different lengths ({} and {})",
                x.len(),
                y.len()
            )));
        }
        Self::new(
            x.iter().zip(y).map(|(&a, &b)| (a as u8, b as u8)).collect(),
            mode,
        )
    }

    /// Expands a table into a sample ordered `(1,1)…, (1,0)…, (0,1)…, (0,0)…`.
    pub fn from_table(t: &ContingencyTable, mode: SampleMode) -> Result<Self> {
        let mut pairs = Vec::with_capacity(t.total() as usize);
        for (count, pair) in [(t.n11, (1, 1)), (t.n10, (1, 0)), (t.n01, (0, 1)), (t.n00, (0, 0))] {
            pairs.extend(std::iter::repeat_n(pair, count as usize));
        }
        Self::new(pairs, mode)
    }

    pub fn pairs(&self) -> &[(u8, u8)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn mode(&self) -> SampleMode {
        self.mode
    }

    pub fn with_mode(mut self, mode: SampleMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn table(&self) -> ContingencyTable {
        let mut n = [0u64; 4];
        for &(x, y) in &self.pairs {
            n[(2 - 2 * x as usize) + (1 - y as usize)] += 1;
        }
        ContingencyTable {
            n11: n[0],
            n10: n[1],
            n01: n[2],
            n00: n[3],
        }
    }
}

/// Which assumptions of the asymptotic theory fail at the estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BoundaryFlags {
    /// `p̂ ∈ {0, 1}`
    pub p_degenerate: bool,
    /// `q̂ ∈ {0, 1}`
    pub q_degenerate: bool,
    /// `r̂` sits on a Fréchet–Hoeffding bound, i.e. some cell count is zero.
    pub r_on_bound: bool,
}

impl BoundaryFlags {
    pub fn any(&self) -> bool {
        self.p_degenerate || self.q_degenerate || self.r_on_bound
    }
}

/// Empirical moments `(p̂, q̂, r̂)` and derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub table: ContingencyTable,
    pub n: u64,
    pub p_hat: f64,
    pub q_hat: f64,
    pub r_hat: f64,
    pub sigma_hat: f64,
    pub m_plus_hat: f64,
    pub m_minus_hat: f64,
    pub flags: BoundaryFlags,
}

impl MomentEstimates {
    pub fn from_table(t: &ContingencyTable) -> Result<Self> {
        let n = t.total();
        if n == 0 {
            return Err(Error::Sample("sample is empty".into()));
        }
        let nf = n as f64;
        let p = t.n1_() as f64 / nf;
        let q = t.n_1() as f64 / nf;
        let r = t.n11 as f64 / nf;
        let flags = BoundaryFlags {
            p_degenerate: t.n1_() == 0 || t.n1_() == n,
            q_degenerate: t.n_1() == 0 || t.n_1() == n,
            r_on_bound: t.n11 == 0 || t.n10 == 0 || t.n01 == 0 || t.n00 == 0,
        };
        let pq = p * q;
        Ok(Self {
            table: *t,
            n,
            p_hat: p,
            q_hat: q,
            r_hat: r,
            sigma_hat: r - pq,
            m_plus_hat: p.min(q) - pq,
            m_minus_hat: pq - (p + q - 1.0).max(0.0),
            flags,
        })
    }

    pub fn from_sample(s: &PairedBinarySample) -> Self {
        Self::from_table(&s.table()).expect("a sample is never empty")
    }

    pub fn is_interior(&self) -> bool {
        !self.flags.any()
    }

    pub fn require_interior(&self) -> Result<()> {
        if self.flags.any() {
            return Err(Error::Boundary(format!(
                "table {{n11={}, n10={}, n01={}, n00={}}} has an empty cell",
                self.table.n11, self.table.n10, self.table.n01, self.table.n00
            )));
        }
        Ok(())
    }

    /// Estimates for `(Y, X)`.
    pub fn swapped(&self) -> Self {
        let t = ContingencyTable {
            n11: self.table.n11,
            n10: self.table.n01,
            n01: self.table.n10,
            n00: self.table.n00,
        };
        Self::from_table(&t).expect("table is non-empty")
    }

    /// The empirical distribution, if both margins are non-degenerate.
    pub fn distribution(&self) -> Result<JointBinaryDistribution> {
        self.table.to_distribution()
    }
}

/// Sample mean of `W`.
pub fn estimate_moments(s: &PairedBinarySample) -> MomentEstimates {
    MomentEstimates::from_sample(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum OmegaSource {
    IidPlugin,
    Hac { bandwidth: usize },
    /// Known population value, used for simulations.
    Population,
}

/// Symmetry tolerance for Ω.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Negative eigenvalues down to this value are projected to zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Long-run covariance of `W = (X, Y, XY)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongRunCovariance {
    pub omega: [[f64; 3]; 3],
    pub source: OmegaSource,
}

impl LongRunCovariance {
    /// Checks symmetry and positive semi-definiteness, projecting eigenvalues
    /// in `[−PSD_TOLERANCE, 0)` to zero.
    pub fn new(omega: Matrix3<f64>, source: OmegaSource) -> Result<Self> {
        if omega.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("Ω has non-finite entries".into()));
        }
        let asym = (omega - omega.transpose()).abs().max();
        if asym > SYMMETRY_TOLERANCE {
            return Err(Error::Domain(format!("Ω is not symmetric (max deviation {asym:e})")));
        }
        let sym = (omega + omega.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let min = eig.eigenvalues.min();
        if min < -PSD_TOLERANCE {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        let m = if min < 0.0 {
            let clipped = eig.eigenvalues.map(|v| v.max(0.0));
            let p = eig.eigenvectors * Matrix3::from_diagonal(&clipped) * eig.eigenvectors.transpose();
            (p + p.transpose()) * 0.5
        } else {
            sym
        };
        Ok(Self {
            omega: to_array(&m),
            source,
        })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.omega[i][j])
    }

    /// Symmetric square root via the eigendecomposition.
    pub fn sqrt(&self) -> Matrix3<f64> {
        let eig = SymmetricEigen::new(self.matrix());
        let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let s = eig.eigenvectors * Matrix3::from_diagonal(&root) * eig.eigenvectors.transpose();
        (s + s.transpose()) * 0.5
    }

    /// Ω for `(Y, X, XY)`.
    pub fn swapped(&self) -> Self {
        let perm = [1, 0, 2];
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = self.omega[perm[i]][perm[j]];
            }
        }
        Self {
            omega: out,
            source: self.source,
        }
    }

    /// `vᵀ Ω v`.
    pub fn quad(&self, v: &Vector3<f64>) -> f64 {
        (v.transpose() * self.matrix() * v)[(0, 0)]
    }
}

fn to_array(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = m[(i, j)];
        }
    }
    out
}

/// Ω of an iid sequence at `(p, q, r)`.
pub fn omega_at(p: f64, q: f64, r: f64) -> Matrix3<f64> {
    Matrix3::new(
        p * (1.0 - p),
        r - p * q,
        r * (1.0 - p),
        r - p * q,
        q * (1.0 - q),
        r * (1.0 - q),
        r * (1.0 - p),
        r * (1.0 - q),
        r * (1.0 - r),
    )
}

/// Plug-in Ω for iid observations.
pub fn omega_iid(m: &MomentEstimates) -> Result<LongRunCovariance> {
    m.require_interior()?;
    LongRunCovariance::new(omega_at(m.p_hat, m.q_hat, m.r_hat), OmegaSource::IidPlugin)
}

/// Population Ω of iid draws from `d`.
pub fn omega_population(d: &JointBinaryDistribution) -> Result<LongRunCovariance> {
    LongRunCovariance::new(omega_at(d.p(), d.q(), d.r()), OmegaSource::Population)
}

/// `floor(1.3 n^{1/5})`.
pub fn default_bandwidth(n: usize) -> usize {
    (1.3 * (n as f64).powf(0.2)).floor() as usize
}

/// Newey–West estimator with Bartlett weights `1 − j/(m + 1)`.
pub fn omega_hac(s: &PairedBinarySample, bandwidth: usize) -> Result<LongRunCovariance> {
    if s.mode() != SampleMode::TimeSeries {
        return Err(Error::Config(
            "the HAC estimator needs a sample in time-series mode".into(),
        ));
    }
    let n = s.len();
    if bandwidth >= n {
        return Err(Error::Bandwidth { bandwidth, n });
    }
    let m = MomentEstimates::from_sample(s);
    let mean = [m.p_hat, m.q_hat, m.r_hat];
    let w: Vec<[f64; 3]> = s
        .pairs()
        .iter()
        .map(|&(x, y)| {
            let (x, y) = (x as f64, y as f64);
            [x - mean[0], y - mean[1], x * y - mean[2]]
        })
        .collect();
    let nf = n as f64;
    let lagged = |j: usize| {
        let mut acc = [[0.0; 3]; 3];
        for i in j..n {
            let (a, b) = (&w[i], &w[i - j]);
            for (r, row) in acc.iter_mut().enumerate() {
                for (c, x) in row.iter_mut().enumerate() {
                    *x += a[r] * b[c];
                }
            }
        }
        Matrix3::from_fn(|r, c| acc[r][c] / nf)
    };
    let mut omega = lagged(0);
    for j in 1..=bandwidth {
        let weight = 1.0 - j as f64 / (bandwidth as f64 + 1.0);
        let g = lagged(j);
        omega += (g + g.transpose()) * weight;
    }
    LongRunCovariance::new(omega, OmegaSource::Hac { bandwidth })
}

/// Derivatives of the maps from `(p, q, r)` to the measures and their building blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianSet {
    /// Yule's Q.
    pub j_g: RowVector3<f64>,
    /// φ.
    pub j_l: RowVector3<f64>,
    /// `½ log OR`, the Fisher transform of Q.
    pub j_h: RowVector3<f64>,
    /// `(σ, min(p, q) − pq)`.
    pub j_h_plus: Matrix2x3<f64>,
    /// `(σ, pq − max(0, p + q − 1))`.
    pub j_h_minus: Matrix2x3<f64>,
    /// `(p, q, pq, σ)`.
    pub j_f: Matrix4x3<f64>,
    /// Gradient of `x/y` at `(σ, m⁺)`.
    pub lambda_plus: RowVector2<f64>,
    /// Gradient of `x/y` at `(σ, m⁻)`.
    pub lambda_minus: RowVector2<f64>,
    /// Gradient of `σ = r − pq`.
    pub delta: Vector3<f64>,
}

impl JacobianSet {
    /// Evaluates every Jacobian at a strictly interior `(p, q, r)`.
    pub fn at(p: f64, q: f64, r: f64) -> Result<Self> {
        let a = r;
        let b = p - r;
        let c = q - r;
        let d = 1.0 - p - q + r;
        if !(a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0) {
            return Err(Error::Boundary(format!(
                "({p}, {q}, {r}) is not strictly inside the Fréchet–Hoeffding range"
            )));
        }
        let sigma = r - p * q;
        let den = p * (q - 2.0 * r) + r * (1.0 - 2.0 * q + 2.0 * r);
        if den.abs() < 1e-14 {
            return Err(Error::Singular(format!("J_g denominator {den:e}")));
        }
        let pre = 2.0 / (den * den);
        let j_g = RowVector3::new(
            pre * (q - 1.0) * r * (q - r),
            pre * (p - 1.0) * r * (p - r),
            -pre * (p * p * q + p * q * (q - 1.0 - 2.0 * r) + r * r),
        );

        let s = p * (1.0 - p) * q * (1.0 - q);
        let rs = s.sqrt();
        let k = -sigma / (2.0 * s);
        let j_l = RowVector3::new(
            (-q + k * (1.0 - 2.0 * p) * q * (1.0 - q)) / rs,
            (-p + k * (1.0 - 2.0 * q) * p * (1.0 - p)) / rs,
            1.0 / rs,
        );

        let j_h = RowVector3::new(
            -0.5 * (1.0 / d + 1.0 / b),
            -0.5 * (1.0 / d + 1.0 / c),
            0.5 * (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d),
        );

        let ind = |cond: bool| if cond { 1.0 } else { 0.0 };
        let j_h_plus = Matrix2x3::new(-q, -p, 1.0, ind(p < q) - q, ind(q < p) - p, 0.0);
        let over = ind(p + q > 1.0);
        let j_h_minus = Matrix2x3::new(-q, -p, 1.0, q - over, p - over, 0.0);
        let j_f = Matrix4x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, q, p, 0.0, -q, -p, 1.0);

        let m_plus = p.min(q) - p * q;
        let m_minus = p * q - (p + q - 1.0).max(0.0);
        let lambda_plus = RowVector2::new(1.0 / m_plus, -sigma / (m_plus * m_plus));
        let lambda_minus = RowVector2::new(1.0 / m_minus, -sigma / (m_minus * m_minus));

        Ok(Self {
            j_g,
            j_l,
            j_h,
            j_h_plus,
            j_h_minus,
            j_f,
            lambda_plus,
            lambda_minus,
            delta: Vector3::new(-q, -p, 1.0),
        })
    }
}

/// Jacobians at the plug-in estimates.
pub fn jacobians(m: &MomentEstimates) -> Result<JacobianSet> {
    m.require_interior()?;
    JacobianSet::at(m.p_hat, m.q_hat, m.r_hat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smallpox() -> ContingencyTable {
        ContingencyTable::new(197, 2, 139, 19).unwrap()
    }

    #[test]
    fn moments_from_table() {
        let m = MomentEstimates::from_table(&smallpox()).unwrap();
        assert_eq!(m.p_hat, 199.0 / 357.0);
        assert_eq!(m.q_hat, 336.0 / 357.0);
        assert_eq!(m.r_hat, 197.0 / 357.0);
        assert_eq!(m.sigma_hat, m.r_hat - m.p_hat * m.q_hat);
        assert!(m.is_interior());
        let s = PairedBinarySample::from_table(&smallpox(), SampleMode::Iid).unwrap();
        assert_eq!(estimate_moments(&s), m);
    }

    #[test]
    fn moments_degenerate_samples() {
        let s = PairedBinarySample::new(vec![(1, 1); 5], SampleMode::Iid).unwrap();
        let m = estimate_moments(&s);
        assert_eq!((m.p_hat, m.q_hat, m.r_hat), (1.0, 1.0, 1.0));
        assert!(m.flags.p_degenerate && m.flags.q_degenerate);
        assert!(omega_iid(&m).is_err());
        let s = PairedBinarySample::new(vec![(1, 0), (0, 1)], SampleMode::Iid).unwrap();
        let m = estimate_moments(&s);
        assert_eq!((m.p_hat, m.q_hat, m.r_hat, m.sigma_hat), (0.5, 0.5, 0.0, -0.25));
        assert!(m.flags.r_on_bound);
    }

    #[test]
    fn rejects_non_binary_values() {
        assert!(PairedBinarySample::new(vec![(0, 2)], SampleMode::Iid).is_err());
        assert!(PairedBinarySample::new(vec![], SampleMode::Iid).is_err());
        assert!(PairedBinarySample::from_bools(&[true], &[true, false], SampleMode::Iid).is_err());
    }

    #[test]
    fn omega_iid_examples() {
        let o = omega_at(0.5, 0.5, 0.25);
        assert_eq!(o[(0, 1)], 0.0);
        assert_eq!(o[(0, 2)], 0.125);
        let m = MomentEstimates::from_table(&smallpox()).unwrap();
        let om = omega_iid(&m).unwrap();
        assert_eq!(om.omega[0][0], m.p_hat * (1.0 - m.p_hat));

        // brute-force empirical covariance of W with divisor n
        let s = PairedBinarySample::from_table(&smallpox(), SampleMode::Iid).unwrap();
        let w: Vec<[f64; 3]> = s
            .pairs()
            .iter()
            .map(|&(x, y)| [x as f64, y as f64, (x * y) as f64])
            .collect();
        let n = w.len() as f64;
        let mean: Vec<f64> = (0..3).map(|k| w.iter().map(|v| v[k]).sum::<f64>() / n).collect();
        for i in 0..3 {
            for j in 0..3 {
                let c = w.iter().map(|v| (v[i] - mean[i]) * (v[j] - mean[j])).sum::<f64>() / n;
                assert!((c - om.omega[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hac_lag_zero_is_empirical_covariance() {
        let s = PairedBinarySample::new(
            vec![(1, 1), (1, 0), (0, 0), (1, 1), (0, 1), (0, 0), (1, 1)],
            SampleMode::TimeSeries,
        )
        .unwrap();
        let h = omega_hac(&s, 0).unwrap();
        let m = estimate_moments(&s);
        let mean = [m.p_hat, m.q_hat, m.r_hat];
        let n = s.len() as f64;
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for &(x, y) in s.pairs() {
                    let v = [x as f64, y as f64, (x * y) as f64];
                    acc += (v[i] - mean[i]) * (v[j] - mean[j]);
                }
                assert_eq!(h.omega[i][j], acc / n);
            }
        }
    }

    #[test]
    fn hac_validates_inputs() {
        let s = PairedBinarySample::new(vec![(1, 1), (0, 0), (1, 0)], SampleMode::TimeSeries).unwrap();
        assert!(matches!(omega_hac(&s, 3), Err(Error::Bandwidth { bandwidth: 3, n: 3 })));
        let iid = s.clone().with_mode(SampleMode::Iid);
        assert!(omega_hac(&iid, 1).is_err());
        assert_eq!(default_bandwidth(100_000), 13);
        assert_eq!(default_bandwidth(2000), 5);
    }

    #[test]
    fn psd_projection() {
        let mut m = omega_at(0.3, 0.4, 0.1);
        assert!(LongRunCovariance::new(m, OmegaSource::IidPlugin).is_ok());
        m[(0, 0)] = -1.0;
        assert!(matches!(
            LongRunCovariance::new(m, OmegaSource::IidPlugin),
            Err(Error::NotPsd { .. })
        ));
        let singular = Matrix3::new(1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0)
            - Matrix3::identity() * 1e-12;
        let p = LongRunCovariance::new(singular, OmegaSource::IidPlugin).unwrap();
        let eig = SymmetricEigen::new(p.matrix());
        assert!(eig.eigenvalues.min() >= -1e-15);
    }

    #[test]
    fn sqrt_squares_back() {
        let o = LongRunCovariance::new(omega_at(0.3, 0.7, 0.25), OmegaSource::Population).unwrap();
        let s = o.sqrt();
        assert!((s * s - o.matrix()).abs().max() < 1e-14);
    }

    #[test]
    fn closed_form_jacobian_blocks() {
        let j = JacobianSet::at(0.3, 0.6, 0.2).unwrap();
        assert_eq!(j.delta, Vector3::new(-0.6, -0.3, 1.0));
        assert_eq!(j.j_f.row(2), RowVector3::new(0.6, 0.3, 0.0));
        assert_eq!(j.j_f.row(3), RowVector3::new(-0.6, -0.3, 1.0));
        assert_eq!(j.j_h_plus.row(1), RowVector3::new(1.0 - 0.6, -0.3, 0.0));
        let j = JacobianSet::at(0.4, 0.4, 0.2).unwrap();
        assert_eq!(j.j_h_plus.row(1), RowVector3::new(-0.4, -0.4, 0.0));
        assert!(JacobianSet::at(0.3, 0.7, 0.3).is_err());
    }
}
