//! Bivariate normal orthant probabilities and the tetrachoric correlation.

use std::f64::consts::PI;

use crate::error::Result;
use crate::joint::{JointBinaryDistribution, PerfectDependence};
use crate::normal;

const TWO_PI: f64 = 2.0 * PI;

// Gauss–Legendre half rules (nodes in (−1, 0), weights) with 6, 12 and 20 points.
const GL6: [(f64, f64); 3] = [
    (-0.932_469_514_203_152_2, 0.171_324_492_379_170_5),
    (-0.661_209_386_466_264_7, 0.360_761_573_048_138_4),
    (-0.238_619_186_083_197, 0.467_913_934_572_691_4),
];

const GL12: [(f64, f64); 6] = [
    (-0.981_560_634_246_719_1, 0.047_175_336_386_511_77),
    (-0.904_117_256_370_475, 0.106_939_325_995_318_3),
    (-0.769_902_674_194_305, 0.160_078_328_543_346_4),
    (-0.587_317_954_286_617_1, 0.203_167_426_723_065_9),
    (-0.367_831_498_998_180_2, 0.233_492_536_538_354_7),
    (-0.125_233_408_511_469_2, 0.249_147_045_813_402_9),
];

const GL20: [(f64, f64); 10] = [
    (-0.993_128_599_185_094_9, 0.017_614_007_139_152_12),
    (-0.963_971_927_277_913_8, 0.040_601_429_800_386_94),
    (-0.912_234_428_251_325_9, 0.062_672_048_334_109_06),
    (-0.839_116_971_822_218_8, 0.083_276_741_576_704_75),
    (-0.746_331_906_460_150_8, 0.101_930_119_817_240_4),
    (-0.636_053_680_726_515, 0.118_194_531_961_518_4),
    (-0.510_867_001_950_827_1, 0.131_688_638_449_176_6),
    (-0.373_706_088_715_419_6, 0.142_096_109_318_382_1),
    (-0.227_785_851_141_645_1, 0.149_172_986_472_603_7),
    (-0.076_526_521_133_497_33, 0.152_753_387_130_725_9),
];

/// `P(X ≤ h, Y ≤ k)` for a standard bivariate normal with correlation `rho`.
///
/// Infinite limits are allowed, and `rho = ±1` uses the degenerate closed forms.
pub fn bvn_cdf(h: f64, k: f64, rho: f64) -> f64 {
    if h.is_nan() || k.is_nan() || rho.is_nan() {
        return f64::NAN;
    }
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return normal::cdf(k);
    }
    if k == f64::INFINITY {
        return normal::cdf(h);
    }
    let rho = rho.clamp(-1.0, 1.0);
    if rho == 1.0 {
        return normal::cdf(h.min(k));
    }
    if rho == -1.0 {
        return (normal::cdf(h) - normal::sf(k)).max(0.0);
    }
    bvnu(-h, -k, rho).clamp(0.0, 1.0)
}

/// Upper orthant `P(X > h, Y > k)` following Drezner & Wesolowsky as refined by Genz.
fn bvnu(h: f64, k: f64, r: f64) -> f64 {
    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for &(x, w) in rule {
            for node in [x, -x] {
                let sn = (asr * (node + 1.0) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return bvn * asr / (2.0 * TWO_PI) + normal::sf(h) * normal::sf(k);
    }

    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    let as_ = (1.0 - r) * (1.0 + r);
    let mut a = as_.sqrt();
    let bs = (h - k) * (h - k);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 16.0;
    bvn = a
        * (-(bs / as_ + hk) / 2.0).exp()
        * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
    if hk > -160.0 {
        let b = bs.sqrt();
        bvn -= (-hk / 2.0).exp()
            * TWO_PI.sqrt()
            * normal::cdf(-b / a)
            * b
            * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for &(x, w) in rule {
        for node in [x, -x] {
            let xs = (a * (node + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w
                * (-(bs / xs + hk) / 2.0).exp()
                * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                    - (1.0 + c * xs * (1.0 + d * xs)));
        }
    }
    bvn = -bvn / TWO_PI;
    if r > 0.0 {
        bvn + normal::sf(h.max(k))
    } else {
        -bvn + (normal::sf(h) - normal::sf(k)).max(0.0)
    }
}

const RHO_LIMIT: f64 = 1.0 - 1e-12;
const F_TOL: f64 = 1e-10;
const X_TOL: f64 = 1e-12;
const MAX_ITER: usize = 200;

/// The correlation of a latent standard bivariate normal whose
/// dichotomisation at `Φ⁻¹(p)`, `Φ⁻¹(q)` reproduces `r`.
///
/// Returns exactly `±1` under perfect dependence.
pub fn tetrachoric(d: &JointBinaryDistribution) -> Result<f64> {
    match d.perfect_dependence() {
        PerfectDependence::Positive => return Ok(1.0),
        PerfectDependence::Negative => return Ok(-1.0),
        PerfectDependence::None => {}
    }
    let h = normal::inv_cdf(d.p());
    let k = normal::inv_cdf(d.q());
    let r = d.r();
    let f = |rho: f64| bvn_cdf(h, k, rho) - r;
    Ok(brent(f, -RHO_LIMIT, RHO_LIMIT))
}

/// Brent's method on a bracket where `f` is increasing. If the root lies
/// outside the bracket the nearer end is returned.
fn brent(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa >= 0.0 {
        return a;
    }
    if fb <= 0.0 {
        return b;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * X_TOL;
        let m = 0.5 * (c - b);
        if (m.abs() <= tol && fb.abs() <= F_TOL) || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    b
}
