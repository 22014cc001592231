//! Independent oracles and checks shared by the property tests and the
//! acceptance suite. Nothing here calls into the code under test except to
//! obtain the value being checked.

#![allow(dead_code)]

use bindep::estimation::JacobianSet;
use bindep::inference::fisher;
use bindep::measures::{self, OddsRatio};
use bindep::tetrachoric::tetrachoric;
use bindep::JointBinaryDistribution;

pub fn jd(p: f64, q: f64, r: f64) -> JointBinaryDistribution {
    JointBinaryDistribution::new(p, q, r).unwrap()
}

/// Fréchet–Hoeffding bounds, written out again.
pub fn bounds(p: f64, q: f64) -> (f64, f64) {
    ((p + q - 1.0).max(0.0), p.min(q))
}

/// Maps `(p, q, t)` with `t ∈ (0, 1)` to an interior triple.
pub fn triple(p: f64, q: f64, t: f64) -> (f64, f64, f64) {
    let (lo, hi) = bounds(p, q);
    (p, q, lo + t * (hi - lo))
}

pub fn cells(p: f64, q: f64, r: f64) -> [f64; 4] {
    [r, p - r, q - r, 1.0 - p - q + r]
}

/// A measure as a function of `(p, q, r)`.
pub type Measure = fn(f64, f64, f64) -> f64;

pub fn cole(p: f64, q: f64, r: f64) -> f64 {
    measures::cole(&jd(p, q, r))
}
pub fn yule_q(p: f64, q: f64, r: f64) -> f64 {
    measures::yule_q(&jd(p, q, r))
}
pub fn yule_y(p: f64, q: f64, r: f64) -> f64 {
    measures::yule_g(&jd(p, q, r), 0.5).unwrap()
}
pub fn yule_g03(p: f64, q: f64, r: f64) -> f64 {
    measures::yule_g(&jd(p, q, r), 0.3).unwrap()
}
pub fn phi(p: f64, q: f64, r: f64) -> f64 {
    measures::phi(&jd(p, q, r))
}
pub fn tc(p: f64, q: f64, r: f64) -> f64 {
    tetrachoric(&jd(p, q, r)).unwrap()
}

/// Tolerances of a propriety check: `zero` for (B) and (E), `unit` for (C).
#[derive(Clone, Copy)]
pub struct Tol {
    pub zero: f64,
    pub unit: f64,
}

pub const EXACT: Tol = Tol { zero: 1e-10, unit: 1e-12 };
pub const ROOT: Tol = Tol { zero: 1e-8, unit: 1e-8 };

/// Axioms (A)–(E) at `(p, q, r)`, with `r2 > r` another interior point for
/// the monotonicity check. Returns a description of the first failure.
pub fn check_proper(f: &dyn Fn(f64, f64, f64) -> f64, tol: Tol, p: f64, q: f64, r: f64, r2: f64) -> Result<(), String> {
    let v = f(p, q, r);
    let at = format!("(p, q, r) = ({p}, {q}, {r})");
    if !(v.abs() <= 1.0) {
        return Err(format!("(A) |δ| = {} > 1 at {at}", v.abs()));
    }
    let v0 = f(p, q, p * q);
    if v0.abs() > tol.zero {
        return Err(format!("(B) δ = {v0} at independence, {at}"));
    }
    if (r - p * q).abs() > 1e-6 && v.abs() <= tol.zero {
        return Err(format!("(B) δ = {v} away from independence at {at}"));
    }
    let (lo, hi) = bounds(p, q);
    if v.abs() >= 1.0 {
        return Err(format!("(C) |δ| = 1 at interior {at}"));
    }
    let (up, down) = (f(p, q, hi), f(p, q, lo));
    if (up - 1.0).abs() > tol.unit || (down + 1.0).abs() > tol.unit {
        return Err(format!("(C) δ = {up} / {down} at the bounds of {at}"));
    }
    let v2 = f(p, q, r2);
    if !(v2 > v) {
        return Err(format!("(D) δ({r2}) = {v2} ≤ δ({r}) = {v} at {at}"));
    }
    let vs = f(q, p, r);
    if (vs - v).abs() > tol.zero {
        return Err(format!("(E) δ(q, p, r) = {vs} ≠ {v} at {at}"));
    }
    let vc = f(p, 1.0 - q, p - r);
    if (vc + v).abs() > tol.zero {
        return Err(format!("(E) δ of the complement = {vc}, expected {} at {at}", -v));
    }
    Ok(())
}

/// Where φ = ±1 is attained: `+1` at the upper bound iff `p = q`, `−1` at the
/// lower bound iff `p + q = 1`.
pub fn check_phi_attainability(p: f64, q: f64) -> Result<(), String> {
    let (lo, hi) = bounds(p, q);
    let up_attained = (phi(p, q, hi) - 1.0).abs() < 1e-9;
    let down_attained = (phi(p, q, lo) + 1.0).abs() < 1e-9;
    let up_predicted = (p - q).abs() <= 1e-12;
    let down_predicted = (p + q - 1.0).abs() <= 1e-12;
    if up_attained != up_predicted || down_attained != down_predicted {
        return Err(format!(
            "φ attainability at ({p}, {q}): +1 {up_attained} (predicted {up_predicted}), −1 {down_attained} (predicted {down_predicted})"
        ));
    }
    Ok(())
}

/// φ still satisfies (A), (B), (D) and (E).
pub fn check_phi_partial(p: f64, q: f64, r: f64, r2: f64) -> Result<(), String> {
    let v = phi(p, q, r);
    if !(v.abs() <= 1.0) || phi(p, q, p * q).abs() > 1e-10 || !(phi(p, q, r2) > v) {
        return Err(format!("φ (A)/(B)/(D) fails at ({p}, {q}, {r})"));
    }
    if (phi(q, p, r) - v).abs() > 1e-12 || (phi(p, 1.0 - q, p - r) + v).abs() > 1e-10 {
        return Err(format!("φ (E) fails at ({p}, {q}, {r})"));
    }
    Ok(())
}

/// Mean square contingency from the chi-square definition.
pub fn msc_oracle(p: f64, q: f64, r: f64) -> f64 {
    let c = cells(p, q, r);
    let rows = [p, 1.0 - p];
    let cols = [q, 1.0 - q];
    let mut s = 0.0;
    for (i, &ri) in rows.iter().enumerate() {
        for (j, &cj) in cols.iter().enumerate() {
            let e = ri * cj;
            s += (c[2 * i + j] - e).powi(2) / e;
        }
    }
    s
}

/// Distance correlation of the two indicators from the V-statistic form of
/// distance covariance over the four support points.
pub fn dcor_oracle(p: f64, q: f64, r: f64) -> f64 {
    let w = cells(p, q, r);
    let pts = [(1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)];
    let dcov2 = |fx: &dyn Fn((f64, f64)) -> f64, fy: &dyn Fn((f64, f64)) -> f64| {
        let (mut t1, mut ex, mut ey, mut t3) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..4 {
            let (mut ax, mut ay) = (0.0, 0.0);
            for j in 0..4 {
                let dx = (fx(pts[i]) - fx(pts[j])).abs();
                let dy = (fy(pts[i]) - fy(pts[j])).abs();
                t1 += w[i] * w[j] * dx * dy;
                ex += w[i] * w[j] * dx;
                ey += w[i] * w[j] * dy;
                ax += w[j] * dx;
                ay += w[j] * dy;
            }
            t3 += w[i] * ax * ay;
        }
        t1 + ex * ey - 2.0 * t3
    };
    let x = |t: (f64, f64)| t.0;
    let y = |t: (f64, f64)| t.1;
    let dxy = dcov2(&x, &y);
    let dxx = dcov2(&x, &x);
    let dyy = dcov2(&y, &y);
    (dxy / (dxx * dyy).sqrt()).sqrt()
}

/// Population Chatterjee ξ of Y on X, `Var E[1{Y ≥ t} | X] / Var 1{Y ≥ t}` at t = 1.
pub fn xi_oracle(p: f64, q: f64, r: f64) -> f64 {
    let y_given_1 = r / p;
    let y_given_0 = (q - r) / (1.0 - p);
    let mean = p * y_given_1 + (1.0 - p) * y_given_0;
    let var_cond = p * (y_given_1 - mean).powi(2) + (1.0 - p) * (y_given_0 - mean).powi(2);
    var_cond / (q * (1.0 - q))
}

/// Identities between φ and the other measures, against the oracles above.
pub fn check_identities(p: f64, q: f64, r: f64) -> Result<(), String> {
    let d = jd(p, q, r);
    let f = measures::phi(&d);
    let msc = msc_oracle(p, q, r);
    let cc = measures::contingency_coefficients(&d);
    let fm = measures::further_measures(&d);
    let checks = [
        ("MSC", cc.msc, msc),
        ("MSC = φ²", cc.msc, f * f),
        ("V", cc.cramers_v, msc.sqrt()),
        ("T", cc.tschuprow_t, msc.sqrt()),
        ("V = |φ|", cc.cramers_v, f.abs()),
        ("PC", cc.pearson_cc, (msc / (1.0 + msc)).sqrt()),
        ("R", fm.distance_cor, dcor_oracle(p, q, r)),
        ("ξ", fm.chatterjee_xi, xi_oracle(p, q, r)),
    ];
    for (name, got, want) in checks {
        if !((got - want).abs() <= 1e-10) {
            return Err(format!("{name}: {got} vs {want} at ({p}, {q}, {r})"));
        }
    }
    let c = cells(p, q, r);
    let or = c[0] * c[3] / (c[1] * c[2]);
    let qv = measures::yule_q(&d);
    let or_hat = measures::odds_ratio(&d);
    let OddsRatio::Finite(or_lib) = or_hat else {
        return Err(format!("infinite OR at interior ({p}, {q}, {r})"));
    };
    if (or_lib - or).abs() > 1e-10 * or.max(1.0) {
        return Err(format!("OR {or_lib} vs {or}"));
    }
    let back = measures::q_to_or(measures::or_to_q(or_hat).unwrap()).unwrap().as_f64();
    if (back - or).abs() > 1e-10 * or.max(1.0) {
        return Err(format!("Q ↔ OR round trip {back} vs {or} at ({p}, {q}, {r})"));
    }
    if (measures::or_to_q(or_hat).unwrap() - qv).abs() > 1e-10 {
        return Err(format!("Q from OR differs at ({p}, {q}, {r})"));
    }
    let z = fisher(qv).unwrap();
    if (z - 0.5 * or.ln()).abs() > 1e-10 * z.abs().max(1.0) {
        return Err(format!("Z(Q) = {z} vs ½ log OR = {} at ({p}, {q}, {r})", 0.5 * or.ln()));
    }
    let half = or_hat.half_log().unwrap();
    if (half - 0.5 * or.ln()).abs() > 1e-10 * half.abs().max(1.0) {
        return Err(format!("half_log {half} at ({p}, {q}, {r})"));
    }
    Ok(())
}

fn close(name: &str, analytic: f64, numeric: f64) -> Result<(), String> {
    let scale = analytic.abs().max(numeric.abs()).max(1e-3);
    if (analytic - numeric).abs() > 1e-4 * scale {
        return Err(format!("{name}: analytic {analytic} vs central difference {numeric}"));
    }
    Ok(())
}

fn grad3(f: impl Fn(f64, f64, f64) -> f64, p: f64, q: f64, r: f64, h: f64) -> [f64; 3] {
    [
        (f(p + h, q, r) - f(p - h, q, r)) / (2.0 * h),
        (f(p, q + h, r) - f(p, q - h, r)) / (2.0 * h),
        (f(p, q, r + h) - f(p, q, r - h)) / (2.0 * h),
    ]
}

/// Every Jacobian against central differences of the defining maps, written
/// out directly in terms of the cells.
pub fn check_jacobians(p: f64, q: f64, r: f64) -> Result<(), String> {
    let j = JacobianSet::at(p, q, r).map_err(|e| e.to_string())?;
    let c = cells(p, q, r);
    let h = 1e-4 * c.iter().cloned().fold(f64::INFINITY, f64::min);
    let q_fn = |p: f64, q: f64, r: f64| {
        let [a, b, c, d] = cells(p, q, r);
        (a * d - b * c) / (a * d + b * c)
    };
    let phi_fn = |p: f64, q: f64, r: f64| (r - p * q) / (p * (1.0 - p) * q * (1.0 - q)).sqrt();
    let h_fn = |p: f64, q: f64, r: f64| {
        let [a, b, c, d] = cells(p, q, r);
        0.5 * (a * d / (b * c)).ln()
    };
    let sigma = |p: f64, q: f64, r: f64| r - p * q;
    let mp = |p: f64, q: f64, _r: f64| p.min(q) - p * q;
    let mm = |p: f64, q: f64, _r: f64| p * q - (p + q - 1.0).max(0.0);
    let pq = |p: f64, q: f64, _r: f64| p * q;

    let rows: [(&str, Vec<f64>, [f64; 3]); 10] = [
        ("J_g", j.j_g.iter().copied().collect(), grad3(q_fn, p, q, r, h)),
        ("J_l", j.j_l.iter().copied().collect(), grad3(phi_fn, p, q, r, h)),
        ("J_h", j.j_h.iter().copied().collect(), grad3(h_fn, p, q, r, h)),
        ("J_h+ σ", j.j_h_plus.row(0).iter().copied().collect(), grad3(sigma, p, q, r, h)),
        ("J_h+ m+", j.j_h_plus.row(1).iter().copied().collect(), grad3(mp, p, q, r, h)),
        ("J_h- σ", j.j_h_minus.row(0).iter().copied().collect(), grad3(sigma, p, q, r, h)),
        ("J_h- m-", j.j_h_minus.row(1).iter().copied().collect(), grad3(mm, p, q, r, h)),
        ("J_f pq", j.j_f.row(2).iter().copied().collect(), grad3(pq, p, q, r, h)),
        ("J_f σ", j.j_f.row(3).iter().copied().collect(), grad3(sigma, p, q, r, h)),
        ("Δ", j.delta.iter().copied().collect(), grad3(sigma, p, q, r, h)),
    ];
    for (name, analytic, numeric) in rows {
        for k in 0..3 {
            close(&format!("{name}[{k}] at ({p}, {q}, {r})"), analytic[k], numeric[k])?;
        }
    }
    let jf_p = grad3(|p, _, _| p, p, q, r, h);
    let jf_q = grad3(|_, q, _| q, p, q, r, h);
    for k in 0..3 {
        close("J_f p", j.j_f[(0, k)], jf_p[k])?;
        close("J_f q", j.j_f[(1, k)], jf_q[k])?;
    }
    let s = r - p * q;
    for (name, lam, m) in [("Λ+", j.lambda_plus, mp(p, q, r)), ("Λ-", j.lambda_minus, mm(p, q, r))] {
        let hx = 1e-6 * s.abs().max(1e-3);
        let hy = 1e-6 * m;
        close(name, lam[0], ((s + hx) / m - (s - hx) / m) / (2.0 * hx))?;
        close(name, lam[1], (s / (m + hy) - s / (m - hy)) / (2.0 * hy))?;
    }
    Ok(())
}

/// A point where the kinks of `m±` are at least `gap` away.
pub fn away_from_kinks(p: f64, q: f64, gap: f64) -> bool {
    (p - q).abs() > gap && (p + q - 1.0).abs() > gap
}
