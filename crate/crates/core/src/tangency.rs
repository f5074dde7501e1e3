//! Unfolding families near the tangency regime: the Hénon limit return map,
//! the rotated-saddle linear model, the Hopf/Neimark-Sacker normal form,
//! attractor classification, and detection of manifold tangencies under
//! saddle-value sweeps.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::horseshoe::{find_periodic_orbit, Itinerary, SlabConfig};
use crate::return_map::{inverse_return_map, return_map, GlobalMapModel};
use crate::section::{BifocusParams, RectPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HenonParams {
    pub a_tilde: f64,
    pub b_tilde: f64,
}

impl HenonParams {
    pub fn new(a_tilde: f64, b_tilde: f64) -> Result<Self> {
        if !a_tilde.is_finite() || !b_tilde.is_finite() {
            return Err(LabError::ParamViolation("Henon parameters must be finite".into()));
        }
        Ok(Self { a_tilde, b_tilde })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedSaddleParams {
    /// planar expansion modulus, > 1
    pub mu_star: f64,
    /// rotation number (irrational intended; presets use golden-mean values)
    pub omega_star: f64,
    /// normal contraction factor, |mu3_inv| < 1
    pub mu3_inv: f64,
}

impl RotatedSaddleParams {
    pub fn new(mu_star: f64, omega_star: f64, mu3_inv: f64) -> Result<Self> {
        if !(mu_star > 1.0) {
            return Err(LabError::ParamViolation(format!("mu_star > 1 (got {mu_star})")));
        }
        if !(mu3_inv.abs() < 1.0) {
            return Err(LabError::ParamViolation(format!("|mu3_inv| < 1 (got {mu3_inv})")));
        }
        Ok(Self { mu_star, omega_star, mu3_inv })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalFormParams {
    pub mu: f64,
    /// cubic coefficient, > 0 near mu = 0
    pub a_mu: f64,
    /// rotation increment per step, radians
    pub beta_mu: f64,
    /// normal contraction, 0 < |gamma| < 1
    pub gamma: f64,
    /// include the O_mu(r^2) angular and O_mu(r^4) radial corrections
    pub hot_enabled: bool,
}

impl NormalFormParams {
    pub fn new(mu: f64, a_mu: f64, beta_mu: f64, gamma: f64, hot_enabled: bool) -> Result<Self> {
        if !(a_mu > 0.0) {
            return Err(LabError::ParamViolation(format!("a_mu > 0 (got {a_mu})")));
        }
        if !(gamma.abs() > 0.0 && gamma.abs() < 1.0) {
            return Err(LabError::ParamViolation(format!("|gamma| in (0,1) (got {gamma})")));
        }
        Ok(Self { mu, a_mu, beta_mu, gamma, hot_enabled })
    }
}

/// `(x, y, z) -> (z, b z, a + y + z^2)`.
pub fn henon_limit_map(p: [f64; 3], hp: &HenonParams) -> [f64; 3] {
    let [_, y, z] = p;
    [z, hp.b_tilde * z, hp.a_tilde + y + z * z]
}

/// Fixed points of the Hénon limit map: `z^2 + (b - 1) z + a = 0`, point
/// `(z, b z, z)`.
pub fn henon_fixed_points(hp: &HenonParams) -> Vec<[f64; 3]> {
    let (b, a) = (hp.b_tilde, hp.a_tilde);
    let disc = (b - 1.0) * (b - 1.0) - 4.0 * a;
    if disc < 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    let z1 = 0.5 * (1.0 - b + s);
    let z2 = 0.5 * (1.0 - b - s);
    let mut out = vec![[z1, b * z1, z1]];
    if s > 0.0 {
        out.push([z2, b * z2, z2]);
    }
    out
}

/// Determinant of the reduced `(y, z) -> (b z, a + y + z^2)` Jacobian;
/// identically `-b` (|b| = 1 is the conservative case).
pub fn henon_reduced_jacobian_det(hp: &HenonParams, _z: f64) -> f64 {
    -hp.b_tilde
}

/// Planar spiral expansion by modulus `mu_star` and angle `2 pi omega_star`;
/// third coordinate scaled by `mu3_inv`.
pub fn rotated_saddle_step(p: [f64; 3], rp: &RotatedSaddleParams) -> [f64; 3] {
    let ang = TAU * rp.omega_star;
    let (s, c) = ang.sin_cos();
    [
        rp.mu_star * (c * p[0] - s * p[1]),
        rp.mu_star * (s * p[0] + c * p[1]),
        rp.mu3_inv * p[2],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalFormStep {
    pub r: f64,
    pub theta: f64,
    pub t: f64,
    /// true when the cubic drove the radius negative and it was clamped
    pub clamped: bool,
}

/// `(r, theta, t) -> ((1+mu) r - a_mu r^3 [+ O_mu(r^4)],
///  theta + beta_mu [+ O_mu(r^2)] mod 2pi, gamma t)`.
pub fn normal_form_map(r: f64, theta: f64, t: f64, nf: &NormalFormParams) -> Result<NormalFormStep> {
    if r < 0.0 {
        return Err(LabError::ParamViolation(format!("r >= 0 (got {r})")));
    }
    let mut r_new = (1.0 + nf.mu) * r - nf.a_mu * r * r * r;
    let mut th_new = theta + nf.beta_mu;
    if nf.hot_enabled {
        r_new += 0.1 * nf.mu * r.powi(4);
        th_new += 0.1 * nf.mu * r * r;
    }
    let clamped = r_new < 0.0;
    if clamped {
        r_new = 0.0;
    }
    Ok(NormalFormStep { r: r_new, theta: th_new.rem_euclid(TAU), t: nf.gamma * t, clamped })
}

/// Embed the normal-form map in Cartesian coordinates for classification.
pub fn normal_form_embedded(nf: NormalFormParams) -> impl Fn([f64; 3]) -> [f64; 3] {
    move |p| {
        let r = p[0].hypot(p[1]);
        let theta = p[1].atan2(p[0]);
        let step = normal_form_map(r, theta, p[2], &nf).expect("embedded radius nonnegative");
        [step.r * step.theta.cos(), step.r * step.theta.sin(), step.t]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttractorKind {
    Sink,
    InvariantCircle,
    StrangeAttractor,
    Escaped,
    Undecided,
}

impl std::fmt::Display for AttractorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AttractorKind::Sink => "Sink",
            AttractorKind::InvariantCircle => "InvariantCircle",
            AttractorKind::StrangeAttractor => "StrangeAttractor",
            AttractorKind::Escaped => "Escaped",
            AttractorKind::Undecided => "Undecided",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecurrenceStats {
    /// mean planar radius over the post-transient orbit
    pub circle_radius: f64,
    /// standard deviation of the planar radius (circle-fit residual)
    pub circle_residual: f64,
    pub norm_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttractorClass {
    pub kind: AttractorKind,
    pub lyapunov: [f64; 3],
    pub evidence: RecurrenceStats,
}

/// Zero band for "|lambda_max| ~ 0": finite-sample noise of an exactly-zero
/// rotation exponent at the default step counts.
pub const LYAP_ZERO_BAND: f64 = 1e-3;
/// Orbit-norm divergence bound for the Escaped classification.
pub const ESCAPE_NORM: f64 = 1e6;
/// Circle-fit residual tolerance for the InvariantCircle classification.
pub const CIRCLE_RESIDUAL_TOL: f64 = 1e-4;

fn fd_jacobian_map(f: &dyn Fn([f64; 3]) -> [f64; 3], p: [f64; 3]) -> Matrix3<f64> {
    let h = 1e-6 * (1.0 + p.iter().map(|v| v.abs()).fold(0.0, f64::max));
    let mut j = Matrix3::zeros();
    for c in 0..3 {
        let mut pp = p;
        let mut pm = p;
        pp[c] += h;
        pm[c] -= h;
        let (fp, fm) = (f(pp), f(pm));
        for r in 0..3 {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

/// Iterate a family map, discard the transient, and classify the attractor
/// from the Lyapunov spectrum and radius-recurrence statistics.
pub fn classify_attractor(
    f: &dyn Fn([f64; 3]) -> [f64; 3],
    x0: [f64; 3],
    n_steps: usize,
) -> Result<AttractorClass> {
    if n_steps < 10_000 {
        return Err(LabError::InsufficientSamples("classification needs n_steps >= 10^4"));
    }
    let transient = n_steps / 10;
    let mut p = x0;
    let mut q = Matrix3::<f64>::identity();
    let mut sums = [0.0f64; 3];
    let mut counted = 0usize;
    let mut radius_sum = 0.0;
    let mut radius_sq_sum = 0.0;
    let mut norm_max: f64 = 0.0;
    for k in 0..n_steps {
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if !norm.is_finite() || norm > ESCAPE_NORM {
            return Ok(AttractorClass {
                kind: AttractorKind::Escaped,
                lyapunov: [f64::NAN; 3],
                evidence: RecurrenceStats {
                    circle_radius: f64::NAN,
                    circle_residual: f64::NAN,
                    norm_max: norm,
                },
            });
        }
        let j = fd_jacobian_map(f, p);
        let a = j * q;
        let mut cols: Vec<Vector3<f64>> = (0..3).map(|c| a.column(c).into()).collect();
        for c in 0..3 {
            for prev in 0..c {
                let basis = cols[prev];
                let proj = basis.dot(&cols[c]);
                cols[c] -= proj * basis;
            }
            let d = cols[c].norm();
            if d > 0.0 {
                cols[c] /= d;
            }
            if k >= transient {
                sums[c] += if d > 0.0 { d.ln() } else { f64::NEG_INFINITY };
            }
        }
        q = Matrix3::from_columns(&cols);
        if k >= transient {
            counted += 1;
            let r = p[0].hypot(p[1]);
            radius_sum += r;
            radius_sq_sum += r * r;
            norm_max = norm_max.max(norm);
        }
        p = f(p);
    }
    if counted == 0 {
        return Err(LabError::InsufficientSamples("transient consumed every step"));
    }
    let n = counted as f64;
    let mut lyap = [sums[0] / n, sums[1] / n, sums[2] / n];
    lyap.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mean_r = radius_sum / n;
    let var = (radius_sq_sum / n - mean_r * mean_r).max(0.0);
    let evidence = RecurrenceStats {
        circle_radius: mean_r,
        circle_residual: var.sqrt(),
        norm_max,
    };
    let lmax = lyap[0];
    let kind = if lmax < -LYAP_ZERO_BAND {
        AttractorKind::Sink
    } else if lmax > LYAP_ZERO_BAND {
        AttractorKind::StrangeAttractor
    } else if evidence.circle_residual < CIRCLE_RESIDUAL_TOL {
        AttractorKind::InvariantCircle
    } else {
        AttractorKind::Undecided
    };
    Ok(AttractorClass { kind, lyapunov: lyap, evidence })
}

/// One detected crossing-count change in a saddle-value sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangencyEvent {
    /// bracket midpoint
    pub delta_star: f64,
    pub bracket: (f64, f64),
    pub crossings_before: usize,
    pub crossings_after: usize,
    /// same-word input: a homoclinic rather than heteroclinic event
    pub homoclinic: bool,
}

fn eigvec(m: &Matrix3<f64>, lambda: f64) -> Vector3<f64> {
    let a = m - Matrix3::identity() * lambda;
    let r0: Vector3<f64> = a.row(0).transpose();
    let r1: Vector3<f64> = a.row(1).transpose();
    let r2: Vector3<f64> = a.row(2).transpose();
    let cands = [r0.cross(&r1), r1.cross(&r2), r0.cross(&r2)];
    let best = cands
        .iter()
        .max_by(|u, v| u.norm().partial_cmp(&v.norm()).unwrap())
        .unwrap();
    best / best.norm()
}

fn grow_unstable_curve(
    p0: &RectPoint,
    dir: &Vector3<f64>,
    eps: f64,
    params: &BifocusParams,
    model: &GlobalMapModel,
    n_points: usize,
    n_iter: usize,
) -> Result<Vec<RectPoint>> {
    let mut pts: Vec<RectPoint> = (0..n_points)
        .map(|k| {
            let s = eps * (2.0 * k as f64 / (n_points - 1) as f64 - 1.0);
            RectPoint::new(p0.x + s * dir.x, p0.y + s * dir.y, p0.z + s * dir.z)
        })
        .collect();
    let mut curve = pts.clone();
    for _ in 0..n_iter {
        let mut next = Vec::with_capacity(pts.len());
        for p in &pts {
            if let Ok(img) = return_map(p, params, model) {
                if img.radius() <= 1.0 && img.x.is_finite() && img.z.is_finite() {
                    next.push(img);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        curve.extend(next.iter().copied());
        pts = next;
    }
    if curve.len() < 2 * n_points {
        return Err(LabError::ManifoldEscaped);
    }
    Ok(curve)
}

fn grow_stable_curve(
    p0: &RectPoint,
    dir: &Vector3<f64>,
    eps: f64,
    params: &BifocusParams,
    model: &GlobalMapModel,
    n_points: usize,
    n_iter: usize,
) -> Result<Vec<RectPoint>> {
    let mut pts: Vec<RectPoint> = (0..n_points)
        .map(|k| {
            let s = eps * (2.0 * k as f64 / (n_points - 1) as f64 - 1.0);
            RectPoint::new(p0.x + s * dir.x, p0.y + s * dir.y, p0.z + s * dir.z)
        })
        .collect();
    let mut curve = pts.clone();
    for _ in 0..n_iter {
        let mut next = Vec::with_capacity(pts.len());
        let mut seed = *p0;
        for p in &pts {
            if let Ok(pre) = inverse_return_map(p, params, model, &seed) {
                seed = pre;
                next.push(pre);
            }
        }
        if next.is_empty() {
            break;
        }
        curve.extend(next.iter().copied());
        pts = next;
    }
    if curve.len() < 2 * n_points {
        return Err(LabError::ManifoldEscaped);
    }
    Ok(curve)
}

/// Count transversal crossings of the two polylines projected to the
/// (Y, Z) plane (expanding coordinate against one contracting coordinate).
fn crossing_count(cu: &[RectPoint], cs: &[RectPoint]) -> usize {
    let seg = |c: &[RectPoint], k: usize| {
        ((c[k].y, c[k].z), (c[k + 1].y, c[k + 1].z))
    };
    let orient = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
    };
    let mut count = 0usize;
    for i in 0..cu.len().saturating_sub(1) {
        let (a, b) = seg(cu, i);
        for j in 0..cs.len().saturating_sub(1) {
            let (c, d) = seg(cs, j);
            let (o1, o2) = (orient(a, b, c), orient(a, b, d));
            let (o3, o4) = (orient(c, d, a), orient(c, d, b));
            if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
                count += 1;
            }
        }
    }
    count
}

fn crossings_at_delta(
    delta: f64,
    base: &BifocusParams,
    model: &GlobalMapModel,
    cfg: &SlabConfig,
    p_n_word: &Itinerary,
    p_m_word: &Itinerary,
) -> Result<usize> {
    let params = BifocusParams::new(
        delta * base.alpha2,
        base.alpha2,
        base.omega1,
        base.omega2,
        base.lambda,
    )?;
    let orbit_n = find_periodic_orbit(p_n_word, &params, model, cfg)?;
    let orbit_m = find_periodic_orbit(p_m_word, &params, model, cfg)?;
    let mono_n = orbit_n.monodromy;
    let mono_m = orbit_m.monodromy;
    let u_dir = eigvec(&mono_n, orbit_n.spectrum[0].re);
    // weak-stable (O(1)) eigenvector: the middle multiplier
    let s_dir = eigvec(&mono_m, orbit_m.spectrum[1].re);
    let pn = orbit_n.points[0];
    let pm = orbit_m.points[0];
    let eps_u = 0.05 * pn.radius();
    let eps_s = 0.05 * pm.radius();
    let cu = grow_unstable_curve(&pn, &u_dir, eps_u, &params, model, 64, 2)?;
    let cs = grow_stable_curve(&pm, &s_dir, eps_s, &params, model, 64, 2)?;
    Ok(crossing_count(&cu, &cs))
}

/// Sweep the saddle value and report crossing-count change events, each
/// bisected to a bracket of width at most the grid step over 2^6.
pub fn tangency_scan(
    delta_range: (f64, f64),
    base: &BifocusParams,
    model: &GlobalMapModel,
    cfg: &SlabConfig,
    p_n_word: &Itinerary,
    p_m_word: &Itinerary,
    resolution: usize,
) -> Result<Vec<TangencyEvent>> {
    let (d_lo, d_hi) = delta_range;
    if !(d_lo > 1.0 && d_hi > d_lo) {
        return Err(LabError::ParamViolation(format!(
            "delta range must satisfy 1 < lo < hi (got {d_lo}, {d_hi})"
        )));
    }
    if resolution < 2 {
        return Err(LabError::ParamViolation("resolution >= 2".into()));
    }
    let homoclinic = p_n_word == p_m_word;
    let mut events = Vec::new();
    let count_at = |d: f64, last_good: f64| -> Result<usize> {
        crossings_at_delta(d, base, model, cfg, p_n_word, p_m_word)
            .map_err(|e| match e {
                LabError::NoConvergence { .. } | LabError::SingularJacobian => {
                    LabError::ContinuationLost(last_good)
                }
                other => other,
            })
    };
    let mut prev_d = d_lo;
    let mut prev_c = count_at(d_lo, d_lo, )?;
    for k in 1..=resolution {
        let d = d_lo + (d_hi - d_lo) * k as f64 / resolution as f64;
        let c = count_at(d, prev_d)?;
        if c != prev_c {
            // bisect the bracket
            let (mut lo, mut hi) = (prev_d, d);
            let (lo_c, mut hi_c) = (prev_c, c);
            for _ in 0..6 {
                let mid = 0.5 * (lo + hi);
                let mc = count_at(mid, lo)?;
                if mc == lo_c {
                    lo = mid;
                } else {
                    hi = mid;
                    hi_c = mc;
                }
            }
            events.push(TangencyEvent {
                delta_star: 0.5 * (lo + hi),
                bracket: (lo, hi),
                crossings_before: lo_c,
                crossings_after: hi_c,
                homoclinic,
            });
        }
        prev_d = d;
        prev_c = c;
    }
    Ok(events)
}

/// One row of a parameter-sweep classification.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub params: Vec<f64>,
    pub class: AttractorKind,
    pub lyapunov: [f64; 3],
    pub evidence_residual: f64,
}

/// CSV with one row per sweep cell: the parameter columns, the class, the
/// Lyapunov exponents, and the circle-fit residual.
pub fn write_sweep_csv<W: std::io::Write>(
    out: &mut W,
    param_names: &[&str],
    rows: &[SweepRow],
) -> std::io::Result<()> {
    write!(out, "{}", param_names.join(","))?;
    writeln!(out, ",class,lyap1,lyap2,lyap3,evidence_residual")?;
    for row in rows {
        for v in &row.params {
            write!(out, "{v:.17e},")?;
        }
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.17e}",
            row.class, row.lyapunov[0], row.lyapunov[1], row.lyapunov[2], row.evidence_residual
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn henon_examples() {
        let hp = HenonParams::new(0.7, 0.2).unwrap();
        assert_eq!(henon_limit_map([0.0, 0.0, 0.0], &hp), [0.0, 0.0, 0.7]);
        let hp0 = HenonParams::new(0.0, 0.0).unwrap();
        let fps = henon_fixed_points(&hp0);
        assert_eq!(fps.len(), 2);
        assert_relative_eq!(fps[0][2], 1.0, max_relative = 1e-14);
        assert_relative_eq!(fps[1][2], 0.0, max_relative = 1e-14);
        let hp2 = HenonParams::new(-0.5, 0.3).unwrap();
        for fp in henon_fixed_points(&hp2) {
            let img = henon_limit_map(fp, &hp2);
            for c in 0..3 {
                assert!((img[c] - fp[c]).abs() < 1e-12);
            }
        }
        let zs: Vec<f64> = henon_fixed_points(&hp2).iter().map(|p| p[2]).collect();
        assert_relative_eq!(zs[0], 1.13898, epsilon = 1e-5);
        assert_relative_eq!(zs[1], -0.43898, epsilon = 1e-5);
    }

    #[test]
    fn henon_reduced_det() {
        let hp = HenonParams::new(0.4, 0.3).unwrap();
        assert_eq!(henon_reduced_jacobian_det(&hp, 2.5), -0.3);
        assert_eq!(
            henon_reduced_jacobian_det(&HenonParams::new(0.0, 1.0).unwrap(), 0.0),
            -1.0
        );
        assert_eq!(
            henon_reduced_jacobian_det(&HenonParams::new(0.0, 0.0).unwrap(), 7.0),
            0.0
        );
        // cross-check against central differences of the reduced map
        let f = |y: f64, z: f64| (hp.b_tilde * z, hp.a_tilde + y + z * z);
        let h = 1e-5;
        for k in 0..100 {
            let (y, z) = (0.1 * k as f64 - 5.0, 0.07 * k as f64 - 3.0);
            let d11 = (f(y + h, z).0 - f(y - h, z).0) / (2.0 * h);
            let d12 = (f(y, z + h).0 - f(y, z - h).0) / (2.0 * h);
            let d21 = (f(y + h, z).1 - f(y - h, z).1) / (2.0 * h);
            let d22 = (f(y, z + h).1 - f(y, z - h).1) / (2.0 * h);
            let det = d11 * d22 - d12 * d21;
            assert!((det - henon_reduced_jacobian_det(&hp, z)).abs() < 1e-6);
        }
    }

    #[test]
    fn rotated_saddle_examples() {
        let rp = RotatedSaddleParams::new(1.1, 0.25, 0.5).unwrap();
        let out = rotated_saddle_step([1.0, 0.0, 1.0], &rp);
        assert_relative_eq!(out[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(out[1], 1.1, max_relative = 1e-14);
        assert_relative_eq!(out[2], 0.5, max_relative = 1e-14);
        let axis = rotated_saddle_step([0.0, 0.0, 3.0], &rp);
        assert_eq!(axis[0], 0.0);
        assert_eq!(axis[1], 0.0);
        assert_relative_eq!(axis[2], 1.5, max_relative = 1e-14);
        let rp2 = RotatedSaddleParams::new(1.05, 0.381966, 0.2).unwrap();
        let v = rotated_saddle_step([3.0, 4.0, 0.0], &rp2);
        assert_relative_eq!(v[0].hypot(v[1]), 5.25, max_relative = 1e-13);
        assert!(RotatedSaddleParams::new(0.9, 0.1, 0.5).is_err());
        assert!(RotatedSaddleParams::new(1.1, 0.1, 1.5).is_err());
    }

    #[test]
    fn normal_form_examples() {
        let nf = NormalFormParams::new(0.04, 1.0, 0.7, 0.5, false).unwrap();
        let step = normal_form_map(0.0, 1.0, 2.0, &nf).unwrap();
        assert_eq!(step.r, 0.0);
        assert_relative_eq!(step.theta, 1.7, max_relative = 1e-14);
        assert_relative_eq!(step.t, 1.0, max_relative = 1e-14);
        // radial fixed point sqrt(mu/a_mu)
        let mut r = 0.5;
        for _ in 0..1000 {
            r = normal_form_map(r, 0.0, 0.0, &nf).unwrap().r;
        }
        assert!((r - 0.2).abs() < 1e-6);
        let nf_neg = NormalFormParams::new(-0.01, 1.0, 0.7, 0.5, false).unwrap();
        let mut r2 = 0.1;
        for _ in 0..5000 {
            r2 = normal_form_map(r2, 0.0, 0.0, &nf_neg).unwrap().r;
        }
        assert!(r2 < 1e-6);
        assert!(normal_form_map(-0.1, 0.0, 0.0, &nf).is_err());
        // cubic overshoot clamps with a flag
        let overshoot = normal_form_map(5.0, 0.0, 0.0, &nf).unwrap();
        assert!(overshoot.clamped);
        assert_eq!(overshoot.r, 0.0);
    }

    #[test]
    fn radial_fixed_point_grid() {
        for &mu in &[0.01, 0.04, 0.09] {
            for &a_mu in &[0.5, 1.0, 2.0] {
                let nf = NormalFormParams::new(mu, a_mu, 0.3, 0.5, false).unwrap();
                let target = (mu / a_mu).sqrt();
                let mut r = 0.5 * target;
                for _ in 0..100_000 {
                    r = normal_form_map(r, 0.0, 0.0, &nf).unwrap().r;
                }
                assert!((r - target).abs() < 1e-6, "mu={mu} a={a_mu}");
            }
        }
    }

    #[test]
    fn classify_invariant_circle() {
        // golden-mean rotation on the circle
        let beta = TAU * 0.5 * (5.0f64.sqrt() - 1.0);
        let nf = NormalFormParams::new(0.04, 1.0, beta, 0.5, false).unwrap();
        let f = normal_form_embedded(nf);
        let class = classify_attractor(&f, [0.5, 0.0, 0.3], 100_000).unwrap();
        assert_eq!(class.kind, AttractorKind::InvariantCircle);
        assert!((class.evidence.circle_radius - 0.2).abs() < 1e-4);
        assert!(class.lyapunov[0].abs() < LYAP_ZERO_BAND);
    }

    #[test]
    fn classify_sink() {
        let nf = NormalFormParams::new(-0.01, 1.0, 0.7, 0.5, false).unwrap();
        let f = normal_form_embedded(nf);
        let class = classify_attractor(&f, [0.1, 0.0, 0.1], 20_000).unwrap();
        assert_eq!(class.kind, AttractorKind::Sink);
        assert!(class.lyapunov[0] < 0.0);
    }

    #[test]
    fn classify_escape() {
        let hp = HenonParams::new(10.0, 0.3).unwrap();
        let f = move |p: [f64; 3]| henon_limit_map(p, &hp);
        let class = classify_attractor(&f, [0.1, 0.1, 0.1], 10_000).unwrap();
        assert_eq!(class.kind, AttractorKind::Escaped);
        assert!(classify_attractor(&f, [0.1, 0.1, 0.1], 100).is_err());
    }

    #[test]
    fn lyapunov_sum_rule_on_circle() {
        let beta = TAU * 0.5 * (5.0f64.sqrt() - 1.0);
        let mu = 0.04;
        let nf = NormalFormParams::new(mu, 1.0, beta, 0.5, false).unwrap();
        let f = normal_form_embedded(nf);
        let class = classify_attractor(&f, [0.5, 0.0, 0.3], 100_000).unwrap();
        let r_star = (mu / 1.0f64).sqrt();
        let expected = (1.0 + mu - 3.0 * r_star * r_star).abs().ln() + 0.0 + 0.5f64.ln();
        let sum: f64 = class.lyapunov.iter().sum();
        assert!((sum - expected).abs() < 1e-4, "sum={sum} expected={expected}");
    }

    #[test]
    fn sweep_csv_schema() {
        let rows = vec![SweepRow {
            params: vec![0.1, 0.2],
            class: AttractorKind::Sink,
            lyapunov: [-0.5, -0.6, -0.7],
            evidence_residual: 1e-9,
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &["a", "b"], &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "a,b,class,lyap1,lyap2,lyap3,evidence_residual"
        );
        assert!(lines.next().unwrap().contains("Sink"));
    }

    #[test]
    fn tangency_scan_runs() {
        let base = BifocusParams::new(2.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let model = GlobalMapModel::default();
        let cfg = SlabConfig::default();
        let word = Itinerary::periodic(vec![(3, 1)]).unwrap();
        let events =
            tangency_scan((1.8, 2.2), &base, &model, &cfg, &word, &word, 8).unwrap();
        for e in &events {
            assert!(e.bracket.1 - e.bracket.0 <= (2.2 - 1.8) / 8.0);
            assert!(e.homoclinic);
            assert!(e.crossings_before != e.crossings_after);
        }
    }

    #[test]
    fn tangency_scan_rejects_bad_range() {
        let base = BifocusParams::new(2.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let model = GlobalMapModel::default();
        let cfg = SlabConfig::default();
        let word = Itinerary::periodic(vec![(3, 1)]).unwrap();
        assert!(tangency_scan((0.5, 2.0), &base, &model, &cfg, &word, &word, 8).is_err());
    }
}
