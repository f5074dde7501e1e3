//! Denjoy surgery on the circle, the derived 3D map with an attracting
//! surgered circle, and statistical verification that the base tube is a
//! contracting non-trivial wandering domain.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::section::wrap_angle;
use crate::tangency::NormalFormParams;

/// `theta + 2 pi omega mod 2 pi`.
pub fn rigid_rotation(theta: f64, omega: f64) -> f64 {
    wrap_angle(theta + TAU * omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LengthLaw {
    /// `l(I_n) = (6/pi^2) L / (n+1)^2`; the full series sums to L exactly.
    Basel,
    /// `l(I_n) = L (1 - q) q^n` for ratio `q` in (0, 1).
    Geometric { ratio: f64 },
}

impl LengthLaw {
    fn length(&self, budget: f64, n: usize) -> f64 {
        match self {
            LengthLaw::Basel => {
                let k = (n + 1) as f64;
                6.0 / (PI * PI) * budget / (k * k)
            }
            LengthLaw::Geometric { ratio } => budget * (1.0 - ratio) * ratio.powi(n as i32),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenjoyConfig {
    /// rotation number (irrational intended; golden-mean surrogate in presets)
    pub omega: f64,
    /// base point of the blown-up orbit
    pub theta0: f64,
    /// total inserted length L
    pub length_budget: f64,
    pub length_law: LengthLaw,
    /// truncation count for the finite realization
    pub n_intervals: usize,
}

/// Reject rotation numbers that a rational p/q with small denominator
/// approximates to machine accuracy (the floating-point surrogate for
/// irrationality).
fn check_irrational(omega: f64) -> Result<()> {
    let x = omega.rem_euclid(1.0);
    // continued-fraction convergents of x
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut frac = x;
    for _ in 0..64 {
        if frac.abs() < 1e-15 {
            break;
        }
        let a = (1.0 / frac).floor();
        if !a.is_finite() || a >= 1e7 {
            break;
        }
        let (p2, q2) = (a as i64 * p0 + p1, a as i64 * q0 + q1);
        if q2 > 1_000_000 {
            break;
        }
        let err = (x - p2 as f64 / q2 as f64).abs();
        if err < 1e-13 {
            return Err(LabError::Config(format!(
                "rotation number {omega} is approximated by {p2}/{q2} to {err:.2e}; \
                 need an irrational surrogate"
            )));
        }
        (p1, q1, p0, q0) = (p0, q0, p2, q2);
        frac = 1.0 / frac - a;
    }
    Ok(())
}

impl DenjoyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_intervals < 100 {
            return Err(LabError::Config(format!(
                "n_intervals >= 100 (got {})",
                self.n_intervals
            )));
        }
        if !(self.length_budget > 0.0) {
            return Err(LabError::Config("length_budget must be positive".into()));
        }
        if let LengthLaw::Geometric { ratio } = self.length_law {
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(LabError::Config(format!("geometric ratio in (0,1), got {ratio}")));
            }
        }
        let mut partial = 0.0;
        for n in 0..self.n_intervals {
            let l = self.length_law.length(self.length_budget, n);
            if !(l > 0.0) {
                return Err(LabError::Config(format!("l(I_{n}) must be positive")));
            }
            partial += l;
        }
        if partial > self.length_budget + 1e-12 {
            return Err(LabError::Config(format!(
                "partial sums exceed the length budget: {partial} > {}",
                self.length_budget
            )));
        }
        check_irrational(self.omega)
    }
}

/// One inserted interval, in circle (source) order.
#[derive(Debug, Clone, Copy, Serialize)]
struct Seg {
    /// orbit index n of the blown-up point theta_n
    orbit_n: usize,
    /// collapsed position on the original circle
    theta: f64,
    /// left endpoint on the blown-up circle
    src_start: f64,
    src_len: f64,
    /// lifted left endpoint of the image interval
    img_start: f64,
    img_len: f64,
}

/// The blown-up circle of total length `2 pi + sum l(I_n)` and the induced
/// degree-one map: bridge diffeomorphisms on the inserted intervals and
/// monotone interpolation of the collapsed rotation on the gaps.
#[derive(Debug, Clone, Serialize)]
pub struct DenjoyCircleMap {
    pub omega: f64,
    pub total_len: f64,
    /// per-orbit-index inserted length
    lengths: Vec<f64>,
    /// intervals sorted in circle order
    segs: Vec<Seg>,
    /// position of I_n's left endpoint, indexed by orbit n
    start_by_orbit: Vec<f64>,
}

/// Bridge derivative profile: smoothstep ramps of width `w` into a plateau.
/// `H` maps [0,1] to [0,1] with `H'(0) = H'(1) = kappa` and unit mean slope;
/// the plateau height 1/(1-w) stays below kappa/(kappa-1) for every
/// length-law ratio kappa <= 4, keeping the derivative positive.
const BRIDGE_RAMP: f64 = 0.2;

fn bridge_h(u: f64, kappa: f64) -> f64 {
    let w = BRIDGE_RAMP;
    let c = 1.0 / (1.0 - w);
    // Phi(u) = integral of the plateau bump with unit total mass
    let g = |t: f64| t * t * t - 0.5 * t * t * t * t;
    let phi = if u <= w {
        c * w * g(u / w)
    } else if u <= 1.0 - w {
        c * w * 0.5 + c * (u - w)
    } else {
        1.0 - c * w * g((1.0 - u) / w)
    };
    kappa * u + (1.0 - kappa) * phi
}

impl DenjoyCircleMap {
    /// The rigid rotation viewed as a (surgery-free) circle map; used for the
    /// rational-rotation negative control.
    pub fn rigid(omega: f64) -> Self {
        Self {
            omega,
            total_len: TAU,
            lengths: Vec::new(),
            segs: Vec::new(),
            start_by_orbit: Vec::new(),
        }
    }

    pub fn n_intervals(&self) -> usize {
        self.segs.len()
    }

    /// Left endpoint and length of `I_n` on the blown-up circle.  For the
    /// rigid (surgery-free) map, a nominal base arc of 1% of the circle.
    pub fn interval_span(&self, orbit_n: usize) -> (f64, f64) {
        if self.segs.is_empty() {
            return (0.0, 0.01 * self.total_len);
        }
        let start = self.start_by_orbit[orbit_n];
        (start, self.lengths[orbit_n])
    }

    /// Collapse a blown-up point to the original circle.
    pub fn collapse(&self, s: f64) -> f64 {
        let s = s.rem_euclid(self.total_len);
        let mut inserted = 0.0;
        for seg in &self.segs {
            if s < seg.src_start {
                break;
            }
            if s < seg.src_start + seg.src_len {
                return seg.theta;
            }
            inserted += seg.src_len;
        }
        wrap_angle(s - inserted)
    }

    /// Open-interval membership: the orbit index and the distance to the
    /// nearest interval endpoint.
    pub fn in_open_interval(&self, s: f64) -> Option<(usize, f64)> {
        let s = s.rem_euclid(self.total_len);
        let idx = self.segs.partition_point(|seg| seg.src_start <= s);
        if idx == 0 {
            return None;
        }
        let seg = &self.segs[idx - 1];
        let local = s - seg.src_start;
        if local > 0.0 && local < seg.src_len {
            Some((seg.orbit_n, local.min(seg.src_len - local)))
        } else {
            None
        }
    }

    /// Lift of the circle map: monotone, commutes with `x -> x + total_len`.
    pub fn eval_lift(&self, x: f64) -> f64 {
        let c = self.total_len;
        if self.segs.is_empty() {
            return x + TAU * self.omega;
        }
        let base = self.segs[0].src_start;
        let k = ((x - base) / c).floor();
        let xb = x - k * c;
        // locate within [base, base + c)
        let m = self.segs.len();
        let idx = self.segs.partition_point(|seg| seg.src_start <= xb);
        let i = if idx == 0 { 0 } else { idx - 1 };
        let seg = &self.segs[i];
        let val = if xb < seg.src_start + seg.src_len {
            // inside I_n: bridge onto the image interval
            let u = (xb - seg.src_start) / seg.src_len;
            let kappa = seg.src_len / seg.img_len;
            seg.img_start + seg.img_len * bridge_h(u, kappa)
        } else {
            // gap arc: affine interpolation between adjacent image endpoints
            let (next_start, next_img) = if i + 1 < m {
                (self.segs[i + 1].src_start, self.segs[i + 1].img_start)
            } else {
                (self.segs[0].src_start + c, self.segs[0].img_start + c)
            };
            let a0 = seg.src_start + seg.src_len;
            let v0 = seg.img_start + seg.img_len;
            let u = (xb - a0) / (next_start - a0);
            v0 + u * (next_img - v0)
        };
        val + k * c
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.eval_lift(s).rem_euclid(self.total_len)
    }

    /// Orbit-averaged rotation number estimate, as a fraction of the circle.
    pub fn rotation_number(&self, n_iter: usize) -> f64 {
        let mut x = 0.123 * self.total_len;
        let x0 = x;
        for _ in 0..n_iter {
            x = self.eval_lift(x);
        }
        (x - x0) / (n_iter as f64 * self.total_len)
    }
}

/// Blow up the forward orbit of `theta0` under the rotation into inserted
/// intervals with smooth bridge dynamics `I_n -> I_{n+1}`.
pub fn denjoy_surgery(cfg: &DenjoyConfig) -> Result<DenjoyCircleMap> {
    cfg.validate()?;
    let n = cfg.n_intervals;
    let lengths: Vec<f64> = (0..n)
        .map(|k| cfg.length_law.length(cfg.length_budget, k))
        .collect();
    let thetas: Vec<f64> = (0..=n)
        .map(|k| wrap_angle(cfg.theta0 + TAU * k as f64 * cfg.omega))
        .collect();
    // realized insertion points must be pairwise separated; theta_n (the
    // truncation image) must clear its neighbours by the last length
    let mut order: Vec<usize> = (0..=n).collect();
    order.sort_by(|&a, &b| thetas[a].partial_cmp(&thetas[b]).unwrap());
    for w in 0..=n {
        let a = order[w];
        let b = order[(w + 1) % (n + 1)];
        let gap = (thetas[b] - thetas[a]).rem_euclid(TAU);
        let involved_len = if a == n || b == n {
            lengths[n - 1]
        } else {
            f64::MIN_POSITIVE
        };
        if gap < involved_len.max(1e-12) {
            let index = a.min(b);
            return Err(LabError::OverlapDetected { index, len: involved_len, gap });
        }
    }
    // circle-ordered realized intervals with blown-up positions
    let mut realized: Vec<usize> = (0..n).collect();
    realized.sort_by(|&a, &b| thetas[a].partial_cmp(&thetas[b]).unwrap());
    let mut segs: Vec<Seg> = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &orbit_n in &realized {
        segs.push(Seg {
            orbit_n,
            theta: thetas[orbit_n],
            src_start: thetas[orbit_n] + acc,
            src_len: lengths[orbit_n],
            img_start: 0.0,
            img_len: 0.0,
        });
        acc += lengths[orbit_n];
    }
    let total_len = TAU + acc;
    let mut start_by_orbit = vec![0.0; n];
    for seg in &segs {
        start_by_orbit[seg.orbit_n] = seg.src_start;
    }
    // embed the truncation image point theta_n
    let embed_theta_n = {
        let mut before = 0.0;
        for seg in &segs {
            if seg.theta < thetas[n] {
                before += seg.src_len;
            }
        }
        thetas[n] + before
    };
    // raw image intervals: I_n -> I_{n+1}; the last interval maps rigidly
    // onto a virtual interval centred at the truncation image
    let raw: Vec<(f64, f64)> = segs
        .iter()
        .map(|seg| {
            if seg.orbit_n + 1 < n {
                (start_by_orbit[seg.orbit_n + 1], lengths[seg.orbit_n + 1])
            } else {
                (embed_theta_n - 0.5 * lengths[n - 1], lengths[n - 1])
            }
        })
        .collect();
    // lift the image left endpoints into a strictly increasing sequence
    let mut prev_end = f64::NEG_INFINITY;
    for (i, seg) in segs.iter_mut().enumerate() {
        let mut v = raw[i].0.rem_euclid(total_len);
        while v <= prev_end {
            v += total_len;
        }
        seg.img_start = v;
        seg.img_len = raw[i].1;
        prev_end = v + raw[i].1;
    }
    // degree-one consistency: one source loop advances the image by one loop
    let wrap_ok = prev_end < segs[0].img_start + total_len;
    if !wrap_ok {
        return Err(LabError::Config("image intervals failed to tile one period".into()));
    }
    Ok(DenjoyCircleMap { omega: cfg.omega, total_len, lengths, segs, start_by_orbit })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WanderingDomainSpec {
    /// index of the base interval (the wandering tube sits over I_0)
    pub base_interval: usize,
    /// tube half-thickness in the radial and normal directions
    pub tube_radius: f64,
    /// normal contraction per step (gamma; = 1 disables normal contraction,
    /// used by the negative control)
    pub normal_rate: f64,
}

impl WanderingDomainSpec {
    pub fn new(tube_radius: f64, normal_rate: f64) -> Result<Self> {
        if !(tube_radius > 0.0) {
            return Err(LabError::ParamViolation("tube_radius must be positive".into()));
        }
        if !(normal_rate > 0.0 && normal_rate <= 1.0) {
            return Err(LabError::ParamViolation(format!(
                "normal_rate in (0, 1] (got {normal_rate})"
            )));
        }
        Ok(Self { base_interval: 0, tube_radius, normal_rate })
    }
}

/// A point of the 3D map: lifted angular arc-length, planar radius, normal
/// coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GbPoint {
    pub s: f64,
    pub r: f64,
    pub t: f64,
}

/// The 3D map: normal-form radial contraction toward the circle of radius
/// sqrt(mu/a_mu), Denjoy dynamics in the angular coordinate, geometric decay
/// in the normal coordinate.
#[derive(Debug, Clone, Serialize)]
pub struct GbMap {
    pub circle: DenjoyCircleMap,
    pub nf: NormalFormParams,
    pub spec: WanderingDomainSpec,
}

pub fn build_gb(
    circle: DenjoyCircleMap,
    nf: NormalFormParams,
    spec: WanderingDomainSpec,
) -> Result<GbMap> {
    if !(nf.mu > 0.0) {
        return Err(LabError::ParamViolation(format!(
            "mu > 0 required for an attracting circle (got {})",
            nf.mu
        )));
    }
    Ok(GbMap { circle, nf, spec })
}

impl GbMap {
    pub fn circle_radius(&self) -> f64 {
        (self.nf.mu / self.nf.a_mu).sqrt()
    }

    /// Linearized radial contraction rate at the invariant circle:
    /// `|1 + mu - 3 a_mu r*^2|`.
    pub fn radial_rate(&self) -> f64 {
        (1.0 + self.nf.mu - 3.0 * self.nf.a_mu * self.circle_radius().powi(2)).abs()
    }

    pub fn step(&self, p: &GbPoint) -> GbPoint {
        let mut r = (1.0 + self.nf.mu) * p.r - self.nf.a_mu * p.r.powi(3);
        if self.nf.hot_enabled {
            r += 0.1 * self.nf.mu * p.r.powi(4);
        }
        GbPoint {
            s: self.circle.eval_lift(p.s),
            r: r.max(0.0),
            t: self.spec.normal_rate * p.t,
        }
    }

    /// Cartesian embedding for distances and diameters.
    pub fn embed3(&self, p: &GbPoint) -> [f64; 3] {
        let phi = TAU * p.s.rem_euclid(self.circle.total_len) / self.circle.total_len;
        [p.r * phi.cos(), p.r * phi.sin(), p.t]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WanderingChecks {
    pub disjoint: bool,
    /// minimum circular gap between tube footprints, arc-length units
    pub min_separation: f64,
    pub contraction: bool,
    /// first step with tube diameter below the contraction threshold
    pub k_star: Option<usize>,
    pub periodicity_free: bool,
    /// omega-limit samples within tolerance of the interval-complement
    pub cantor: bool,
    pub max_cantor_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WanderingReport {
    pub omega: f64,
    pub n_iter: usize,
    pub period_bound: usize,
    pub margin: f64,
    pub checks: WanderingChecks,
    /// subsampled (step, diameter) curve
    pub diam_curve: Vec<(usize, f64)>,
    /// angular omega-limit samples, arc-length mod total_len
    pub omega_limit_samples: Vec<f64>,
}

/// Tube diameter below which the contraction check considers the image
/// collapsed.
pub const CONTRACTION_THRESHOLD: f64 = 1e-3;
/// Allowed distance from an omega-limit sample to the interval complement.
pub const CANTOR_TOL: f64 = 1e-6;

/// Circular gap between two arcs given as (start, end) pairs; 0 on overlap.
fn footprint_gap(total: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (la, lb) = (a.1 - a.0, b.1 - b.0);
    let (a0, b0) = (a.0.rem_euclid(total), b.0.rem_euclid(total));
    let d_ab = (b0 - (a0 + la)).rem_euclid(total);
    let d_ba = (a0 - (b0 + lb)).rem_euclid(total);
    // disjoint arcs satisfy d_ab + d_ba = total - la - lb exactly; an overlap
    // wraps one of the differences around the circle
    if d_ab + d_ba > total - la - lb + 1e-9 {
        0.0
    } else {
        d_ab.min(d_ba)
    }
}

/// Verify the wandering-domain certificate: (iii) no periodicity in the
/// omega-limit, (i) pairwise tube disjointness (reduced to footprint-vs-base
/// by injectivity of the map), (ii) diameter contraction, (iv) omega-limit
/// within tolerance of the interval complement.
pub fn verify_wandering(
    gb: &GbMap,
    n_iter: usize,
    period_bound: usize,
    margin: f64,
) -> Result<WanderingReport> {
    if n_iter < 1_000 {
        return Err(LabError::InsufficientSamples("verification needs n_iter >= 10^3"));
    }
    let (arc0, len0) = gb.circle.interval_span(gb.spec.base_interval);
    let r_star = gb.circle_radius();
    let delta = gb.spec.tube_radius;
    let m_arc = 200usize;
    let variants = [
        (r_star + delta, delta),
        (r_star + delta, -delta),
        ((r_star - delta).max(0.0), delta),
        ((r_star - delta).max(0.0), -delta),
        (r_star, 0.0),
    ];
    let mut cloud: Vec<GbPoint> = Vec::with_capacity(m_arc * variants.len());
    for k in 0..m_arc {
        let s = arc0 + len0 * k as f64 / (m_arc - 1) as f64;
        for &(r, t) in &variants {
            cloud.push(GbPoint { s, r, t });
        }
    }
    let total = gb.circle.total_len;
    let mut footprints: Vec<(f64, f64)> = Vec::with_capacity(n_iter + 1);
    let mut diams: Vec<f64> = Vec::with_capacity(n_iter + 1);
    let mut center_orbit: Vec<GbPoint> = Vec::with_capacity(n_iter + 1);
    let center_idx = cloud.len() / 2;
    for _step in 0..=n_iter {
        let (mut smin, mut smax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &cloud {
            smin = smin.min(p.s);
            smax = smax.max(p.s);
            rmin = rmin.min(p.r);
            rmax = rmax.max(p.r);
            tmin = tmin.min(p.t);
            tmax = tmax.max(p.t);
        }
        footprints.push((smin, smax));
        let chord = 2.0 * rmax * (PI * ((smax - smin) / total).min(1.0)).sin().abs();
        let diam = (chord * chord + (rmax - rmin).powi(2) + (tmax - tmin).powi(2)).sqrt();
        diams.push(diam);
        center_orbit.push(cloud[center_idx]);
        for p in cloud.iter_mut() {
            *p = gb.step(p);
        }
        // Drop whole windings so the lift coordinate stays near the base
        // window.  At lift magnitude ~ n * total an ulp is comparable to the
        // deep interval lengths, and the footprint extent would drown in
        // quantisation noise; subtracting a common multiple of the period
        // preserves all differences.
        let smin_new = cloud.iter().map(|p| p.s).fold(f64::INFINITY, f64::min);
        let wind = (smin_new / total).floor();
        if wind > 0.0 {
            let shift = wind * total;
            for p in cloud.iter_mut() {
                p.s -= shift;
            }
        }
    }
    // (iii) periodicity of the omega-limit approximation
    let tail_start = n_iter - n_iter / 10;
    let tail: Vec<GbPoint> = (tail_start..=n_iter)
        .step_by(((n_iter / 10) / 64).max(1))
        .map(|k| center_orbit[k])
        .collect();
    for x in &tail {
        let x3 = gb.embed3(x);
        let mut y = *x;
        for p in 1..=period_bound {
            y = gb.step(&y);
            let y3 = gb.embed3(&y);
            let dist = ((y3[0] - x3[0]).powi(2)
                + (y3[1] - x3[1]).powi(2)
                + (y3[2] - x3[2]).powi(2))
            .sqrt();
            if dist <= margin {
                return Err(LabError::PeriodicityDetected { period: p, dist });
            }
        }
    }
    // (i) disjointness: footprint_k vs footprint_0 (injectivity reduction)
    let base_fp = (
        footprints[0].0,
        footprints[0].1,
    );
    let mut min_sep = f64::INFINITY;
    for (k, fp) in footprints.iter().enumerate().skip(1) {
        let gap = footprint_gap(total, base_fp, *fp);
        if gap <= margin {
            return Err(LabError::DisjointnessViolated { i: 0, j: k });
        }
        min_sep = min_sep.min(gap);
    }
    // (ii) contraction of the tube diameter
    let k_star = diams.iter().position(|&d| d < CONTRACTION_THRESHOLD);
    let mut contraction_ok = diams[n_iter] < CONTRACTION_THRESHOLD && k_star.is_some();
    if contraction_ok {
        for k in 0..n_iter {
            if diams[k + 1] > 1.1 * diams[k] + 1e-12 {
                contraction_ok = false;
                break;
            }
        }
    }
    if !contraction_ok {
        return Err(LabError::ContractionFailed(format!(
            "final diameter {:.3e} (threshold {CONTRACTION_THRESHOLD:.0e}), k* = {k_star:?}",
            diams[n_iter]
        )));
    }
    // (iv) omega-limit within tolerance of the interval complement
    let mut max_defect = 0.0f64;
    let omega_limit_samples: Vec<f64> = tail
        .iter()
        .map(|p| p.s.rem_euclid(total))
        .collect();
    for &s in &omega_limit_samples {
        if let Some((_, d)) = gb.circle.in_open_interval(s) {
            max_defect = max_defect.max(d);
        }
    }
    let cantor = max_defect <= CANTOR_TOL;
    let stride = (n_iter / 512).max(1);
    let diam_curve: Vec<(usize, f64)> = (0..=n_iter)
        .step_by(stride)
        .map(|k| (k, diams[k]))
        .collect();
    Ok(WanderingReport {
        omega: gb.circle.omega,
        n_iter,
        period_bound,
        margin,
        checks: WanderingChecks {
            disjoint: true,
            min_separation: min_sep,
            contraction: true,
            k_star,
            periodicity_free: true,
            cantor,
            max_cantor_defect: max_defect,
        },
        diam_curve,
        omega_limit_samples,
    })
}

pub const GOLDEN_OMEGA: f64 = 0.618033988749894848;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn golden_cfg(n_intervals: usize) -> DenjoyConfig {
        DenjoyConfig {
            omega: GOLDEN_OMEGA,
            theta0: 0.3,
            length_budget: 0.5,
            length_law: LengthLaw::Basel,
            n_intervals,
        }
    }

    #[test]
    fn rigid_rotation_examples() {
        assert_eq!(rigid_rotation(1.7, 0.0), 1.7);
        assert_relative_eq!(rigid_rotation(0.0, 0.5), PI, max_relative = 1e-14);
        // rotation number of the rigid map
        let map = DenjoyCircleMap::rigid(GOLDEN_OMEGA);
        let rho = map.rotation_number(100_000);
        assert!((rho - GOLDEN_OMEGA).abs() < 1e-6);
    }

    #[test]
    fn basel_lengths_sum_below_budget() {
        let cfg = golden_cfg(1000);
        cfg.validate().unwrap();
        let total: f64 = (0..1000)
            .map(|n| cfg.length_law.length(cfg.length_budget, n))
            .sum();
        assert!(total >= 0.999 * cfg.length_budget);
        assert!(total < cfg.length_budget);
    }

    #[test]
    fn rational_omega_rejected() {
        let mut cfg = golden_cfg(300);
        cfg.omega = 1.0 / 3.0;
        assert!(matches!(denjoy_surgery(&cfg), Err(LabError::Config(_))));
    }

    #[test]
    fn surgery_interval_dynamics_exact() {
        let cfg = golden_cfg(300);
        let map = denjoy_surgery(&cfg).unwrap();
        assert_relative_eq!(
            map.total_len,
            TAU + (0..300)
                .map(|n| cfg.length_law.length(cfg.length_budget, n))
                .sum::<f64>(),
            max_relative = 1e-14
        );
        for n in 0..299usize {
            let (s, l) = map.interval_span(n);
            let (s1, l1) = map.interval_span(n + 1);
            // endpoints of I_n map to endpoints of I_{n+1}
            let left = map.eval(s);
            let right = map.eval(s + l);
            assert!((left - s1).abs() < 1e-9, "n={n}");
            assert!((right - (s1 + l1)).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn surgery_is_strictly_increasing_degree_one() {
        let map = denjoy_surgery(&golden_cfg(300)).unwrap();
        let c = map.total_len;
        let n = 100_000;
        let mut prev = map.eval_lift(0.0);
        for k in 1..=n {
            let x = c * k as f64 / n as f64;
            let v = map.eval_lift(x);
            assert!(v > prev, "monotonicity fails at {x}");
            prev = v;
        }
        assert_relative_eq!(map.eval_lift(c) - map.eval_lift(0.0), c, max_relative = 1e-10);
    }

    #[test]
    fn surgery_rotation_number_close() {
        let map = denjoy_surgery(&golden_cfg(300)).unwrap();
        let rho = map.rotation_number(100_000);
        assert!((rho - GOLDEN_OMEGA).abs() < 1e-4, "rho = {rho}");
    }

    #[test]
    fn semi_conjugacy_on_the_orbit() {
        let cfg = golden_cfg(300);
        let map = denjoy_surgery(&cfg).unwrap();
        for n in 0..299usize {
            let (s, l) = map.interval_span(n);
            let theta = map.collapse(s + 0.5 * l);
            let expect = wrap_angle(cfg.theta0 + TAU * n as f64 * cfg.omega);
            assert!((theta - expect).abs() < 1e-10, "n={n}");
            // collapsed step follows the rigid rotation
            let img_theta = map.collapse(map.eval(s + 0.5 * l));
            let next = wrap_angle(expect + TAU * cfg.omega);
            assert!((img_theta - next).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn gb_rates() {
        let map = denjoy_surgery(&golden_cfg(300)).unwrap();
        let nf = NormalFormParams::new(0.04, 1.0, 0.0, 0.5, false).unwrap();
        let spec = WanderingDomainSpec::new(0.05, 0.5).unwrap();
        let gb = build_gb(map, nf, spec).unwrap();
        assert_relative_eq!(gb.radial_rate(), 0.92, max_relative = 1e-12);
        // normal decay gamma^k
        let mut p = GbPoint { s: 0.0, r: gb.circle_radius(), t: 1.0 };
        for _ in 0..10 {
            p = gb.step(&p);
        }
        assert_relative_eq!(p.t, 0.5f64.powi(10), max_relative = 1e-12);
        // measured radial contraction near the circle
        let mut q = GbPoint { s: 0.0, r: gb.circle_radius() + 1e-6, t: 0.0 };
        let d0 = q.r - gb.circle_radius();
        q = gb.step(&q);
        assert_relative_eq!((q.r - gb.circle_radius()) / d0, 0.92, max_relative = 1e-4);
    }

    #[test]
    fn gb_circle_points_follow_denjoy() {
        let map = denjoy_surgery(&golden_cfg(300)).unwrap();
        let expected = map.eval_lift(1.234);
        let nf = NormalFormParams::new(0.04, 1.0, 0.0, 0.5, false).unwrap();
        let spec = WanderingDomainSpec::new(0.05, 0.5).unwrap();
        let gb = build_gb(map, nf, spec).unwrap();
        let p = gb.step(&GbPoint { s: 1.234, r: gb.circle_radius(), t: 0.0 });
        assert_eq!(p.s, expected);
        assert_relative_eq!(p.r, gb.circle_radius(), max_relative = 1e-12);
    }

    #[test]
    fn wandering_certificate_passes() {
        let map = denjoy_surgery(&golden_cfg(1500)).unwrap();
        let nf = NormalFormParams::new(0.04, 1.0, 0.0, 0.5, false).unwrap();
        let spec = WanderingDomainSpec::new(0.05, 0.5).unwrap();
        let gb = build_gb(map, nf, spec).unwrap();
        let report = verify_wandering(&gb, 1200, 40, 1e-6).unwrap();
        assert!(report.checks.disjoint);
        assert!(report.checks.contraction);
        assert!(report.checks.periodicity_free);
        assert!(report.checks.cantor, "defect {}", report.checks.max_cantor_defect);
        assert!(report.checks.min_separation > 0.0);
        assert!(report.checks.k_star.is_some());
    }

    #[test]
    fn gamma_one_fails_contraction() {
        let map = denjoy_surgery(&golden_cfg(1500)).unwrap();
        let nf = NormalFormParams::new(0.04, 1.0, 0.0, 0.5, false).unwrap();
        let spec = WanderingDomainSpec::new(0.05, 1.0).unwrap();
        let gb = build_gb(map, nf, spec).unwrap();
        assert!(matches!(
            verify_wandering(&gb, 1200, 40, 1e-6),
            Err(LabError::ContractionFailed(_))
        ));
    }

    #[test]
    fn rational_rotation_detected_periodic() {
        let map = DenjoyCircleMap::rigid(1.0 / 3.0);
        let nf = NormalFormParams::new(0.04, 1.0, 0.0, 0.5, false).unwrap();
        let spec = WanderingDomainSpec::new(0.05, 0.5).unwrap();
        let gb = build_gb(map, nf, spec).unwrap();
        match verify_wandering(&gb, 1200, 10, 1e-6) {
            Err(LabError::PeriodicityDetected { period, .. }) => assert_eq!(period, 3),
            other => panic!("expected PeriodicityDetected, got {other:?}"),
        }
    }

    #[test]
    fn too_few_iterations_rejected() {
        let map = DenjoyCircleMap::rigid(GOLDEN_OMEGA);
        let nf = NormalFormParams::new(0.04, 1.0, 0.0, 0.5, false).unwrap();
        let spec = WanderingDomainSpec::new(0.05, 0.5).unwrap();
        let gb = build_gb(map, nf, spec).unwrap();
        assert!(verify_wandering(&gb, 100, 10, 1e-6).is_err());
    }
}
