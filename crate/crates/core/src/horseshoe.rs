//! Computer-assisted verification of the suspended horseshoe: slab radii and
//! admissibility, the minimal index of the radii-ordering lemma, the
//! two-component slab intersections, contraction-rate estimates, periodic
//! orbits by itinerary, spectral hyperbolicity sampling, and Lyapunov
//! exponents.

use std::f64::consts::{PI, TAU};

use nalgebra::{Complex, DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::eig3;
use crate::error::{LabError, Result};
use crate::return_map::{
    return_map, return_map_jacobian, GlobalMapModel, JacobianMode, ReturnMapEval,
};
use crate::section::{wrap_angle_pm, BifocusParams, RectPoint};

/// Bookkeeping for the family of slabs carved out of the outgoing cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabConfig {
    /// Phase offset of the slab ladder, in [0, 2pi].
    pub eta: f64,
    /// Angular half-width of the outgoing neighbourhood, as a fraction of pi.
    pub eps_out: f64,
    /// Outer radius of the outgoing neighbourhood.
    pub c_out: f64,
    pub n_min: i64,
    pub n_max: i64,
}

impl Default for SlabConfig {
    fn default() -> Self {
        Self { eta: 0.0, eps_out: 1.0, c_out: 1.0, n_min: 0, n_max: 400 }
    }
}

impl SlabConfig {
    pub fn new(eta: f64, eps_out: f64, c_out: f64, n_min: i64, n_max: i64) -> Result<Self> {
        if !(0.0..=TAU).contains(&eta) {
            return Err(LabError::ParamViolation(format!("eta in [0, 2pi] (got {eta})")));
        }
        if !(eps_out > 0.0 && eps_out <= 1.0) {
            return Err(LabError::ParamViolation(format!("eps_out in (0, 1] (got {eps_out})")));
        }
        if !(c_out > 0.0 && c_out <= 1.0) {
            return Err(LabError::ParamViolation(format!("c_out in (0, 1] (got {c_out})")));
        }
        if n_max < n_min {
            return Err(LabError::ParamViolation(format!(
                "n_min <= n_max (got {n_min}, {n_max})"
            )));
        }
        Ok(Self { eta, eps_out, c_out, n_min, n_max })
    }

    /// Smallest admissible slab index,
    /// `N >= -(omega2 ln(c_out)/alpha2 + eta) / 2pi`.
    pub fn admissibility_bound(&self, params: &BifocusParams) -> i64 {
        let raw = -(params.omega2 / params.alpha2 * self.c_out.ln() + self.eta) / TAU;
        raw.ceil() as i64
    }
}

/// Radii of one slab: outer-cylinder radii `a` and bounding-torus radii `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlabIndex {
    pub n: i64,
    pub a_n: f64,
    pub a_n1: f64,
    pub b_n: f64,
    pub b_n1: f64,
}

fn radius(rate: f64, eta: f64, omega2: f64, n: i64) -> f64 {
    (-(rate * (eta + TAU * n as f64)) / omega2).exp()
}

/// `a_N = exp(-alpha1 (eta + 2 pi N) / omega2)`,
/// `b_N = exp(-alpha2 (eta + 2 pi N) / omega2)`.
pub fn slab_radii(n: i64, params: &BifocusParams, cfg: &SlabConfig) -> Result<SlabIndex> {
    let bound = cfg.admissibility_bound(params);
    if n < bound {
        return Err(LabError::InadmissibleIndex { index: n, bound });
    }
    Ok(SlabIndex {
        n,
        a_n: radius(params.alpha1, cfg.eta, params.omega2, n),
        a_n1: radius(params.alpha1, cfg.eta, params.omega2, n + 1),
        b_n: radius(params.alpha2, cfg.eta, params.omega2, n),
        b_n1: radius(params.alpha2, cfg.eta, params.omega2, n + 1),
    })
}

/// Smallest index from which the radii ordering `b_{N+1} > a_N` holds
/// strictly for every larger scanned index, cross-checked against the closed
/// form of the threshold inequality.
pub fn min_index_tec2(params: &BifocusParams, cfg: &SlabConfig) -> Result<i64> {
    let start = cfg.admissibility_bound(params).max(0);
    // b_{N+1} > a_N compared through the (exactly monotone) log arguments,
    // since the radii themselves underflow for large N
    let ordered = |n: i64| {
        params.alpha2 * (cfg.eta + TAU * (n + 1) as f64)
            < params.alpha1 * (cfg.eta + TAU * n as f64)
    };
    if !ordered(cfg.n_max) {
        return Err(LabError::NotFound(cfg.n_max));
    }
    let mut n0 = start;
    for n in (start..=cfg.n_max).rev() {
        if !ordered(n) {
            n0 = n;
            break;
        }
    }
    // closed form: alpha1 (eta + 2 pi N) > alpha2 (eta + 2 pi (N+1))
    // <=> N > alpha2/(alpha1 - alpha2) - eta/2pi
    let c = params.alpha2 / (params.alpha1 - params.alpha2) - cfg.eta / TAU;
    let analytic = (c.floor() as i64).max(start);
    // the closed form suffers cancellation in alpha1 - alpha2 when c lands
    // near an integer, so the scan is authoritative and the closed form is a
    // +-1 sanity check
    debug_assert!((n0 - analytic).abs() <= 1, "scan/closed-form mismatch: {n0} vs {analytic}");
    Ok(n0)
}

/// Slab index owning radius `r`, or None outside every slab band.
pub fn slab_of(r: f64, params: &BifocusParams, cfg: &SlabConfig) -> Option<i64> {
    if !(r > 0.0 && r < 1.0) {
        return None;
    }
    let n = (((params.omega2 / params.alpha2) * (-r.ln()) - cfg.eta) / TAU).floor() as i64;
    if n < cfg.admissibility_bound(params) {
        return None;
    }
    Some(n)
}

/// Membership of a section point in the slab `S_N` (preimage of the hollow
/// cylinder): the bounding-torus radius band plus the angular window carried
/// back through the local map.
pub fn slab_membership(
    q: &RectPoint,
    n: i64,
    params: &BifocusParams,
    cfg: &SlabConfig,
) -> bool {
    let r = q.radius();
    if r <= 0.0 {
        return false;
    }
    let b_n = radius(params.alpha2, cfg.eta, params.omega2, n);
    let b_n1 = radius(params.alpha2, cfg.eta, params.omega2, n + 1);
    if !(b_n1 <= r && r <= b_n) {
        return false;
    }
    let phi_out = wrap_angle_pm(q.y.atan2(q.x) - params.omega2 / params.alpha2 * r.ln());
    phi_out.abs() <= cfg.eps_out * PI
}

/// Membership of a point in the forward image `R_0(S_i)`, tested through the
/// closed-form preimage conditions: the planar (X, Z)-radius equals the
/// delta-power of the source radius, and the source satisfies the slab's
/// angular window.
pub fn image_membership(
    q: &RectPoint,
    i: i64,
    params: &BifocusParams,
    model: &GlobalMapModel,
    cfg: &SlabConfig,
) -> bool {
    let rho = q.x.hypot(q.z);
    if rho <= 0.0 {
        return false;
    }
    let a_i = radius(params.alpha1, cfg.eta, params.omega2, i);
    let a_i1 = radius(params.alpha1, cfg.eta, params.omega2, i + 1);
    if !(a_i1 <= rho && rho <= a_i) {
        return false;
    }
    // source radius r with r^delta = rho
    let ln_r = rho.ln() / params.delta();
    // source angular window: theta = Y + (w1/a2) ln r must satisfy
    // |wrap(theta - (w2/a2) ln r)| <= eps_out pi
    let (w1, w2) = if model.omega_swap {
        (params.omega2, params.omega1)
    } else {
        (params.omega1, params.omega2)
    };
    let cond = wrap_angle_pm(q.y + (w1 - w2) / params.alpha2 * ln_r);
    if cond.abs() > cfg.eps_out * PI {
        return false;
    }
    // source Z window (the incoming phi_s range)
    let psi = q.x.atan2(q.z);
    let z_src = wrap_angle_pm(psi + w2 / params.alpha2 * ln_r);
    z_src.abs() <= model.neighbourhood.eps_in * PI
}

/// Result of a grid scan for the components of `R_0(S_i) ∩ S_j`.
#[derive(Debug, Clone, Serialize)]
pub struct IntersectionScan {
    pub i: i64,
    pub j: i64,
    pub resolution: usize,
    pub component_count: usize,
    /// one representative point and branch label per component
    pub samples: Vec<(RectPoint, u8)>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

fn scan_components(
    i: i64,
    j: i64,
    params: &BifocusParams,
    model: &GlobalMapModel,
    cfg: &SlabConfig,
    resolution: usize,
) -> IntersectionScan {
    let a_i = radius(params.alpha1, cfg.eta, params.omega2, i);
    let b_j = radius(params.alpha2, cfg.eta, params.omega2, j);
    let b_j1 = radius(params.alpha2, cfg.eta, params.omega2, j + 1);
    let (nx, ny, nz) = (resolution, resolution, resolution);
    let margin = 1.05;
    let xs: Vec<f64> = (0..nx)
        .map(|k| margin * a_i * (2.0 * (k as f64 + 0.5) / nx as f64 - 1.0))
        .collect();
    // |Y| band [b_{j+1}, b_j] spans e^{2 pi} in ratio, so sample it
    // log-spaced in two signed bands; the core |Y| < b_{j+1} separates them
    let half = ny / 2;
    let (lo_ln, hi_ln) = ((0.9 * b_j1).ln(), (margin * b_j).ln());
    let band: Vec<f64> = (0..half)
        .map(|k| (lo_ln + (hi_ln - lo_ln) * (k as f64 + 0.5) / half as f64).exp())
        .collect();
    let mut ys: Vec<f64> = band.iter().rev().map(|v| -v).collect();
    ys.extend(band.iter().copied());
    let ny = ys.len();
    let zs: Vec<f64> = (0..nz)
        .map(|k| margin * a_i * (2.0 * (k as f64 + 0.5) / nz as f64 - 1.0))
        .collect();
    let idx = |ix: usize, iy: usize, iz: usize| (ix * ny + iy) * nz + iz;
    let mut hit = vec![false; nx * ny * nz];
    for ix in 0..nx {
        for iy in 0..ny {
            for iz in 0..nz {
                let q = RectPoint::new(xs[ix], ys[iy], zs[iz]);
                if slab_membership(&q, j, params, cfg)
                    && image_membership(&q, i, params, model, cfg)
                {
                    hit[idx(ix, iy, iz)] = true;
                }
            }
        }
    }
    let mut uf = UnionFind::new(nx * ny * nz);
    for ix in 0..nx {
        for iy in 0..ny {
            for iz in 0..nz {
                let here = idx(ix, iy, iz);
                if !hit[here] {
                    continue;
                }
                if ix + 1 < nx && hit[idx(ix + 1, iy, iz)] {
                    uf.union(here, idx(ix + 1, iy, iz));
                }
                // no adjacency across the sign gap between the Y bands
                if iy + 1 < ny && iy + 1 != half && hit[idx(ix, iy + 1, iz)] {
                    uf.union(here, idx(ix, iy + 1, iz));
                }
                if iz + 1 < nz && hit[idx(ix, iy, iz + 1)] {
                    uf.union(here, idx(ix, iy, iz + 1));
                }
            }
        }
    }
    let mut reps: Vec<(usize, RectPoint)> = Vec::new();
    for ix in 0..nx {
        for iy in 0..ny {
            for iz in 0..nz {
                let here = idx(ix, iy, iz);
                if hit[here] {
                    let root = uf.find(here);
                    if !reps.iter().any(|(r, _)| *r == root) {
                        reps.push((root, RectPoint::new(xs[ix], ys[iy], zs[iz])));
                    }
                }
            }
        }
    }
    let samples = reps
        .iter()
        .map(|(_, p)| (*p, if p.y > 0.0 { 1u8 } else { 2u8 }))
        .collect::<Vec<_>>();
    IntersectionScan { i, j, resolution, component_count: reps.len(), samples }
}

/// Count the connected components of `R_0(S_i) ∩ S_j` on a grid, verifying
/// stability under resolution doubling.
pub fn intersection_components(
    i: i64,
    j: i64,
    params: &BifocusParams,
    model: &GlobalMapModel,
    cfg: &SlabConfig,
    resolution: usize,
) -> Result<IntersectionScan> {
    let n0 = min_index_tec2(params, cfg)?;
    for &n in &[i, j] {
        if n <= n0 {
            return Err(LabError::InadmissibleIndex { index: n, bound: n0 + 1 });
        }
    }
    if resolution < 64 {
        return Err(LabError::ParamViolation(format!(
            "resolution >= 64 per axis (got {resolution})"
        )));
    }
    let coarse = scan_components(i, j, params, model, cfg, resolution);
    let fine = scan_components(i, j, params, model, cfg, 2 * resolution);
    if coarse.component_count != fine.component_count {
        return Err(LabError::ResolutionTooCoarse {
            coarse: coarse.component_count,
            fine: fine.component_count,
        });
    }
    Ok(fine)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthDirection {
    Horizontal,
    Vertical,
}

/// Width of a sampled slab: the spread of the graph coordinate over the
/// sample set (planar radius for vertical slabs, (X, Z)-radius for
/// horizontal ones).
pub fn slab_width(samples: &[RectPoint], direction: WidthDirection) -> Result<f64> {
    if samples.is_empty() {
        return Err(LabError::InsufficientSamples("slab width needs samples"));
    }
    let coord = |p: &RectPoint| match direction {
        WidthDirection::Vertical => p.radius(),
        WidthDirection::Horizontal => p.x.hypot(p.z),
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in samples {
        let c = coord(p);
        lo = lo.min(c);
        hi = hi.max(c);
    }
    Ok(hi - lo)
}

/// Symbol word: (slab index, branch in {1, 2}) per return.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Itinerary {
    pub word: Vec<(i64, u8)>,
    pub periodic: bool,
}

impl Itinerary {
    pub fn periodic(word: Vec<(i64, u8)>) -> Result<Self> {
        if word.is_empty() {
            return Err(LabError::ParamViolation("itinerary word must be nonempty".into()));
        }
        for &(_, k) in &word {
            if k != 1 && k != 2 {
                return Err(LabError::ParamViolation(format!("branch label {k} not in {{1,2}}")));
            }
        }
        Ok(Self { word, periodic: true })
    }

    fn format(word: &[(i64, u8)]) -> String {
        word.iter()
            .map(|(n, k)| format!("({n},{k})"))
            .collect::<Vec<_>>()
            .join("")
    }
}

/// A converged periodic orbit with its monodromy data.
#[derive(Debug, Clone, Serialize)]
pub struct PeriodicOrbit {
    pub word: Vec<(i64, u8)>,
    pub points: Vec<RectPoint>,
    pub residual: f64,
    #[serde(skip)]
    pub monodromy: Matrix3<f64>,
    /// eigenvalues of the monodromy (full-period Jacobian), by modulus desc
    #[serde(serialize_with = "ser_spectrum")]
    pub spectrum: [nalgebra::Complex<f64>; 3],
}

fn ser_spectrum<S: serde::Serializer>(
    ev: &[nalgebra::Complex<f64>; 3],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let pairs: Vec<[f64; 2]> = ev.iter().map(|z| [z.re, z.im]).collect();
    pairs.serialize(s)
}

fn branch_sign(k: u8) -> f64 {
    if k == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Radial skeleton seeds: for each word position, a radius whose return lands
/// on the next position's branch with the right slab index.
fn seed_radii(
    word: &[(i64, u8)],
    params: &BifocusParams,
    model: &GlobalMapModel,
    cfg: &SlabConfig,
) -> Result<Vec<f64>> {
    let n = word.len();
    let w1 = if model.omega_swap { params.omega2 } else { params.omega1 };
    let mut rr: Vec<f64> = word
        .iter()
        .map(|&(nk, _)| {
            let b_hi = radius(params.alpha2, cfg.eta, params.omega2, nk);
            let b_lo = radius(params.alpha2, cfg.eta, params.omega2, nk + 1);
            (b_hi * b_lo).sqrt()
        })
        .collect();
    for _ in 0..60 {
        for k in 0..n {
            let (nk, sk) = word[k];
            let (_, snext) = word[(k + 1) % n];
            let r_next = rr[(k + 1) % n];
            // want wrap(sigma_k pi/2 - (w1/a2) ln r_k) = sigma_next r_next
            // => (w1/a2)(-ln r_k) = 2 pi m - sigma_k pi/2 + sigma_next r_next
            let lo = params.alpha2 / params.omega2 * (cfg.eta + TAU * nk as f64);
            let hi = params.alpha2 / params.omega2 * (cfg.eta + TAU * (nk + 1) as f64);
            let target = branch_sign(snext) * r_next - branch_sign(sk) * PI / 2.0;
            let mut placed = false;
            let m_center = ((w1 / params.alpha2) * 0.5 * (lo + hi) - target) / TAU;
            for dm in -2..=2 {
                let m = (m_center.round() as i64 + dm) as f64;
                let neg_ln = params.alpha2 / w1 * (TAU * m + target);
                if neg_ln > lo && neg_ln < hi {
                    rr[k] = (-neg_ln).exp();
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(LabError::NoConvergence { iters: 0, residual: f64::INFINITY });
            }
        }
    }
    Ok(rr)
}

fn orbit_residual(
    pts: &[RectPoint],
    params: &BifocusParams,
    model: &GlobalMapModel,
) -> Result<DVector<f64>> {
    let n = pts.len();
    let mut res = DVector::zeros(3 * n);
    for k in 0..n {
        let img = return_map(&pts[k], params, model)?;
        let nxt = &pts[(k + 1) % n];
        res[3 * k] = img.x - nxt.x;
        res[3 * k + 1] = wrap_angle_pm(img.y - nxt.y);
        res[3 * k + 2] = img.z - nxt.z;
    }
    Ok(res)
}

/// Multiple-shooting Newton for the periodic orbit realizing `word`.
pub fn find_periodic_orbit(
    word: &Itinerary,
    params: &BifocusParams,
    model: &GlobalMapModel,
    cfg: &SlabConfig,
) -> Result<PeriodicOrbit> {
    let n0 = min_index_tec2(params, cfg)?;
    for &(nk, _) in &word.word {
        if nk <= n0 {
            return Err(LabError::InadmissibleIndex { index: nk, bound: n0 + 1 });
        }
    }
    let n = word.word.len();
    let w2 = if model.omega_swap { params.omega1 } else { params.omega2 };
    let rr = seed_radii(&word.word, params, model, cfg)?;
    let mut pts: Vec<RectPoint> = (0..n)
        .map(|k| {
            let prev = rr[(k + n - 1) % n];
            let rho = prev.powf(params.delta());
            let psi = -w2 / params.alpha2 * prev.ln();
            RectPoint::new(
                rho * psi.sin(),
                branch_sign(word.word[k].1) * rr[k],
                rho * psi.cos(),
            )
        })
        .collect();
    let mut res = orbit_residual(&pts, params, model)?;
    let mut converged = false;
    for _ in 0..80 {
        if res.norm() < 1e-11 {
            converged = true;
            break;
        }
        // block-bidiagonal Newton system
        let mut jac = DMatrix::zeros(3 * n, 3 * n);
        for k in 0..n {
            let ev = return_map_jacobian(&pts[k], params, model, JacobianMode::Analytic, None)?;
            for r in 0..3 {
                for c in 0..3 {
                    jac[(3 * k + r, 3 * k + c)] = ev.jacobian[(r, c)];
                }
            }
            let kn = (k + 1) % n;
            for r in 0..3 {
                jac[(3 * k + r, 3 * kn + r)] -= 1.0;
            }
        }
        let step = jac
            .lu()
            .solve(&(-&res))
            .ok_or(LabError::SingularJacobian)?;
        let mut scale = 1.0;
        let mut advanced = false;
        while scale > 1e-8 {
            let cand: Vec<RectPoint> = (0..n)
                .map(|k| {
                    RectPoint::new(
                        pts[k].x + scale * step[3 * k],
                        pts[k].y + scale * step[3 * k + 1],
                        pts[k].z + scale * step[3 * k + 2],
                    )
                })
                .collect();
            if cand.iter().all(|p| p.radius() > 0.0 && p.radius() <= 1.0) {
                if let Ok(cres) = orbit_residual(&cand, params, model) {
                    if cres.norm() < res.norm() || scale < 1e-4 {
                        pts = cand;
                        res = cres;
                        advanced = true;
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    if !converged && res.norm() >= 1e-10 {
        return Err(LabError::NoConvergence { iters: 80, residual: res.norm() });
    }
    // itinerary recheck by direct membership
    let mut found: Vec<(i64, u8)> = Vec::with_capacity(n);
    for p in &pts {
        let r = p.radius();
        let nk = slab_of(r, params, cfg)
            .ok_or_else(|| LabError::WrongItinerary {
                requested: Itinerary::format(&word.word),
                found: "outside slab ladder".into(),
            })?;
        if !slab_membership(p, nk, params, cfg) {
            return Err(LabError::WrongItinerary {
                requested: Itinerary::format(&word.word),
                found: format!("({nk},?) fails the angular window"),
            });
        }
        found.push((nk, if p.y > 0.0 { 1 } else { 2 }));
    }
    if found != word.word {
        return Err(LabError::WrongItinerary {
            requested: Itinerary::format(&word.word),
            found: Itinerary::format(&found),
        });
    }
    let mut monodromy = Matrix3::identity();
    let mut jacs = Vec::with_capacity(n);
    for p in &pts {
        let ev = return_map_jacobian(p, params, model, JacobianMode::Analytic, None)?;
        monodromy = ev.jacobian * monodromy;
        jacs.push(ev.jacobian);
    }
    // the explicit product loses the small multipliers below one ulp of its
    // dominant entries, so the spectrum comes from the periodic-QR iteration,
    // with the direct eigensolve as the fallback for non-real spectra
    let spectrum = periodic_qr_spectrum(&jacs).unwrap_or_else(|| eig3::eigenvalues(&monodromy));
    Ok(PeriodicOrbit {
        word: word.word.clone(),
        points: pts,
        residual: res.norm(),
        monodromy,
        spectrum,
    })
}

/// Cofactor matrix of `a`: the action of `a` on 2-vectors (wedge products)
/// in the Hodge-dual basis; its eigenvalues are the pairwise products of the
/// eigenvalues of `a`.
fn second_compound(a: &Matrix3<f64>) -> Matrix3<f64> {
    let m = |r1: usize, c1: usize, r2: usize, c2: usize| {
        a[(r1, c1)] * a[(r2, c2)] - a[(r1, c2)] * a[(r2, c1)]
    };
    Matrix3::new(
        m(1, 1, 2, 2),
        -m(1, 0, 2, 2),
        m(1, 0, 2, 1),
        -m(0, 1, 2, 2),
        m(0, 0, 2, 2),
        -m(0, 0, 2, 1),
        m(0, 1, 1, 2),
        -m(0, 0, 1, 2),
        m(0, 0, 1, 1),
    )
}

/// Dominant log growth of the cocycle over one period after the direction
/// has locked, plus the sign of the dominant multiplier.  None when the
/// direction fails to lock (dominant complex pair).
fn cocycle_dominant(mats: &[Matrix3<f64>]) -> Option<(f64, f64)> {
    let mut v = Vector3::new(1.0, 0.7, -0.4).normalize();
    for _ in 0..64 {
        for a in mats {
            let w = a * v;
            let n = w.norm();
            if !(n > 0.0) || !n.is_finite() {
                return None;
            }
            v = w / n;
        }
    }
    let v0 = v;
    let mut log_growth = 0.0;
    for a in mats {
        let w = a * v;
        let n = w.norm();
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        log_growth += n.ln();
        v = w / n;
    }
    let align = v0.dot(&v);
    if align.abs() < 0.9999 {
        return None;
    }
    Some((log_growth, align.signum()))
}

/// Per-period log moduli of the Floquet multipliers, descending, from
/// well-conditioned cocycle invariants: the dominant growth of the Jacobian
/// cocycle, of its second compound, and the exact determinant product.  The
/// explicit monodromy product is useless here: the small multipliers sit
/// below one ulp of its dominant entries.
fn floquet_log_moduli(jacs: &[Matrix3<f64>]) -> Option<([f64; 3], [f64; 3])> {
    let (l1, s1) = cocycle_dominant(jacs)?;
    let compounds: Vec<Matrix3<f64>> = jacs.iter().map(second_compound).collect();
    let (l12, s12) = cocycle_dominant(&compounds)?;
    let mut l123 = 0.0;
    let mut sdet = 1.0;
    for a in jacs {
        let d = a.determinant();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        l123 += d.abs().ln();
        sdet *= d.signum();
    }
    let logs = [l1, l12 - l1, l123 - l12];
    if !(logs[0] > logs[1] && logs[1] > logs[2]) {
        return None;
    }
    let signs = [s1, s12 * s1, sdet * s12];
    Some((logs, signs))
}

/// Floquet multipliers of the Jacobian cycle; real hyperbolic case.  Returns
/// None when a dominant direction fails to lock (complex pair), so the
/// caller can fall back to the direct eigensolve.
fn periodic_qr_spectrum(jacs: &[Matrix3<f64>]) -> Option<[Complex<f64>; 3]> {
    let (logs, signs) = floquet_log_moduli(jacs)?;
    let mut out = [Complex::new(0.0, 0.0); 3];
    for i in 0..3 {
        out[i] = Complex::new(signs[i] * logs[i].exp(), 0.0);
    }
    Some(out)
}

/// Per-step width-contraction factors measured through the linearization
/// along the periodic skeleton of the `(i, j)` slab pair: the monodromy over
/// `depth` loops yields the horizontal factor (inverse of the expansion) and
/// the vertical factor (the larger stable multiplier).
pub fn contraction_rates(
    i: i64,
    j: i64,
    params: &BifocusParams,
    model: &GlobalMapModel,
    cfg: &SlabConfig,
    depth: usize,
) -> Result<(f64, f64)> {
    if depth < 2 {
        return Err(LabError::InsufficientDepth(depth));
    }
    let word = if i == j {
        Itinerary::periodic(vec![(i, 1)])?
    } else {
        Itinerary::periodic(vec![(i, 1), (j, 1)])?
    };
    let orbit = find_periodic_orbit(&word, params, model, cfg)?;
    let period = orbit.points.len();
    let mut m = Matrix3::identity();
    for _ in 0..depth {
        m = orbit.monodromy * m;
    }
    let ev = eig3::eigenvalues(&m);
    let steps = (depth * period) as f64;
    let nu_h = (1.0 / ev[0].norm()).powf(1.0 / steps);
    let nu_v = ev[1].norm().powf(1.0 / steps);
    if nu_h >= 1.0 {
        return Err(LabError::NoDecay(nu_h));
    }
    if nu_v >= 1.0 {
        return Err(LabError::NoDecay(nu_v));
    }
    Ok((nu_h, nu_v))
}

/// Artifact thresholds that make the asymptotic eigenvalue pattern testable.
pub const MU1_SMALL: f64 = 0.1;
pub const MU3_LARGE: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct EigenvalueRecord {
    pub point: RectPoint,
    /// [re, im] pairs, modulus descending
    pub mu: [[f64; 2]; 3],
    pub real: bool,
    pub pattern_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperbolicityReport {
    pub sample_count: usize,
    pub eigenvalue_records: Vec<EigenvalueRecord>,
    /// spectral surrogate 1/|mu3|, reported only when in (0, 1)
    pub nu_h: Option<f64>,
    /// spectral surrogate |mu2|, reported only when in (0, 1)
    pub nu_v: Option<f64>,
    pub cones_ok: bool,
    /// samples with a complex pair (the excluded region W)
    pub excluded_count: usize,
    /// thresholds used for "<< 1" and ">> 1"
    pub thresholds: (f64, f64),
}

/// Sample DR_0 spectra and check the hyperbolic eigenvalue pattern
/// `|mu1| << 1 <~ |mu2| and |mu3| >> 1`, with complex-pair samples recorded
/// under the excluded region.
pub fn hyperbolicity_check(
    samples: &[RectPoint],
    params: &BifocusParams,
    model: &GlobalMapModel,
) -> Result<HyperbolicityReport> {
    let mut records = Vec::with_capacity(samples.len());
    let mut excluded = 0usize;
    let mut cones_ok = true;
    let mut worst_h: f64 = 0.0;
    let mut worst_v: f64 = 0.0;
    for p in samples {
        let ev: ReturnMapEval =
            return_map_jacobian(p, params, model, JacobianMode::Analytic, None)?;
        let real = ev.eigenvalues.iter().all(|z| z.im == 0.0);
        let moduli: Vec<f64> = ev.eigenvalues.iter().map(|z| z.norm()).collect();
        let pattern_ok = real && moduli[2] < MU1_SMALL && moduli[0] > MU3_LARGE;
        if !real {
            excluded += 1;
        } else {
            if !pattern_ok {
                cones_ok = false;
            }
            worst_h = worst_h.max(1.0 / moduli[0]);
            worst_v = worst_v.max(moduli[1]);
        }
        records.push(EigenvalueRecord {
            point: *p,
            mu: [
                [ev.eigenvalues[0].re, ev.eigenvalues[0].im],
                [ev.eigenvalues[1].re, ev.eigenvalues[1].im],
                [ev.eigenvalues[2].re, ev.eigenvalues[2].im],
            ],
            real,
            pattern_ok,
        });
    }
    let in_unit = |v: f64| if v > 0.0 && v < 1.0 { Some(v) } else { None };
    Ok(HyperbolicityReport {
        sample_count: samples.len(),
        eigenvalue_records: records,
        nu_h: in_unit(worst_h),
        nu_v: in_unit(worst_v),
        cones_ok,
        excluded_count: excluded,
        thresholds: (MU1_SMALL, MU3_LARGE),
    })
}

pub const LYAPUNOV_DISCARD_DEFAULT: usize = 1_000;
pub const LYAPUNOV_STEPS_DEFAULT: usize = 100_000;

fn qr_accumulate(
    jacs: impl Iterator<Item = Matrix3<f64>>,
    n_discard: usize,
) -> [f64; 3] {
    let mut q = Matrix3::<f64>::identity();
    let mut sums = [0.0f64; 3];
    let mut counted = 0usize;
    for (k, j) in jacs.enumerate() {
        let a = j * q;
        // Gram-Schmidt with sign-positive diagonal
        let mut cols: Vec<Vector3<f64>> = (0..3).map(|c| a.column(c).into()).collect();
        let mut diag = [0.0f64; 3];
        for c in 0..3 {
            for prev in 0..c {
                let basis = cols[prev];
                let proj = basis.dot(&cols[c]);
                cols[c] -= proj * basis;
            }
            diag[c] = cols[c].norm();
            if diag[c] > 0.0 {
                cols[c] /= diag[c];
            }
        }
        q = Matrix3::from_columns(&cols);
        if k >= n_discard {
            for c in 0..3 {
                sums[c] += diag[c].ln();
            }
            counted += 1;
        }
    }
    if counted == 0 {
        return [f64::NAN; 3];
    }
    let mut out = [0.0; 3];
    for c in 0..3 {
        out[c] = sums[c] / counted as f64;
    }
    out.sort_by(|a, b| b.partial_cmp(a).unwrap());
    out
}

/// Lyapunov exponents along the actual forward trajectory of `x0` (QR
/// method); errors with OrbitEscaped if the trajectory leaves the unit
/// section disk.
pub fn lyapunov_spectrum(
    x0: &RectPoint,
    params: &BifocusParams,
    model: &GlobalMapModel,
    n_steps: usize,
    n_discard: usize,
) -> Result<[f64; 3]> {
    let mut jacs = Vec::with_capacity(n_steps);
    let mut p = *x0;
    for k in 0..n_steps {
        if p.radius() > 1.0 || !p.x.is_finite() || !p.y.is_finite() || !p.z.is_finite() {
            return Err(LabError::OrbitEscaped(k));
        }
        let ev = return_map_jacobian(&p, params, model, JacobianMode::Analytic, None)?;
        jacs.push(ev.jacobian);
        p = ev.output;
    }
    Ok(qr_accumulate(jacs.into_iter(), n_discard))
}

/// Lyapunov exponents along a converged periodic orbit, cycling the exact
/// orbit points (the forward trajectory of a saddle drifts off in floating
/// point; the cycle does not).
pub fn lyapunov_spectrum_periodic(
    orbit: &PeriodicOrbit,
    params: &BifocusParams,
    model: &GlobalMapModel,
    n_steps: usize,
    n_discard: usize,
) -> Result<[f64; 3]> {
    let period = orbit.points.len();
    let mut jacs = Vec::with_capacity(period);
    for p in &orbit.points {
        let ev = return_map_jacobian(p, params, model, JacobianMode::Analytic, None)?;
        jacs.push(ev.jacobian);
    }
    // the cocycle invariants agree with the Floquet log moduli to rounding;
    // fall back to the QR average when a dominant pair is complex
    if let Some((logs, _)) = floquet_log_moduli(&jacs) {
        return Ok([
            logs[0] / period as f64,
            logs[1] / period as f64,
            logs[2] / period as f64,
        ]);
    }
    // run whole periods so every direction sees the full monodromy
    let loops = (n_steps / period).max(2);
    let discard_loops = (n_discard / period).min(loops / 2);
    Ok(qr_accumulate(
        (0..loops * period).map(|k| jacs[k % period]),
        discard_loops * period,
    ))
}

/// Exported horseshoe certificate.
#[derive(Debug, Clone, Serialize)]
pub struct HorseshoeCertificate {
    pub params: BifocusParams,
    pub cfg: SlabConfig,
    pub n0: i64,
    pub slabs: Vec<SlabIndex>,
    pub intersections: Vec<IntersectionScan>,
    pub nu_h: f64,
    pub nu_v: f64,
    pub orbits: Vec<OrbitCertificate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitCertificate {
    pub word: Vec<(i64, u8)>,
    pub points: Vec<RectPoint>,
    pub residual: f64,
    /// per-step Lyapunov exponents, descending
    pub lyapunov: [f64; 3],
    /// monodromy spectrum moduli, descending
    pub spectrum_moduli: [f64; 3],
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn delta2() -> BifocusParams {
        BifocusParams::new(2.0, 1.0, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn slab_radii_examples() {
        let p = delta2();
        let cfg = SlabConfig::default();
        let s = slab_radii(1, &p, &cfg).unwrap();
        assert_relative_eq!(s.a_n, (-4.0 * PI).exp(), max_relative = 1e-14);
        assert_relative_eq!(s.b_n, (-2.0 * PI).exp(), max_relative = 1e-14);
        let s2 = slab_radii(2, &p, &cfg).unwrap();
        assert_relative_eq!(s2.a_n, (-8.0 * PI).exp(), max_relative = 1e-14);
        assert_relative_eq!(s2.b_n, (-4.0 * PI).exp(), max_relative = 1e-14);
        assert!(matches!(
            slab_radii(-1, &p, &cfg),
            Err(LabError::InadmissibleIndex { .. })
        ));
    }

    #[test]
    fn tec2_examples() {
        let cfg = SlabConfig::default();
        assert_eq!(min_index_tec2(&delta2(), &cfg).unwrap(), 1);
        let p3 = BifocusParams::new(3.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(min_index_tec2(&p3, &cfg).unwrap(), 0);
        let p101 = BifocusParams::new(1.01, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(min_index_tec2(&p101, &cfg).unwrap(), 100);
    }

    #[test]
    fn tec2_boundary_equality_is_exact() {
        // at delta = 2, eta = 0: b_2 == a_1 bit-for-bit
        let p = delta2();
        let cfg = SlabConfig::default();
        let s1 = slab_radii(1, &p, &cfg).unwrap();
        let s2 = slab_radii(2, &p, &cfg).unwrap();
        assert_eq!(s2.b_n, s1.a_n);
    }

    #[test]
    fn tec2_scan_matches_closed_form_on_grid() {
        for di in 0..5 {
            for ei in 0..4 {
                let a1 = 1.3 + 0.45 * di as f64;
                let eta = TAU * ei as f64 / 4.0;
                let p = BifocusParams::new(a1, 1.0, 1.0, 1.0, 0.0).unwrap();
                let cfg = SlabConfig { eta, ..SlabConfig::default() };
                let n0 = min_index_tec2(&p, &cfg).unwrap();
                let start = cfg.admissibility_bound(&p).max(0);
                let c = 1.0 / (a1 - 1.0) - eta / TAU;
                assert_eq!(n0, (c.floor() as i64).max(start), "a1={a1} eta={eta}");
            }
        }
    }

    #[test]
    fn radii_ordering_above_n0() {
        let p = delta2();
        let cfg = SlabConfig::default();
        let n0 = min_index_tec2(&p, &cfg).unwrap();
        for n in (n0 + 1)..(n0 + 20) {
            let s = slab_radii(n, &p, &cfg).unwrap();
            assert!(s.a_n1 < s.a_n && s.a_n < s.b_n1 && s.b_n1 < s.b_n, "N = {n}");
        }
    }

    #[test]
    fn two_components_at_i_j_3() {
        let p = delta2();
        let m = GlobalMapModel::default();
        let cfg = SlabConfig::default();
        let scan = intersection_components(3, 3, &p, &m, &cfg, 64).unwrap();
        assert_eq!(scan.component_count, 2);
        let branches: Vec<u8> = scan.samples.iter().map(|s| s.1).collect();
        assert!(branches.contains(&1) && branches.contains(&2));
    }

    #[test]
    fn unreachable_slab_is_empty() {
        let p = delta2();
        let m = GlobalMapModel::default();
        let cfg = SlabConfig::default();
        let scan = intersection_components(3, 30, &p, &m, &cfg, 64).unwrap();
        assert_eq!(scan.component_count, 0);
    }

    #[test]
    fn slab_width_examples() {
        let p = delta2();
        let cfg = SlabConfig::default();
        let s = slab_radii(1, &p, &cfg).unwrap();
        let pts: Vec<RectPoint> = (0..100)
            .map(|k| {
                let r = s.b_n1 + (s.b_n - s.b_n1) * k as f64 / 99.0;
                RectPoint::new(0.0, r, 0.0)
            })
            .collect();
        let w = slab_width(&pts, WidthDirection::Vertical).unwrap();
        assert_relative_eq!(w, s.b_n - s.b_n1, max_relative = 1e-12);
        assert_relative_eq!(w, 1.8639e-3, max_relative = 1e-3);
        let single = vec![RectPoint::new(0.0, s.b_n, 0.0)];
        assert_eq!(slab_width(&single, WidthDirection::Vertical).unwrap(), 0.0);
        assert!(slab_width(&[], WidthDirection::Vertical).is_err());
    }

    #[test]
    fn fixed_point_in_s3() {
        let p = delta2();
        let m = GlobalMapModel::default();
        let cfg = SlabConfig::default();
        let word = Itinerary::periodic(vec![(3, 1)]).unwrap();
        let orbit = find_periodic_orbit(&word, &p, &m, &cfg).unwrap();
        assert!(orbit.residual < 1e-10);
        let img = return_map(&orbit.points[0], &p, &m).unwrap();
        assert!((img.x - orbit.points[0].x).abs() < 1e-10);
        // hyperbolic pattern at the fixed point
        assert!(orbit.spectrum.iter().all(|z| z.im == 0.0));
        assert!(orbit.spectrum[0].norm() > MU3_LARGE);
        assert!(orbit.spectrum[2].norm() < MU1_SMALL);
    }

    #[test]
    fn period_two_across_slabs() {
        let p = delta2();
        let m = GlobalMapModel::default();
        let cfg = SlabConfig::default();
        let word = Itinerary::periodic(vec![(3, 1), (4, 1)]).unwrap();
        let orbit = find_periodic_orbit(&word, &p, &m, &cfg).unwrap();
        assert!(orbit.residual < 1e-10);
        assert_eq!(orbit.points.len(), 2);
    }

    #[test]
    fn inadmissible_word_rejected() {
        let p = delta2();
        let m = GlobalMapModel::default();
        let cfg = SlabConfig::default();
        let word = Itinerary::periodic(vec![(1, 1)]).unwrap();
        assert!(matches!(
            find_periodic_orbit(&word, &p, &m, &cfg),
            Err(LabError::InadmissibleIndex { .. })
        ));
    }

    #[test]
    fn contraction_rates_below_one() {
        let p = delta2();
        let m = GlobalMapModel::default();
        let cfg = SlabConfig::default();
        let (nu_h, nu_v) = contraction_rates(3, 3, &p, &m, &cfg, 4).unwrap();
        assert!(nu_h < 1.0 && nu_h > 0.0);
        assert!(nu_v < 1.0 && nu_v > 0.0);
        assert!(matches!(
            contraction_rates(3, 3, &p, &m, &cfg, 1),
            Err(LabError::InsufficientDepth(1))
        ));
    }

    #[test]
    fn lyapunov_matches_monodromy() {
        let p = delta2();
        let m = GlobalMapModel::default();
        let cfg = SlabConfig::default();
        let word = Itinerary::periodic(vec![(3, 1)]).unwrap();
        let orbit = find_periodic_orbit(&word, &p, &m, &cfg).unwrap();
        let lyap = lyapunov_spectrum_periodic(&orbit, &p, &m, 1000, 100).unwrap();
        for c in 0..3 {
            assert_relative_eq!(lyap[c], orbit.spectrum[c].norm().ln(), epsilon = 1e-6);
        }
        // sum rule against the mean log-determinant
        let ev = return_map_jacobian(&orbit.points[0], &p, &m, JacobianMode::Analytic, None)
            .unwrap();
        let sum: f64 = lyap.iter().sum();
        assert_relative_eq!(sum, ev.det.abs().ln(), epsilon = 1e-5);
    }

    #[test]
    fn hyperbolicity_report() {
        let p = delta2();
        let m = GlobalMapModel::default();
        let cfg = SlabConfig::default();
        let word = Itinerary::periodic(vec![(3, 1)]).unwrap();
        let orbit = find_periodic_orbit(&word, &p, &m, &cfg).unwrap();
        let rep = hyperbolicity_check(&orbit.points, &p, &m).unwrap();
        assert!(rep.cones_ok);
        assert_eq!(rep.excluded_count, 0);
        assert!(rep.nu_h.unwrap() < 1.0);
        // a far-from-cycle sample may break the pattern without erroring
        let far = hyperbolicity_check(&[RectPoint::new(0.4, 0.0, 0.1)], &p, &m).unwrap();
        assert_eq!(far.sample_count, 1);
    }

    #[test]
    fn escaping_orbit_detected() {
        let p = delta2();
        let m = GlobalMapModel::default();
        // generic point leaves the section disk quickly
        let got = lyapunov_spectrum(&RectPoint::new(1e-3, 0.0, 0.0), &p, &m, 1000, 10);
        assert!(matches!(got, Err(LabError::OrbitEscaped(_))));
    }
}
