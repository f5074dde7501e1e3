//! The global reinjection map, the explicit first-return map on the incoming
//! section, its Jacobian/spectrum, and a Newton inverse.

use std::io::Write;

use nalgebra::{Complex, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::eig3;
use crate::error::{LabError, Result};
use crate::section::{
    wrap_angle_pm, BifocusParams, OutSectionPoint, RectPoint, SectionNeighbourhood,
};

/// Affine model of the global reinjection from the outgoing to the incoming
/// section, plus the explicit-return-map options.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalMapModel {
    /// Linear part; the default cyclic permutation sends
    /// `(v1, v2, v3) -> (v2, v3, v1)`.
    pub a: Matrix3<f64>,
    pub lambda: f64,
    /// Direction of the cycle-breaking offset; the additive term is
    /// `lambda * offset_dir`, applied after the linear part.
    pub offset_dir: Vector3<f64>,
    /// Magnitude of the optional bounded smooth perturbation terms.
    pub hot_scale: f64,
    /// Swap the roles of the two angular frequencies inside the explicit
    /// return map (audit switch; default keeps omega2 in the trig argument).
    pub omega_swap: bool,
    pub neighbourhood: SectionNeighbourhood,
}

fn cyclic_permutation() -> Matrix3<f64> {
    Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0)
}

impl Default for GlobalMapModel {
    fn default() -> Self {
        Self {
            a: cyclic_permutation(),
            lambda: 0.0,
            offset_dir: Vector3::new(0.0, 1.0, 0.0),
            hot_scale: 0.0,
            omega_swap: false,
            neighbourhood: SectionNeighbourhood::default(),
        }
    }
}

/// JSON wire format: {A: row-major 9 numbers, lambda, offset_dir, hot_scale}.
#[derive(Serialize, Deserialize)]
struct ModelConfig {
    #[serde(rename = "A")]
    a: [f64; 9],
    #[serde(default)]
    lambda: f64,
    #[serde(default = "default_offset_dir")]
    offset_dir: [f64; 3],
    #[serde(default)]
    hot_scale: f64,
    #[serde(default)]
    omega_swap: bool,
}

fn default_offset_dir() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

impl Serialize for GlobalMapModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut a = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                a[3 * i + j] = self.a[(i, j)];
            }
        }
        ModelConfig {
            a,
            lambda: self.lambda,
            offset_dir: [self.offset_dir.x, self.offset_dir.y, self.offset_dir.z],
            hot_scale: self.hot_scale,
            omega_swap: self.omega_swap,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GlobalMapModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let cfg = ModelConfig::deserialize(d)?;
        let a = Matrix3::from_row_slice(&cfg.a);
        GlobalMapModel::new(
            a,
            cfg.lambda,
            Vector3::from_row_slice(&cfg.offset_dir),
            cfg.hot_scale,
            cfg.omega_swap,
        )
        .map_err(serde::de::Error::custom)
    }
}

impl GlobalMapModel {
    pub fn new(
        a: Matrix3<f64>,
        lambda: f64,
        offset_dir: Vector3<f64>,
        hot_scale: f64,
        omega_swap: bool,
    ) -> Result<Self> {
        if a.determinant() == 0.0 {
            return Err(LabError::ParamViolation("det A != 0".into()));
        }
        Ok(Self {
            a,
            lambda,
            offset_dir,
            hot_scale,
            omega_swap,
            neighbourhood: SectionNeighbourhood::default(),
        })
    }

    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, ..Self::default() }
    }

    fn offset(&self) -> Vector3<f64> {
        self.lambda * self.offset_dir
    }
}

/// Bounded smooth perturbation standing in for the unspecified higher-order
/// terms; identically zero at the default hot_scale = 0.
fn hot_term(p: &Vector3<f64>, scale: f64) -> Vector3<f64> {
    if scale == 0.0 {
        return Vector3::zeros();
    }
    scale * Vector3::new((p.y + p.z).sin(), (p.z + p.x).sin(), (p.x + p.y).sin())
}

fn hot_jacobian(p: &Vector3<f64>, scale: f64) -> Matrix3<f64> {
    if scale == 0.0 {
        return Matrix3::zeros();
    }
    let (a, b, c) = ((p.y + p.z).cos(), (p.z + p.x).cos(), (p.x + p.y).cos());
    scale * Matrix3::new(0.0, a, a, b, 0.0, b, c, c, 0.0)
}

/// Global map: `A * (r_s cos(phi_u), r_s sin(phi_u), phi_u) + offset + hot`.
///
/// The angle entering the third slot is wrapped to (-pi, pi] so that points
/// near the reinjection locus `phi_u = 0` land near the section center.
pub fn global_map(q: &OutSectionPoint, model: &GlobalMapModel) -> Result<RectPoint> {
    let nb = &model.neighbourhood;
    let phi_u = wrap_angle_pm(q.phi_u);
    if q.r_s > nb.c_out || phi_u.abs() > nb.eps_out * std::f64::consts::PI {
        return Err(LabError::OutOfNeighbourhood("C^out"));
    }
    let v = Vector3::new(q.r_s * q.phi_u.cos(), q.r_s * q.phi_u.sin(), phi_u);
    let out = model.a * v + model.offset() + hot_term(&v, model.hot_scale);
    Ok(RectPoint::new(out.x, out.y, out.z))
}

fn omega_pair(params: &BifocusParams, model: &GlobalMapModel) -> (f64, f64) {
    // (trig-argument frequency, second-component frequency)
    if model.omega_swap {
        (params.omega1, params.omega2)
    } else {
        (params.omega2, params.omega1)
    }
}

/// Explicit first-return map on the incoming section in rectangular
/// coordinates:
/// `(X, Y, Z) -> ( s^{d/2} sin(Z - (w2/2a2) ln s),`
/// `              atan2(Y, X) - (w1/2a2) ln s  (mod 2pi, centered),`
/// `              s^{d/2} cos(Z - (w2/2a2) ln s) ) + lambda offset + hot`,
/// with `s = X^2 + Y^2`.
pub fn return_map(p: &RectPoint, params: &BifocusParams, model: &GlobalMapModel) -> Result<RectPoint> {
    let s = p.x * p.x + p.y * p.y;
    if s == 0.0 {
        return Err(LabError::OnStableManifold);
    }
    let (w_trig, w_angle) = omega_pair(params, model);
    let ln_s = s.ln();
    let arg = p.z - w_trig / (2.0 * params.alpha2) * ln_s;
    let radial = s.powf(params.delta() / 2.0);
    let angle = wrap_angle_pm(p.y.atan2(p.x) - w_angle / (2.0 * params.alpha2) * ln_s);
    let v = Vector3::new(p.x, p.y, p.z);
    let out = Vector3::new(radial * arg.sin(), angle, radial * arg.cos())
        + model.offset()
        + hot_term(&v, model.hot_scale);
    Ok(RectPoint::new(out.x, out.y, out.z))
}

/// Jacobian evaluation bundle: input/output, matrix, determinant, spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct ReturnMapEval {
    pub input: RectPoint,
    pub output: RectPoint,
    #[serde(skip)]
    pub jacobian: Matrix3<f64>,
    pub det: f64,
    #[serde(serialize_with = "ser_spectrum")]
    pub eigenvalues: [Complex<f64>; 3],
}

fn ser_spectrum<S: serde::Serializer>(
    ev: &[Complex<f64>; 3],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let pairs: Vec<[f64; 2]> = ev.iter().map(|z| [z.re, z.im]).collect();
    pairs.serialize(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    Analytic,
    FiniteDifference,
}

/// Radius floor below which the Jacobian is treated as singular.  Deep slabs
/// live at radii like exp(-2 pi N), so the floor only guards against actual
/// squared-radius underflow, not against merely small inputs.
pub const SINGULARITY_FLOOR: f64 = 1e-140;

fn analytic_jacobian(p: &RectPoint, params: &BifocusParams, model: &GlobalMapModel) -> Matrix3<f64> {
    let s = p.x * p.x + p.y * p.y;
    let (w_trig, w_angle) = omega_pair(params, model);
    let ca = w_trig / (2.0 * params.alpha2);
    let cb = w_angle / (2.0 * params.alpha2);
    let d = params.delta();
    let ln_s = s.ln();
    let arg = p.z - ca * ln_s;
    let (sn, cs) = arg.sin_cos();
    let pow_m1 = s.powf(d / 2.0 - 1.0);
    let pow = pow_m1 * s;
    let g1 = pow_m1 * (d * sn - 2.0 * ca * cs);
    let g3 = pow_m1 * (d * cs + 2.0 * ca * sn);
    let mut j = Matrix3::new(
        p.x * g1,
        p.y * g1,
        pow * cs,
        (-p.y - 2.0 * cb * p.x) / s,
        (p.x - 2.0 * cb * p.y) / s,
        0.0,
        p.x * g3,
        p.y * g3,
        -pow * sn,
    );
    j += hot_jacobian(&Vector3::new(p.x, p.y, p.z), model.hot_scale);
    j
}

fn fd_jacobian(
    p: &RectPoint,
    params: &BifocusParams,
    model: &GlobalMapModel,
    step: f64,
) -> Result<Matrix3<f64>> {
    let mut j = Matrix3::zeros();
    for k in 0..3 {
        let mut hi = [p.x, p.y, p.z];
        let mut lo = hi;
        hi[k] += step;
        lo[k] -= step;
        let fh = return_map(&RectPoint::new(hi[0], hi[1], hi[2]), params, model)?;
        let fl = return_map(&RectPoint::new(lo[0], lo[1], lo[2]), params, model)?;
        j[(0, k)] = (fh.x - fl.x) / (2.0 * step);
        // the second output component lives on the circle
        j[(1, k)] = wrap_angle_pm(fh.y - fl.y) / (2.0 * step);
        j[(2, k)] = (fh.z - fl.z) / (2.0 * step);
    }
    Ok(j)
}

/// Jacobian of the return map at `p`, by closed-form differentiation or
/// central differences (step defaults to `1e-7 * r` when not given).
pub fn return_map_jacobian(
    p: &RectPoint,
    params: &BifocusParams,
    model: &GlobalMapModel,
    mode: JacobianMode,
    fd_step: Option<f64>,
) -> Result<ReturnMapEval> {
    let r = p.radius();
    if r == 0.0 {
        return Err(LabError::OnStableManifold);
    }
    if r < SINGULARITY_FLOOR {
        return Err(LabError::SingularInput(r));
    }
    let output = return_map(p, params, model)?;
    let jacobian = match mode {
        JacobianMode::Analytic => analytic_jacobian(p, params, model),
        JacobianMode::FiniteDifference => {
            fd_jacobian(p, params, model, fd_step.unwrap_or(1e-7 * r))?
        }
    };
    Ok(ReturnMapEval {
        input: *p,
        output,
        jacobian,
        det: jacobian.determinant(),
        eigenvalues: eig3::eigenvalues(&jacobian),
    })
}

/// Residual with the angular second component compared on the circle.
fn residual(f: &RectPoint, target: &RectPoint) -> Vector3<f64> {
    Vector3::new(f.x - target.x, wrap_angle_pm(f.y - target.y), f.z - target.z)
}

pub const NEWTON_MAX_ITERS: usize = 60;
pub const NEWTON_TOL: f64 = 1e-10;

/// Newton inversion of the return map near `seed`, with 0.5 step damping
/// whenever the residual increases.
pub fn inverse_return_map(
    p: &RectPoint,
    params: &BifocusParams,
    model: &GlobalMapModel,
    seed: &RectPoint,
) -> Result<RectPoint> {
    let mut q = *seed;
    if q.radius() < SINGULARITY_FLOOR {
        return Err(LabError::SingularJacobian);
    }
    let mut res = residual(&return_map(&q, params, model)?, p);
    for _ in 0..NEWTON_MAX_ITERS {
        if res.norm() < NEWTON_TOL {
            return Ok(q);
        }
        let j = analytic_jacobian(&q, params, model);
        let step = j.lu().solve(&(-res)).ok_or(LabError::SingularJacobian)?;
        let mut scale = 1.0;
        loop {
            let cand = RectPoint::new(q.x + scale * step.x, q.y + scale * step.y, q.z + scale * step.z);
            // keep iterates inside the section disk, where preimages live
            if cand.radius() >= SINGULARITY_FLOOR && cand.radius() <= 1.0 {
                if let Ok(img) = return_map(&cand, params, model) {
                    let cand_res = residual(&img, p);
                    if cand_res.norm() < res.norm() || scale < 1e-4 {
                        q = cand;
                        res = cand_res;
                        break;
                    }
                }
            }
            scale *= 0.5;
            if scale < 1e-8 {
                return Err(LabError::NoConvergence {
                    iters: NEWTON_MAX_ITERS,
                    residual: res.norm(),
                });
            }
        }
    }
    if res.norm() < NEWTON_TOL {
        Ok(q)
    } else {
        Err(LabError::NoConvergence { iters: NEWTON_MAX_ITERS, residual: res.norm() })
    }
}

/// One row of an orbit trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OrbitRow {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub r: f64,
    pub det_jac: f64,
}

/// Iterate the return-map formula, recording the orbit. The formula is
/// evaluated raw: rows outside the unit section disk (or non-finite, after
/// a blow-up) are recorded as-is, so the row count contract always holds.
pub fn orbit(
    p0: &RectPoint,
    params: &BifocusParams,
    model: &GlobalMapModel,
    steps: usize,
) -> Result<Vec<OrbitRow>> {
    let mut rows = Vec::with_capacity(steps + 1);
    let mut p = *p0;
    for k in 0..=steps {
        let r = p.radius();
        let det = if r >= SINGULARITY_FLOOR {
            analytic_jacobian(&p, params, model).determinant()
        } else {
            f64::NAN
        };
        rows.push(OrbitRow { step: k, x: p.x, y: p.y, z: p.z, r, det_jac: det });
        if k < steps {
            p = return_map(&p, params, model)?;
        }
    }
    Ok(rows)
}

/// Orbit CSV schema: step, X, Y, Z, r, det_jac.
pub fn write_orbit_csv<W: Write>(rows: &[OrbitRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "step,X,Y,Z,r,det_jac")?;
    for r in rows {
        writeln!(w, "{},{:e},{:e},{:e},{:e},{:e}", r.step, r.x, r.y, r.z, r.r, r.det_jac)?;
    }
    Ok(())
}
