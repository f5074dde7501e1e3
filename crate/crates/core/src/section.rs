//! Parameters of the bifocus and coordinate systems on the cross-sections.
//!
//! The two cross-sections are solid tori: the incoming one `{r_s = 1}` with
//! bipolar coordinates `(phi_s, r_u, phi_u)` and the outgoing one `{r_u = 1}`
//! with coordinates `(r_s, phi_s, phi_u)`. The incoming section also carries
//! rectangular coordinates `X = r_u cos(phi_u)`, `Y = r_u sin(phi_u)`,
//! `Z = phi_s`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Wrap an angle into `[0, 2pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w == TAU {
        0.0
    } else {
        w
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle_pm(theta: f64) -> f64 {
    let w = wrap_angle(theta);
    if w > std::f64::consts::PI {
        w - TAU
    } else {
        w
    }
}

/// Distance between two angles on the circle.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_angle_pm(a - b).abs()
}

/// Eigenvalue data of the bifocus together with the cycle-breaking offset.
///
/// The spectrum is `-alpha1 +- i omega1` (contracting pair) and
/// `alpha2 +- i omega2` (expanding pair); the saddle value
/// `delta = alpha1 / alpha2` is derived, never stored independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifocusParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub lambda: f64,
    /// Derived saddle value `alpha1 / alpha2`; emitted read-only.
    delta: f64,
}

#[derive(Deserialize)]
struct RawParams {
    alpha1: f64,
    alpha2: f64,
    omega1: f64,
    omega2: f64,
    #[serde(default)]
    lambda: f64,
}

impl<'de> Deserialize<'de> for BifocusParams {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = RawParams::deserialize(deserializer)?;
        BifocusParams::new(raw.alpha1, raw.alpha2, raw.omega1, raw.omega2, raw.lambda)
            .map_err(serde::de::Error::custom)
    }
}

impl BifocusParams {
    /// Validate the spectrum hypothesis `0 < alpha2 < alpha1`, `omega1,2 > 0`
    /// and derive the saddle value.
    pub fn new(alpha1: f64, alpha2: f64, omega1: f64, omega2: f64, lambda: f64) -> Result<Self> {
        if !(alpha2 > 0.0) {
            return Err(LabError::ParamViolation(format!("alpha2 > 0 (got {alpha2})")));
        }
        if !(alpha2 < alpha1) {
            return Err(LabError::ParamViolation(format!(
                "alpha2 < alpha1 (got alpha1 = {alpha1}, alpha2 = {alpha2})"
            )));
        }
        if !(omega1 > 0.0) {
            return Err(LabError::ParamViolation(format!("omega1 > 0 (got {omega1})")));
        }
        if !(omega2 > 0.0) {
            return Err(LabError::ParamViolation(format!("omega2 > 0 (got {omega2})")));
        }
        if !lambda.is_finite() {
            return Err(LabError::ParamViolation(format!("lambda finite (got {lambda})")));
        }
        Ok(Self { alpha1, alpha2, omega1, omega2, lambda, delta: alpha1 / alpha2 })
    }

    /// Saddle value `delta = alpha1 / alpha2 > 1`.
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Point on the incoming section `{r_s = 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InSectionPoint {
    pub phi_s: f64,
    pub r_u: f64,
    pub phi_u: f64,
}

impl InSectionPoint {
    pub fn new(phi_s: f64, r_u: f64, phi_u: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r_u) {
            return Err(LabError::ParamViolation(format!("r_u in [0, 1] (got {r_u})")));
        }
        Ok(Self { phi_s: wrap_angle(phi_s), r_u, phi_u: wrap_angle(phi_u) })
    }
}

/// Point on the outgoing section `{r_u = 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutSectionPoint {
    pub r_s: f64,
    pub phi_s: f64,
    pub phi_u: f64,
}

impl OutSectionPoint {
    pub fn new(r_s: f64, phi_s: f64, phi_u: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r_s) {
            return Err(LabError::ParamViolation(format!("r_s in [0, 1] (got {r_s})")));
        }
        Ok(Self { r_s, phi_s: wrap_angle(phi_s), phi_u: wrap_angle(phi_u) })
    }
}

/// Rectangular coordinates on the incoming section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl RectPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Planar radius `sqrt(X^2 + Y^2)` (= `r_u` of the bipolar chart).
    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Extents of the flow-box neighbourhoods `C^in` and `C^out`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionNeighbourhood {
    pub eps_in: f64,
    pub c_in: f64,
    pub eps_out: f64,
    pub c_out: f64,
}

impl SectionNeighbourhood {
    pub fn new(eps_in: f64, c_in: f64, eps_out: f64, c_out: f64) -> Result<Self> {
        for (name, v) in [("eps_in", eps_in), ("c_in", c_in), ("eps_out", eps_out), ("c_out", c_out)]
        {
            if !(v > 0.0 && v <= 1.0) {
                return Err(LabError::ParamViolation(format!("{name} in (0, 1] (got {v})")));
            }
        }
        Ok(Self { eps_in, c_in, eps_out, c_out })
    }
}

impl Default for SectionNeighbourhood {
    fn default() -> Self {
        Self { eps_in: 1.0, c_in: 1.0, eps_out: 1.0, c_out: 1.0 }
    }
}

/// Rectangular coordinates of an incoming-section point.
pub fn to_rect(p: &InSectionPoint) -> RectPoint {
    RectPoint::new(p.r_u * p.phi_u.cos(), p.r_u * p.phi_u.sin(), p.phi_s)
}

/// Bipolar coordinates of a rectangular point. The angle branch is fixed by
/// the two-argument arctangent; at the degenerate center `phi_u = 0`.
pub fn from_rect(q: &RectPoint) -> Result<InSectionPoint> {
    let r_u = q.radius();
    if r_u > 1.0 {
        return Err(LabError::OutOfSection(r_u * r_u));
    }
    let phi_u = if r_u == 0.0 { 0.0 } else { wrap_angle(q.y.atan2(q.x)) };
    Ok(InSectionPoint { phi_s: wrap_angle(q.z), r_u, phi_u })
}
