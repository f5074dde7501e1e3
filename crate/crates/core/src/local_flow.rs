//! Local transition maps through the linearized neighbourhood of the bifocus,
//! a Runge-Kutta oracle for them, and the helix/spiral geometry classifiers.

use std::f64::consts::TAU;
use std::io::Write;

use crate::error::{LabError, Result};
use crate::section::{wrap_angle, BifocusParams, InSectionPoint, OutSectionPoint};

/// Flight time from the incoming to the outgoing section,
/// `T = -ln(r_u) / alpha2`.
pub fn flight_time(p: &InSectionPoint, params: &BifocusParams) -> Result<f64> {
    if p.r_u == 0.0 {
        return Err(LabError::OnStableManifold);
    }
    Ok(-p.r_u.ln() / params.alpha2)
}

/// Local map `Pi_O` from the incoming to the outgoing section:
/// `(phi_s, r_u, phi_u) -> (r_u^delta, phi_s - (w1/a2) ln r_u, phi_u - (w2/a2) ln r_u)`.
pub fn local_map(p: &InSectionPoint, params: &BifocusParams) -> Result<OutSectionPoint> {
    if p.r_u == 0.0 {
        return Err(LabError::OnStableManifold);
    }
    let ln_ru = p.r_u.ln();
    Ok(OutSectionPoint {
        r_s: p.r_u.powf(params.delta()),
        phi_s: wrap_angle(p.phi_s - params.omega1 / params.alpha2 * ln_ru),
        phi_u: wrap_angle(p.phi_u - params.omega2 / params.alpha2 * ln_ru),
    })
}

/// Inverse local map `Pi_O^{-1}`:
/// `(r_s, phi_s, phi_u) -> (phi_s + (w1/a1) ln r_s, r_s^{1/delta}, phi_u + (w2/a1) ln r_s)`.
pub fn local_map_inverse(q: &OutSectionPoint, params: &BifocusParams) -> Result<InSectionPoint> {
    if q.r_s == 0.0 {
        return Err(LabError::OnUnstableManifold);
    }
    let ln_rs = q.r_s.ln();
    Ok(InSectionPoint {
        phi_s: wrap_angle(q.phi_s + params.omega1 / params.alpha1 * ln_rs),
        r_u: q.r_s.powf(1.0 / params.delta()),
        phi_u: wrap_angle(q.phi_u + params.omega2 / params.alpha1 * ln_rs),
    })
}

/// State of the linear flow in bipolar coordinates `(r_s, phi_s, r_u, phi_u)`.
pub type FlowState = [f64; 4];

fn vector_field(s: &FlowState, p: &BifocusParams) -> FlowState {
    [-p.alpha1 * s[0], p.omega1, p.alpha2 * s[2], p.omega2]
}

fn rk4_step(s: &FlowState, p: &BifocusParams, h: f64) -> FlowState {
    let k1 = vector_field(s, p);
    let mid1: FlowState = std::array::from_fn(|i| s[i] + 0.5 * h * k1[i]);
    let k2 = vector_field(&mid1, p);
    let mid2: FlowState = std::array::from_fn(|i| s[i] + 0.5 * h * k2[i]);
    let k3 = vector_field(&mid2, p);
    let end: FlowState = std::array::from_fn(|i| s[i] + h * k3[i]);
    let k4 = vector_field(&end, p);
    std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn check_step(step: f64, p: &BifocusParams) -> Result<()> {
    let rate = p.alpha1.max(p.alpha2);
    let bound = 1.0 / rate;
    if step > bound {
        return Err(LabError::StepTooLarge { step, bound });
    }
    Ok(())
}

/// Classical fourth-order one-step integration of the linear system over a
/// fixed horizon. Serves as the independent oracle for the closed-form maps.
pub fn integrate_linear_flow(
    x0: &FlowState,
    params: &BifocusParams,
    t: f64,
    step: f64,
) -> Result<FlowState> {
    check_step(step, params)?;
    let n = (t.abs() / step).ceil() as usize;
    if n == 0 {
        return Ok(*x0);
    }
    let h = t / n as f64;
    let mut s = *x0;
    for _ in 0..n {
        s = rk4_step(&s, params, h);
    }
    Ok(s)
}

/// Integrate from an incoming-section point until the event `r_u(t) = 1`,
/// locating the crossing time by bisection to 1e-12.
pub fn integrate_to_out_section(
    p: &InSectionPoint,
    params: &BifocusParams,
    step: f64,
) -> Result<(OutSectionPoint, f64)> {
    if p.r_u == 0.0 {
        return Err(LabError::OnStableManifold);
    }
    check_step(step, params)?;
    let mut s: FlowState = [1.0, p.phi_s, p.r_u, p.phi_u];
    let mut t = 0.0;
    if s[2] >= 1.0 {
        let q = OutSectionPoint {
            r_s: s[0],
            phi_s: wrap_angle(s[1]),
            phi_u: wrap_angle(s[3]),
        };
        return Ok((q, 0.0));
    }
    // march to a bracket of the crossing
    let (lo_state, mut lo_t);
    loop {
        let next = rk4_step(&s, params, step);
        if next[2] >= 1.0 {
            lo_state = s;
            lo_t = t;
            break;
        }
        s = next;
        t += step;
    }
    // bisection on the sub-step time offset
    let mut a = 0.0f64;
    let mut b = step;
    while b - a > 1e-12 {
        let mid = 0.5 * (a + b);
        let probe = rk4_step_scaled(&lo_state, params, mid);
        if probe[2] >= 1.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    let crossing = rk4_step_scaled(&lo_state, params, 0.5 * (a + b));
    lo_t += 0.5 * (a + b);
    let q = OutSectionPoint {
        r_s: crossing[0],
        phi_s: wrap_angle(crossing[1]),
        phi_u: wrap_angle(crossing[3]),
    };
    let _ = lo_state;
    Ok((q, lo_t))
}

fn rk4_step_scaled(s: &FlowState, p: &BifocusParams, h: f64) -> FlowState {
    rk4_step(s, p, h)
}

/// A one-parameter curve on the incoming section, approaching the local
/// stable manifold as `t -> 0+` when it is a segment candidate.
pub struct SegmentSpec<'a> {
    pub sampler: Box<dyn Fn(f64) -> InSectionPoint + Sync + 'a>,
    pub samples: usize,
    pub t_min: f64,
}

impl<'a> SegmentSpec<'a> {
    pub fn new(
        sampler: impl Fn(f64) -> InSectionPoint + Sync + 'a,
        samples: usize,
        t_min: f64,
    ) -> Result<Self> {
        if samples < 16 {
            return Err(LabError::InsufficientSamples("segment needs >= 16 samples"));
        }
        if !(t_min > 0.0) {
            return Err(LabError::ParamViolation(format!("t_min > 0 (got {t_min})")));
        }
        Ok(Self { sampler: Box::new(sampler), samples, t_min })
    }

    /// Log-spaced parameter values from 1 down to `t_min`.
    pub fn parameter_grid(&self) -> Vec<f64> {
        let n = self.samples;
        let ln_min = self.t_min.ln();
        (0..n)
            .map(|i| (ln_min * i as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CurveKind {
    Helix,
    Spiral,
    Neither,
}

/// Classification verdict together with the measured evidence.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CurveClassification {
    pub kind: CurveKind,
    /// Total unwrapped sweep of the faster angle, in radians.
    pub angle_sweep: f64,
    /// Ratio of the final to the initial radial coordinate along the trace.
    pub radial_ratio: f64,
    /// true when the radial coordinate decreases monotonically within tolerance.
    pub radial_monotone: bool,
}

/// Thresholds that make the asymptotic helix/spiral definitions testable.
#[derive(Debug, Clone, Copy)]
pub struct ClassifierConfig {
    /// Minimal unwrapped sweep, default three full turns.
    pub sweep_threshold: f64,
    /// The radial coordinate must drop below this fraction of its start.
    pub radial_drop: f64,
    /// Slack allowed in the monotonicity check, relative to the local value.
    pub monotone_tol: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { sweep_threshold: 3.0 * TAU, radial_drop: 1e-3, monotone_tol: 1e-9 }
    }
}

/// One sample of a classifier trace, exported as CSV.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub phi_s_out_unwrapped: f64,
    pub r_s_out: f64,
    pub phi_u_out_unwrapped: f64,
}

/// Cumulative nearest-branch continuation of a wrapped angle sequence.
pub fn unwrap_angles(wrapped: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut offset = 0.0;
    for (i, &w) in wrapped.iter().enumerate() {
        if i == 0 {
            out.push(w);
            continue;
        }
        let prev = out[i - 1];
        let mut cand = w + offset;
        while cand - prev > std::f64::consts::PI {
            cand -= TAU;
            offset -= TAU;
        }
        while prev - cand > std::f64::consts::PI {
            cand += TAU;
            offset += TAU;
        }
        out.push(cand);
    }
    out
}

fn classify_trace(trace: &[TraceRow], cfg: &ClassifierConfig) -> CurveClassification {
    // traces run from t = 1 down to t_min; measure toward the accumulation end
    let sweep_s = (trace.last().unwrap().phi_s_out_unwrapped
        - trace.first().unwrap().phi_s_out_unwrapped)
        .abs();
    let sweep_u = (trace.last().unwrap().phi_u_out_unwrapped
        - trace.first().unwrap().phi_u_out_unwrapped)
        .abs();
    let r_start = trace.first().unwrap().r_s_out;
    let r_end = trace.last().unwrap().r_s_out;
    let mut monotone = true;
    for w in trace.windows(2) {
        if w[1].r_s_out > w[0].r_s_out * (1.0 + cfg.monotone_tol) {
            monotone = false;
            break;
        }
    }
    let ratio = if r_start > 0.0 { r_end / r_start } else { 0.0 };
    let is_helix = sweep_s.min(sweep_u) >= cfg.sweep_threshold && monotone && ratio < cfg.radial_drop;
    CurveClassification {
        kind: if is_helix { CurveKind::Helix } else { CurveKind::Neither },
        angle_sweep: sweep_s.max(sweep_u),
        radial_ratio: ratio,
        radial_monotone: monotone,
    }
}

/// Evaluate the local map along a segment and return the trace ordered from
/// `t = 1` toward `t = t_min`.
pub fn segment_trace(s: &SegmentSpec, params: &BifocusParams) -> Result<Vec<TraceRow>> {
    let ts = s.parameter_grid();
    let mut phi_s_w = Vec::with_capacity(ts.len());
    let mut phi_u_w = Vec::with_capacity(ts.len());
    let mut r_s = Vec::with_capacity(ts.len());
    for &t in &ts {
        let p = (s.sampler)(t);
        let q = local_map(&p, params)?;
        phi_s_w.push(q.phi_s);
        phi_u_w.push(q.phi_u);
        r_s.push(q.r_s);
    }
    let phi_s_un = unwrap_angles(&phi_s_w);
    let phi_u_un = unwrap_angles(&phi_u_w);
    Ok(ts
        .iter()
        .enumerate()
        .map(|(i, &t)| TraceRow {
            t,
            phi_s_out_unwrapped: phi_s_un[i],
            r_s_out: r_s[i],
            phi_u_out_unwrapped: phi_u_un[i],
        })
        .collect())
}

/// Classify the image of a segment under the local map as a helix (or not).
pub fn classify_segment_image(
    s: &SegmentSpec,
    params: &BifocusParams,
    cfg: &ClassifierConfig,
) -> Result<CurveClassification> {
    let trace = segment_trace(s, params)?;
    if trace.len() < 16 {
        return Err(LabError::InsufficientSamples("segment trace"));
    }
    Ok(classify_trace(&trace, cfg))
}

/// Classify the plane trace of the image of a one-parameter family of
/// segments (a sheet) as a spiral.
///
/// The sheet is sampled on a `(z, t)` grid, mapped through the local map, and
/// intersected with the plane `phi_s_out = cut_plane` (within `plane_tol`).
/// The surviving points, ordered by `t`, form the polar trace
/// `(r_s_out, phi_u_out)` that is tested against the spiral criteria.
pub fn classify_sheet_section<'a>(
    sheet: &dyn Fn(f64) -> SegmentSpec<'a>,
    transverse_range: (f64, f64),
    transverse_samples: usize,
    cut_plane: f64,
    plane_tol: f64,
    params: &BifocusParams,
    cfg: &ClassifierConfig,
) -> Result<CurveClassification> {
    let (z_lo, z_hi) = transverse_range;
    let mut hits: Vec<(f64, f64, f64)> = Vec::new(); // (t, r_s, phi_u wrapped)
    for i in 0..transverse_samples {
        let z = z_lo + (z_hi - z_lo) * i as f64 / (transverse_samples - 1).max(1) as f64;
        let seg = sheet(z);
        for &t in &seg.parameter_grid() {
            let p = (seg.sampler)(t);
            let q = local_map(&p, params)?;
            if crate::section::circular_distance(q.phi_s, cut_plane) <= plane_tol {
                hits.push((t, q.r_s, q.phi_u));
            }
        }
    }
    if hits.is_empty() {
        return Err(LabError::EmptySection);
    }
    hits.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    hits.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-15);
    if hits.len() < 4 {
        return Err(LabError::InsufficientSamples("sheet section trace"));
    }
    let wrapped: Vec<f64> = hits.iter().map(|h| h.2).collect();
    let unwrapped = unwrap_angles(&wrapped);
    let trace: Vec<TraceRow> = hits
        .iter()
        .zip(&unwrapped)
        .map(|(&(t, r_s, _), &phi)| TraceRow {
            t,
            phi_s_out_unwrapped: phi,
            r_s_out: r_s,
            phi_u_out_unwrapped: phi,
        })
        .collect();
    let mut cls = classify_trace(&trace, cfg);
    if cls.kind == CurveKind::Helix {
        cls.kind = CurveKind::Spiral;
    }
    Ok(cls)
}

/// Write a classifier trace in the `t, phi_s_out_unwrapped, r_s_out,
/// phi_u_out_unwrapped` CSV schema.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,phi_s_out_unwrapped,r_s_out,phi_u_out_unwrapped")?;
    for r in rows {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e}",
            r.t, r.phi_s_out_unwrapped, r.r_s_out, r.phi_u_out_unwrapped
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::section::circular_distance;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn delta2() -> BifocusParams {
        BifocusParams::new(2.0, 1.0, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn flight_time_examples() {
        let p = delta2();
        let x = InSectionPoint::new(0.0, (-TAU).exp(), 0.0).unwrap();
        assert_relative_eq!(flight_time(&x, &p).unwrap(), TAU, max_relative = 1e-14);
        let x = InSectionPoint::new(0.0, 1.0, 0.0).unwrap();
        assert_eq!(flight_time(&x, &p).unwrap(), 0.0);
        let x = InSectionPoint::new(0.0, 0.0, 0.0).unwrap();
        assert!(matches!(flight_time(&x, &p), Err(LabError::OnStableManifold)));
    }

    #[test]
    fn local_map_examples() {
        let p = delta2();
        let q = local_map(&InSectionPoint::new(0.0, (-TAU).exp(), 0.0).unwrap(), &p).unwrap();
        assert_relative_eq!(q.r_s, (-2.0 * TAU).exp(), max_relative = 1e-12);
        assert!(circular_distance(q.phi_s, 0.0) < 1e-10);
        assert!(circular_distance(q.phi_u, 0.0) < 1e-10);

        let q = local_map(&InSectionPoint::new(0.7, 1.0, 1.9).unwrap(), &p).unwrap();
        assert_eq!(q.r_s, 1.0);
        assert_relative_eq!(q.phi_s, 0.7);
        assert_relative_eq!(q.phi_u, 1.9);

        let p15 = BifocusParams::new(1.5, 1.0, 2.0, 1.0, 0.0).unwrap();
        let q = local_map(&InSectionPoint::new(0.0, (-PI).exp(), 0.0).unwrap(), &p15).unwrap();
        assert_relative_eq!(q.r_s, (-1.5 * PI).exp(), max_relative = 1e-12);
        assert!(circular_distance(q.phi_s, 0.0) < 1e-10);
        assert!(circular_distance(q.phi_u, PI) < 1e-10);
    }

    #[test]
    fn inverse_examples() {
        let p = delta2();
        let q = OutSectionPoint::new((-2.0 * TAU).exp(), 0.0, 0.0).unwrap();
        let x = local_map_inverse(&q, &p).unwrap();
        assert_relative_eq!(x.r_u, (-TAU).exp(), max_relative = 1e-12);
        assert!(circular_distance(x.phi_s, 0.0) < 1e-10);
        let q = OutSectionPoint::new(1.0, 0.4, 2.2).unwrap();
        let x = local_map_inverse(&q, &p).unwrap();
        assert_eq!(x.r_u, 1.0);
        assert_relative_eq!(x.phi_s, 0.4);
        assert_relative_eq!(x.phi_u, 2.2);
        let q = OutSectionPoint::new(0.0, 0.4, 2.2).unwrap();
        assert!(matches!(local_map_inverse(&q, &p), Err(LabError::OnUnstableManifold)));
    }

    #[test]
    fn oracle_matches_closed_form() {
        let p = delta2();
        let x0: FlowState = [1.0, 0.0, (-TAU).exp(), 0.0];
        let s = integrate_linear_flow(&x0, &p, TAU, 1e-3).unwrap();
        assert_relative_eq!(s[0], (-2.0 * TAU).exp(), epsilon = 1e-8);
        assert_relative_eq!(s[2], 1.0, epsilon = 1e-8);
        assert!(circular_distance(s[1], TAU) < 1e-8);
        assert!(circular_distance(s[3], TAU) < 1e-8);
    }

    #[test]
    fn oracle_zero_time_and_semigroup() {
        let p = delta2();
        let x0: FlowState = [0.4, 1.0, 0.2, 2.0];
        assert_eq!(integrate_linear_flow(&x0, &p, 0.0, 1e-3).unwrap(), x0);
        let one = integrate_linear_flow(&x0, &p, 1.3, 1e-3).unwrap();
        let two = integrate_linear_flow(&one, &p, 0.9, 1e-3).unwrap();
        let direct = integrate_linear_flow(&x0, &p, 2.2, 1e-3).unwrap();
        for i in 0..4 {
            assert_relative_eq!(two[i], direct[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn oracle_rejects_large_step() {
        let p = delta2();
        assert!(matches!(
            integrate_linear_flow(&[1.0, 0.0, 0.5, 0.0], &p, 1.0, 10.0),
            Err(LabError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn radial_segment_is_helix() {
        let p = delta2();
        let seg = SegmentSpec::new(
            |t| InSectionPoint::new(0.0, t * 0.9, 0.0).unwrap(),
            256,
            1e-30,
        )
        .unwrap();
        let cls = classify_segment_image(&seg, &p, &ClassifierConfig::default()).unwrap();
        assert_eq!(cls.kind, CurveKind::Helix);
        assert!(cls.angle_sweep > 10.0 * TAU);
    }

    #[test]
    fn constant_radius_curve_is_not_helix() {
        let p = delta2();
        let seg = SegmentSpec::new(
            |t| InSectionPoint::new(t, 0.5, 0.0).unwrap(),
            64,
            1e-6,
        )
        .unwrap();
        let cls = classify_segment_image(&seg, &p, &ClassifierConfig::default()).unwrap();
        assert_eq!(cls.kind, CurveKind::Neither);
    }

    #[test]
    fn short_segment_is_not_helix() {
        let p = delta2();
        let seg = SegmentSpec::new(
            |t| InSectionPoint::new(0.0, t * 0.9, 0.0).unwrap(),
            64,
            0.5,
        )
        .unwrap();
        let cls = classify_segment_image(&seg, &p, &ClassifierConfig::default()).unwrap();
        assert_eq!(cls.kind, CurveKind::Neither);
    }

    #[test]
    fn sheet_section_is_spiral() {
        let p = delta2();
        let make = |z: f64| {
            SegmentSpec::new(
                move |t| InSectionPoint::new(z, t * 0.9, 0.0).unwrap(),
                4096,
                1e-30,
            )
            .unwrap()
        };
        let cls = classify_sheet_section(
            &make,
            (-PI + 1e-3, PI - 1e-3),
            65,
            0.0,
            0.02,
            &p,
            &ClassifierConfig::default(),
        )
        .unwrap();
        assert_eq!(cls.kind, CurveKind::Spiral);
    }

    #[test]
    fn sheet_far_from_manifold_is_neither() {
        let p = delta2();
        let make = |z: f64| {
            SegmentSpec::new(
                move |t| InSectionPoint::new(z, t * 0.9, 0.0).unwrap(),
                4096,
                0.5,
            )
            .unwrap()
        };
        let cls = classify_sheet_section(
            &make,
            (-PI + 1e-3, PI - 1e-3),
            65,
            0.0,
            0.02,
            &p,
            &ClassifierConfig::default(),
        )
        .unwrap();
        assert_eq!(cls.kind, CurveKind::Neither);
    }

    #[test]
    fn disjoint_cut_plane_is_empty() {
        // segment pinned near phi_s_out = 0; a tight cut at phi = pi misses it
        let p = delta2();
        let make = |_z: f64| {
            SegmentSpec::new(
                |t| InSectionPoint::new(0.0, t, 0.0).unwrap(),
                64,
                0.9,
            )
            .unwrap()
        };
        let got = classify_sheet_section(
            &make,
            (0.0, 1.0),
            3,
            PI,
            1e-3,
            &p,
            &ClassifierConfig::default(),
        );
        assert!(matches!(got, Err(LabError::EmptySection)));
    }

    #[test]
    fn helix_sweep_law() {
        // sweep over r_u in [rho^2, rho] equals (w2/a2) ln(1/rho)
        let p = BifocusParams::new(2.0, 1.0, 1.0, 1.3, 0.0).unwrap();
        let rho: f64 = 0.05;
        let seg = SegmentSpec::new(
            move |t| InSectionPoint::new(0.0, rho.powf(2.0 - t), 0.0).unwrap(),
            1024,
            1e-12,
        )
        .unwrap();
        // parametrize so t=1 -> r_u = rho, t->0 -> rho^2
        let trace = segment_trace(&seg, &p).unwrap();
        let sweep = (trace.last().unwrap().phi_u_out_unwrapped
            - trace.first().unwrap().phi_u_out_unwrapped)
            .abs();
        let expected = p.omega2 / p.alpha2 * (1.0 / rho).ln();
        assert_relative_eq!(sweep, expected, epsilon = 1e-9);
    }

    #[test]
    fn trace_csv_schema() {
        let rows = vec![TraceRow {
            t: 1.0,
            phi_s_out_unwrapped: 0.5,
            r_s_out: 0.25,
            phi_u_out_unwrapped: 7.0,
        }];
        let mut buf = Vec::new();
        write_trace_csv(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,phi_s_out_unwrapped,r_s_out,phi_u_out_unwrapped\n"));
        assert_eq!(s.lines().count(), 2);
    }
}
