//! Python bindings for the bifocus return-map laboratory.
//!
//! The module mirrors the core crate with plain Python types: points are
//! 3-tuples, itineraries are lists of `(slab, branch)` pairs, and reports
//! come back as dicts.  Model and slab settings use the library defaults.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bifocus_core::denjoy::{
    build_gb, denjoy_surgery, verify_wandering as core_verify_wandering, DenjoyCircleMap,
    DenjoyConfig, LengthLaw, WanderingDomainSpec, GOLDEN_OMEGA,
};
use bifocus_core::error::LabError;
use bifocus_core::horseshoe::{
    contraction_rates as core_contraction_rates, find_periodic_orbit as core_find_periodic_orbit,
    intersection_components as core_intersection_components, lyapunov_spectrum as core_lyapunov,
    min_index_tec2 as core_min_index_tec2, slab_radii as core_slab_radii, Itinerary, SlabConfig,
};
use bifocus_core::return_map::{
    inverse_return_map as core_inverse, orbit as core_orbit, return_map as core_return_map,
    return_map_jacobian, GlobalMapModel, JacobianMode,
};
use bifocus_core::tangency::{
    classify_attractor, henon_fixed_points as core_henon_fixed_points, henon_limit_map,
    normal_form_map, HenonParams, NormalFormParams,
};
use bifocus_core::{BifocusParams, RectPoint};

fn lab_err(e: LabError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn point(t: (f64, f64, f64)) -> RectPoint {
    RectPoint::new(t.0, t.1, t.2)
}

fn tuple(p: &RectPoint) -> (f64, f64, f64) {
    (p.x, p.y, p.z)
}

/// Bifocus saddle-focus parameters with the derived contraction ratio.
#[pyclass(name = "Params", from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: BifocusParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (alpha1, alpha2, omega1, omega2, lam=0.0))]
    fn new(alpha1: f64, alpha2: f64, omega1: f64, omega2: f64, lam: f64) -> PyResult<Self> {
        Ok(Self {
            inner: BifocusParams::new(alpha1, alpha2, omega1, omega2, lam).map_err(lab_err)?,
        })
    }

    #[getter]
    fn alpha1(&self) -> f64 {
        self.inner.alpha1
    }
    #[getter]
    fn alpha2(&self) -> f64 {
        self.inner.alpha2
    }
    #[getter]
    fn omega1(&self) -> f64 {
        self.inner.omega1
    }
    #[getter]
    fn omega2(&self) -> f64 {
        self.inner.omega2
    }
    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta()
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(alpha1={}, alpha2={}, omega1={}, omega2={}, lam={})",
            self.inner.alpha1, self.inner.alpha2, self.inner.omega1, self.inner.omega2,
            self.inner.lambda
        )
    }
}

/// One application of the composed return map.
#[pyfunction]
fn return_map(p: (f64, f64, f64), params: &PyParams) -> PyResult<(f64, f64, f64)> {
    let model = GlobalMapModel::default();
    let q = core_return_map(&point(p), &params.inner, &model).map_err(lab_err)?;
    Ok(tuple(&q))
}

/// Return map Jacobian: dict with output, 3x3 jacobian, det, eigenvalues.
#[pyfunction]
#[pyo3(signature = (p, params, fd=false))]
fn jacobian<'py>(
    py: Python<'py>,
    p: (f64, f64, f64),
    params: &PyParams,
    fd: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let model = GlobalMapModel::default();
    let mode = if fd { JacobianMode::FiniteDifference } else { JacobianMode::Analytic };
    let eval =
        return_map_jacobian(&point(p), &params.inner, &model, mode, None).map_err(lab_err)?;
    let d = PyDict::new(py);
    d.set_item("output", tuple(&eval.output))?;
    let rows: Vec<Vec<f64>> = (0..3)
        .map(|r| (0..3).map(|c| eval.jacobian[(r, c)]).collect())
        .collect();
    d.set_item("jacobian", rows)?;
    d.set_item("det", eval.det)?;
    let eigs: Vec<(f64, f64)> = eval.eigenvalues.iter().map(|z| (z.re, z.im)).collect();
    d.set_item("eigenvalues", eigs)?;
    Ok(d)
}

/// Newton inverse of the return map from a seed in the same branch.
#[pyfunction]
fn inverse_return_map(
    p: (f64, f64, f64),
    params: &PyParams,
    seed: (f64, f64, f64),
) -> PyResult<(f64, f64, f64)> {
    let model = GlobalMapModel::default();
    let q = core_inverse(&point(p), &params.inner, &model, &point(seed)).map_err(lab_err)?;
    Ok(tuple(&q))
}

/// Orbit rows `(step, x, y, z, r, det_jac)`; `steps + 1` rows.
#[pyfunction]
fn orbit(
    p0: (f64, f64, f64),
    params: &PyParams,
    steps: usize,
) -> PyResult<Vec<(usize, f64, f64, f64, f64, f64)>> {
    let model = GlobalMapModel::default();
    let rows = core_orbit(&point(p0), &params.inner, &model, steps).map_err(lab_err)?;
    Ok(rows
        .iter()
        .map(|r| (r.step, r.x, r.y, r.z, r.r, r.det_jac))
        .collect())
}

fn slab_cfg(eta: f64) -> SlabConfig {
    SlabConfig { eta, ..SlabConfig::default() }
}

/// Minimal slab index with a full first-return ladder.
#[pyfunction]
#[pyo3(signature = (params, eta=0.0))]
fn min_index_tec2(params: &PyParams, eta: f64) -> PyResult<i64> {
    core_min_index_tec2(&params.inner, &slab_cfg(eta)).map_err(lab_err)
}

/// Slab annulus radii: dict with `a_n, a_n1, b_n, b_n1`.
#[pyfunction]
#[pyo3(signature = (n, params, eta=0.0))]
fn slab_radii<'py>(
    py: Python<'py>,
    n: i64,
    params: &PyParams,
    eta: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = core_slab_radii(n, &params.inner, &slab_cfg(eta)).map_err(lab_err)?;
    let d = PyDict::new(py);
    d.set_item("n", s.n)?;
    d.set_item("a_n", s.a_n)?;
    d.set_item("a_n1", s.a_n1)?;
    d.set_item("b_n", s.b_n)?;
    d.set_item("b_n1", s.b_n1)?;
    Ok(d)
}

/// Connected components of `R(S_i) ∩ S_j`, with a doubled-resolution check.
#[pyfunction]
#[pyo3(signature = (i, j, params, resolution=128))]
fn intersection_components(
    i: i64,
    j: i64,
    params: &PyParams,
    resolution: usize,
) -> PyResult<usize> {
    let model = GlobalMapModel::default();
    let scan = core_intersection_components(
        i,
        j,
        &params.inner,
        &model,
        &SlabConfig::default(),
        resolution,
    )
    .map_err(lab_err)?;
    Ok(scan.component_count)
}

/// Periodic orbit for a symbolic word `[(slab, branch), ...]`; dict with
/// points, residual, and Floquet moduli.
#[pyfunction]
fn find_periodic_orbit<'py>(
    py: Python<'py>,
    word: Vec<(i64, u8)>,
    params: &PyParams,
) -> PyResult<Bound<'py, PyDict>> {
    let model = GlobalMapModel::default();
    let itin = Itinerary::periodic(word).map_err(lab_err)?;
    let po = core_find_periodic_orbit(&itin, &params.inner, &model, &SlabConfig::default())
        .map_err(lab_err)?;
    let d = PyDict::new(py);
    d.set_item("word", po.word.clone())?;
    d.set_item("points", po.points.iter().map(tuple).collect::<Vec<_>>())?;
    d.set_item("residual", po.residual)?;
    d.set_item(
        "multiplier_moduli",
        po.spectrum.iter().map(|z| z.norm()).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Horizontal and vertical contraction rates `(nu_h, nu_v)` at loop `depth`.
#[pyfunction]
#[pyo3(signature = (i, j, params, depth=4))]
fn contraction_rates(i: i64, j: i64, params: &PyParams, depth: usize) -> PyResult<(f64, f64)> {
    let model = GlobalMapModel::default();
    core_contraction_rates(i, j, &params.inner, &model, &SlabConfig::default(), depth)
        .map_err(lab_err)
}

/// QR-accumulated Lyapunov spectrum along a forward orbit.
#[pyfunction]
#[pyo3(signature = (p0, params, steps=100_000, discard=1_000))]
fn lyapunov_spectrum(
    p0: (f64, f64, f64),
    params: &PyParams,
    steps: usize,
    discard: usize,
) -> PyResult<(f64, f64, f64)> {
    let model = GlobalMapModel::default();
    let l = core_lyapunov(&point(p0), &params.inner, &model, steps, discard).map_err(lab_err)?;
    Ok((l[0], l[1], l[2]))
}

/// Fixed points of the quadratic limit family `(z, b z, a + y + z^2)`.
#[pyfunction]
fn henon_fixed_points(a: f64, b: f64) -> PyResult<Vec<(f64, f64, f64)>> {
    let hp = HenonParams::new(a, b).map_err(lab_err)?;
    Ok(core_henon_fixed_points(&hp)
        .into_iter()
        .map(|p| (p[0], p[1], p[2]))
        .collect())
}

/// Classify the attractor of the quadratic limit family at `(a, b)`.
#[pyfunction]
#[pyo3(signature = (a, b, x0=(0.0, 0.0, 0.0), n_steps=20_000))]
fn classify_henon<'py>(
    py: Python<'py>,
    a: f64,
    b: f64,
    x0: (f64, f64, f64),
    n_steps: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let hp = HenonParams::new(a, b).map_err(lab_err)?;
    let f = move |p: [f64; 3]| henon_limit_map(p, &hp);
    let class = classify_attractor(&f, [x0.0, x0.1, x0.2], n_steps).map_err(lab_err)?;
    let d = PyDict::new(py);
    d.set_item("kind", class.kind.to_string())?;
    d.set_item("lyapunov", class.lyapunov.to_vec())?;
    d.set_item("circle_radius", class.evidence.circle_radius)?;
    d.set_item("circle_residual", class.evidence.circle_residual)?;
    Ok(d)
}

/// One step of the truncated Hopf normal form; returns `(r, theta, t, clamped)`.
#[pyfunction]
#[pyo3(signature = (r, theta, t, mu, a_mu=1.0, beta_mu=0.0, gamma=0.5, hot=false))]
#[allow(clippy::too_many_arguments)]
fn normal_form_step(
    r: f64,
    theta: f64,
    t: f64,
    mu: f64,
    a_mu: f64,
    beta_mu: f64,
    gamma: f64,
    hot: bool,
) -> PyResult<(f64, f64, f64, bool)> {
    let nf = NormalFormParams::new(mu, a_mu, beta_mu, gamma, hot).map_err(lab_err)?;
    let s = normal_form_map(r, theta, t, &nf).map_err(lab_err)?;
    Ok((s.r, s.theta, s.t, s.clamped))
}

fn length_law(name: &str, ratio: f64) -> PyResult<LengthLaw> {
    match name {
        "basel" => Ok(LengthLaw::Basel),
        "geometric" => Ok(LengthLaw::Geometric { ratio }),
        other => Err(PyValueError::new_err(format!(
            "length_law must be 'basel' or 'geometric', got '{other}'"
        ))),
    }
}

/// A Denjoy-like circle homeomorphism built by interval insertion.
#[pyclass(name = "DenjoyMap")]
struct PyDenjoyMap {
    inner: DenjoyCircleMap,
}

#[pymethods]
impl PyDenjoyMap {
    #[new]
    #[pyo3(signature = (omega=GOLDEN_OMEGA, theta0=0.3, length_budget=0.5, n_intervals=2_000, law="basel", ratio=0.5))]
    fn new(
        omega: f64,
        theta0: f64,
        length_budget: f64,
        n_intervals: usize,
        law: &str,
        ratio: f64,
    ) -> PyResult<Self> {
        let cfg = DenjoyConfig {
            omega,
            theta0,
            length_budget,
            length_law: length_law(law, ratio)?,
            n_intervals,
        };
        Ok(Self { inner: denjoy_surgery(&cfg).map_err(lab_err)? })
    }

    /// The rigid rotation by `omega` (surgery-free negative control).
    #[staticmethod]
    fn rigid(omega: f64) -> Self {
        Self { inner: DenjoyCircleMap::rigid(omega) }
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega
    }
    #[getter]
    fn total_len(&self) -> f64 {
        self.inner.total_len
    }
    #[getter]
    fn n_intervals(&self) -> usize {
        self.inner.n_intervals()
    }

    /// Left endpoint and length of the inserted interval with orbit index `n`.
    fn interval_span(&self, n: usize) -> (f64, f64) {
        self.inner.interval_span(n)
    }

    /// Circle map, arc-length coordinates mod `total_len`.
    fn eval(&self, s: f64) -> f64 {
        self.inner.eval(s)
    }

    /// Monotone lift of the circle map.
    fn eval_lift(&self, s: f64) -> f64 {
        self.inner.eval_lift(s)
    }

    /// Orbit-averaged rotation number estimate.
    #[pyo3(signature = (n_iter=100_000))]
    fn rotation_number(&self, n_iter: usize) -> f64 {
        self.inner.rotation_number(n_iter)
    }
}

/// Run the wandering-domain verification for the 3D suspension of a circle
/// map; raises ValueError with the failed check on the negative controls.
#[pyfunction]
#[pyo3(signature = (circle, mu=0.04, a_mu=1.0, beta_mu=0.0, gamma=0.5, tube_radius=0.05,
                    n_iter=10_000, period_bound=50, margin=1e-6))]
#[allow(clippy::too_many_arguments)]
fn verify_wandering<'py>(
    py: Python<'py>,
    circle: &PyDenjoyMap,
    mu: f64,
    a_mu: f64,
    beta_mu: f64,
    gamma: f64,
    tube_radius: f64,
    n_iter: usize,
    period_bound: usize,
    margin: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let nf = NormalFormParams::new(mu, a_mu, beta_mu, 0.5, false).map_err(lab_err)?;
    let spec = WanderingDomainSpec::new(tube_radius, gamma).map_err(lab_err)?;
    let gb = build_gb(circle.inner.clone(), nf, spec).map_err(lab_err)?;
    let report = core_verify_wandering(&gb, n_iter, period_bound, margin).map_err(lab_err)?;
    let d = PyDict::new(py);
    d.set_item("disjoint", report.checks.disjoint)?;
    d.set_item("min_separation", report.checks.min_separation)?;
    d.set_item("contraction", report.checks.contraction)?;
    d.set_item("k_star", report.checks.k_star)?;
    d.set_item("periodicity_free", report.checks.periodicity_free)?;
    d.set_item("cantor", report.checks.cantor)?;
    d.set_item("max_cantor_defect", report.checks.max_cantor_defect)?;
    Ok(d)
}

#[pymodule]
fn bifocus_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyDenjoyMap>()?;
    m.add_function(wrap_pyfunction!(return_map, m)?)?;
    m.add_function(wrap_pyfunction!(jacobian, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_return_map, m)?)?;
    m.add_function(wrap_pyfunction!(orbit, m)?)?;
    m.add_function(wrap_pyfunction!(min_index_tec2, m)?)?;
    m.add_function(wrap_pyfunction!(slab_radii, m)?)?;
    m.add_function(wrap_pyfunction!(intersection_components, m)?)?;
    m.add_function(wrap_pyfunction!(find_periodic_orbit, m)?)?;
    m.add_function(wrap_pyfunction!(contraction_rates, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(henon_fixed_points, m)?)?;
    m.add_function(wrap_pyfunction!(classify_henon, m)?)?;
    m.add_function(wrap_pyfunction!(normal_form_step, m)?)?;
    m.add_function(wrap_pyfunction!(verify_wandering, m)?)?;
    m.add("GOLDEN_OMEGA", GOLDEN_OMEGA)?;
    Ok(())
}
