use thiserror::Error;

/// Errors shared across the lab modules.
#[derive(Debug, Clone, Error)]
pub enum LabError {
    #[error("parameter violation: {0}")]
    ParamViolation(String),
    #[error("point outside the cross-section disk: X^2+Y^2 = {0} > 1")]
    OutOfSection(f64),
    #[error("point lies on the local stable manifold (r_u = 0)")]
    OnStableManifold,
    #[error("point lies on the local unstable manifold (r_s = 0)")]
    OnUnstableManifold,
    #[error("integrator step {step} exceeds the stability bound {bound}")]
    StepTooLarge { step: f64, bound: f64 },
    #[error("not enough samples to assess {0}")]
    InsufficientSamples(&'static str),
    #[error("sampled sheet image misses the cut plane")]
    EmptySection,
    #[error("point outside the configured neighbourhood ({0})")]
    OutOfNeighbourhood(&'static str),
    #[error("input radius {0} below the singularity floor")]
    SingularInput(f64),
    #[error("Newton iteration failed to converge after {iters} steps (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("Jacobian is singular at the current iterate")]
    SingularJacobian,
    #[error("slab index {index} below the admissibility bound {bound}")]
    InadmissibleIndex { index: i64, bound: i64 },
    #[error("no index satisfying the radii ordering was found below N_max = {0}")]
    NotFound(i64),
    #[error("component count changed under resolution doubling: {coarse} -> {fine}")]
    ResolutionTooCoarse { coarse: usize, fine: usize },
    #[error("slab intersection is empty")]
    EmptyIntersection,
    #[error("fitted contraction factor {0} is not below 1")]
    NoDecay(f64),
    #[error("depth {0} is too small to fit a per-step ratio")]
    InsufficientDepth(usize),
    #[error("converged orbit codes as {found} instead of the requested {requested}")]
    WrongItinerary { requested: String, found: String },
    #[error("orbit left the domain of the return map at step {0}")]
    OrbitEscaped(usize),
    #[error("orbit norm exceeded the divergence bound at step {0}")]
    Escaped(usize),
    #[error("inserted interval {index} (length {len:.3e}) overlaps the orbit spacing {gap:.3e}")]
    OverlapDetected { index: usize, len: f64, gap: f64 },
    #[error("tube images {i} and {j} intersect")]
    DisjointnessViolated { i: usize, j: usize },
    #[error("tube diameters fail to contract ({0})")]
    ContractionFailed(String),
    #[error("periodic behaviour detected at period {period} (|G^p(x)-x| = {dist:.3e})")]
    PeriodicityDetected { period: usize, dist: f64 },
    #[error("orbit continuation lost at parameter {0}")]
    ContinuationLost(f64),
    #[error("invariant-manifold curve left the section domain")]
    ManifoldEscaped,
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
