use thiserror::Error;

use crate::geometry::Point;

pub type Result<T> = std::result::Result<T, CpError>;

#[derive(Debug, Error)]
pub enum CpError {
    #[error("level-set gradient vanishes at {at:?} (|grad| = {norm:e})")]
    DegenerateGradient { at: [f64; 3], norm: f64 },

    #[error("tangential gradient vanishes at {at:?} (|P grad| = {norm:e})")]
    DegenerateTangentialGradient { at: [f64; 3], norm: f64 },

    #[error("normal matrix is rank deficient (Gram condition {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("point {at:?} is not on the surface (residual {residual:e})")]
    OffSurface { at: [f64; 3], residual: f64 },

    #[error("intrinsic retraction started off its host surface at {at:?} (residual {residual:e})")]
    OffSurfaceStart { at: [f64; 3], residual: f64 },

    #[error("ODE solver exceeded {max_steps} steps")]
    StepLimitExceeded { max_steps: usize },

    #[error("point {at:?} lies on the x3-axis where the closest point function is undefined")]
    OnAxis { at: [f64; 3] },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("adaptive quadrature did not converge on [{a}, {b}]")]
    QuadratureNoConvergence { a: f64, b: f64 },

    #[error("band is empty (band_tol = {band_tol})")]
    EmptyBand { band_tol: f64 },

    #[error("stencil starvation: {count} band points lack stencil support (first at node {first:?}); increase band_tol beyond {band_tol}")]
    StencilStarvation {
        count: usize,
        first: [usize; 3],
        band_tol: f64,
    },

    #[error("{stage}: stencil node {node:?} is outside the band")]
    StencilOutOfBand { stage: &'static str, node: [i64; 3] },

    #[error("non-finite value at band offset {offset} after step {step}")]
    NaNDetected { step: usize, offset: usize },

    #[error("closest point evaluation failed at band offset {offset}: {source}")]
    AtBandPoint {
        offset: usize,
        #[source]
        source: Box<CpError>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn arr(p: &Point) -> [f64; 3] {
    [p.x, p.y, p.z]
}
