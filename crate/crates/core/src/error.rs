use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid resolution {0} must be a power of two and at least 8")]
    BadResolution(usize),

    #[error("ambient dimension {0} must be at least 2")]
    BadAmbientDim(usize),

    #[error("window radius {0} outside (0, pi]")]
    BadRadius(f64),

    #[error("cannot project a point of norm {0:e} onto the sphere")]
    ProjectionDegenerate(f64),

    #[error("base point is off the sphere: ||y| - 1| = {0:e}")]
    OffSphere(f64),

    #[error("vectors are not tangent at the base point (defect {0:e})")]
    NotTangent(f64),

    #[error("time step {dt:e} exceeds the explicit stability bound {limit:e}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("map left the tubular neighbourhood at t = {t}: min |f| = {min_norm:e}")]
    SphereDeparture { t: f64, min_norm: f64 },

    #[error("non-finite value in {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },

    #[error("fixed-point iteration stopped contracting at iteration {iteration} (distances {distances:?})")]
    NonContraction { iteration: usize, distances: Vec<f64> },

    #[error("fixed-point window could not be made contractive after {retries} halvings")]
    NonContractionCap { retries: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("config: {0}")]
    ConfigInvalid(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
