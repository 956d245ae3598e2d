use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("mesh parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("triangle {triangle} references vertex {index} but only {count} vertices exist")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        count: usize,
    },

    #[error("triangle {0} is degenerate (non-positive area)")]
    DegenerateTriangle(usize),

    #[error("non-conforming mesh: {0}")]
    NonConforming(String),

    #[error("mesh is not TPFA-admissible: {0}")]
    Inadmissible(String),

    #[error("size mismatch: expected {expected} values, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("KKT system is singular (mu = {mu:e}, |rho| = {rho_norm:e}, |phi| = {phi_norm:e}, |s| = {s_norm:e})")]
    SingularSystem {
        mu: f64,
        rho_norm: f64,
        phi_norm: f64,
        s_norm: f64,
    },

    #[error("Newton iteration diverged (mu = {mu:e}, residual = {residual:e}, after {newton_iterations} Newton steps)")]
    NewtonDivergence {
        mu: f64,
        residual: f64,
        newton_iterations: usize,
    },

    #[error("barrier continuation exceeded {max_outer} outer iterations (residual = {residual:e}, mu = {mu:e})")]
    OuterCapExceeded {
        max_outer: usize,
        residual: f64,
        mu: f64,
    },

    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("convergence level {level} failed: {source}")]
    LevelFailed {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-friendly tag for failure records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateDomain(_) => "degenerate_domain",
            Error::Parse { .. } => "parse",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::DegenerateTriangle(_) => "degenerate_triangle",
            Error::NonConforming(_) => "non_conforming",
            Error::Inadmissible(_) => "inadmissible",
            Error::SizeMismatch { .. } => "size_mismatch",
            Error::Domain(_) => "domain",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::SingularSystem { .. } => "singular_system",
            Error::NewtonDivergence { .. } => "newton_divergence",
            Error::OuterCapExceeded { .. } => "outer_cap_exceeded",
            Error::StepFailed { source, .. } | Error::LevelFailed { source, .. } => source.kind(),
            Error::Io(_) => "io",
        }
    }

    /// Index of the failing time step, if the error carries one.
    pub fn failing_step(&self) -> Option<usize> {
        match self {
            Error::StepFailed { step, .. } => Some(*step),
            Error::LevelFailed { source, .. } => source.failing_step(),
            _ => None,
        }
    }

    /// Index of the failing convergence-study level, if any.
    pub fn failing_level(&self) -> Option<usize> {
        match self {
            Error::LevelFailed { level, .. } => Some(*level),
            _ => None,
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, found })
    }
}
