use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient samples: got {got}, need at least {need} (power of two)")]
    InsufficientSamples { got: usize, need: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate parameterization: speed {speed:.3e} at t = {t:.6}")]
    DegenerateParameterization { t: f64, speed: f64 },

    #[error("diagonal requires singular quadrature (t = s = {0})")]
    DiagonalRequiresSingularQuadrature(f64),

    #[error("weakly singular diagonal (t = s = {0})")]
    WeaklySingularDiagonal(f64),

    #[error("discretization singular: condition estimate {condition:.3e}")]
    DiscretizationSingular { condition: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("incompressible limit: Poisson ratio {0} must be below 0.5")]
    IncompressibleLimit(f64),

    #[error("near-singular evaluation excluded: point ({x:.4}, {y:.4}) is {distance:.3e} from the boundary (clearance {clearance})")]
    NearSingularEvaluation {
        x: f64,
        y: f64,
        distance: f64,
        clearance: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image: {0}")]
    Image(String),
}

impl Error {
    /// Stable machine-readable class, used for CLI exit reporting.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InsufficientSamples { .. } => "insufficient-samples",
            Error::NonFinite(_) => "non-finite",
            Error::DegenerateParameterization { .. } => "degenerate-parameterization",
            Error::DiagonalRequiresSingularQuadrature(_) => "singular-diagonal",
            Error::WeaklySingularDiagonal(_) => "singular-diagonal",
            Error::DiscretizationSingular { .. } => "discretization-singular",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::Divergence(_) => "divergence",
            Error::IncompressibleLimit(_) => "incompressible-limit",
            Error::NearSingularEvaluation { .. } => "near-singular-evaluation",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Empty(_) => "empty-input",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Image(_) => "image",
        }
    }
}
