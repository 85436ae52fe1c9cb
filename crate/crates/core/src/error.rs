use thiserror::Error;

/// Errors raised by the simulation and valuation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// The diffusion coefficients violate a model assumption.
    #[error("invalid diffusion spec: {0}")]
    InvalidSpec(String),

    /// The state already lies in the decision set.
    #[error("state {0:?} is already decided; no allocation is needed")]
    AlreadyDecided([f64; 3]),

    /// Two-sided transform requested on an interval of (numerically) zero width.
    #[error("degenerate interval [{a}, {b}]")]
    DegenerateInterval { a: f64, b: f64 },

    /// A finite-difference stencil would cross the decision set or a switching plane.
    #[error("stencil at {point:?} with spacing {delta} crosses a switching plane or the boundary")]
    StencilPlacement { point: [f64; 3], delta: f64 },

    /// Quadrature, BVP solve or extrapolation did not meet its target.
    #[error("numerical failure in {stage}: {detail}")]
    Numerical { stage: &'static str, detail: String },

    /// An operation needs data that was not recorded.
    #[error("missing data: {0}")]
    MissingData(&'static str),

    /// Requested depth is beyond what the exact dynamic programme supports.
    #[error("unsupported tree depth {0}; exact costs are available for depth 1 and 2")]
    UnsupportedDepth(u32),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn numerical(stage: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            stage,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
