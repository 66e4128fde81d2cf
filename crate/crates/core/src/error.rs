use alloc::string::String;

/// Errors raised by the simulation and reconstruction routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter or combination of parameters is not admissible.
    #[error("configuration error: {0}")]
    Config(String),
    /// Array dimensions or wavelength grids do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// Unregularized deconvolution hit a spectral null.
    #[error("kernel spectrum vanishes at frequency bin ({row}, {col}); use a positive epsilon")]
    Singularity { row: usize, col: usize },
    /// A computation produced NaN or infinity.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// The input data cannot be used (e.g. all-zero vectors).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
