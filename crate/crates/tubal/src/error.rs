use thiserror::Error;

/// Errors shared by the tensor algebra, solvers and file formats.
#[derive(Debug, Error)]
pub enum TubalError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// The inverse mode-3 transform produced an imaginary residue above the
    /// real-recovery tolerance, i.e. the Fourier slices did not come from a
    /// real tensor.
    #[error("inverse transform is not real (relative imaginary residue {rel:.3e})")]
    NonRealInverse { rel: f64 },

    #[error("SVD failed to converge on Fourier slice {slice}")]
    SvdFailure { slice: usize },

    #[error("eigendecomposition failed on Fourier slice {slice}")]
    EigFailure { slice: usize },

    #[error("operation undefined for the zero tensor")]
    ZeroTensor,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("solver diverged at iteration {iter} (train loss {loss:.6e})")]
    Diverged { iter: usize, loss: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("corrupt file: {0}")]
    CorruptFile(String),
}

pub type Result<T> = std::result::Result<T, TubalError>;
