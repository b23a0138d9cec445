use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Bad mesh extents or counts.
    InvalidMesh(String),
    /// A cell index outside the mesh.
    CellOutOfRange { cell: usize, cells: usize },
    /// Quadrature degree without a rule.
    UnsupportedDegree(usize),
    /// Two vectors that must agree in length do not.
    DimensionMismatch { expected: usize, found: usize },
    /// Non-positive step size, horizon or similar scalar parameter.
    InvalidParameter(String),
    /// `δ = 0` and `A = 0` with `p < 2`: the stress is not differentiable.
    SingularConstitutivePoint,
    /// LU met a column without an acceptable pivot.
    SingularMatrix { column: usize },
    /// Newton ran out of iterations or could not find a decreasing step.
    NewtonFailure {
        iterations: usize,
        residuals: Vec<f64>,
        reason: String,
    },
    /// A time step failed; carries the step index and the Newton failure.
    StepFailure { step: usize, source: alloc::boxed::Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidMesh(msg) => write!(f, "invalid mesh: {msg}"),
            Error::CellOutOfRange { cell, cells } => {
                write!(f, "cell index {cell} out of range (mesh has {cells} cells)")
            }
            Error::UnsupportedDegree(d) => write!(f, "no quadrature rule of degree {d}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::SingularConstitutivePoint => {
                write!(f, "stress derivative undefined at A = 0 with delta = 0 and p < 2")
            }
            Error::SingularMatrix { column } => {
                write!(f, "matrix is numerically singular at column {column}")
            }
            Error::NewtonFailure { iterations, residuals, reason } => write!(
                f,
                "Newton failed after {iterations} iterations ({reason}); last residual {:e}",
                residuals.last().copied().unwrap_or(f64::NAN)
            ),
            Error::StepFailure { step, source } => write!(f, "time step {step} failed: {source}"),
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::StepFailure { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
