use core::fmt;

/// Errors raised by tensor algebra and curve geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Convexity margin at or below the singularity tolerance.
    SingularTensor { margin: f64 },
    /// A tensor that must be strongly convex is not.
    NotConvex { margin: f64 },
    /// A direction that must be a unit vector is not.
    NonUnitNormal { norm: f64 },
    /// Frame vectors fail the orthonormality invariant.
    BadFrame { defect: f64 },
    /// Arclength query outside `[0, length]`.
    ArclengthOutOfRange { s: f64, length: f64 },
    /// Trim must satisfy `0 <= trim < length/2`.
    InvalidTrim { trim: f64, length: f64 },
    /// A curve specification is degenerate (zero length, too few points, ...).
    DegenerateCurve(&'static str),
    /// Quadrature order or panel count outside the supported range.
    InvalidQuadrature(&'static str),
    /// Lame parameters outside the strong convexity region.
    BadLameParameters { lambda: f64, mu: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::SingularTensor { margin } => {
                write!(f, "tensor is numerically singular (margin {margin:e})")
            }
            Error::NotConvex { margin } => {
                write!(f, "tensor is not strongly convex (margin {margin:e})")
            }
            Error::NonUnitNormal { norm } => {
                write!(f, "normal vector must be unit length (|n| = {norm})")
            }
            Error::BadFrame { defect } => {
                write!(f, "frame is not orthonormal (defect {defect:e})")
            }
            Error::ArclengthOutOfRange { s, length } => {
                write!(f, "arclength {s} outside [0, {length}]")
            }
            Error::InvalidTrim { trim, length } => {
                write!(f, "trim {trim} invalid for curve of length {length}")
            }
            Error::DegenerateCurve(what) => write!(f, "degenerate curve: {what}"),
            Error::InvalidQuadrature(what) => write!(f, "invalid quadrature: {what}"),
            Error::BadLameParameters { lambda, mu } => {
                write!(f, "Lame parameters outside convexity region (lambda={lambda}, mu={mu})")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
