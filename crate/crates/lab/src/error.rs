use std::fmt;

/// Errors from meshing, assembly, solving, and study configuration.
#[derive(Debug)]
pub enum LabError {
    Core(emt_core::Error),
    Mesh(String),
    /// Traction (plus body load) fails rigid-motion compatibility.
    IncompatibleTraction { residual: f64, tolerance: f64 },
    Solver(String),
    PointOutsideMesh { x: f64, y: f64 },
    MeshMismatch,
    Config(String),
    Io(std::io::Error),
}

impl fmt::Display for LabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabError::Core(e) => write!(f, "{e}"),
            LabError::Mesh(m) => write!(f, "mesh generation failed: {m}"),
            LabError::IncompatibleTraction { residual, tolerance } => write!(
                f,
                "traction violates rigid-motion compatibility (residual {residual:e} > {tolerance:e})"
            ),
            LabError::Solver(m) => write!(f, "linear solve failed: {m}"),
            LabError::PointOutsideMesh { x, y } => {
                write!(f, "point ({x}, {y}) lies outside the mesh")
            }
            LabError::MeshMismatch => write!(f, "fields live on different meshes"),
            LabError::Config(m) => write!(f, "invalid configuration: {m}"),
            LabError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for LabError {}

impl From<emt_core::Error> for LabError {
    fn from(e: emt_core::Error) -> Self {
        LabError::Core(e)
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
