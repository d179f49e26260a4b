//! FEM laboratory for thin-inclusion boundary asymptotics in planar
//! anisotropic elasticity: meshing, pure-traction elasticity solves, and the
//! ε-sweep harness with its file formats.

pub mod asymptotics;
pub mod config;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod report;
pub mod sparse;

pub use error::{LabError, Result};
