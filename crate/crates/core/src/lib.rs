//! Drift-diffusion simulation and compact modelling of junctionless
//! double-gate FETs.

pub mod cli_io;
pub mod compact;
pub mod device;
pub mod error;
pub mod extraction;
pub mod linalg;
pub mod materials;
pub mod mesh;
pub mod solver;
pub mod sweep;

pub use device::{default_paper_device, BiasPoint, DeviceSpec};
pub use error::{Error, Result};
pub use mesh::{build_mesh, Resolution, StructuredMesh};
pub use solver::{solve_bias, solve_equilibrium, FieldSolution, SolverSettings};
