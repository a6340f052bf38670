//! Mixed finite elements for symmetric H(div) stress tensors on simplicial
//! grids, with the saddle-point assembly, solvers, a manufactured-solution
//! convergence lab and an algebraic verification suite.

pub mod elements;
pub mod assembly;
pub mod convergence;
pub mod error;
pub mod solver;
pub mod verify;
pub mod linalg;
pub mod mesh;
pub mod polyalg;

pub use error::{Error, Result};
