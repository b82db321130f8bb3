//! P1 finite elements, sparse linear algebra and the fine-scale reference solver.

mod assembly;
mod solver;
mod source;
mod sparse;
mod timestep;

pub use assembly::{assemble_load, assemble_mass, assemble_stiffness, Assembler};
pub use solver::{pcg, sparse_solve, SolveStats, DEFAULT_TOLERANCE};
pub use source::{Source, SourceKind};
pub use sparse::{CsrMatrix, Pattern};
pub use timestep::{fine_reference_solve, BackwardEuler, Trajectory};
