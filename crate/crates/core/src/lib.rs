//! Multiscale homogenization of parabolic equations with rough coefficients.
//!
//! The pipeline: a fine P1 reference solve of `u_t = div(a grad u) + g`,
//! harmonic coordinates `F` solving the same operator with `F = x` on the
//! boundary, a coarse space of P1 hats composed with `F`, and a coarse
//! implicit time stepper whose unknowns are constant over coarse steps.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod harmonic;
pub mod locate;
pub mod media;
pub mod mesh;
pub mod metrics;
pub mod rng;
pub mod upscale;

pub use diagnostics::{CordesReport, SigmaField};
pub use error::{Error, Result};
pub use experiments::{run_experiment, run_suite, ExperimentConfig, ExperimentReport, SuiteName};
pub use fem::{Source, SourceKind};
pub use harmonic::{HarmonicMap, MapLevel};
pub use locate::{PointLocation, PointLocator};
pub use media::{Medium, MediumFamily, MediumSpec, TensorSample};
pub use mesh::{Mesh, Point};
pub use metrics::{ConvergenceTable, ErrorNorms};
pub use nalgebra::{DMatrix, DVector};
pub use upscale::{Basis, CoarseSpace, CoarseTrajectory};
