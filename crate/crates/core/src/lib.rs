//! Time-fractional subdiffusion `D^α u − Δu = f` on an interval: SFTR
//! convolution weights, piecewise-linear finite elements, the time-stepping
//! scheme with an optional first-step correction, and fast history
//! summation on Talbot contours.

pub mod error;
pub mod experiments;
pub mod fast;
pub mod fem;
pub mod special;
pub mod stepping;
pub mod weights;

pub use error::{Error, Result};
pub use fast::{FastAlgorithm, FastConfig, FastHistoryState};
pub use fem::{Datum, Fem1dSystem, FemFunction, Mesh1D, TriDiag};
pub use special::mittag_leffler;
pub use stepping::{
    solve, solve_with, DiscreteProblem, HistoryMode, RunStats, Scheme, SolutionHistory, SpatialSystem,
};
pub use weights::{sftr_weights, SchemeParams, WeightKind, WeightTable};
