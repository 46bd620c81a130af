//! Thermodynamic limits on photoisomerization yields.
//!
//! Builds the single- and many-molecule photoswitch states, decides
//! thermomajorization through curves, and computes the optimal cis-trans
//! yields both in closed form and by linear programming.

pub mod asymptotics;
pub mod closedform;
pub mod coherence;
pub mod curves;
pub mod error;
pub mod gibbslp;
pub mod logscalar;
pub mod multilevel;
pub mod simplex;
pub mod state;

pub use error::{Error, Result};
pub use logscalar::LogScalar;
pub use state::{DiagonalState, LevelGroup, ModelParams};
