//! Wasserstein flatness analysis for finite doubling-type point measures.
//!
//! The crate measures how closely a weighted point cloud resembles a flat
//! measure (Hausdorff measure on an affine plane) at every location and
//! scale, using an exact boundary-vanishing variant of the L1-Wasserstein
//! distance. On top of that sit multiscale dimension/density profiles,
//! Christ-style pseudo-cube trees, corona decompositions into Lipschitz
//! graph regions, and big-piece bi-Lipschitz parametrizations.

pub mod corona;
pub mod cubes;
pub mod density;
pub mod duallp;
pub mod error;
pub mod flatness;
pub mod generators;
pub mod geometry;
pub mod io;
pub mod measure;
pub mod spatial;
pub mod transport;

pub use error::{Error, Result};
pub use geometry::AffinePlane;
pub use measure::{BallQuery, DoublingStats, PointMeasure};
