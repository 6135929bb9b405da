//! Kinetic Fokker-Planck solver and regularity diagnostics.
//!
//! The solver integrates `(∂t + v ∂x) f = ∂v (a ∂v f) + g` in one space and one
//! velocity dimension with rough coefficients `a`. The diagnostic modules
//! evaluate the objects of the De Giorgi regularity argument on its output:
//! truncation energies, barrier problems, spectral fractional norms, scaling
//! maps, oscillation ladders and Hölder fits.

pub mod averaging;
pub mod coefficients;
pub mod degiorgi;
pub mod error;
pub mod field;
pub mod geometry;
pub mod holder;
pub mod solver;

pub use error::{Error, Result};
pub use field::{PhaseField, Trajectory};
pub use geometry::{Axis, Cylinder, DyadicLevel, PhaseGrid, SpaceGrid, TimeAxis};
