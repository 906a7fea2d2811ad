//! Numerical tools for the Pekar (Choquard) functional with external
//! potentials: spectral and radial discretizations, constrained
//! minimization, rotational averaging and the product-state energy.

// `!(x > 0.0)` is how parameter checks reject NaN; index loops mirror the math
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coulomb;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod optimizer;
pub mod potentials;
pub mod product;
pub mod radial;
pub mod spectral;
pub mod sphere;

pub use energy::{el_residual, free_energy, pekar_energy, ElResidual, EnergyBreakdown, PekarFunctional};
pub use error::{Error, Result};
pub use grid::{CubicSymmetry, Field3D, Grid3D};
pub use optimizer::{minimize, minimize_radial, solve_free, translate_seed, MinimizerResult, Seed, SolveOptions};
pub use potentials::{build_annular, PotentialSpec};
pub use radial::{lift_radial, RadialField, RadialGrid};
pub use sphere::{spherical_average, LebedevRule};
