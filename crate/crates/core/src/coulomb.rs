//! Free-standing kinetic and Coulomb evaluations on a [`Field3D`].

use crate::error::{Error, Result};
use crate::grid::Field3D;
use crate::spectral::SpectralOps;

/// Mass allowed outside the quarter-box ball before the Coulomb value is
/// flagged as possibly contaminated by periodic images.
pub const SUPPORT_LEAK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoulombSelfEnergy {
    pub value: f64,
    /// Mass outside the ball of radius `L/4` about the density's centroid.
    pub leaked_mass: f64,
    pub support_warning: bool,
}

pub fn kinetic_energy(psi: &Field3D) -> Result<f64> {
    psi.check_finite("kinetic_energy input")?;
    Ok(SpectralOps::new(*psi.grid()).kinetic_energy(psi))
}

pub fn check_density(rho: &Field3D) -> Result<()> {
    rho.check_finite("density")?;
    match rho.values().iter().enumerate().find(|(_, v)| **v < -1e-12) {
        Some((index, &value)) => Err(Error::NegativeDensity { index, value }),
        None => Ok(()),
    }
}

/// Mass of `rho` outside the ball of radius `L/4` about its centroid.
pub fn leaked_mass(rho: &Field3D) -> f64 {
    let c = rho.centroid();
    rho.mass_outside(c, 0.25 * rho.grid().length())
}

/// `∬ ρ(x) ρ(y) / |x - y|` with the kernel truncated at `L/2`.
pub fn coulomb_self_energy(rho: &Field3D) -> Result<CoulombSelfEnergy> {
    check_density(rho)?;
    let ops = SpectralOps::new(*rho.grid());
    coulomb_self_energy_with(&ops, rho)
}

pub fn coulomb_self_energy_with(ops: &SpectralOps, rho: &Field3D) -> Result<CoulombSelfEnergy> {
    check_density(rho)?;
    let value = ops.coulomb_energy(rho);
    let leaked = leaked_mass(rho);
    Ok(CoulombSelfEnergy {
        value,
        leaked_mass: leaked,
        support_warning: leaked > SUPPORT_LEAK_TOLERANCE,
    })
}
