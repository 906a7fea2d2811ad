//! The Pekar functional
//! `E_V(ψ) = ∫|∇ψ|² - ∬ |ψ(x)|²|ψ(y)|²/|x-y| - ∫ V|ψ|²`,
//! its mean-field operator `H_ψ = -Δ - 2Φ_ρ - V` and the Euler–Lagrange
//! residual `‖H_ψ ψ - μψ‖` on both discretizations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coulomb::check_density;
use crate::error::{Error, Result};
use crate::grid::{compensated_sum, Field3D};
use crate::radial::{newton_potential, radial_coulomb, RadialField};
use crate::spectral::SpectralOps;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    /// The (positive) Coulomb double integral.
    pub coulomb: f64,
    /// The (positive for `V ≥ 0`) pairing `∫ V|ψ|²`.
    pub potential: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(kinetic: f64, coulomb: f64, potential: f64) -> Self {
        Self {
            kinetic,
            coulomb,
            potential,
            total: kinetic - coulomb - potential,
        }
    }

    /// Rayleigh quotient `⟨ψ, H_ψ ψ⟩` implied by the three terms.
    pub fn multiplier(&self) -> f64 {
        self.kinetic - 2.0 * self.coulomb - self.potential
    }

    /// The lower bound `0.25·kinetic - 10` every admissible iterate must satisfy.
    pub fn coercive(&self) -> bool {
        self.total >= 0.25 * self.kinetic - 10.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElResidual {
    pub residual_norm: f64,
    pub multiplier: f64,
}

/// Energy, `H_ψ ψ` and Rayleigh quotient at one state.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub energy: EnergyBreakdown,
    pub h_psi: Vec<f64>,
    pub multiplier: f64,
    pub residual_norm: f64,
}

/// Reusable 3D evaluator holding FFT plans and the external potential.
#[derive(Debug, Clone)]
pub struct PekarFunctional {
    ops: SpectralOps,
    potential: Field3D,
    coulomb_enabled: bool,
    cache: Option<Cached>,
}

#[derive(Debug, Clone)]
struct Cached {
    psi: Vec<f64>,
    psi_hat: Vec<Complex64>,
    rho_hat: Vec<Complex64>,
    energy: EnergyBreakdown,
}

impl PekarFunctional {
    pub fn new(potential: Field3D) -> Result<Self> {
        potential.check_finite("potential")?;
        Ok(Self {
            ops: SpectralOps::new(*potential.grid()),
            potential,
            coulomb_enabled: true,
            cache: None,
        })
    }

    /// Drops the self-interaction, leaving the linear operator `-Δ - V`.
    pub fn without_coulomb(mut self) -> Self {
        self.coulomb_enabled = false;
        self
    }

    pub fn ops(&self) -> &SpectralOps {
        &self.ops
    }

    pub fn potential(&self) -> &Field3D {
        &self.potential
    }

    fn transforms(&mut self, psi: &[f64]) -> (Vec<Complex64>, Vec<Complex64>, EnergyBreakdown) {
        if let Some(c) = &self.cache {
            if c.psi == psi {
                return (c.psi_hat.clone(), c.rho_hat.clone(), c.energy);
            }
        }
        let rho: Vec<f64> = psi.iter().map(|v| v * v).collect();
        let (psi_hat, rho_hat) = self.ops.transform_pair(psi, &rho);
        let kinetic = self.ops.kinetic_from_hat(&psi_hat);
        let coulomb = if self.coulomb_enabled {
            self.ops.coulomb_from_hat(&rho_hat)
        } else {
            0.0
        };
        let dv = self.ops.grid().cell_volume();
        let potential = self
            .potential
            .values()
            .iter()
            .zip(&rho)
            .map(|(v, r)| v * r)
            .sum::<f64>()
            * dv;
        let energy = EnergyBreakdown::new(kinetic, coulomb, potential);
        self.cache = Some(Cached {
            psi: psi.to_vec(),
            psi_hat: psi_hat.clone(),
            rho_hat: rho_hat.clone(),
            energy,
        });
        (psi_hat, rho_hat, energy)
    }

    pub fn energy_values(&mut self, psi: &[f64]) -> EnergyBreakdown {
        self.transforms(psi).2
    }

    pub fn energy(&mut self, psi: &Field3D) -> Result<EnergyBreakdown> {
        self.potential.same_grid(psi)?;
        psi.check_finite("wave function")?;
        Ok(self.energy_values(psi.values()))
    }

    /// `H_ψ ψ = -Δψ - 2Φ_ρ ψ - Vψ` with `Φ_ρ` the truncated-kernel potential.
    pub fn evaluate_values(&mut self, psi: &[f64]) -> Evaluation {
        let (psi_hat, rho_hat, energy) = self.transforms(psi);
        let lap = self.ops.neg_laplacian_from_hat(&psi_hat);
        let phi = if self.coulomb_enabled {
            self.ops.coulomb_potential_from_hat(&rho_hat)
        } else {
            vec![0.0; psi.len()]
        };
        let h_psi: Vec<f64> = psi
            .iter()
            .zip(&lap)
            .zip(&phi)
            .zip(self.potential.values())
            .map(|(((p, l), f), v)| l - 2.0 * f * p - v * p)
            .collect();
        let dv = self.ops.grid().cell_volume();
        let norm_sq = compensated_sum(psi.iter().map(|p| p * p)) * dv;
        let multiplier = compensated_sum(psi.iter().zip(&h_psi).map(|(p, h)| p * h)) * dv / norm_sq;
        let residual_norm = (psi
            .iter()
            .zip(&h_psi)
            .map(|(p, h)| (h - multiplier * p).powi(2))
            .sum::<f64>()
            * dv)
            .sqrt();
        Evaluation {
            energy,
            h_psi,
            multiplier,
            residual_norm,
        }
    }

    pub fn evaluate(&mut self, psi: &Field3D) -> Result<Evaluation> {
        self.potential.same_grid(psi)?;
        psi.check_finite("wave function")?;
        Ok(self.evaluate_values(psi.values()))
    }
}

/// `E_V(ψ)` split into its three terms.
pub fn pekar_energy(psi: &Field3D, v: &Field3D) -> Result<EnergyBreakdown> {
    check_density(&psi.density())?;
    PekarFunctional::new(v.clone())?.energy(psi)
}

/// `E_0(ψ) = ∫|∇ψ|² - D(|ψ|², |ψ|²)`.
pub fn free_energy(psi: &Field3D) -> Result<f64> {
    Ok(pekar_energy(psi, &Field3D::zeros(*psi.grid()))?.total)
}

pub fn el_residual(psi: &Field3D, v: &Field3D) -> Result<ElResidual> {
    let eval = PekarFunctional::new(v.clone())?.evaluate(psi)?;
    Ok(ElResidual {
        residual_norm: eval.residual_norm,
        multiplier: eval.multiplier,
    })
}

/// Radial counterpart of [`PekarFunctional`] using Newton's theorem for
/// the Coulomb term.
#[derive(Debug, Clone)]
pub struct RadialPekarFunctional {
    potential: RadialField,
}

impl RadialPekarFunctional {
    pub fn new(potential: RadialField) -> Result<Self> {
        if potential.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("radial potential"));
        }
        Ok(Self { potential })
    }

    pub fn potential(&self) -> &RadialField {
        &self.potential
    }

    pub fn energy(&self, u: &RadialField) -> Result<EnergyBreakdown> {
        if u.grid() != self.potential.grid() {
            return Err(Error::IncompatibleGrids("radial potential and state differ".into()));
        }
        let rho = u.density();
        let coulomb = radial_coulomb(&rho)?;
        let potential = self.potential.dot(&rho);
        Ok(EnergyBreakdown::new(u.kinetic_energy(), coulomb, potential))
    }

    pub fn evaluate(&self, u: &RadialField) -> Result<Evaluation> {
        let energy = self.energy(u)?;
        let g = u.grid();
        let m = g.m();
        let h = g.h();
        let vals = u.values();
        let phi = newton_potential(&u.density());
        let mut h_psi = vec![0.0; m];
        for j in 0..m {
            let mut stiff = 0.0;
            if j > 0 {
                stiff += g.interval_weight(j - 1) * (vals[j] - vals[j - 1]);
            }
            if j + 1 < m {
                stiff -= g.interval_weight(j) * (vals[j + 1] - vals[j]);
            }
            let lap = stiff / (h * g.weight(j));
            h_psi[j] = lap - 2.0 * phi[j] * vals[j] - self.potential.values()[j] * vals[j];
        }
        let hu = RadialField::from_vec_unchecked(*g, h_psi);
        let multiplier = u.dot(&hu) / u.norm_sq();
        let resid = RadialField::from_vec_unchecked(
            *g,
            hu.values().iter().zip(vals).map(|(a, b)| a - multiplier * b).collect(),
        );
        Ok(Evaluation {
            energy,
            h_psi: hu.values().to_vec(),
            multiplier,
            residual_norm: resid.norm(),
        })
    }
}
