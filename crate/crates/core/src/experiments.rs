//! The headline computations: the symmetry-breaking sweep over the well
//! radius, the perturbation derivative, the rotational-average identities
//! and multi-seed evidence on the minimizer orbit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::pekar_energy;
use crate::error::{Error, Result};
use crate::grid::{Field3D, Grid3D};
use crate::optimizer::{minimize, minimize_radial, translate_seed_along, MinimizerResult, Seed, SolveOptions};
use crate::potentials::{mass_in_well, potential_energy, PotentialSpec};
use crate::radial::{RadialField, RadialGrid};
use crate::spectral::SpectralOps;
use crate::sphere::{averaging_grid, radialize, spherical_average, LebedevRule};

/// Discretization and solver settings shared by all experiments.
#[derive(Debug, Clone)]
pub struct Setup {
    pub grid: Grid3D,
    pub radial: RadialGrid,
    pub solve: SolveOptions,
    /// Worker threads for independent solves.
    pub workers: usize,
}

impl Setup {
    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))
    }

    fn with_seed(&self, seed: Seed) -> SolveOptions {
        self.solve.clone().with_seed(seed)
    }
}

/// Error budget of one solve: the larger of the energy tolerance and the
/// second-order residual contribution.
pub fn solve_tolerance<S>(res: &MinimizerResult<S>, opts: &SolveOptions) -> f64 {
    opts.tolerance_energy.max(res.residual.residual_norm.powi(2))
}

/// Centre-of-mass displacement `|∫ x ρ|`.
pub fn anisotropy(psi: &Field3D) -> f64 {
    let c = psi.density().centroid();
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub radius: f64,
    pub e_full: f64,
    pub e_rad: f64,
    pub trial_bound: f64,
    pub gap: f64,
    /// Mass of the full minimizer inside `2 ≤ |x| ≤ R`.
    pub well_mass: f64,
    /// Same for the translated free minimizer.
    pub seed_well_mass: f64,
    pub anisotropy: f64,
    /// Sum of the two solves' error budgets.
    pub tolerance: f64,
    pub converged_full: bool,
    pub converged_rad: bool,
}

impl SweepRow {
    pub fn flagged(&self) -> bool {
        !(self.converged_full && self.converged_rad)
    }

    pub fn ordering_holds(&self) -> bool {
        self.e_full <= self.e_rad + self.tolerance && self.e_full <= self.trial_bound + self.tolerance
    }
}

/// The free minimizer and its energy, computed once per experiment.
#[derive(Debug, Clone)]
pub struct FreeState {
    pub q: RadialField,
    pub e0: f64,
}

impl FreeState {
    pub fn from_result(res: &MinimizerResult<RadialField>) -> Self {
        Self {
            q: res.psi.clone(),
            e0: res.energy.total,
        }
    }
}

/// `e(0) − ∫ V_R |Q_R|²`.
pub fn trial_upper_bound(free: &FreeState, radius: f64, grid: &Grid3D) -> Result<f64> {
    let q_r = translate_seed_along(&free.q, radius, [1.0, 0.0, 0.0], grid)?;
    let v = PotentialSpec::annular(radius).build(grid)?;
    Ok(free.e0 - potential_energy(&v, &q_r.density())?)
}

/// Full and radial solves for one well radius.
pub struct SweepSolve {
    pub row: SweepRow,
    pub full: MinimizerResult<Field3D>,
    pub radial: MinimizerResult<RadialField>,
}

fn sweep_one(free: &FreeState, radius: f64, setup: &Setup) -> Result<SweepSolve> {
    let spec = PotentialSpec::annular(radius);
    spec.validate_on(&setup.grid)?;
    let v = spec.build(&setup.grid)?;
    let vr = spec.build_radial(&setup.radial)?;
    let seed = translate_seed_along(&free.q, radius, [1.0, 0.0, 0.0], &setup.grid)?;
    let seed_well_mass = mass_in_well(&seed.density(), radius);
    let trial_bound = free.e0 - potential_energy(&v, &seed.density())?;
    let full = minimize(&v, &setup.with_seed(Seed::Field(seed)))?;
    let radial = minimize_radial(&vr, &setup.solve)?;
    let row = SweepRow {
        radius,
        e_full: full.energy.total,
        e_rad: radial.energy.total,
        trial_bound,
        gap: radial.energy.total - full.energy.total,
        well_mass: mass_in_well(&full.psi.density(), radius),
        seed_well_mass,
        anisotropy: anisotropy(&full.psi),
        tolerance: solve_tolerance(&full, &setup.solve) + solve_tolerance(&radial, &setup.solve),
        converged_full: full.converged,
        converged_rad: radial.converged,
    };
    Ok(SweepSolve { row, full, radial })
}

/// One row per radius, solved concurrently on `setup.workers` threads.
pub fn sweep_r_detailed(free: &FreeState, radii: &[f64], setup: &Setup) -> Result<Vec<SweepSolve>> {
    for &r in radii {
        PotentialSpec::annular(r).validate_on(&setup.grid)?;
    }
    setup
        .pool()?
        .install(|| radii.par_iter().map(|&r| sweep_one(free, r, setup)).collect())
}

pub fn sweep_r(free: &FreeState, radii: &[f64], setup: &Setup) -> Result<Vec<SweepRow>> {
    Ok(sweep_r_detailed(free, radii, setup)?
        .into_iter()
        .map(|s| s.row)
        .collect())
}

/// Minimizer of `E_{V+δZ}` warm-started from `warm`.
pub fn perturbed_solve(
    v: &Field3D,
    z: &Field3D,
    delta: f64,
    warm: &Field3D,
    opts: &SolveOptions,
) -> Result<MinimizerResult<Field3D>> {
    let w = v.zip_map(z, |a, b| a + delta * b);
    minimize(&w, &opts.clone().with_seed(Seed::Field(warm.clone())))
}

/// `e(V + δZ)` on `setup.grid`, warm-started from `warm`.
pub fn perturbed_energy(
    v: &PotentialSpec,
    z: &PotentialSpec,
    delta: f64,
    warm: &Field3D,
    setup: &Setup,
) -> Result<f64> {
    let vf = v.build(&setup.grid)?;
    let zf = z.build(&setup.grid)?;
    Ok(perturbed_solve(&vf, &zf, delta, warm, &setup.solve)?.energy.total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub v: PotentialSpec,
    pub z: PotentialSpec,
    pub deltas: Vec<f64>,
    pub e0: f64,
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
    pub central: Vec<f64>,
    pub richardson: f64,
    /// `∫ Z |u_V|²`.
    pub pairing: f64,
    /// `|richardson + pairing|`.
    pub defect: f64,
    /// Every central difference lies between its one-sided quotients.
    pub bracketed: bool,
    pub converged: bool,
}

impl DerivativeReport {
    pub fn relative_defect(&self) -> f64 {
        if self.pairing == 0.0 {
            self.defect
        } else {
            self.defect / self.pairing.abs()
        }
    }
}

/// Richardson extrapolation of values `f(δ_i)` with `f = f₀ + c₁δ² + c₂δ⁴ + …`.
pub fn richardson(deltas: &[f64], values: &[f64]) -> f64 {
    let mut table: Vec<f64> = values.to_vec();
    let mut level = 1;
    while table.len() > 1 {
        table = (0..table.len() - 1)
            .map(|i| {
                let ratio = (deltas[i] / deltas[i + level]).powi(2);
                (ratio * table[i + 1] - table[i]) / (ratio - 1.0)
            })
            .collect();
        level += 1;
    }
    table[0]
}

/// Finite-difference derivative of `δ ↦ e(V + δZ)` at zero against `−∫Z|u_V|²`.
///
/// `u_v` is the converged minimizer for `V`; every perturbed solve is
/// warm-started from it.
pub fn fd_derivative(
    v: &PotentialSpec,
    z: &PotentialSpec,
    deltas: &[f64],
    u_v: &MinimizerResult<Field3D>,
    setup: &Setup,
) -> Result<DerivativeReport> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "δ schedule must be positive and decreasing".into(),
        ));
    }
    if !z.is_radial() {
        return Err(Error::InvalidParameter("the perturbation must be radial".into()));
    }
    let vf = v.build(&setup.grid)?;
    let zf = z.build(&setup.grid)?;
    vf.same_grid(&u_v.psi)?;
    let e0 = u_v.energy.total;
    let pairing = zf.dot(&u_v.psi.density());
    let signed: Vec<f64> = deltas.iter().flat_map(|&d| [d, -d]).collect();
    let solves: Vec<MinimizerResult<Field3D>> = setup.pool()?.install(|| {
        signed
            .par_iter()
            .map(|&d| perturbed_solve(&vf, &zf, d, &u_v.psi, &setup.solve))
            .collect::<Result<_>>()
    })?;
    let converged = u_v.converged && solves.iter().all(|s| s.converged);
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    let mut central = Vec::new();
    for (i, &d) in deltas.iter().enumerate() {
        let (plus, minus) = (solves[2 * i].energy.total, solves[2 * i + 1].energy.total);
        forward.push((plus - e0) / d);
        backward.push((e0 - minus) / d);
        central.push((plus - minus) / (2.0 * d));
    }
    let bracketed = (0..deltas.len()).all(|i| {
        let (lo, hi) = (forward[i].min(backward[i]), forward[i].max(backward[i]));
        lo <= central[i] && central[i] <= hi
    });
    let extrapolated = richardson(deltas, &central);
    Ok(DerivativeReport {
        v: v.clone(),
        z: z.clone(),
        deltas: deltas.to_vec(),
        e0,
        forward,
        backward,
        central,
        richardson: extrapolated,
        pairing,
        defect: (extrapolated + pairing).abs(),
        bracketed,
        converged,
    })
}

/// `(|∫⟨ρ⟩W − ∫ρ⟨W⟩|, |∫ρ⟨W⟩ − ∫⟨ρ⟩⟨W⟩|)` with `⟨·⟩` the rotational average.
pub fn rotational_density_check(u: &Field3D, w: &Field3D, rule: &LebedevRule) -> Result<(f64, f64)> {
    u.same_grid(w)?;
    let rho = u.density();
    let rho_avg = radialize(&rho, rule)?;
    let w_avg = radialize(w, rule)?;
    let a = rho_avg.dot(w);
    let b = rho.dot(&w_avg);
    let c = rho_avg.dot(&w_avg);
    Ok(((a - b).abs(), (b - c).abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub directions: Vec<[f64; 3]>,
    pub energies: Vec<f64>,
    pub converged: Vec<bool>,
    /// Largest `|e_i − e_j| / |e_i|`.
    pub energy_spread: f64,
    /// Largest pairwise sup-norm gap between spherical averages of the
    /// (recentred, for the free problem) densities, relative to their peak.
    pub profile_spread: f64,
}

fn random_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let d: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
        let n2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        if n2 > 1e-2 && n2 <= 1.0 {
            let n = n2.sqrt();
            return d.map(|c| c / n);
        }
    }
}

/// Minimizes from `n_seeds` translated copies of `Q` in random directions.
///
/// For the annular potential the seeds sit at distance `(R+2)/2`; for any
/// other potential at `offset`, and the resulting densities are recentred
/// at their centroids before averaging.
pub fn rotation_orbit_evidence(
    v: &PotentialSpec,
    free: &FreeState,
    n_seeds: usize,
    offset: f64,
    rng_seed: u64,
    setup: &Setup,
) -> Result<OrbitReport> {
    if n_seeds == 0 {
        return Err(Error::InvalidParameter("at least one seed is required".into()));
    }
    let (radius, recenter) = match v {
        PotentialSpec::Annular { radius, .. } => (*radius, false),
        _ => (2.0 * offset - 2.0, true),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let directions: Vec<[f64; 3]> = (0..n_seeds).map(|_| random_direction(&mut rng)).collect();
    let vf = v.build(&setup.grid)?;
    let rule = LebedevRule::default();
    let radial = averaging_grid(&setup.grid);
    let ops = SpectralOps::new(setup.grid);
    let runs: Vec<(f64, bool, Vec<f64>)> = setup.pool()?.install(|| {
        directions
            .par_iter()
            .map(|&d| {
                let seed = translate_seed_along(&free.q, radius, d, &setup.grid)?;
                let res = minimize(&vf, &setup.with_seed(Seed::Field(seed)))?;
                let mut rho = res.psi.density();
                if recenter {
                    let c = rho.centroid();
                    rho = ops.translate(&rho, c.map(|x| -x));
                }
                let avg = spherical_average(&rho, &radial, &rule)?;
                Ok((res.energy.total, res.converged, avg.profile.values().to_vec()))
            })
            .collect::<Result<_>>()
    })?;
    let mut energy_spread: f64 = 0.0;
    let mut profile_spread: f64 = 0.0;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            energy_spread = energy_spread.max((runs[i].0 - runs[j].0).abs() / runs[i].0.abs());
            let peak = runs[i].2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let gap = runs[i]
                .2
                .iter()
                .zip(&runs[j].2)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            profile_spread = profile_spread.max(gap / peak);
        }
    }
    Ok(OrbitReport {
        directions,
        energies: runs.iter().map(|r| r.0).collect(),
        converged: runs.iter().map(|r| r.1).collect(),
        energy_spread,
        profile_spread,
    })
}

/// `E_V` of the radial minimizer lifted to the 3D grid, for consistency
/// checks between the two discretizations.
pub fn lifted_energy(u: &RadialField, v: &Field3D) -> Result<f64> {
    let lifted = crate::radial::lift_radial(u, v.grid())?.normalize()?;
    Ok(pekar_energy(&lifted, v)?.total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_removes_quadratic_and_quartic_terms() {
        let f = |d: f64| 1.5 + 0.7 * d * d - 3.0 * d.powi(4);
        let ds = [0.04, 0.02, 0.01];
        let vals: Vec<f64> = ds.iter().map(|&d| f(d)).collect();
        assert!((richardson(&ds, &vals) - 1.5).abs() < 1e-13);
    }

    #[test]
    fn richardson_single_value_is_identity() {
        assert_eq!(richardson(&[0.1], &[2.0]), 2.0);
    }

    #[test]
    fn directions_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let d = random_direction(&mut rng);
            assert!(((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() - 1.0).abs() < 1e-14);
        }
    }
}
