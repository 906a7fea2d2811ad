//! Minimization of the Pekar functional on the L² unit sphere.
//!
//! Both discretizations share one descent engine: a Sobolev-preconditioned
//! gradient step `(-Δ + s)⁻¹ (H_ψ ψ - βψ)`, projected onto the tangent space
//! of the constraint, followed by renormalization and Armijo backtracking.
//! Every accepted step strictly lowers the energy, so the history is
//! monotone. The conjugate-gradient scheme adds a Polak–Ribière correction
//! and falls back to the plain gradient whenever that would not descend.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{ElResidual, EnergyBreakdown, Evaluation, PekarFunctional, RadialPekarFunctional};
use crate::error::{Error, Result};
use crate::grid::{compensated_sum, Field3D, Grid3D};
use crate::radial::{RadialField, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Gradient,
    #[default]
    ConjugateGradient,
}

#[derive(Debug, Clone)]
pub enum Seed {
    /// `ψ ∝ exp(-|x|²/(4σ²))`, whose density has standard deviation σ.
    Gaussian {
        width: f64,
    },
    /// Constant profile (radial solver only).
    Flat,
    /// Gaussian multiplied by `1 + amplitude·ξ` with ξ uniform in [-1, 1] per node.
    Perturbed {
        width: f64,
        amplitude: f64,
        rng_seed: u64,
    },
    Field(Field3D),
    Radial(RadialField),
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Initial trial step of the line search.
    pub step: f64,
    /// Successive-difference energy tolerance (absolute).
    pub tolerance_energy: f64,
    pub tolerance_residual: f64,
    pub seed: Seed,
    pub scheme: Scheme,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// Step shrink factor on rejection.
    pub backtrack: f64,
    pub min_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            step: 1.0,
            tolerance_energy: 1e-9,
            tolerance_residual: 1e-5,
            seed: Seed::Gaussian { width: 2.5 },
            scheme: Scheme::default(),
            armijo: 1e-4,
            backtrack: 0.5,
            min_step: 1e-14,
        }
    }
}

impl SolveOptions {
    pub fn with_seed(mut self, seed: Seed) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.tolerance_energy, "tolerance_energy")?;
        positive(self.tolerance_residual, "tolerance_residual")?;
        positive(self.step, "step")?;
        positive(self.min_step, "min_step")?;
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "armijo must lie in (0, 0.5), got {}",
                self.armijo
            )));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "backtrack must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MinimizerResult<S> {
    pub psi: S,
    pub energy: EnergyBreakdown,
    pub residual: ElResidual,
    pub iterations: usize,
    pub converged: bool,
    /// Energy after every accepted iterate, seed first.
    pub history: Vec<f64>,
    /// Largest `|‖ψ_k‖₂ - 1|` over all iterates.
    pub max_norm_defect: f64,
    /// Energy change of the final accepted step.
    pub last_change: f64,
    pub evaluations: usize,
}

impl<S> MinimizerResult<S> {
    /// Error estimate for the reported energy: the last step size plus the
    /// second-order residual contribution.
    pub fn energy_uncertainty(&self) -> f64 {
        self.last_change.abs() + self.residual.residual_norm.powi(2)
    }

    pub fn is_monotone(&self) -> bool {
        self.history.windows(2).all(|w| w[1] <= w[0])
    }
}

/// A discretized constrained problem the engine can descend on.
trait Problem {
    fn inner(&self, a: &[f64], b: &[f64]) -> f64;
    fn energy(&mut self, u: &[f64]) -> Result<EnergyBreakdown>;
    fn evaluate(&mut self, u: &[f64]) -> Result<Evaluation>;
    /// `P(Hu - βu)` with `P = (-Δ + shift)⁻¹` and β chosen so the result is
    /// orthogonal to `u`.
    fn precondition_projected(&mut self, u: &[f64], hu: &[f64], shift: f64) -> Vec<f64>;
}

fn normalize_values<P: Problem>(p: &P, u: &[f64]) -> Result<(Vec<f64>, f64)> {
    let norm = p.inner(u, u).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::DegenerateNormalization);
    }
    let out: Vec<f64> = u.iter().map(|v| v / norm).collect();
    let defect = (p.inner(&out, &out).sqrt() - 1.0).abs();
    Ok((out, defect))
}

struct Outcome {
    state: Vec<f64>,
    eval: Evaluation,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
    max_norm_defect: f64,
    last_change: f64,
    evaluations: usize,
}

fn descend<P: Problem>(problem: &mut P, seed: &[f64], opts: &SolveOptions) -> Result<Outcome> {
    opts.validate()?;
    let (mut u, mut max_norm_defect) = normalize_values(problem, seed)?;
    let mut eval = problem.evaluate(&u)?;
    let mut evaluations = 1;
    if !eval.energy.coercive() {
        return Err(Error::Divergence {
            iteration: 0,
            total: eval.energy.total,
            kinetic: eval.energy.kinetic,
        });
    }
    let mut history = vec![eval.energy.total];
    let shift = (-eval.multiplier).max(0.05);
    let mut tau = opts.step;
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    // (P q, <q, P q>, direction) of the previous iterate
    let mut prev: Option<(Vec<f64>, f64, Vec<f64>)> = None;

    while iterations < opts.max_iters {
        let z = problem.precondition_projected(&u, &eval.h_psi, shift);
        let qz = problem.inner(&eval.h_psi, &z);
        let mut p = z.clone();
        if let (Scheme::ConjugateGradient, Some((z_prev, qz_prev, p_prev))) = (opts.scheme, &prev) {
            // q_prev·z_k via the previous preconditioned vector: <q_{k-1}, z_k> = <z_{k-1}, q_k> under a symmetric P
            let cross = problem.inner(z_prev, &eval.h_psi);
            let gamma = ((qz - cross) / qz_prev).max(0.0);
            if gamma > 0.0 && gamma.is_finite() {
                let along = problem.inner(&u, p_prev);
                for ((pi, pp), ui) in p.iter_mut().zip(p_prev).zip(&u) {
                    *pi += gamma * (pp - along * ui);
                }
                if problem.inner(&eval.h_psi, &p) <= 0.0 {
                    p = z.clone();
                }
            }
        }
        let slope = 2.0 * problem.inner(&eval.h_psi, &p);
        if !(slope > 0.0) {
            break;
        }

        let e0 = eval.energy.total;
        let mut accepted = None;
        while tau >= opts.min_step {
            let trial: Vec<f64> = u.iter().zip(&p).map(|(a, b)| a - tau * b).collect();
            let (trial, defect) = normalize_values(problem, &trial)?;
            let e = problem.energy(&trial)?;
            evaluations += 1;
            if e.total.is_finite() && e.total <= e0 - opts.armijo * tau * slope {
                accepted = Some((trial, e, defect));
                break;
            }
            tau *= opts.backtrack;
        }
        let Some((trial, e, defect)) = accepted else {
            // no representable decrease left along this direction
            if prev.is_some() {
                prev = None;
                tau = opts.step;
                continue;
            }
            break;
        };

        iterations += 1;
        max_norm_defect = max_norm_defect.max(defect);
        if !e.coercive() {
            return Err(Error::Divergence {
                iteration: iterations,
                total: e.total,
                kinetic: e.kinetic,
            });
        }
        // curvature along the path from the accepted trial
        let curvature = 2.0 * (e.total - e0 + slope * tau) / (tau * tau);
        let next_tau = if curvature > 0.0 {
            (slope / curvature).clamp(0.5 * tau, 4.0 * tau)
        } else {
            2.0 * tau
        };

        last_change = e0 - e.total;
        u = trial;
        eval = problem.evaluate(&u)?;
        history.push(eval.energy.total);
        prev = Some((z, qz, p));
        tau = next_tau;

        if eval.residual_norm <= opts.tolerance_residual && last_change <= opts.tolerance_energy {
            converged = true;
            break;
        }
    }
    if !converged && iterations > 0 {
        converged = eval.residual_norm <= opts.tolerance_residual && last_change <= opts.tolerance_energy;
    }
    Ok(Outcome {
        state: u,
        eval,
        iterations,
        converged,
        history,
        max_norm_defect,
        last_change: if last_change.is_finite() { last_change } else { 0.0 },
        evaluations,
    })
}

struct Cartesian {
    functional: PekarFunctional,
}

impl Problem for Cartesian {
    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        compensated_sum(a.iter().zip(b).map(|(x, y)| x * y)) * self.functional.ops().grid().cell_volume()
    }

    fn energy(&mut self, u: &[f64]) -> Result<EnergyBreakdown> {
        Ok(self.functional.energy_values(u))
    }

    fn evaluate(&mut self, u: &[f64]) -> Result<Evaluation> {
        Ok(self.functional.evaluate_values(u))
    }

    fn precondition_projected(&mut self, u: &[f64], hu: &[f64], shift: f64) -> Vec<f64> {
        let ops = self.functional.ops();
        let (uh, hh) = ops.transform_pair(u, hu);
        let beta = ops.preconditioned_pairing(&uh, &hh, shift) / ops.preconditioned_pairing(&uh, &uh, shift);
        let q: Vec<Complex64> = hh.iter().zip(&uh).map(|(h, v)| h - beta * v).collect();
        ops.inverse_real(ops.precondition_hat(&q, shift))
    }
}

struct Radial {
    functional: RadialPekarFunctional,
    weights: Vec<f64>,
}

impl Radial {
    /// Solves `(A + s W) x = W f`, `A` the radial stiffness matrix.
    fn solve(&self, f: &[f64], shift: f64) -> Vec<f64> {
        let g = self.functional.potential().grid();
        let m = g.m();
        let h = g.h();
        let a: Vec<f64> = (0..m - 1).map(|j| g.interval_weight(j) / h).collect();
        let mut diag = vec![0.0; m];
        for j in 0..m {
            let left = if j > 0 { a[j - 1] } else { 0.0 };
            let right = if j + 1 < m { a[j] } else { 0.0 };
            diag[j] = left + right + shift * self.weights[j];
        }
        let rhs: Vec<f64> = f.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
        thomas(&a, &diag, &rhs)
    }
}

/// Symmetric tridiagonal solve with off-diagonal `-off`.
fn thomas(off: &[f64], diag: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut denom = diag[0];
    c[0] = if m > 1 { -off[0] / denom } else { 0.0 };
    d[0] = rhs[0] / denom;
    for j in 1..m {
        denom = diag[j] + off[j - 1] * c[j - 1];
        if j + 1 < m {
            c[j] = -off[j] / denom;
        }
        d[j] = (rhs[j] + off[j - 1] * d[j - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for j in (0..m - 1).rev() {
        x[j] = d[j] - c[j] * x[j + 1];
    }
    x
}

impl Problem for Radial {
    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        4.0 * std::f64::consts::PI * compensated_sum(a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| x * y * w))
    }

    fn energy(&mut self, u: &[f64]) -> Result<EnergyBreakdown> {
        let grid = *self.functional.potential().grid();
        self.functional
            .energy(&RadialField::from_vec_unchecked(grid, u.to_vec()))
    }

    fn evaluate(&mut self, u: &[f64]) -> Result<Evaluation> {
        let grid = *self.functional.potential().grid();
        self.functional
            .evaluate(&RadialField::from_vec_unchecked(grid, u.to_vec()))
    }

    fn precondition_projected(&mut self, u: &[f64], hu: &[f64], shift: f64) -> Vec<f64> {
        let ph = self.solve(hu, shift);
        let pu = self.solve(u, shift);
        let beta = self.inner(u, &ph) / self.inner(u, &pu);
        ph.iter().zip(&pu).map(|(a, b)| a - beta * b).collect()
    }
}

fn gaussian_profile(r2: f64, width: f64) -> f64 {
    (-r2 / (4.0 * width * width)).exp()
}

fn seed_field(grid: &Grid3D, seed: &Seed) -> Result<Field3D> {
    let r2 = |x: [f64; 3]| x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    match seed {
        Seed::Gaussian { width } => Ok(Field3D::from_fn(*grid, |x| gaussian_profile(r2(x), *width))),
        Seed::Perturbed {
            width,
            amplitude,
            rng_seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*rng_seed);
            let base = Field3D::from_fn(*grid, |x| gaussian_profile(r2(x), *width));
            let values = base
                .values()
                .iter()
                .map(|v| v * (1.0 + amplitude * rng.random_range(-1.0..=1.0)))
                .collect();
            Field3D::new(*grid, values)
        }
        Seed::Field(f) => {
            if f.grid() != grid {
                return Err(Error::IncompatibleGrids("seed field and potential differ".into()));
            }
            Ok(f.clone())
        }
        Seed::Radial(u) => crate::radial::lift_radial(u, grid),
        Seed::Flat => Ok(Field3D::constant(*grid, 1.0)),
    }
}

fn seed_radial(grid: &RadialGrid, seed: &Seed) -> Result<RadialField> {
    match seed {
        Seed::Gaussian { width } => Ok(RadialField::from_fn(*grid, |r| gaussian_profile(r * r, *width))),
        Seed::Flat => Ok(RadialField::from_fn(*grid, |_| 1.0)),
        Seed::Perturbed {
            width,
            amplitude,
            rng_seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*rng_seed);
            let base = RadialField::from_fn(*grid, |r| gaussian_profile(r * r, *width));
            let values = base
                .values()
                .iter()
                .map(|v| v * (1.0 + amplitude * rng.random_range(-1.0..=1.0)))
                .collect();
            RadialField::new(*grid, values)
        }
        Seed::Radial(u) => {
            if u.grid() != grid {
                return Err(Error::IncompatibleGrids("radial seed and potential differ".into()));
            }
            Ok(u.clone())
        }
        Seed::Field(_) => Err(Error::InvalidParameter("a 3D seed cannot start a radial solve".into())),
    }
}

/// Minimizes `E_V` over normalized fields on the potential's grid.
pub fn minimize(v: &Field3D, opts: &SolveOptions) -> Result<MinimizerResult<Field3D>> {
    let grid = *v.grid();
    let seed = seed_field(&grid, &opts.seed)?;
    let mut problem = Cartesian {
        functional: PekarFunctional::new(v.clone())?,
    };
    let out = descend(&mut problem, seed.values(), opts)?;
    Ok(MinimizerResult {
        psi: Field3D::new(grid, out.state)?,
        energy: out.eval.energy,
        residual: ElResidual {
            residual_norm: out.eval.residual_norm,
            multiplier: out.eval.multiplier,
        },
        iterations: out.iterations,
        converged: out.converged,
        history: out.history,
        max_norm_defect: out.max_norm_defect,
        last_change: out.last_change,
        evaluations: out.evaluations,
    })
}

/// Minimizes `E_V` over normalized radial profiles.
pub fn minimize_radial(vr: &RadialField, opts: &SolveOptions) -> Result<MinimizerResult<RadialField>> {
    let grid = *vr.grid();
    let seed = seed_radial(&grid, &opts.seed)?;
    let mut problem = Radial {
        functional: RadialPekarFunctional::new(vr.clone())?,
        weights: grid.weights(),
    };
    let out = descend(&mut problem, seed.values(), opts)?;
    Ok(MinimizerResult {
        psi: RadialField::new(grid, out.state)?,
        energy: out.eval.energy,
        residual: ElResidual {
            residual_norm: out.eval.residual_norm,
            multiplier: out.eval.multiplier,
        },
        iterations: out.iterations,
        converged: out.converged,
        history: out.history,
        max_norm_defect: out.max_norm_defect,
        last_change: out.last_change,
        evaluations: out.evaluations,
    })
}

/// Default radial discretization for the free problem.
pub fn default_radial_grid() -> RadialGrid {
    RadialGrid::new(4096, 24.0).expect("valid default grid")
}

/// Free minimizer `Q` (radial, nonnegative, unit norm).
pub fn solve_free(grid: &RadialGrid, opts: &SolveOptions) -> Result<MinimizerResult<RadialField>> {
    let mut res = minimize_radial(&RadialField::zeros(*grid), opts)?;
    // the sign of a minimizer is arbitrary; report the nonnegative one
    let sum: f64 = res.psi.values().iter().sum();
    if sum < 0.0 {
        res.psi = res.psi.map(|v| -v);
    }
    Ok(res)
}

/// Center `((R+2)/2, 0, 0)` of the translated free minimizer.
pub fn well_center(radius: f64) -> [f64; 3] {
    [0.5 * (radius + 2.0), 0.0, 0.0]
}

/// Mass of `q` farther than `r` from the origin.
pub fn radial_mass_beyond(q: &RadialField, r: f64) -> f64 {
    let g = q.grid();
    4.0 * std::f64::consts::PI
        * (0..g.m())
            .filter(|&j| g.r(j) > r)
            .map(|j| g.weight(j) * q.values()[j].powi(2))
            .sum::<f64>()
}

/// Mass allowed to cross the box faces when placing a translated seed.
pub const TRANSLATE_LEAK_TOLERANCE: f64 = 1e-2;

/// `Q(x - ζ)` sampled on `grid`, renormalized, with `ζ` at distance
/// `(R+2)/2` from the origin along `direction`.
pub fn translate_seed_along(q: &RadialField, radius: f64, direction: [f64; 3], grid: &Grid3D) -> Result<Field3D> {
    let len = (direction[0].powi(2) + direction[1].powi(2) + direction[2].powi(2)).sqrt();
    if !(len > 0.0) {
        return Err(Error::InvalidParameter("translation direction must be nonzero".into()));
    }
    let d = 0.5 * (radius + 2.0);
    let center = direction.map(|c| c / len * d);
    let room = 0.5 * grid.length() - center.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let leak = if room > 0.0 { radial_mass_beyond(q, room) } else { 1.0 };
    if leak > TRANSLATE_LEAK_TOLERANCE {
        return Err(Error::SupportViolation(format!(
            "translated seed at distance {d} leaks mass {leak:.2e} across the box faces (room {room:.3})"
        )));
    }
    let f = Field3D::from_fn(*grid, |x| {
        let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2) + (x[2] - center[2]).powi(2)).sqrt();
        q.eval(r)
    });
    f.normalize()
}

/// `Q_R(x) = Q(x - ζ_R)` with `ζ_R = ((R+2)/2, 0, 0)`.
pub fn translate_seed(q: &RadialField, radius: f64, grid: &Grid3D) -> Result<Field3D> {
    translate_seed_along(q, radius, [1.0, 0.0, 0.0], grid)
}
