//! One-dimensional radial discretization for radially symmetric problems.
//!
//! Nodes are uniform, `r_j = j h` with `h = r_max / (m - 1)`. Each node owns
//! the dual cell `[r_j - h/2, r_j + h/2] ∩ [0, r_max]` and its weight is the
//! exact `∫ r² dr` over that cell, so `4π Σ w_j f_j` integrates radial
//! functions over the ball of radius `r_max`. Gradients live on the
//! intervals between nodes with the matching interval weights.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{compensated_sum, Field3D, Grid3D};

const FOUR_PI: f64 = 4.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    m: usize,
    r_max: f64,
}

impl RadialGrid {
    pub fn new(m: usize, r_max: f64) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidGrid(format!(
                "radial grid needs at least 3 nodes, got {m}"
            )));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidGrid(format!("r_max must be positive, got {r_max}")));
        }
        Ok(Self { m, r_max })
    }

    /// A grid reaching the corners of `grid` with spacing `dx / refine`.
    pub fn covering(grid: &Grid3D, refine: usize) -> Self {
        let r_max = 0.5 * 3f64.sqrt() * grid.length() * (1.0 + 1e-9);
        let h = grid.dx() / refine.max(1) as f64;
        let m = (r_max / h).ceil() as usize + 1;
        Self { m: m.max(3), r_max }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn h(&self) -> f64 {
        self.r_max / (self.m - 1) as f64
    }

    pub fn r(&self, j: usize) -> f64 {
        if j + 1 == self.m {
            self.r_max
        } else {
            j as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.r(j)).collect()
    }

    /// `∫ r² dr` over the dual cell of node `j`.
    pub fn weight(&self, j: usize) -> f64 {
        let h = self.h();
        let lo = (self.r(j) - 0.5 * h).max(0.0);
        let hi = (self.r(j) + 0.5 * h).min(self.r_max);
        (hi.powi(3) - lo.powi(3)) / 3.0
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.weight(j)).collect()
    }

    /// `(1/h) ∫ r² dr` over the interval `[r_j, r_{j+1}]`.
    pub fn interval_weight(&self, j: usize) -> f64 {
        (self.r(j + 1).powi(3) - self.r(j).powi(3)) / (3.0 * self.h())
    }

    /// Coulomb kernel `1/max(r_i, r_j)`; the origin self-term uses the
    /// cell average `6/(5a)` of a uniform ball of radius `a = h/2`.
    pub fn newton_kernel(&self, i: usize, j: usize) -> f64 {
        if i == 0 && j == 0 {
            6.0 / (5.0 * 0.5 * self.h())
        } else {
            1.0 / self.r(i).max(self.r(j))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.m() {
            return Err(Error::InvalidGrid(format!(
                "expected {} radial values, got {}",
                grid.m(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("radial values"));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: RadialGrid, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: (0..grid.m()).map(|j| f(grid.r(j))).collect(),
        }
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self::from_fn(grid, |_| 0.0)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RadialField {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn density(&self) -> RadialField {
        self.map(|v| v * v)
    }

    /// `∫ f dx` over the ball (`4π Σ w_j f_j`).
    pub fn integral(&self) -> f64 {
        FOUR_PI
            * self
                .values
                .iter()
                .enumerate()
                .map(|(j, v)| self.grid.weight(j) * v)
                .sum::<f64>()
    }

    pub fn dot(&self, other: &RadialField) -> f64 {
        FOUR_PI
            * compensated_sum(
                self.values
                    .iter()
                    .zip(&other.values)
                    .enumerate()
                    .map(|(j, (a, b))| self.grid.weight(j) * a * b),
            )
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn normalize(&self) -> Result<RadialField> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("radial normalize input"));
        }
        let norm = self.norm();
        if !(norm > 0.0) {
            return Err(Error::DegenerateNormalization);
        }
        Ok(self.map(|v| v / norm))
    }

    /// `∫ |∇u|²` from interval differences.
    pub fn kinetic_energy(&self) -> f64 {
        let h = self.grid.h();
        FOUR_PI
            * (0..self.grid.m() - 1)
                .map(|j| {
                    let d = (self.values[j + 1] - self.values[j]) / h;
                    self.grid.interval_weight(j) * h * d * d
                })
                .sum::<f64>()
    }

    /// `‖u‖_{H¹} = (‖∇u‖² + ‖u‖²)^{1/2}`.
    pub fn h1_norm(&self) -> f64 {
        (self.kinetic_energy() + self.norm_sq()).sqrt()
    }

    /// Cubic Lagrange interpolation at radius `r`, using the even extension
    /// through the origin and holding the last value beyond `r_max`.
    pub fn eval(&self, r: f64) -> f64 {
        let m = self.grid.m();
        let r = r.abs();
        if r >= self.grid.r_max() {
            return self.values[m - 1];
        }
        let u = r / self.grid.h();
        let i0 = (u.floor() as isize).min(m as isize - 2);
        let t = u - i0 as f64;
        let at = |i: isize| -> f64 {
            let j = i.unsigned_abs().min(m - 1);
            self.values[j]
        };
        let w = lagrange4(t);
        w[0] * at(i0 - 1) + w[1] * at(i0) + w[2] * at(i0 + 1) + w[3] * at((i0 + 2).min(m as isize - 1))
    }
}

/// Cubic Lagrange weights for nodes at offsets -1, 0, 1, 2 evaluated at `t`.
pub(crate) fn lagrange4(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Potential `Φ_j = 4π Σ_i w_i ρ_i K(r_i, r_j)` of a radial density, with
/// `K` the Newton kernel, in O(m) by prefix sums.
pub fn newton_potential(rho: &RadialField) -> Vec<f64> {
    let g = rho.grid();
    let m = g.m();
    let q: Vec<f64> = (0..m).map(|j| g.weight(j) * rho.values()[j]).collect();
    // inner[j] = Σ_{i≤j} q_i ; outer[j] = Σ_{i>j} q_i / r_i
    let mut inner = vec![0.0; m];
    let mut acc = 0.0;
    for j in 0..m {
        acc += q[j];
        inner[j] = acc;
    }
    let mut outer = vec![0.0; m];
    let mut acc = 0.0;
    for j in (0..m).rev() {
        outer[j] = acc;
        if j > 0 {
            acc += q[j] / g.r(j);
        }
    }
    (0..m)
        .map(|j| {
            let near = if j == 0 {
                q[0] * g.newton_kernel(0, 0)
            } else {
                inner[j] / g.r(j)
            };
            FOUR_PI * (near + outer[j])
        })
        .collect()
}

/// `D(ρ, ρ) = (4π)² ∬ ρ(r) ρ(s) min(1/r, 1/s) r² s² dr ds` for a radial density.
pub fn radial_coulomb(rho: &RadialField) -> Result<f64> {
    if let Some((j, &v)) = rho.values().iter().enumerate().find(|(_, v)| **v < -1e-12) {
        return Err(Error::NegativeDensity { index: j, value: v });
    }
    let phi = newton_potential(rho);
    Ok(FOUR_PI
        * rho
            .values()
            .iter()
            .zip(&phi)
            .enumerate()
            .map(|(j, (r, p))| rho.grid().weight(j) * r * p)
            .sum::<f64>())
}

/// Samples `u(|x|)` on every cell of `grid`.
pub fn lift_radial(u: &RadialField, grid: &Grid3D) -> Result<Field3D> {
    let required = 0.5 * 3f64.sqrt() * grid.length();
    if u.grid().r_max() < required * (1.0 - 1e-12) {
        return Err(Error::RadialTooShort {
            r_max: u.grid().r_max(),
            required,
        });
    }
    let values = (0..grid.len()).map(|idx| u.eval(grid.radius(idx))).collect();
    Field3D::new(*grid, values)
}

/// Worst-case slack in the radial decay bound
/// `|u(r)| ≤ √2 |S²|^{-1/2} ‖u‖_{H¹} / r` over nodes with `r ≥ 2`.
///
/// The slack at each node is scaled by `r/2`, i.e. measured in units of the
/// bound at `r = 2`; its sign is that of the unscaled slack.
pub fn strauss_bound_check(u: &RadialField, h1_norm: f64) -> f64 {
    let c = 2f64.sqrt() * FOUR_PI.powf(-0.5) * h1_norm;
    let g = u.grid();
    (0..g.m())
        .filter(|&j| g.r(j) >= 2.0)
        .map(|j| {
            let r = g.r(j);
            0.5 * r * (c / r - u.values()[j].abs())
        })
        .fold(f64::INFINITY, f64::min)
}
