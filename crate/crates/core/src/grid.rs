//! Uniform periodic box discretization and real scalar fields on it.
//!
//! Cells are centered at `(i + 1/2) dx - L/2` along every axis, so the box
//! center is the origin and the reflection `x -> -x` maps the lattice onto
//! itself. Values are stored row-major with the first axis slowest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neumaier-compensated sum; keeps norms of large grids at roundoff level.
pub fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for t in terms {
        let s = sum + t;
        carry += if sum.abs() >= t.abs() {
            (sum - s) + t
        } else {
            (t - s) + sum
        };
        sum = s;
    }
    sum + carry
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3D {
    n: usize,
    length: f64,
}

impl Grid3D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "cells per axis must be even and at least 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {length}")));
        }
        Ok(Self { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(3)
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of cell center `i` along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx() - 0.5 * self.length
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.unravel(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let [x, y, z] = self.position(idx);
        (x * x + y * y + z * z).sqrt()
    }
}

/// One of the 48 symmetries of the cubic lattice: an axis permutation
/// followed by optional reflections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubicSymmetry {
    pub perm: [usize; 3],
    pub flip: [bool; 3],
}

impl CubicSymmetry {
    pub fn all() -> Vec<CubicSymmetry> {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut out = Vec::with_capacity(48);
        for perm in PERMS {
            for bits in 0..8u8 {
                let flip = [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0];
                out.push(CubicSymmetry { perm, flip });
            }
        }
        out
    }

    /// Image of a point: `y[a] = ±x[perm[a]]`.
    pub fn apply_point(&self, x: [f64; 3]) -> [f64; 3] {
        let mut y = [0.0; 3];
        for a in 0..3 {
            let v = x[self.perm[a]];
            y[a] = if self.flip[a] { -v } else { v };
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field3D {
    grid: Grid3D,
    values: Vec<f64>,
}

impl Field3D {
    pub fn new(grid: Grid3D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for values known to be finite and sized.
    pub(crate) fn from_vec_unchecked(grid: Grid3D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid3D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid3D, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Grid3D, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.position(idx))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn same_grid(&self, other: &Field3D) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::IncompatibleGrids(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    /// `∫ f dx` by the midpoint rule.
    pub fn integral(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) * self.grid.cell_volume()
    }

    /// `∫ f g dx`.
    pub fn dot(&self, other: &Field3D) -> f64 {
        compensated_sum(self.values.iter().zip(&other.values).map(|(a, b)| a * b)) * self.grid.cell_volume()
    }

    pub fn norm_sq(&self) -> f64 {
        compensated_sum(self.values.iter().map(|v| v * v)) * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn normalize(&self) -> Result<Field3D> {
        self.check_finite("normalize input")?;
        let norm = self.norm();
        if !(norm > 0.0) {
            return Err(Error::DegenerateNormalization);
        }
        let scale = 1.0 / norm;
        Ok(self.map(|v| v * scale))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field3D {
        Field3D {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise `|f|^2`, the density of a wave function.
    pub fn density(&self) -> Field3D {
        self.map(|v| v * v)
    }

    pub fn zip_map(&self, other: &Field3D, f: impl Fn(f64, f64) -> f64) -> Field3D {
        debug_assert_eq!(self.grid, other.grid);
        Field3D {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Circular shift by whole cells: `out(x) = f(x - shift·dx)`.
    pub fn translate_cells(&self, shift: [isize; 3]) -> Field3D {
        let n = self.grid.n as isize;
        let wrap = |i: isize| i.rem_euclid(n) as usize;
        let mut out = vec![0.0; self.values.len()];
        for (idx, v) in out.iter_mut().enumerate() {
            let [i, j, k] = self.grid.unravel(idx);
            let src = self.grid.index(
                wrap(i as isize - shift[0]),
                wrap(j as isize - shift[1]),
                wrap(k as isize - shift[2]),
            );
            *v = self.values[src];
        }
        Field3D {
            grid: self.grid,
            values: out,
        }
    }

    /// `out(x) = f(S⁻¹ x)`; exact on the lattice.
    pub fn apply_symmetry(&self, sym: &CubicSymmetry) -> Field3D {
        let n = self.grid.n;
        let mut out = vec![0.0; self.values.len()];
        for (src, &v) in self.values.iter().enumerate() {
            let ijk = self.grid.unravel(src);
            let mut dst = [0usize; 3];
            for a in 0..3 {
                let c = ijk[sym.perm[a]];
                dst[a] = if sym.flip[a] { n - 1 - c } else { c };
            }
            out[self.grid.index(dst[0], dst[1], dst[2])] = v;
        }
        Field3D {
            grid: self.grid,
            values: out,
        }
    }

    /// First moment `∫ x f dx / ∫ f dx` of a nonnegative field.
    pub fn centroid(&self) -> [f64; 3] {
        let mut m = [0.0; 3];
        let mut total = 0.0;
        for (idx, &v) in self.values.iter().enumerate() {
            let p = self.grid.position(idx);
            for a in 0..3 {
                m[a] += p[a] * v;
            }
            total += v;
        }
        if total == 0.0 {
            return [0.0; 3];
        }
        m.map(|c| c / total)
    }

    /// Mass of a density outside the ball of radius `r` about `center`.
    pub fn mass_outside(&self, center: [f64; 3], r: f64) -> f64 {
        let r2 = r * r;
        let mut acc = 0.0;
        for (idx, &v) in self.values.iter().enumerate() {
            let p = self.grid.position(idx);
            let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) + (p[2] - center[2]).powi(2);
            if d2 >= r2 {
                acc += v;
            }
        }
        acc * self.grid.cell_volume()
    }
}

impl std::ops::Add for &Field3D {
    type Output = Field3D;
    fn add(self, rhs: &Field3D) -> Field3D {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl std::ops::Sub for &Field3D {
    type Output = Field3D;
    fn sub(self, rhs: &Field3D) -> Field3D {
        self.zip_map(rhs, |a, b| a - b)
    }
}
