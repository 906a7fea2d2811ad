//! Spherical averages of fields via Lebedev–Laikov angular quadrature.
//!
//! For a scalar function of position, the average over the rotation group
//! at fixed `|x| = r` is the mean over the sphere of radius `r`, so the
//! Haar average reduces to an angular quadrature on each radial node.

use crate::error::{Error, Result};
use crate::grid::{Field3D, Grid3D};
use crate::radial::{lift_radial, RadialField, RadialGrid};

/// Default node count (algebraic degree 41).
pub const DEFAULT_LEBEDEV_POINTS: usize = 590;

#[derive(Debug, Clone)]
pub struct LebedevRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl LebedevRule {
    pub fn new(points: usize) -> Result<Self> {
        if !lebedev_laikov::NS.contains(&points) {
            return Err(Error::InvalidParameter(format!(
                "no Lebedev rule with {points} points; available: {:?}",
                lebedev_laikov::NS
            )));
        }
        let (x, y, z, w) = lebedev_laikov::ld_vecs(points);
        let points = x.iter().zip(&y).zip(&z).map(|((&a, &b), &c)| [a, b, c]).collect();
        Ok(Self { points, weights: w })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Weights sum to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mean of `f` over the unit sphere.
    pub fn average(&self, f: impl Fn([f64; 3]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }
}

impl Default for LebedevRule {
    fn default() -> Self {
        Self::new(DEFAULT_LEBEDEV_POINTS).expect("default rule exists")
    }
}

const STENCIL: usize = 6;

/// Weights of the six-point Lagrange stencil at nodes `-2..=3` for `t ∈ [0, 1)`.
fn lagrange6(t: f64) -> [f64; STENCIL] {
    std::array::from_fn(|m| {
        let xm = m as f64 - 2.0;
        (0..STENCIL)
            .filter(|&j| j != m)
            .map(|j| {
                let xj = j as f64 - 2.0;
                (t - xj) / (xm - xj)
            })
            .product()
    })
}

/// Periodic six-point (per axis) Lagrange interpolation of a field at an
/// arbitrary point. The interpolation error is O(h⁶); its cell-periodic bias
/// does not average out over spheres, so low order would show up in
/// rotational averages.
pub fn interpolate(f: &Field3D, p: [f64; 3]) -> f64 {
    let g = f.grid();
    let n = g.n() as isize;
    let dx = g.dx();
    let mut base = [0isize; 3];
    let mut w = [[0.0; STENCIL]; 3];
    for a in 0..3 {
        let u = (p[a] + 0.5 * g.length()) / dx - 0.5;
        let i0 = u.floor();
        base[a] = i0 as isize - 2;
        w[a] = lagrange6(u - i0);
    }
    let wrap = |i: isize| i.rem_euclid(n) as usize;
    let vals = f.values();
    let mut acc = 0.0;
    for (di, wi) in w[0].iter().enumerate() {
        let i = wrap(base[0] + di as isize);
        for (dj, wj) in w[1].iter().enumerate() {
            let j = wrap(base[1] + dj as isize);
            let row = (i * g.n() + j) * g.n();
            let mut inner = 0.0;
            for (dk, wk) in w[2].iter().enumerate() {
                let k = wrap(base[2] + dk as isize);
                inner += wk * vals[row + k];
            }
            acc += wi * wj * inner;
        }
    }
    acc
}

#[derive(Debug, Clone)]
pub struct SphericalAverage {
    pub profile: RadialField,
    /// Nodes whose sphere leaves the box; the field counts as zero outside it.
    pub extrapolated: Vec<bool>,
}

impl SphericalAverage {
    pub fn any_extrapolated(&self) -> bool {
        self.extrapolated.iter().any(|&e| e)
    }
}

/// `g(r) = mean of f over |x| = r` on every node of `radial`.
///
/// Points outside the box contribute zero rather than a periodic image, so
/// localized fields average correctly on spheres larger than the box.
pub fn spherical_average(f: &Field3D, radial: &RadialGrid, rule: &LebedevRule) -> Result<SphericalAverage> {
    f.check_finite("spherical_average input")?;
    let half = 0.5 * f.grid().length();
    let inside = |p: [f64; 3]| p.iter().all(|c| c.abs() <= half);
    let mut values = Vec::with_capacity(radial.m());
    let mut extrapolated = Vec::with_capacity(radial.m());
    for j in 0..radial.m() {
        let r = radial.r(j);
        let v = if r == 0.0 {
            interpolate(f, [0.0; 3])
        } else {
            rule.average(|n| {
                let p = [r * n[0], r * n[1], r * n[2]];
                if inside(p) {
                    interpolate(f, p)
                } else {
                    0.0
                }
            })
        };
        values.push(v);
        extrapolated.push(r > half);
    }
    Ok(SphericalAverage {
        profile: RadialField::new(*radial, values)?,
        extrapolated,
    })
}

/// Radial grid used when a spherical average is lifted straight back.
pub fn averaging_grid(grid: &Grid3D) -> RadialGrid {
    RadialGrid::covering(grid, 4)
}

/// Spherical average lifted back onto the field's own grid.
pub fn radialize(f: &Field3D, rule: &LebedevRule) -> Result<Field3D> {
    let radial = averaging_grid(f.grid());
    let avg = spherical_average(f, &radial, rule)?;
    lift_radial(&avg.profile, f.grid())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_weights_sum_to_one() {
        let rule = LebedevRule::default();
        let s: f64 = rule.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_rule_size_rejected() {
        assert!(LebedevRule::new(7).is_err());
    }

    #[test]
    fn interpolation_reproduces_quintic_polynomials() {
        let g = Grid3D::new(16, 8.0).unwrap();
        let p = |x: [f64; 3]| {
            1.0 + x[0] - 0.5 * x[1] * x[1] + 0.1 * x[0] * x[1] * x[2] + 0.05 * x[2].powi(3) - 0.01 * x[0].powi(5) * x[1]
        };
        let f = Field3D::from_fn(g, p);
        for q in [[0.1, 0.2, -0.3], [1.37, -2.01, 0.5], [-0.77, 0.0, 1.9]] {
            assert!((interpolate(&f, q) - p(q)).abs() < 1e-10);
        }
    }

    #[test]
    fn odd_function_averages_to_zero() {
        let g = Grid3D::new(16, 8.0).unwrap();
        let f = Field3D::from_fn(g, |x| x[0]);
        let avg = spherical_average(&f, &RadialGrid::new(30, 3.0).unwrap(), &LebedevRule::default()).unwrap();
        assert!(avg.profile.values().iter().all(|v| v.abs() < 1e-12));
        assert!(!avg.any_extrapolated());
    }

    #[test]
    fn square_averages_to_third_of_r2() {
        let g = Grid3D::new(16, 8.0).unwrap();
        let f = Field3D::from_fn(g, |x| x[0] * x[0]);
        // keep the stencil clear of the periodic seam at the faces
        let radial = RadialGrid::new(30, 2.4).unwrap();
        let avg = spherical_average(&f, &radial, &LebedevRule::default()).unwrap();
        for j in 0..radial.m() {
            let r = radial.r(j);
            assert!((avg.profile.values()[j] - r * r / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn far_nodes_are_flagged() {
        let g = Grid3D::new(8, 4.0).unwrap();
        let f = Field3D::constant(g, 1.0);
        let avg = spherical_average(&f, &RadialGrid::new(5, 3.0).unwrap(), &LebedevRule::new(50).unwrap()).unwrap();
        assert_eq!(avg.extrapolated, vec![false, false, false, true, true]);
    }
}
