//! External potentials: the annular well, radial test profiles, general
//! test fields, and their rotational averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field3D;
use crate::grid::Grid3D;
use crate::radial::{RadialField, RadialGrid};
use crate::sphere::{radialize, LebedevRule};

/// `C^∞` ramp from 0 at `t ≤ 0` to 1 at `t ≥ 1`:
/// `g(t) / (g(t) + g(1-t))` with `g(t) = exp(-1/t)` for `t > 0`.
pub fn smooth_step(t: f64) -> f64 {
    fn g(t: f64) -> f64 {
        if t > 0.0 {
            (-1.0 / t).exp()
        } else {
            0.0
        }
    }
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = g(t);
        a / (a + g(1.0 - t))
    }
}

/// Profile of the annular well: 0 on `r ≤ 1`, 1 on `2 ≤ r ≤ R`, 0 on
/// `r ≥ R + 1`, smooth ramps in between, scaled by `strength`.
pub fn annular_profile(r: f64, radius: f64, strength: f64) -> f64 {
    let v = if r <= 1.0 || r >= radius + 1.0 {
        0.0
    } else if r < 2.0 {
        smooth_step(r - 1.0)
    } else if r <= radius {
        1.0
    } else {
        smooth_step(radius + 1.0 - r)
    };
    strength * v
}

/// Smooth radial bump `height · exp(1 - 1/(1 - s²))`, `s = (r - center)/half_width`,
/// supported on `|r - center| < half_width`.
pub fn bump_profile(r: f64, center: f64, half_width: f64, height: f64) -> f64 {
    let s = (r - center) / half_width;
    if s.abs() >= 1.0 {
        0.0
    } else {
        height * (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// The annular well with plateau `2 ≤ |x| ≤ radius`.
    Annular {
        radius: f64,
        #[serde(default = "unit_strength")]
        strength: f64,
    },
    RadialBump {
        center: f64,
        half_width: f64,
        #[serde(default = "unit_strength")]
        height: f64,
    },
    /// `scale · x_axis²`, a non-radial test field.
    AxisSquare {
        axis: usize,
        #[serde(default = "unit_strength")]
        scale: f64,
    },
    /// Sum of specs.
    Sum {
        terms: Vec<PotentialSpec>,
    },
}

fn unit_strength() -> f64 {
    1.0
}

impl PotentialSpec {
    pub fn annular(radius: f64) -> Self {
        PotentialSpec::Annular { radius, strength: 1.0 }
    }

    pub fn annular_radius(&self) -> Option<f64> {
        match self {
            PotentialSpec::Annular { radius, .. } => Some(*radius),
            _ => None,
        }
    }

    /// Checks the spec's own invariants, independent of any grid.
    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::Zero => Ok(()),
            PotentialSpec::Constant { value } => finite(*value, "constant value"),
            PotentialSpec::Annular { radius, strength } => {
                finite(*radius, "annular radius")?;
                if *radius <= 2.0 {
                    return Err(Error::InvalidPotential(format!("R must exceed 2, got {radius}")));
                }
                if !(*strength >= 1.0 && strength.is_finite()) {
                    return Err(Error::InvalidPotential(format!(
                        "annular strength must be finite and at least 1, got {strength}"
                    )));
                }
                Ok(())
            }
            PotentialSpec::RadialBump {
                center,
                half_width,
                height,
            } => {
                finite(*center, "bump center")?;
                finite(*height, "bump height")?;
                if !(*half_width > 0.0 && half_width.is_finite()) {
                    return Err(Error::InvalidPotential(format!(
                        "bump half width must be positive, got {half_width}"
                    )));
                }
                Ok(())
            }
            PotentialSpec::AxisSquare { axis, scale } => {
                finite(*scale, "axis-square scale")?;
                if *axis > 2 {
                    return Err(Error::InvalidPotential(format!("axis must be 0, 1 or 2, got {axis}")));
                }
                Ok(())
            }
            PotentialSpec::Sum { terms } => terms.iter().try_for_each(|t| t.validate()),
        }
    }

    /// Checks that the potential fits on `grid`.
    pub fn validate_on(&self, grid: &Grid3D) -> Result<()> {
        self.validate()?;
        match self {
            PotentialSpec::Annular { radius, .. } => check_box(*radius, grid),
            PotentialSpec::Sum { terms } => terms.iter().try_for_each(|t| t.validate_on(grid)),
            _ => Ok(()),
        }
    }

    pub fn is_radial(&self) -> bool {
        match self {
            PotentialSpec::AxisSquare { .. } => false,
            PotentialSpec::Sum { terms } => terms.iter().all(|t| t.is_radial()),
            _ => true,
        }
    }

    /// Profile value at radius `r` for radial specs.
    pub fn radial_value(&self, r: f64) -> Option<f64> {
        match self {
            PotentialSpec::Zero => Some(0.0),
            PotentialSpec::Constant { value } => Some(*value),
            PotentialSpec::Annular { radius, strength } => Some(annular_profile(r, *radius, *strength)),
            PotentialSpec::RadialBump {
                center,
                half_width,
                height,
            } => Some(bump_profile(r, *center, *half_width, *height)),
            PotentialSpec::AxisSquare { .. } => None,
            PotentialSpec::Sum { terms } => terms.iter().map(|t| t.radial_value(r)).sum(),
        }
    }

    pub fn value_at(&self, x: [f64; 3]) -> f64 {
        match self {
            PotentialSpec::AxisSquare { axis, scale } => scale * x[*axis] * x[*axis],
            PotentialSpec::Sum { terms } => terms.iter().map(|t| t.value_at(x)).sum(),
            _ => {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                self.radial_value(r).expect("radial spec")
            }
        }
    }

    pub fn build(&self, grid: &Grid3D) -> Result<Field3D> {
        self.validate_on(grid)?;
        Field3D::new(*grid, Field3D::from_fn(*grid, |x| self.value_at(x)).into_values())
    }

    pub fn build_radial(&self, radial: &RadialGrid) -> Result<RadialField> {
        self.validate()?;
        if !self.is_radial() {
            return Err(Error::InvalidPotential("potential is not radial".into()));
        }
        RadialField::new(
            *radial,
            RadialField::from_fn(*radial, |r| self.radial_value(r).unwrap_or(0.0))
                .values()
                .to_vec(),
        )
    }
}

fn finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidPotential(format!("{what} must be finite")))
    }
}

fn check_box(radius: f64, grid: &Grid3D) -> Result<()> {
    if radius + 1.0 >= 0.5 * grid.length() {
        return Err(Error::InvalidPotential(format!(
            "potential exits box: R + 1 = {} but L/2 = {}",
            radius + 1.0,
            0.5 * grid.length()
        )));
    }
    Ok(())
}

/// The annular well sampled on `grid`.
pub fn build_annular(radius: f64, grid: &Grid3D) -> Result<Field3D> {
    PotentialSpec::annular(radius).build(grid)
}

/// Haar average over rotations about the origin, as a field on the same grid.
pub fn rotational_average(w: &Field3D, rule: &LebedevRule) -> Result<Field3D> {
    radialize(w, rule)
}

/// `∫ V ρ`.
pub fn potential_energy(v: &Field3D, rho: &Field3D) -> Result<f64> {
    v.same_grid(rho)?;
    v.check_finite("potential")?;
    rho.check_finite("density")?;
    Ok(v.dot(rho))
}

/// Mass of `rho` in the shell `2 ≤ |x| ≤ radius`.
pub fn mass_in_well(rho: &Field3D, radius: f64) -> f64 {
    let g = rho.grid();
    let s: f64 = rho
        .values()
        .iter()
        .enumerate()
        .filter(|(idx, _)| {
            let r = g.radius(*idx);
            (2.0..=radius).contains(&r)
        })
        .map(|(_, v)| v)
        .sum();
    s * g.cell_volume()
}
