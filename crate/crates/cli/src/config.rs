use std::path::{Path, PathBuf};

use pekar_core::optimizer::{Scheme, Seed, SolveOptions};
use pekar_core::potentials::PotentialSpec;
use pekar_core::product::KGrid;
use pekar_core::{Grid3D, RadialGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 64, length: 24.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RadialConfig {
    pub m: usize,
    pub r_max: f64,
}

impl Default for RadialConfig {
    fn default() -> Self {
        Self { m: 4096, r_max: 24.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KGridConfig {
    pub n_k: usize,
    pub k_max: f64,
}

impl Default for KGridConfig {
    fn default() -> Self {
        Self { n_k: 80, k_max: 4.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub step: f64,
    pub tolerance_energy: f64,
    pub tolerance_residual: f64,
    pub scheme: Scheme,
    /// Width of the Gaussian seed used when no better seed is available.
    pub seed_width: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            max_iters: d.max_iters,
            step: d.step,
            tolerance_energy: d.tolerance_energy,
            tolerance_residual: d.tolerance_residual,
            scheme: d.scheme,
            seed_width: 2.5,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            max_iters: self.max_iters,
            step: self.step,
            tolerance_energy: self.tolerance_energy,
            tolerance_residual: self.tolerance_residual,
            scheme: self.scheme,
            seed: Seed::Gaussian { width: self.seed_width },
            ..SolveOptions::default()
        }
    }
}

fn default_deltas() -> Vec<f64> {
    vec![0.04, 0.02, 0.01]
}

fn default_alpha() -> f64 {
    1.0
}

fn default_offset() -> f64 {
    3.0
}

fn default_bump() -> PotentialSpec {
    PotentialSpec::RadialBump {
        center: 5.0,
        half_width: 2.0,
        height: 1.0,
    }
}

/// Seed of a full 3D solve.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FullSeed {
    /// The free minimizer translated into the well (annular potentials) or
    /// centred at the origin otherwise.
    #[default]
    Translated,
    Gaussian {
        width: f64,
    },
    Perturbed {
        width: f64,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    SolveFree,
    SolveRadial,
    SolveFull {
        #[serde(default)]
        seed: FullSeed,
    },
    SweepR {
        radii: Vec<f64>,
    },
    Perturb {
        #[serde(default = "default_bump")]
        z: PotentialSpec,
        #[serde(default = "default_deltas")]
        deltas: Vec<f64>,
    },
    ProductEnergy {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Orbit {
        n_seeds: usize,
        /// Seed distance from the origin when the potential is not annular.
        #[serde(default = "default_offset")]
        offset: f64,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::SolveFree => "solve-free",
            Experiment::SolveRadial => "solve-radial",
            Experiment::SolveFull { .. } => "solve-full",
            Experiment::SweepR { .. } => "sweep-r",
            Experiment::Perturb { .. } => "perturb",
            Experiment::ProductEnergy { .. } => "product-energy",
            Experiment::Orbit { .. } => "orbit",
        }
    }
}

fn default_workers() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub radial: RadialConfig,
    #[serde(default)]
    pub kgrid: KGridConfig,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
}

/// A problem found while validating a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Validated discretization objects.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub grid: Grid3D,
    pub radial: RadialGrid,
    pub kgrid: KGrid,
    pub solve: SolveOptions,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                e.inner().to_string()
            } else {
                format!("{path}: {}", e.inner())
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let canonical = serde_json::to_vec(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(canonical))
    }

    /// Checks every spec before any solve starts.
    pub fn validate(&self) -> Result<Resolved, Vec<Violation>> {
        let mut v = Vec::new();
        let mut push = |field: &str, message: String| {
            v.push(Violation {
                field: field.to_string(),
                message,
            })
        };
        let grid = Grid3D::new(self.grid.n, self.grid.length)
            .map_err(|e| push("grid", e.to_string()))
            .ok();
        let radial = RadialGrid::new(self.radial.m, self.radial.r_max)
            .map_err(|e| push("radial", e.to_string()))
            .ok();
        let kgrid = KGrid::new(self.kgrid.n_k, self.kgrid.k_max)
            .map_err(|e| push("kgrid", e.to_string()))
            .ok();
        let solve = self.solver.options();
        if self.solver.max_iters == 0 {
            push("solver.max_iters", "must be at least 1".into());
        }
        if !(self.solver.seed_width > 0.0) {
            push(
                "solver.seed_width",
                format!("must be positive, got {}", self.solver.seed_width),
            );
        }
        if let Err(e) = solve.validate() {
            let msg = e.to_string();
            let field = ["tolerance_energy", "tolerance_residual", "step"]
                .into_iter()
                .find(|f| msg.contains(f))
                .map(|f| format!("solver.{f}"))
                .unwrap_or_else(|| "solver".into());
            push(&field, msg);
        }
        if self.workers == 0 {
            push("workers", "must be at least 1".into());
        }
        if let Err(e) = self.potential.validate() {
            push("potential", e.to_string());
        } else if let Some(g) = &grid {
            if let Err(e) = self.potential.validate_on(g) {
                push("potential", e.to_string());
            }
        }
        match &self.experiment {
            Experiment::SweepR { radii } => {
                if radii.is_empty() {
                    push("experiment.radii", "must list at least one radius".into());
                }
                for (i, r) in radii.iter().enumerate() {
                    let spec = PotentialSpec::annular(*r);
                    let res = spec.validate().and_then(|_| match &grid {
                        Some(g) => spec.validate_on(g),
                        None => Ok(()),
                    });
                    if let Err(e) = res {
                        push(&format!("experiment.radii[{i}]"), e.to_string());
                    }
                }
            }
            Experiment::Perturb { z, deltas } => {
                if let Err(e) = z.validate() {
                    push("experiment.z", e.to_string());
                } else if !z.is_radial() {
                    push("experiment.z", "the perturbation must be radial".into());
                }
                if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) || deltas.windows(2).any(|w| w[1] >= w[0]) {
                    push("experiment.deltas", "must be positive and strictly decreasing".into());
                }
            }
            Experiment::ProductEnergy { alpha } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    push("experiment.alpha", format!("must be positive, got {alpha}"));
                }
            }
            Experiment::Orbit { n_seeds, offset } => {
                if *n_seeds == 0 {
                    push("experiment.n_seeds", "must be at least 1".into());
                }
                if !(*offset >= 0.0) {
                    push("experiment.offset", format!("must be nonnegative, got {offset}"));
                }
            }
            Experiment::SolveFull {
                seed: FullSeed::Gaussian { width } | FullSeed::Perturbed { width, .. },
            } if !(*width > 0.0) => {
                push("experiment.seed.width", format!("must be positive, got {width}"));
            }
            _ => {}
        }
        if let (Some(g), Some(r)) = (&grid, &radial) {
            let needed = 0.5 * 3f64.sqrt() * g.length();
            let lifts = matches!(
                self.experiment,
                Experiment::SolveFull { .. } | Experiment::Orbit { .. } | Experiment::ProductEnergy { .. }
            ) && self.potential.annular_radius().is_none();
            if lifts && r.r_max() < needed {
                push(
                    "radial.r_max",
                    format!("must reach the box corners ({needed:.3}) to lift radial seeds"),
                );
            }
        }
        if v.is_empty() {
            Ok(Resolved {
                grid: grid.expect("validated"),
                radial: radial.expect("validated"),
                kgrid: kgrid.expect("validated"),
                solve,
            })
        } else {
            Err(v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::parse(r#"{"experiment": {"kind": "solve-free"}}"#).unwrap();
        assert_eq!(c.grid, GridConfig::default());
        assert_eq!(c.potential, PotentialSpec::Zero);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn missing_field_reports_path() {
        let err = ExperimentConfig::parse(r#"{"experiment": {"kind": "sweep-r"}}"#).unwrap_err();
        assert!(err.contains("experiment") && err.contains("radii"), "{err}");
        let err = ExperimentConfig::parse(r#"{"experiment": {"kind": "solve-free"}, "grid": {"n": 64}}"#).unwrap_err();
        assert!(err.starts_with("grid") && err.contains("length"), "{err}");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = ExperimentConfig::parse(r#"{"experiment": {"kind": "solve-free"}, "solver": {"tolerance": 1}}"#)
            .unwrap_err();
        assert!(err.starts_with("solver"), "{err}");
    }

    #[test]
    fn small_radius_is_a_violation() {
        let c = ExperimentConfig::parse(
            r#"{"experiment": {"kind": "solve-full"}, "potential": {"kind": "annular", "radius": 1.5}}"#,
        )
        .unwrap();
        let v = c.validate().unwrap_err();
        assert!(v
            .iter()
            .any(|x| x.field == "potential" && x.message.contains("R must exceed 2")));
    }

    #[test]
    fn negative_tolerance_is_named() {
        let c =
            ExperimentConfig::parse(r#"{"experiment": {"kind": "solve-free"}, "solver": {"tolerance_energy": -1e-9}}"#)
                .unwrap();
        let v = c.validate().unwrap_err();
        assert_eq!(v[0].field, "solver.tolerance_energy");
    }

    #[test]
    fn hash_depends_on_content() {
        let a = ExperimentConfig::parse(r#"{"experiment": {"kind": "solve-free"}}"#).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.output = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 7;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
