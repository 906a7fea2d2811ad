use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pekar_core::energy::pekar_energy;
use pekar_core::experiments::{anisotropy, fd_derivative, rotation_orbit_evidence, sweep_r_detailed, FreeState, Setup};
use pekar_core::optimizer::{minimize, minimize_radial, solve_free, translate_seed, MinimizerResult, Seed};
use pekar_core::potentials::mass_in_well;
use pekar_core::product::{alpha_scaling_check, density_fourier, optimal_displacement_with, product_energy_with};
use pekar_core::radial::strauss_bound_check;
use pekar_core::{io, Field3D, RadialField};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig, FullSeed, Resolved};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] pekar_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub struct Outcome {
    pub artifacts: Vec<String>,
    pub converged: bool,
    pub summary: Value,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    res: &'a Resolved,
    out: &'a Path,
    setup: Setup,
    artifacts: Vec<String>,
    converged: bool,
}

impl Ctx<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.out.join(name)
    }

    /// JSON artifacts carry the config hash alongside the payload.
    fn write_json(&mut self, name: &str, value: &Value) -> Result<(), RunError> {
        let mut tagged = value.clone();
        if let Value::Object(map) = &mut tagged {
            map.insert("config_hash".into(), Value::String(self.cfg.hash()));
        }
        let f = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(f, &tagged)?;
        Ok(())
    }

    fn write_rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), RunError> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_field(&mut self, name: &str, f: &Field3D) -> Result<(), RunError> {
        io::write_field(f, BufWriter::new(File::create(self.path(name))?))?;
        Ok(())
    }

    fn write_profile(&mut self, name: &str, u: &RadialField) -> Result<(), RunError> {
        io::write_radial_csv(u, BufWriter::new(File::create(self.path(name))?))?;
        Ok(())
    }

    fn note<S>(&mut self, res: &MinimizerResult<S>) {
        self.converged &= res.converged;
    }

    fn free(&mut self) -> Result<(MinimizerResult<RadialField>, FreeState), RunError> {
        let res = solve_free(&self.res.radial, &self.res.solve)?;
        self.note(&res);
        let free = FreeState::from_result(&res);
        Ok((res, free))
    }

    /// 3D minimizer of the configured potential from the configured seed.
    fn full(&mut self, seed: &FullSeed) -> Result<MinimizerResult<Field3D>, RunError> {
        let grid = self.res.grid;
        let v = self.cfg.potential.build(&grid)?;
        let seed = match seed {
            FullSeed::Translated => {
                let (_, free) = self.free()?;
                match self.cfg.potential.annular_radius() {
                    Some(r) => Seed::Field(translate_seed(&free.q, r, &grid)?),
                    None => Seed::Radial(free.q),
                }
            }
            FullSeed::Gaussian { width } => Seed::Gaussian { width: *width },
            FullSeed::Perturbed { width, amplitude } => Seed::Perturbed {
                width: *width,
                amplitude: *amplitude,
                rng_seed: self.cfg.seed,
            },
        };
        let res = minimize(&v, &self.res.solve.clone().with_seed(seed))?;
        self.note(&res);
        Ok(res)
    }
}

fn solve_summary<S>(res: &MinimizerResult<S>) -> Value {
    json!({
        "energy": res.energy,
        "residual_norm": res.residual.residual_norm,
        "multiplier": res.residual.multiplier,
        "iterations": res.iterations,
        "converged": res.converged,
        "monotone": res.is_monotone(),
        "max_norm_defect": res.max_norm_defect,
    })
}

#[derive(Serialize)]
struct DerivativeRow {
    delta: f64,
    forward: f64,
    backward: f64,
    central: f64,
}

#[derive(Serialize)]
struct OrbitRow {
    seed: usize,
    dx: f64,
    dy: f64,
    dz: f64,
    energy: f64,
    converged: bool,
}

pub fn execute(cfg: &ExperimentConfig, res: &Resolved, out: &Path) -> Result<Outcome, RunError> {
    std::fs::create_dir_all(out)?;
    let setup = Setup {
        grid: res.grid,
        radial: res.radial,
        solve: res.solve.clone(),
        workers: cfg.workers,
    };
    let mut ctx = Ctx {
        cfg,
        res,
        out,
        setup,
        artifacts: Vec::new(),
        converged: true,
    };
    let summary = match &cfg.experiment {
        Experiment::SolveFree => {
            let (q, _) = ctx.free()?;
            let e = q.energy;
            let summary = json!({
                "e0": e.total,
                "virial_defect": (e.coulomb - 2.0 * e.kinetic).abs() / e.coulomb,
                "strauss_margin": strauss_bound_check(&q.psi, q.psi.h1_norm()),
                "solve": solve_summary(&q),
            });
            ctx.write_json("free.json", &summary)?;
            ctx.write_profile("free_profile.csv", &q.psi)?;
            summary
        }
        Experiment::SolveRadial => {
            let vr = cfg.potential.build_radial(&res.radial)?;
            let r = minimize_radial(&vr, &res.solve)?;
            ctx.note(&r);
            let summary = json!({
                "e_rad": r.energy.total,
                "strauss_margin": strauss_bound_check(&r.psi, r.psi.h1_norm()),
                "solve": solve_summary(&r),
            });
            ctx.write_json("radial.json", &summary)?;
            ctx.write_profile("radial_profile.csv", &r.psi)?;
            summary
        }
        Experiment::SolveFull { seed } => {
            let r = ctx.full(seed)?;
            let well = cfg
                .potential
                .annular_radius()
                .map(|rad| mass_in_well(&r.psi.density(), rad));
            let summary = json!({
                "e_full": r.energy.total,
                "anisotropy": anisotropy(&r.psi),
                "well_mass": well,
                "solve": solve_summary(&r),
            });
            ctx.write_json("full.json", &summary)?;
            ctx.write_field("full.pkf3", &r.psi)?;
            summary
        }
        Experiment::SweepR { radii } => {
            let (_, free) = ctx.free()?;
            let solves = sweep_r_detailed(&free, radii, &ctx.setup)?;
            let rows: Vec<_> = solves.iter().map(|s| s.row.clone()).collect();
            ctx.converged &= rows.iter().all(|r| !r.flagged());
            ctx.write_rows("sweep.csv", &rows)?;
            for s in &solves {
                ctx.write_field(&format!("full_R{}.pkf3", s.row.radius), &s.full.psi)?;
            }
            json!({ "e0": free.e0, "rows": rows })
        }
        Experiment::Perturb { z, deltas } => {
            let u = ctx.full(&FullSeed::Translated)?;
            let report = fd_derivative(&cfg.potential, z, deltas, &u, &ctx.setup)?;
            ctx.converged &= report.converged;
            let rows: Vec<DerivativeRow> = (0..report.deltas.len())
                .map(|i| DerivativeRow {
                    delta: report.deltas[i],
                    forward: report.forward[i],
                    backward: report.backward[i],
                    central: report.central[i],
                })
                .collect();
            ctx.write_rows("derivative.csv", &rows)?;
            let summary = json!({ "report": report, "relative_defect": report.relative_defect() });
            ctx.write_json("derivative.json", &summary)?;
            summary
        }
        Experiment::ProductEnergy { alpha } => {
            let u = ctx.full(&FullSeed::Translated)?;
            let v = cfg.potential.build(&res.grid)?;
            let pekar = pekar_energy(&u.psi, &v)?.total;
            let kappa = res.kgrid.inverse_k();
            let rho_hat = density_fourier(&u.psi.density(), &res.kgrid)?;
            let z = optimal_displacement_with(&rho_hat, 1.0, &kappa)?;
            let product = product_energy_with(&u.psi, &rho_hat, &kappa, &z, &v, 1.0)?;
            let scaling = alpha_scaling_check(&u.psi, *alpha, &cfg.potential, &res.kgrid)?;
            z.write_csv(BufWriter::new(File::create(ctx.path("displacement.csv"))?))?;
            let summary = json!({
                "pekar_energy": pekar,
                "product": product,
                "truncation_defect": product.total - pekar,
                "hermiticity_defect": z.hermiticity_defect(),
                "alpha": alpha,
                "scaling": scaling,
            });
            ctx.write_json("product.json", &summary)?;
            summary
        }
        Experiment::Orbit { n_seeds, offset } => {
            let (_, free) = ctx.free()?;
            let report = rotation_orbit_evidence(&cfg.potential, &free, *n_seeds, *offset, cfg.seed, &ctx.setup)?;
            ctx.converged &= report.converged.iter().all(|&c| c);
            let rows: Vec<OrbitRow> = (0..report.energies.len())
                .map(|i| OrbitRow {
                    seed: i,
                    dx: report.directions[i][0],
                    dy: report.directions[i][1],
                    dz: report.directions[i][2],
                    energy: report.energies[i],
                    converged: report.converged[i],
                })
                .collect();
            ctx.write_rows("orbit.csv", &rows)?;
            let summary = serde_json::to_value(&report)?;
            ctx.write_json("orbit.json", &summary)?;
            summary
        }
    };
    Ok(Outcome {
        artifacts: ctx.artifacts,
        converged: ctx.converged,
        summary,
    })
}

/// Writes `manifest.json` next to the artifacts.
pub fn write_manifest(cfg: &ExperimentConfig, out: &Path, outcome: &Outcome, started: Instant) -> Result<(), RunError> {
    let manifest = json!({
        "tool": "pekar",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment.name(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "grid": cfg.grid,
        "radial": cfg.radial,
        "kgrid": cfg.kgrid,
        "solver": cfg.solver,
        "converged": outcome.converged,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "artifacts": outcome.artifacts,
        "config": cfg,
    });
    serde_json::to_writer_pretty(BufWriter::new(File::create(out.join("manifest.json"))?), &manifest)?;
    Ok(())
}
