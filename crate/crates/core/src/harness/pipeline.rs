//! Per-seed pipeline with on-disk artifacts.
//!
//! Every stage writes its output under `<out_dir>/seed-<seed>/` and, when the
//! directory was produced by the same configuration, later invocations load
//! the stored artifact instead of recomputing it. Loading is exact: numbers
//! are written in shortest round-trip form and iterates in binary.
//!
//! | file                  | stage     |
//! |-----------------------|-----------|
//! | `instance.csv`        | generate  |
//! | `eigenvalues.csv`     | spectrum  |
//! | `replica.kv`          | replica   |
//! | `iterates.bin`, `trajectory.csv` | simulate |
//! | `vamp_iterates.bin`, `vamp_trajectory.csv`, `vamp_state.csv` | vamp |
//! | `c_rho.csv`, `c_phi.csv`, `delta.csv`, `theory.kv` | theory |
//! | `mc.csv`              | mc-oracle |
//! | `rse.csv`, `seed_report.kv` | compare |

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::dft::{dft_recursion, single_node_mc, Matrix, McEstimates, TheoryTrace};
use crate::dynamics::{
    empirical_stats, read_iterates, read_trajectory_eta, read_vamp_state_csv, run_algorithm, run_vamp,
    tap_residual_at, trajectory_from_parts, trajectory_tap_residual, write_iterates, write_trajectory_csv,
    write_vamp_state_csv, Algorithm, Trajectory, VampState,
};
use crate::ensemble::{generate_design, generate_teacher_with, read_instance_csv, write_instance_csv, TeacherInstance};
use crate::error::{Result, Stage, StageExt};
use crate::likelihood::LikelihoodModel;
use crate::replica::{solve_replica, ReplicaSolution, SolverOptions};
use crate::spectral::{build_a, spectrum_with_cap, SpectralData};

use super::config::ExperimentConfig;
use super::metrics::{db_label, rate_fit, rse, to_db, RateFit, RseMatrix};

const STAMP: &str = "inputs.kv";

/// Artifacts of one seed.
pub struct SeedRun<'a> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    dir: PathBuf,
    reuse: bool,
}

impl<'a> SeedRun<'a> {
    /// Prepares `<out_dir>/seed-<seed>`. Stored artifacts are reused only if
    /// the directory's stamp matches this configuration and seed.
    pub fn open(cfg: &'a ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let dir = cfg.out_dir.join(format!("seed-{seed}"));
        std::fs::create_dir_all(&dir)?;
        let stamp = format!("{}seed = {seed}\n", cfg.to_kv());
        let path = dir.join(STAMP);
        let reuse = std::fs::read_to_string(&path).is_ok_and(|s| s == stamp);
        if !reuse {
            std::fs::write(&path, stamp)?;
        }
        Ok(Self { cfg, seed, dir, reuse })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn cached(&self, name: &str) -> Option<PathBuf> {
        let p = self.dir.join(name);
        (self.reuse && p.exists()).then_some(p)
    }

    pub fn model(&self) -> Result<LikelihoodModel> {
        LikelihoodModel::new(self.cfg.likelihood, self.cfg.noise_var)
    }

    pub fn instance(&self) -> Result<TeacherInstance> {
        let go = || -> Result<TeacherInstance> {
            if let Some(p) = self.cached("instance.csv") {
                return read_instance_csv(&p);
            }
            let c = self.cfg;
            let design = generate_design(c.ensemble, c.n, c.k, self.seed)?;
            let teacher = generate_teacher_with(design, self.model()?, self.seed)?;
            write_instance_csv(&teacher, &self.dir.join("instance.csv"))?;
            Ok(teacher)
        };
        go().stage(Stage::Generate)
    }

    pub fn spectral(&self, teacher: &TeacherInstance) -> Result<Arc<SpectralData>> {
        let go = || -> Result<Arc<SpectralData>> {
            let s = spectrum_with_cap(&teacher.design, self.cfg.dense_cap)?;
            if self.cached("eigenvalues.csv").is_none() {
                s.write_eigenvalues_csv(&self.dir.join("eigenvalues.csv"))?;
            }
            Ok(Arc::new(s))
        };
        go().stage(Stage::Spectrum)
    }

    pub fn replica(&self, spectral: &SpectralData) -> Result<ReplicaSolution> {
        let go = || -> Result<ReplicaSolution> {
            if let Some(p) = self.cached("replica.kv") {
                return ReplicaSolution::from_kv(&std::fs::read_to_string(p)?);
            }
            let opts = SolverOptions {
                damping: self.cfg.damping,
                tol: self.cfg.replica_tol,
                max_iter: self.cfg.replica_max_iter,
                ..Default::default()
            };
            let sol = solve_replica(spectral, &self.model()?, &self.cfg.quadrature()?, &opts)?;
            std::fs::write(self.dir.join("replica.kv"), sol.to_kv())?;
            Ok(sol)
        };
        go().stage(Stage::Replica)
    }

    pub fn simulate(
        &self,
        spectral: &Arc<SpectralData>,
        teacher: &TeacherInstance,
        replica: &ReplicaSolution,
    ) -> Result<Trajectory> {
        let go = || -> Result<Trajectory> {
            if let (Some(bin), Some(csv)) = (self.cached("iterates.bin"), self.cached("trajectory.csv")) {
                return trajectory_from_parts(
                    Algorithm::Simplified,
                    read_iterates(&bin)?,
                    read_trajectory_eta(&csv)?,
                    replica.nu,
                );
            }
            let a = build_a(spectral.clone(), replica.chi, replica.lambda)?;
            let traj = run_algorithm(&a, teacher, replica, self.cfg.run_steps, None)?;
            write_iterates(&traj, &self.dir.join("iterates.bin"))?;
            write_trajectory_csv(&traj, teacher, replica.q, &self.dir.join("trajectory.csv"))?;
            Ok(traj)
        };
        go().stage(Stage::Simulate)
    }

    /// VAMP from `ν(0)` equal to the replica `ν`.
    pub fn vamp(
        &self,
        spectral: &Arc<SpectralData>,
        teacher: &TeacherInstance,
        replica: &ReplicaSolution,
    ) -> Result<(Trajectory, VampState)> {
        let go = || -> Result<(Trajectory, VampState)> {
            if let (Some(bin), Some(st)) = (self.cached("vamp_iterates.bin"), self.cached("vamp_state.csv")) {
                let state = read_vamp_state_csv(&st)?;
                let final_nu = *state.nu.last().unwrap_or(&replica.nu);
                let traj = trajectory_from_parts(Algorithm::Vamp, read_iterates(&bin)?, state.eta.clone(), final_nu)?;
                return Ok((traj, state));
            }
            let (traj, state) = run_vamp(spectral, teacher, self.cfg.run_steps, replica.nu)?;
            write_iterates(&traj, &self.dir.join("vamp_iterates.bin"))?;
            write_trajectory_csv(&traj, teacher, replica.q, &self.dir.join("vamp_trajectory.csv"))?;
            write_vamp_state_csv(&state, &self.dir.join("vamp_state.csv"))?;
            Ok((traj, state))
        };
        go().stage(Stage::Vamp)
    }

    pub fn theory(&self, replica: &ReplicaSolution) -> Result<TheoryTrace> {
        let go = || -> Result<TheoryTrace> {
            let rule = self.cfg.quadrature()?.rule()?;
            let tr = dft_recursion(replica, &self.model()?, &rule, self.cfg.horizon)?;
            tr.write_matrix_csv(Matrix::CRho, &self.dir.join("c_rho.csv"))?;
            tr.write_matrix_csv(Matrix::CPhi, &self.dir.join("c_phi.csv"))?;
            tr.write_matrix_csv(Matrix::Delta, &self.dir.join("delta.csv"))?;
            tr.write_scalars(&self.dir.join("theory.kv"))?;
            Ok(tr)
        };
        go().stage(Stage::Theory)
    }

    pub fn mc(&self, theory: &TheoryTrace) -> Result<McSummary> {
        let go = || -> Result<McSummary> {
            let est = single_node_mc(theory, &self.model()?, self.cfg.mc_horizon, self.cfg.mc_samples, self.seed)?;
            let summary = McSummary::new(theory, &est);
            write_mc_csv(theory, &est, &self.dir.join("mc.csv"))?;
            Ok(summary)
        };
        go().stage(Stage::MonteCarlo)
    }

    /// Runs every stage and compares. The Monte Carlo oracle runs only when
    /// `with_mc` is set and `mc_samples > 0`.
    pub fn run_all(&self, with_mc: bool) -> Result<SeedReport> {
        let teacher = self.instance()?;
        let spectral = self.spectral(&teacher)?;
        let replica = self.replica(&spectral)?;
        let traj = self.simulate(&spectral, &teacher, &replica)?;
        let vamp = if self.cfg.vamp {
            Some(self.vamp(&spectral, &teacher, &replica)?)
        } else {
            None
        };
        let theory = self.theory(&replica)?;
        let mc = if with_mc && self.cfg.mc_samples > 0 {
            Some(self.mc(&theory)?)
        } else {
            None
        };
        self.compare(&teacher, &spectral, &traj, vamp.as_ref().map(|v| &v.0), &theory, mc)
    }

    pub fn compare(
        &self,
        teacher: &TeacherInstance,
        spectral: &SpectralData,
        traj: &Trajectory,
        vamp: Option<&Trajectory>,
        theory: &TheoryTrace,
        mc: Option<McSummary>,
    ) -> Result<SeedReport> {
        let go = || -> Result<SeedReport> {
            let report = build_seed_report(self.cfg, self.seed, teacher, spectral, traj, vamp, theory, mc)?;
            write_rse_csv(&report.rse, &self.dir.join("rse.csv"))?;
            std::fs::write(self.dir.join("seed_report.kv"), report.to_kv())?;
            Ok(report)
        };
        go().stage(Stage::Compare)
    }
}

/// Largest Monte Carlo z-scores against the theory, `t, s ≤ H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSummary {
    pub horizon: usize,
    pub samples: usize,
    /// Sampled `C_ρ` against the recursion's `C_ρ`.
    pub max_abs_z: f64,
    /// Recursion right-hand side evaluated on samples against the
    /// recursion's `C_ρ`.
    pub max_abs_z_propagated: f64,
}

/// Relative resolution of the recursion's quadrature. A sampled quantity
/// whose standard error falls below it (the propagated `t = s = 1` entry is
/// deterministic) is compared at this resolution instead.
pub const MC_SE_FLOOR_REL: f64 = 1e-10;

/// `(estimate − theory)/se`, with `se` floored at [`MC_SE_FLOOR_REL`].
pub fn mc_z(estimate: f64, se: f64, theory: f64) -> f64 {
    (estimate - theory) / se.hypot(MC_SE_FLOOR_REL * theory.abs())
}

impl McSummary {
    pub fn new(theory: &TheoryTrace, est: &McEstimates) -> Self {
        let h = est.horizon;
        let (mut z, mut zp) = (0.0f64, 0.0f64);
        for t in 0..h {
            for s in 0..h {
                let c = theory.c_rho(t + 1, s + 1);
                let k = t * h + s;
                z = z.max(mc_z(est.c_rho[k], est.c_rho_se[k], c).abs());
                zp = zp.max(mc_z(est.propagated_c_rho[k], est.propagated_c_rho_se[k], c).abs());
            }
        }
        Self {
            horizon: h,
            samples: est.samples,
            max_abs_z: z,
            max_abs_z_propagated: zp,
        }
    }
}

fn write_mc_csv(theory: &TheoryTrace, est: &McEstimates, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "s", "theory", "mc", "se", "z", "propagated", "propagated_se", "propagated_z"])?;
    let h = est.horizon;
    for t in 0..h {
        for s in 0..h {
            let k = t * h + s;
            let c = theory.c_rho(t + 1, s + 1);
            w.write_record([
                (t + 1).to_string(),
                (s + 1).to_string(),
                format!("{c:e}"),
                format!("{:e}", est.c_rho[k]),
                format!("{:e}", est.c_rho_se[k]),
                format!("{:e}", mc_z(est.c_rho[k], est.c_rho_se[k], c)),
                format!("{:e}", est.propagated_c_rho[k]),
                format!("{:e}", est.propagated_c_rho_se[k]),
                format!("{:e}", mc_z(est.propagated_c_rho[k], est.propagated_c_rho_se[k], c)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// VAMP-side quantities of a seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VampSummary {
    pub converged_at: Option<usize>,
    pub final_nu: f64,
    pub final_eta: f64,
    /// TAP residual of VAMP's last iterate at its own `ν`.
    pub tap_residual: f64,
    /// `RMS(ρ_simplified − ρ_vamp)` of the last iterates.
    pub fixed_point_rms: f64,
}

/// Comparison of one seed's runs against the theory.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedReport {
    pub seed: u64,
    pub replica: ReplicaSolution,
    pub mu_rho: f64,
    pub at_margin: f64,
    /// `T × T`, index `(t−1, s−1)`.
    pub rse: RseMatrix,
    pub rse_window_max: f64,
    /// `None` when fewer than two points lie above the precision floor.
    pub rate_fit: Option<RateFit>,
    /// `|slope − ln μ_ρ| / |ln μ_ρ|`, `NaN` without a fit.
    pub rate_rel_gap: f64,
    pub converged_at: Option<usize>,
    /// TAP residual of the simplified run's last iterate at the replica `ν`.
    pub tap_residual: f64,
    /// `max_{t ≤ T} |χ(t) − η(t)|`.
    pub self_avg_gap: f64,
    pub vamp: Option<VampSummary>,
    pub mc: Option<McSummary>,
}

#[allow(clippy::too_many_arguments)]
fn build_seed_report(
    cfg: &ExperimentConfig,
    seed: u64,
    teacher: &TeacherInstance,
    spectral: &SpectralData,
    traj: &Trajectory,
    vamp: Option<&Trajectory>,
    theory: &TheoryTrace,
    mc: Option<McSummary>,
) -> Result<SeedReport> {
    let replica = theory.replica;
    let h = cfg.horizon;
    let stats = empirical_stats(traj, teacher, replica.q);
    let mut emp = Vec::with_capacity(h * h);
    let mut th = Vec::with_capacity(h * h);
    for t in 1..=h {
        for s in 1..=h {
            emp.push(stats.c(t, s));
            th.push(theory.c_rho(t, s));
        }
    }
    let rse = rse(&emp, &th, h)?;
    let last = traj.steps();
    let deltas: Vec<f64> = (0..=last).map(|t| traj.delta(t, last)).collect();
    let rate_fit = rate_fit(&deltas, cfg.fit_start, last).ok();
    let ln_mu = theory.mu_rho.ln();
    let rate_rel_gap = rate_fit.map_or(f64::NAN, |f| (f.slope - ln_mu).abs() / ln_mu.abs());
    let self_avg_gap = theory
        .chi_t
        .iter()
        .zip(&traj.eta)
        .map(|(c, e)| (c - e).abs())
        .fold(0.0, f64::max);
    let tap_residual = tap_residual_at(traj.last(), teacher, replica.nu, spectral);
    let vamp = vamp.map(|v| {
        let rms = traj
            .last()
            .iter()
            .zip(v.last())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / traj.n() as f64;
        VampSummary {
            converged_at: v.converged_at,
            final_nu: v.final_nu,
            final_eta: *v.eta.last().unwrap_or(&f64::NAN),
            tap_residual: trajectory_tap_residual(v, teacher, spectral),
            fixed_point_rms: rms.sqrt(),
        }
    });
    Ok(SeedReport {
        seed,
        replica,
        mu_rho: theory.mu_rho,
        at_margin: theory.at_margin,
        rse_window_max: rse.max_in_window(cfg.tolerances.rse_window),
        rse,
        rate_fit,
        rate_rel_gap,
        converged_at: traj.converged_at,
        tap_residual,
        self_avg_gap,
        vamp,
        mc,
    })
}

/// `t, s, rse, rse_db` with `t, s` from 1.
pub fn write_rse_csv(r: &RseMatrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "s", "rse", "rse_db"])?;
    for i in 0..r.size() {
        for j in 0..r.size() {
            let (v, db) = match r.get(i, j) {
                Some(v) => (format!("{v:e}"), db_label(to_db(v))),
                None => ("flagged".to_string(), "flagged".to_string()),
            };
            w.write_record([(i + 1).to_string(), (j + 1).to_string(), v, db])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn opt_usize(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

impl SeedReport {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        let r = &self.replica;
        put("seed", self.seed.to_string());
        put("chi", format!("{:e}", r.chi));
        put("lambda", format!("{:e}", r.lambda));
        put("nu", format!("{:e}", r.nu));
        put("kappa", format!("{:e}", r.kappa));
        put("sigma_A_sq", format!("{:e}", r.sigma_a_sq));
        put("mu_rho", format!("{:e}", self.mu_rho));
        put("ln_mu_rho", format!("{:e}", self.mu_rho.ln()));
        put("at_margin", format!("{:e}", self.at_margin));
        put("rse_window_max", format!("{:e}", self.rse_window_max));
        put("rse_window_min_db", db_label(to_db(self.rse_window_max)));
        match &self.rate_fit {
            Some(f) => {
                put("rate_slope", format!("{:e}", f.slope));
                put("rate_r_squared", format!("{:e}", f.r_squared));
                put("rate_window", format!("{}..{}", f.start, f.end));
                put("rate_truncated", f.truncated.to_string());
            }
            None => {
                put("rate_slope", "none".into());
                put("rate_r_squared", "none".into());
                put("rate_window", "none".into());
                put("rate_truncated", "none".into());
            }
        }
        put("rate_rel_gap", format!("{:e}", self.rate_rel_gap));
        put("converged_at", opt_usize(self.converged_at));
        put("tap_residual", format!("{:e}", self.tap_residual));
        put("self_avg_gap", format!("{:e}", self.self_avg_gap));
        match &self.vamp {
            Some(v) => {
                put("vamp_converged_at", opt_usize(v.converged_at));
                put("vamp_final_nu", format!("{:e}", v.final_nu));
                put("vamp_final_eta", format!("{:e}", v.final_eta));
                put("vamp_tap_residual", format!("{:e}", v.tap_residual));
                put("fixed_point_rms", format!("{:e}", v.fixed_point_rms));
            }
            None => {
                for k in ["vamp_converged_at", "vamp_final_nu", "vamp_final_eta", "vamp_tap_residual", "fixed_point_rms"] {
                    put(k, "none".into());
                }
            }
        }
        match &self.mc {
            Some(m) => {
                put("mc_samples", m.samples.to_string());
                put("mc_max_abs_z", format!("{:e}", m.max_abs_z));
                put("mc_max_abs_z_propagated", format!("{:e}", m.max_abs_z_propagated));
            }
            None => {
                put("mc_samples", "none".into());
                put("mc_max_abs_z", "none".into());
                put("mc_max_abs_z_propagated", "none".into());
            }
        }
        s
    }
}
