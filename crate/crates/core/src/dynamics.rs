//! The memory-free iteration, its VAMP counterpart, and diagnostics on
//! the resulting trajectories.
//!
//! Both algorithms start from `ρ(0) = 0`. The simplified algorithm keeps
//! the coupling `A` fixed at its replica value and only tracks the empirical
//! `η(t) = ⟨m′_ν(ρ(t−1), y)⟩`; VAMP recomputes `ν(t), λ(t), τ(t)` and the
//! coupling at every step.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;

use crate::ensemble::TeacherInstance;
use crate::error::{Error, Result};
use crate::likelihood::LikelihoodModel;
use crate::replica::ReplicaSolution;
use crate::spectral::{build_a, AOperator, SpectralData};

/// `Δ̂(t, t−1)` below which a run is declared converged.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-24;

/// A run is aborted once `⟨ρ(t)²⟩` exceeds this multiple of `⟨ρ(1)²⟩`.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Largest `N` for the dense susceptibility products.
pub const SUSCEPTIBILITY_MAX_N: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Simplified,
    Vamp,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Simplified => "simplified",
            Algorithm::Vamp => "vamp",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub algorithm: Algorithm,
    /// `ρ(0), …, ρ(T)`.
    pub rho: Vec<Vec<f64>>,
    /// `η(1), …, η(T)`.
    pub eta: Vec<f64>,
    /// First `t` with `Δ̂(t, t−1) < 1e−24`.
    pub converged_at: Option<usize>,
    /// Precision `ν` at which the final iterate's moments are evaluated.
    pub final_nu: f64,
}

/// Per-step scalars of a VAMP run.
#[derive(Debug, Clone, Default)]
pub struct VampState {
    /// `ν(0), …, ν(T)`.
    pub nu: Vec<f64>,
    /// `λ(1), …, λ(T)`.
    pub lambda: Vec<f64>,
    /// `τ(1), …, τ(T)`.
    pub tau: Vec<f64>,
    /// `η(1), …, η(T)`.
    pub eta: Vec<f64>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.eta.len()
    }

    pub fn n(&self) -> usize {
        self.rho[0].len()
    }

    pub fn last(&self) -> &[f64] {
        self.rho.last().expect("trajectory holds rho(0)")
    }

    /// `(1/N) ‖ρ(t) − ρ(s)‖²`.
    pub fn delta(&self, t: usize, s: usize) -> f64 {
        mean_sq_diff(&self.rho[t], &self.rho[s])
    }
}

fn mean_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn mean_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64
}

/// `(m, m′)` componentwise.
fn moments_vec(model: &LikelihoodModel, rho: &[f64], y: &[f64], nu: f64) -> (Vec<f64>, Vec<f64>) {
    rho.par_iter()
        .zip(y)
        .map(|(&r, &yi)| {
            let mo = model.moments_unchecked(r, yi, nu);
            (mo.m, mo.m_prime)
        })
        .unzip()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_labels(teacher: &TeacherInstance) -> Result<()> {
    for &y in &teacher.y {
        teacher.model.check_label(y)?;
    }
    Ok(())
}

struct Guard {
    first: Option<f64>,
}

impl Guard {
    fn check(&mut self, t: usize, rho: &[f64]) -> Result<()> {
        if rho.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { step: t });
        }
        let size = mean_sq(rho);
        match self.first {
            None => self.first = Some(size),
            Some(first) if first > 0.0 && size > DIVERGENCE_FACTOR * first => {
                return Err(Error::Divergence {
                    step: t,
                    detail: format!("<rho^2> = {size:e} against {first:e} at t = 1"),
                })
            }
            _ => {}
        }
        Ok(())
    }
}

/// `η(t) = ⟨m′_ν(ρ(t−1), y)⟩`, `ρ(t) = A f_{η(t)}(ρ(t−1), y)`.
pub fn run_algorithm(
    a: &AOperator,
    teacher: &TeacherInstance,
    replica: &ReplicaSolution,
    steps: usize,
    rho0: Option<&[f64]>,
) -> Result<Trajectory> {
    let n = teacher.n();
    if a.n() != n {
        return Err(Error::InvalidDimensions(format!("operator is {}-dimensional, instance {n}", a.n())));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("at least one step is required".into()));
    }
    check_labels(teacher)?;
    let model = &teacher.model;
    let nu = replica.nu;
    let start = match rho0 {
        Some(r) if r.len() == n => r.to_vec(),
        Some(r) => return Err(Error::InvalidDimensions(format!("rho0 has length {}", r.len()))),
        None => vec![0.0; n],
    };
    let mut rho = vec![start];
    let mut eta = Vec::with_capacity(steps);
    let mut converged_at = None;
    let mut guard = Guard { first: None };
    for t in 1..=steps {
        let prev = &rho[t - 1];
        let (m, mp) = moments_vec(model, prev, &teacher.y, nu);
        let eta_t = mean(&mp);
        if !(eta_t > 0.0) {
            return Err(Error::Domain { iteration: t, detail: format!("eta = {eta_t:e}") });
        }
        let f: Vec<f64> = m.iter().zip(prev).map(|(mi, ri)| mi / eta_t - ri).collect();
        let next = a.apply(&f);
        guard.check(t, &next)?;
        if converged_at.is_none() && mean_sq_diff(&next, prev) < CONVERGENCE_THRESHOLD {
            converged_at = Some(t);
        }
        eta.push(eta_t);
        rho.push(next);
    }
    Ok(Trajectory {
        algorithm: Algorithm::Simplified,
        rho,
        eta,
        converged_at,
        final_nu: nu,
    })
}

/// VAMP with per-step recomputation of the coupling, applied through the
/// spectral basis.
pub fn run_vamp(
    spectral: &Arc<SpectralData>,
    teacher: &TeacherInstance,
    steps: usize,
    nu0: f64,
) -> Result<(Trajectory, VampState)> {
    let n = teacher.n();
    if spectral.n() != n {
        return Err(Error::InvalidDimensions("spectrum and instance differ in N".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("at least one step is required".into()));
    }
    if !(nu0 > 0.0) || !nu0.is_finite() {
        return Err(Error::InvalidParameter(format!("nu0 = {nu0:e}")));
    }
    check_labels(teacher)?;
    let model = &teacher.model;
    let mut state = VampState {
        nu: vec![nu0],
        ..Default::default()
    };
    let mut rho = vec![vec![0.0; n]];
    let mut converged_at = None;
    let mut guard = Guard { first: None };
    for t in 1..=steps {
        let nu_prev = state.nu[t - 1];
        let prev = &rho[t - 1];
        let (m, mp) = moments_vec(model, prev, &teacher.y, nu_prev);
        let eta = mean(&mp);
        if !(eta > 0.0) {
            return Err(Error::Domain { iteration: t, detail: format!("eta = {eta:e}") });
        }
        let lambda = 1.0 / eta - nu_prev;
        let tau = spectral.g1(lambda);
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Domain { iteration: t, detail: format!("tau = {tau:e}") });
        }
        let nu = 1.0 / tau - lambda;
        let a = build_a(spectral.clone(), tau, lambda)?;
        let f: Vec<f64> = m.iter().zip(prev).map(|(mi, ri)| mi / eta - ri).collect();
        let next = a.apply(&f);
        guard.check(t, &next)?;
        if converged_at.is_none() && mean_sq_diff(&next, prev) < CONVERGENCE_THRESHOLD {
            converged_at = Some(t);
        }
        state.eta.push(eta);
        state.lambda.push(lambda);
        state.tau.push(tau);
        state.nu.push(nu);
        rho.push(next);
    }
    let traj = Trajectory {
        algorithm: Algorithm::Vamp,
        eta: state.eta.clone(),
        rho,
        converged_at,
        final_nu: state.nu[steps],
    };
    Ok((traj, state))
}

/// RMS over `N` of `ρ − (νm − K⁺m)` restricted to the range of `K`.
pub fn tap_residual(rho: &[f64], m: &[f64], nu: f64, spectral: &SpectralData) -> f64 {
    let pr = spectral.project(rho);
    let pm = spectral.project(m);
    let d = spectral.eigenvalues();
    let sum: f64 = pr
        .iter()
        .zip(&pm)
        .zip(d)
        .map(|((r, mm), di)| {
            let e = r - (nu * mm - mm / di);
            e * e
        })
        .sum();
    (sum / rho.len() as f64).sqrt()
}

/// TAP residual of a trajectory's last iterate at its own precision.
pub fn trajectory_tap_residual(traj: &Trajectory, teacher: &TeacherInstance, spectral: &SpectralData) -> f64 {
    let (m, _) = moments_vec(&teacher.model, traj.last(), &teacher.y, traj.final_nu);
    tap_residual(traj.last(), &m, traj.final_nu, spectral)
}

/// TAP residual of a trajectory's last iterate at a given precision.
pub fn tap_residual_at(rho: &[f64], teacher: &TeacherInstance, nu: f64, spectral: &SpectralData) -> f64 {
    let (m, _) = moments_vec(&teacher.model, rho, &teacher.y, nu);
    tap_residual(rho, &m, nu, spectral)
}

/// Susceptibility summary for one `(t, s)` pair.
#[derive(Debug, Clone, Copy)]
pub struct Susceptibility {
    /// `(1/N) tr[A E(s+1) ⋯ A E(t)]`.
    pub trace: f64,
    /// `(1/N) Σ_i ([A E(s+1) ⋯ A E(t)]_ii)²`.
    pub diag_sq: f64,
}

/// Diagonal of the ordered product `A E(s+1) A E(s+2) ⋯ A E(t)` with
/// `E(r) = diag(m′_ν(ρ(r−1))/η(r) − 1)`.
pub fn susceptibility_trace(
    a: &AOperator,
    traj: &Trajectory,
    teacher: &TeacherInstance,
    nu: f64,
    t: usize,
    s: usize,
) -> Result<Susceptibility> {
    let n = a.n();
    if n > SUSCEPTIBILITY_MAX_N {
        return Err(Error::Unsupported(format!(
            "susceptibility needs a dense operator, N = {n} exceeds {SUSCEPTIBILITY_MAX_N}"
        )));
    }
    if !(s < t && t <= traj.steps()) {
        return Err(Error::InvalidParameter(format!("need s < t <= T, got (t, s) = ({t}, {s})")));
    }
    let dense = a.to_dense();
    let a_mat = Mat::<f64>::from_fn(n, n, |i, j| dense[i * n + j]);
    let e_diag = |r: usize| -> Vec<f64> {
        let (_, mp) = moments_vec(&teacher.model, &traj.rho[r - 1], &teacher.y, nu);
        mp.iter().map(|x| x / traj.eta[r - 1] - 1.0).collect()
    };
    let mut prod = Mat::<f64>::identity(n, n);
    for r in s + 1..=t {
        let e = e_diag(r);
        let step = Mat::<f64>::from_fn(n, n, |i, j| a_mat[(i, j)] * e[j]);
        prod = &prod * &step;
    }
    let diag: Vec<f64> = (0..n).map(|i| prod[(i, i)]).collect();
    Ok(Susceptibility {
        trace: mean(&diag),
        diag_sq: mean_sq(&diag),
    })
}

/// Empirical two-time statistics of a trajectory.
#[derive(Debug, Clone)]
pub struct EmpiricalStats {
    /// `(T+1) × (T+1)`, row-major, indices `0..=T`.
    pub c_rho: Vec<f64>,
    /// `κ̂(t) = ρ(t)ᵀθ / (N q)` for `t = 0..=T`.
    pub kappa_hat: Vec<f64>,
    pub size: usize,
}

impl EmpiricalStats {
    pub fn c(&self, t: usize, s: usize) -> f64 {
        self.c_rho[t * self.size + s]
    }

    /// `Δ̂(t, s)` from the stored covariances.
    pub fn delta(&self, t: usize, s: usize) -> f64 {
        self.c(t, t) + self.c(s, s) - 2.0 * self.c(t, s)
    }
}

pub fn empirical_stats(traj: &Trajectory, teacher: &TeacherInstance, q: f64) -> EmpiricalStats {
    let size = traj.rho.len();
    let n = traj.n() as f64;
    let mut c_rho = vec![0.0; size * size];
    for t in 0..size {
        for s in 0..=t {
            let v = traj.rho[t].iter().zip(&traj.rho[s]).map(|(a, b)| a * b).sum::<f64>() / n;
            c_rho[t * size + s] = v;
            c_rho[s * size + t] = v;
        }
    }
    let kappa_hat = traj
        .rho
        .iter()
        .map(|r| r.iter().zip(&teacher.theta).map(|(a, b)| a * b).sum::<f64>() / (n * q))
        .collect();
    EmpiricalStats { c_rho, kappa_hat, size }
}

/// Writes `t, eta_t, delta_to_final, kappa_hat_t` for `t = 0..=T`
/// (`eta_0` is left empty).
pub fn write_trajectory_csv(traj: &Trajectory, teacher: &TeacherInstance, q: f64, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "eta_t", "delta_to_final", "kappa_hat_t"])?;
    let last = traj.steps();
    let n = traj.n() as f64;
    for (t, r) in traj.rho.iter().enumerate() {
        let eta = if t == 0 { String::new() } else { format!("{:e}", traj.eta[t - 1]) };
        let kappa = r.iter().zip(&teacher.theta).map(|(a, b)| a * b).sum::<f64>() / (n * q);
        w.write_record([
            t.to_string(),
            eta,
            format!("{:e}", traj.delta(t, last)),
            format!("{kappa:e}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const DUMP_MAGIC: &[u8; 8] = b"MFRHO\x00\x01\x00";

/// Binary iterate dump: the 8-byte magic `MFRHO\0\x01\0`, then `N` and the
/// number of stored iterates as little-endian `u64`, then every `ρ(t)` as
/// `N` little-endian `f64`.
pub fn write_iterates(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&(traj.n() as u64).to_le_bytes())?;
    out.write_all(&(traj.rho.len() as u64).to_le_bytes())?;
    for r in &traj.rho {
        for x in r {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_iterates(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 24 || &bytes[..8] != DUMP_MAGIC {
        return Err(Error::Parse(format!("{}: not an iterate dump", path.display())));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap()) as usize;
    let (n, count) = (word(8), word(16));
    if bytes.len() != 24 + 8 * n * count {
        return Err(Error::Parse("iterate dump truncated".into()));
    }
    Ok(bytes[24..]
        .chunks_exact(8 * n.max(1))
        .take(count)
        .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
        .collect())
}

/// Rebuilds a trajectory from stored iterates and per-step `η`.
pub fn trajectory_from_parts(
    algorithm: Algorithm,
    rho: Vec<Vec<f64>>,
    eta: Vec<f64>,
    final_nu: f64,
) -> Result<Trajectory> {
    if rho.len() != eta.len() + 1 || rho.is_empty() {
        return Err(Error::InvalidDimensions(format!(
            "{} iterates for {} steps",
            rho.len(),
            eta.len()
        )));
    }
    let converged_at = (1..rho.len()).find(|&t| mean_sq_diff(&rho[t], &rho[t - 1]) < CONVERGENCE_THRESHOLD);
    Ok(Trajectory {
        algorithm,
        rho,
        eta,
        converged_at,
        final_nu,
    })
}

/// Reads the `eta_t` column of a file written by [`write_trajectory_csv`].
pub fn read_trajectory_eta(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut eta = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = rec.get(1).unwrap_or("");
        if field.is_empty() {
            continue;
        }
        eta.push(field.parse().map_err(|e| Error::Parse(format!("eta_t '{field}': {e}")))?);
    }
    Ok(eta)
}

/// `t, nu, lambda, tau, eta`; row 0 carries only `ν(0)`.
pub fn write_vamp_state_csv(state: &VampState, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "nu", "lambda", "tau", "eta"])?;
    for t in 0..state.nu.len() {
        let at = |v: &[f64]| if t == 0 { String::new() } else { format!("{:e}", v[t - 1]) };
        w.write_record([
            t.to_string(),
            format!("{:e}", state.nu[t]),
            at(&state.lambda),
            at(&state.tau),
            at(&state.eta),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vamp_state_csv(path: &Path) -> Result<VampState> {
    let mut r = csv::Reader::from_path(path)?;
    let mut state = VampState::default();
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|e| Error::Parse(format!("'{s}': {e}"))) };
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(Error::Parse("vamp state rows need 5 fields".into()));
        }
        state.nu.push(num(&rec[1])?);
        if !rec[2].is_empty() {
            state.lambda.push(num(&rec[2])?);
            state.tau.push(num(&rec[3])?);
            state.eta.push(num(&rec[4])?);
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{generate_hadamard_design, generate_teacher};
    use crate::quadrature::QuadratureSpec;
    use crate::replica::{solve_replica, SolverOptions};
    use crate::spectral::spectrum;

    fn setup(n: usize) -> (TeacherInstance, Arc<SpectralData>, ReplicaSolution) {
        let design = generate_hadamard_design(n, n / 2, 3).unwrap();
        let teacher = generate_teacher(design, 0.01, 3).unwrap();
        let s = Arc::new(spectrum(&teacher.design).unwrap());
        let sol = solve_replica(&s, &teacher.model, &QuadratureSpec::default(), &SolverOptions::default()).unwrap();
        (teacher, s, sol)
    }

    #[test]
    fn simplified_run_shapes_and_fixed_point() {
        let (teacher, s, sol) = setup(512);
        let a = build_a(s.clone(), sol.chi, sol.lambda).unwrap();
        let traj = run_algorithm(&a, &teacher, &sol, 200, None).unwrap();
        assert_eq!(traj.rho.len(), 201);
        assert_eq!(traj.eta.len(), 200);
        assert!(traj.eta.iter().all(|&e| e > 0.0));
        assert!(traj.converged_at.is_some());
        // Restarting from the converged iterate stays there.
        let again = run_algorithm(&a, &teacher, &sol, 1, Some(traj.last())).unwrap();
        assert!(again.delta(1, 0).sqrt() < 1e-8);
        // One apply per step, each within the O(N log N) budget.
        assert_eq!(a.flop_count(), 201 * a.flops_per_apply());
        assert!(a.flops_per_apply() < 8 * 512 * 9 + 4 * 512);
    }

    #[test]
    fn runs_are_deterministic() {
        let (teacher, s, sol) = setup(256);
        let a = build_a(s.clone(), sol.chi, sol.lambda).unwrap();
        let x = run_algorithm(&a, &teacher, &sol, 10, None).unwrap();
        let y = run_algorithm(&a, &teacher, &sol, 10, None).unwrap();
        assert_eq!(x.rho, y.rho);
        let (v1, _) = run_vamp(&s, &teacher, 10, sol.nu).unwrap();
        let (v2, _) = run_vamp(&s, &teacher, 10, sol.nu).unwrap();
        assert_eq!(v1.rho, v2.rho);
    }

    #[test]
    fn vamp_tracks_replica_scalars() {
        let (teacher, s, sol) = setup(1024);
        let (traj, state) = run_vamp(&s, &teacher, 200, sol.nu).unwrap();
        assert!(traj.converged_at.is_some());
        assert!((state.eta[0] - sol.chi).abs() <= 5.0 / (1024f64).sqrt());
        let tol = 5.0 / (1024f64).sqrt();
        assert!((state.nu[200] - sol.nu).abs() <= tol * sol.nu);
        assert!(state.tau.iter().all(|&t| t > 0.0));
        // VAMP's fixed point solves TAP at its own precision.
        assert!(trajectory_tap_residual(&traj, &teacher, &s) < 1e-9);
    }

    #[test]
    fn tap_residual_discriminates() {
        let (teacher, s, sol) = setup(256);
        let rho: Vec<f64> = (0..256).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        assert!(tap_residual_at(&rho, &teacher, sol.nu, &s) > 0.1);
    }

    #[test]
    fn empirical_stats_basic_identities() {
        let (teacher, s, sol) = setup(256);
        let a = build_a(s, sol.chi, sol.lambda).unwrap();
        let traj = run_algorithm(&a, &teacher, &sol, 5, None).unwrap();
        let st = empirical_stats(&traj, &teacher, sol.q);
        for t in 0..=5 {
            assert_eq!(traj.delta(t, t), 0.0);
            for u in 0..=5 {
                assert_eq!(st.c(t, u), st.c(u, t));
            }
        }
    }

    #[test]
    fn stored_runs_reload_exactly() {
        let (teacher, s, sol) = setup(64);
        let a = build_a(s.clone(), sol.chi, sol.lambda).unwrap();
        let traj = run_algorithm(&a, &teacher, &sol, 6, None).unwrap();
        let (vamp, state) = run_vamp(&s, &teacher, 6, sol.nu).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (it, csv_path, st) = (dir.path().join("rho.bin"), dir.path().join("t.csv"), dir.path().join("v.csv"));
        write_iterates(&traj, &it).unwrap();
        write_trajectory_csv(&traj, &teacher, sol.q, &csv_path).unwrap();
        let back = trajectory_from_parts(
            Algorithm::Simplified,
            read_iterates(&it).unwrap(),
            read_trajectory_eta(&csv_path).unwrap(),
            sol.nu,
        )
        .unwrap();
        assert_eq!(back.rho, traj.rho);
        assert_eq!(back.eta, traj.eta);
        assert_eq!(back.converged_at, traj.converged_at);
        write_vamp_state_csv(&state, &st).unwrap();
        let state_back = read_vamp_state_csv(&st).unwrap();
        assert_eq!(state_back.nu, state.nu);
        assert_eq!(state_back.eta, vamp.eta);
        assert_eq!(state_back.tau, state.tau);
    }

    #[test]
    fn iterate_dump_round_trip() {
        let (teacher, s, sol) = setup(64);
        let a = build_a(s, sol.chi, sol.lambda).unwrap();
        let traj = run_algorithm(&a, &teacher, &sol, 3, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho.bin");
        write_iterates(&traj, &path).unwrap();
        assert_eq!(read_iterates(&path).unwrap(), traj.rho);
        write_trajectory_csv(&traj, &teacher, sol.q, &dir.path().join("traj.csv")).unwrap();
    }

    #[test]
    fn susceptibility_single_factor_is_small() {
        let (teacher, s, sol) = setup(256);
        let a = build_a(s, sol.chi, sol.lambda).unwrap();
        let traj = run_algorithm(&a, &teacher, &sol, 4, None).unwrap();
        let one = susceptibility_trace(&a, &traj, &teacher, sol.nu, 3, 2).unwrap();
        assert!(one.trace.abs() < 0.1);
        assert!(susceptibility_trace(&a, &traj, &teacher, sol.nu, 2, 2).is_err());
    }
}
