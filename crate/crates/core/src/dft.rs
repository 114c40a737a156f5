//! Dynamical theory of the memory-free iteration.
//!
//! In the large-`N` limit one component of the iterate behaves like
//! `ρ(t) = φ(t) + κ(t) θ` with `{φ(t)}` a zero-mean Gaussian process
//! independent of `(θ, y)`. Writing `γ(t) = f_{χ(t)}(ρ(t−1), y)` and
//! `χ(t) = E[m′_ν(ρ(t−1), y)]`, the order parameters obey
//!
//! ```text
//! κ(t)      = (κ/(qλ)) E[θ γ(t)]
//! C_φ(t, s) = σ_A² E[γ(t) γ(s)] + κ(t)κ(s)/κ² (κ − σ_A²(λ + qλ²))
//! C_ρ(t, s) = C_φ(t, s) + q κ(t) κ(s)
//! ```
//!
//! started from `ρ(0) = 0`. All matrices here are indexed `0..=T`, with row
//! and column 0 identically zero.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{PairField, SingleField};
use crate::harness::config::MAX_HORIZON;
use crate::likelihood::{LikelihoodKind, LikelihoodModel};
use crate::quadrature::NormalRule;
use crate::replica::{ReplicaSolution, RsMeasure};
use crate::rng::{block_rng, Stream};

/// Relative tolerance for negative variances before a covariance block is
/// declared indefinite.
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TheoryTrace {
    pub horizon: usize,
    /// `χ(1), …, χ(T)`.
    pub chi_t: Vec<f64>,
    /// `κ(0), …, κ(T)`.
    pub kappa_t: Vec<f64>,
    c_phi: Vec<f64>,
    c_rho: Vec<f64>,
    delta: Vec<f64>,
    pub mu_rho: f64,
    pub at_margin: f64,
    pub replica: ReplicaSolution,
}

impl TheoryTrace {
    fn idx(&self, t: usize, s: usize) -> usize {
        t * (self.horizon + 1) + s
    }

    pub fn c_phi(&self, t: usize, s: usize) -> f64 {
        self.c_phi[self.idx(t, s)]
    }

    pub fn c_rho(&self, t: usize, s: usize) -> f64 {
        self.c_rho[self.idx(t, s)]
    }

    /// `Δ_ρ(t, s) = E[(ρ(t) − ρ(s))²]`, evaluated from the difference of the
    /// two processes rather than from the covariances.
    pub fn delta(&self, t: usize, s: usize) -> f64 {
        self.delta[self.idx(t, s)]
    }

    /// `C_ρ(t,t) + C_ρ(s,s) − 2 C_ρ(t,s)`.
    pub fn delta_from_covariances(&self, t: usize, s: usize) -> f64 {
        self.c_rho(t, t) + self.c_rho(s, s) - 2.0 * self.c_rho(t, s)
    }

    /// `(T+1) × (T+1)` row-major `C_ρ`.
    pub fn c_rho_matrix(&self) -> &[f64] {
        &self.c_rho
    }

    pub fn write_matrix_csv(&self, which: Matrix, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "s", "value"])?;
        for t in 1..=self.horizon {
            for s in 1..=self.horizon {
                let v = match which {
                    Matrix::CPhi => self.c_phi(t, s),
                    Matrix::CRho => self.c_rho(t, s),
                    Matrix::Delta => self.delta(t, s),
                };
                w.write_record([t.to_string(), s.to_string(), format!("{v:e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `key=value` lines: `mu_rho`, `at_margin`, `kappa_t` and `chi_t`
    /// (comma-separated, `t = 1..=T`).
    pub fn write_scalars(&self, path: &Path) -> Result<()> {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "horizon={}", self.horizon)?;
        writeln!(out, "mu_rho={:e}", self.mu_rho)?;
        writeln!(out, "at_margin={:e}", self.at_margin)?;
        writeln!(out, "kappa_t={}", join(&self.kappa_t[1..]))?;
        writeln!(out, "chi_t={}", join(&self.chi_t))?;
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Matrix {
    CPhi,
    CRho,
    Delta,
}

fn check_replica(replica: &ReplicaSolution) -> Result<()> {
    if replica.kappa < 0.0 {
        return Err(Error::InvalidParameter(format!("kappa = {:e} is negative", replica.kappa)));
    }
    if !(replica.chi > 0.0 && replica.chi < replica.q) {
        return Err(Error::InvalidParameter(format!(
            "chi = {:e} outside (0, q = {:e})",
            replica.chi, replica.q
        )));
    }
    Ok(())
}

/// Forward recursion of the order parameters up to horizon `T ≤ 64`.
pub fn dft_recursion(
    replica: &ReplicaSolution,
    model: &LikelihoodModel,
    rule: &NormalRule,
    horizon: usize,
) -> Result<TheoryTrace> {
    check_replica(replica)?;
    if horizon == 0 || horizon > MAX_HORIZON {
        return Err(Error::InvalidParameter(format!("horizon must be in 1..={MAX_HORIZON}")));
    }
    let ReplicaSolution {
        nu,
        lambda,
        kappa,
        q,
        sigma_a_sq: s2,
        ..
    } = *replica;
    let size = horizon + 1;
    let at = |t: usize, s: usize| t * size + s;
    // κ − σ_A²(λ + qλ²), the part of C_φ carried by the κ(t)κ(s) term.
    let c0 = kappa - s2 * (lambda + q * lambda * lambda);
    // κ(t) = κ e(t) with e(t) = E[θγ(t)]/(qλ); working with e avoids
    // dividing by κ, which vanishes for a flat spectrum.
    let mut e = vec![0.0; size];
    let mut kappa_t = vec![0.0; size];
    let mut chi_t = Vec::with_capacity(horizon);
    let mut c_phi = vec![0.0; size * size];
    let mut c_rho = vec![0.0; size * size];
    let mut delta = vec![0.0; size * size];

    for t in 1..=horizon {
        let a = t - 1;
        let field_a = SingleField::process(q, kappa_t[a], c_phi[at(a, a)]);
        let chi = field_a.expect(model, rule, |rho, y| model.moments_unchecked(rho, y, nu).m_prime);
        if !(chi > 0.0) {
            return Err(Error::Domain { iteration: t, detail: format!("chi(t) = {chi:e}") });
        }
        chi_t.push(chi);
        let gamma_t = |rho: f64, y: f64| model.moments_unchecked(rho, y, nu).m / chi - rho;
        let e_theta = field_a.expect_theta(model, rule, gamma_t);
        e[t] = e_theta / (q * lambda);
        kappa_t[t] = kappa * e[t];
        let gg = field_a.expect(model, rule, |rho, y| gamma_t(rho, y).powi(2));
        let var = s2 * gg + e[t] * e[t] * c0;
        if var < -PSD_TOL * kappa.max(1e-300) {
            return Err(Error::NotPositiveSemidefinite { t, s: t });
        }
        c_phi[at(t, t)] = var.max(0.0);

        // Off-diagonal row, independent across s.
        let row: Vec<(f64, f64)> = (1..t)
            .into_par_iter()
            .map(|s| {
                let b = s - 1;
                let chi_s = chi_t[b];
                let pair = PairField {
                    var_a: c_rho[at(a, a)],
                    var_b: c_rho[at(b, b)],
                    delta: delta[at(a, b)],
                    cov_theta_a: kappa_t[a] * q,
                    cov_theta_b: kappa_t[b] * q,
                    q,
                };
                let (mut cross, mut diff) = (0.0, 0.0);
                pair.visit(model, rule, |p| {
                    let ga = model.moments_unchecked(p.rho_a, p.y, nu).m / chi - p.rho_a;
                    let gb = model.moments_unchecked(p.rho_b, p.y, nu).m / chi_s - p.rho_b;
                    cross += p.weight * ga * gb;
                    diff += p.weight * (ga - gb) * (ga - gb);
                });
                (cross, diff)
            })
            .collect();
        for (s, (cross, diff)) in (1..t).zip(row) {
            let v = s2 * cross + e[t] * e[s] * c0;
            c_phi[at(t, s)] = v;
            c_phi[at(s, t)] = v;
            let de = e[t] - e[s];
            let d = s2 * diff + (c0 + q * kappa * kappa) * de * de;
            let scale = c_phi[at(t, t)].max(c_phi[at(s, s)]).max(1e-300);
            if d < -PSD_TOL * scale {
                return Err(Error::NotPositiveSemidefinite { t, s });
            }
            delta[at(t, s)] = d.max(0.0);
            delta[at(s, t)] = d.max(0.0);
        }
        for s in 0..=t {
            let v = c_phi[at(t, s)] + q * kappa_t[t] * kappa_t[s];
            c_rho[at(t, s)] = v;
            c_rho[at(s, t)] = v;
        }
        delta[at(t, 0)] = c_rho[at(t, t)];
        delta[at(0, t)] = c_rho[at(t, t)];
    }

    let rate = convergence_rate(replica, model, rule)?;
    Ok(TheoryTrace {
        horizon,
        chi_t,
        kappa_t,
        c_phi,
        c_rho,
        delta,
        mu_rho: rate.mu_rho,
        at_margin: rate.at_margin,
        replica: *replica,
    })
}

/// `Δ_ρ(t, s)` of a trace.
pub fn delta_rho(theory: &TheoryTrace, t: usize, s: usize) -> f64 {
    theory.delta(t, s)
}

#[derive(Debug, Clone, Copy)]
pub struct RateInfo {
    /// `(σ_A²/χ²)(E[m′²] − χ²)`.
    pub mu_rho: f64,
    /// `σ_A² E[(m′/χ − 1)²]`.
    pub mu_rho_alt: f64,
    /// `1 − E[m′²] R′(−χ)`.
    pub at_margin: f64,
    pub mean_m_prime_sq: f64,
    /// `R′(−χ) = σ_A² / ((1 + σ_A²) χ²)`.
    pub r_prime: f64,
}

/// Asymptotic contraction factor of `Δ_ρ` and the stability margin, both
/// evaluated under the replica measure.
pub fn convergence_rate(
    replica: &ReplicaSolution,
    model: &LikelihoodModel,
    rule: &NormalRule,
) -> Result<RateInfo> {
    check_replica(replica)?;
    let measure = RsMeasure::from_solution(replica, model, rule)?;
    let chi = replica.chi;
    let s2 = replica.sigma_a_sq;
    let nu = replica.nu;
    let mp2 = measure.mean_m_prime_sq();
    let mu_rho = s2 / (chi * chi) * (mp2 - chi * chi);
    let mu_rho_alt = s2 * measure.expect(|rho, y| (model.moments_unchecked(rho, y, nu).m_prime / chi - 1.0).powi(2));
    if (mu_rho - mu_rho_alt).abs() > 1e-10 * mu_rho.abs().max(1.0) {
        return Err(Error::NoConvergence(format!(
            "rate forms disagree: {mu_rho:e} vs {mu_rho_alt:e}; replica point not converged?"
        )));
    }
    let r_prime = s2 / ((1.0 + s2) * chi * chi);
    Ok(RateInfo {
        mu_rho,
        mu_rho_alt,
        at_margin: 1.0 - mp2 * r_prime,
        mean_m_prime_sq: mp2,
        r_prime,
    })
}

/// `(E[θγ], qλ, E[γ²], λ + qλ²)` under the replica measure with
/// `γ = m_ν/χ − ρ`.
pub fn stationarity_identities(
    replica: &ReplicaSolution,
    model: &LikelihoodModel,
    rule: &NormalRule,
) -> Result<[f64; 4]> {
    let measure = RsMeasure::from_solution(replica, model, rule)?;
    let (chi, nu, q, lambda) = (replica.chi, replica.nu, replica.q, replica.lambda);
    let gamma = |rho: f64, y: f64| model.moments_unchecked(rho, y, nu).m / chi - rho;
    Ok([
        measure.expect_theta(gamma),
        q * lambda,
        measure.expect(|r, y| gamma(r, y).powi(2)),
        lambda + q * lambda * lambda,
    ])
}

/// Monte Carlo estimates of the effective process, `t = 1..=H`.
///
/// `c_rho` is the sample second moment of the assembled process, which only
/// relies on the Gaussian law of `φ` and the teacher pair. The `propagated`
/// fields instead push the sampled `ρ(t−1)` through the nonlinearity and
/// apply the right-hand side of the recursion, so they check the
/// recursion's quadrature against plain sampling.
#[derive(Debug, Clone)]
pub struct McEstimates {
    pub horizon: usize,
    pub samples: usize,
    /// `H × H`, index `(t−1, s−1)`.
    pub c_rho: Vec<f64>,
    pub c_rho_se: Vec<f64>,
    /// `E[ρ(t) θ] / q`.
    pub kappa: Vec<f64>,
    pub kappa_se: Vec<f64>,
    pub mean_rho: Vec<f64>,
    pub mean_rho_se: Vec<f64>,
    pub propagated_c_rho: Vec<f64>,
    pub propagated_c_rho_se: Vec<f64>,
    pub propagated_kappa: Vec<f64>,
    pub propagated_kappa_se: Vec<f64>,
}

const MC_BLOCK: usize = 1 << 15;

struct Sampler<'a> {
    h: usize,
    q: f64,
    model: &'a LikelihoodModel,
    /// `H × H` row-major factor `L` with `L Lᵀ = C_φ[1..=H]`.
    factor: Vec<f64>,
    kappa_t: &'a [f64],
}

struct Draw {
    theta: f64,
    /// `ρ(0..=H)`.
    rho: Vec<f64>,
    /// `γ(1..=H)`, computed from `ρ(t−1)`.
    gamma: Vec<f64>,
}

impl Sampler<'_> {
    fn draw<R: Rng>(&self, rng: &mut R, chi_t: &[f64], nu: f64, z: &mut [f64], out: &mut Draw) {
        let z0: f64 = StandardNormal.sample(rng);
        let theta = self.q.sqrt() * z0;
        let noise: f64 = StandardNormal.sample(rng);
        let y = match self.model.kind() {
            LikelihoodKind::Probit => {
                if theta + self.model.noise_var().sqrt() * noise >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            LikelihoodKind::Gaussian => theta + self.model.noise_var().sqrt() * noise,
        };
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        out.theta = theta;
        out.rho[0] = 0.0;
        for t in 0..self.h {
            let phi: f64 = (0..self.h).map(|j| self.factor[t * self.h + j] * z[j]).sum();
            out.rho[t + 1] = phi + self.kappa_t[t + 1] * theta;
        }
        for t in 0..self.h {
            let r = out.rho[t];
            out.gamma[t] = self.model.moments_unchecked(r, y, nu).m / chi_t[t] - r;
        }
    }
}

/// Symmetric square-root factor of a PSD matrix through its eigenpairs,
/// with eigenvalues above `−1e−10 · max` clamped at zero.
fn psd_factor(c: &[f64], h: usize) -> Result<Vec<f64>> {
    let m = faer::Mat::<f64>::from_fn(h, h, |i, j| c[i * h + j]);
    let evd = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let vals: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let max = vals.iter().copied().fold(0.0f64, f64::max);
    if let Some(k) = vals.iter().position(|&v| v < -PSD_TOL * max.max(1e-300)) {
        return Err(Error::NotPositiveSemidefinite { t: k + 1, s: k + 1 });
    }
    let u = evd.U();
    let mut f = vec![0.0; h * h];
    for i in 0..h {
        for j in 0..h {
            f[i * h + j] = u[(i, j)] * vals[j].max(0.0).sqrt();
        }
    }
    Ok(f)
}

/// Samples the effective single-node process from the trace's `C_φ` and
/// `κ(t)`.
pub fn single_node_mc(
    theory: &TheoryTrace,
    model: &LikelihoodModel,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimates> {
    let h = horizon;
    if h == 0 || h > theory.horizon {
        return Err(Error::InvalidParameter(format!("MC horizon {h} exceeds theory horizon")));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("at least two samples are required".into()));
    }
    let rep = theory.replica;
    let mut c = vec![0.0; h * h];
    for t in 0..h {
        for s in 0..h {
            c[t * h + s] = theory.c_phi(t + 1, s + 1);
        }
    }
    let sampler = Sampler {
        h,
        q: rep.q,
        model,
        factor: psd_factor(&c, h)?,
        kappa_t: &theory.kappa_t,
    };
    let chi_t = &theory.chi_t[..h];
    let nu = rep.nu;
    let blocks = samples.div_ceil(MC_BLOCK);
    let pairs: Vec<(usize, usize)> = (0..h).flat_map(|t| (0..=t).map(move |s| (t, s))).collect();

    // Statistics per draw: products ρtρs, ρtθ, ρt, γtγs, θγt.
    let n_stats = 2 * pairs.len() + 3 * h;
    let stats_of = |d: &Draw, out: &mut Vec<f64>| {
        out.clear();
        for &(t, s) in &pairs {
            out.push(d.rho[t + 1] * d.rho[s + 1]);
        }
        for t in 0..h {
            out.push(d.rho[t + 1] * d.theta);
        }
        for t in 0..h {
            out.push(d.rho[t + 1]);
        }
        for &(t, s) in &pairs {
            out.push(d.gamma[t] * d.gamma[s]);
        }
        for t in 0..h {
            out.push(d.theta * d.gamma[t]);
        }
    };
    let run_block = |b: usize, visit: &mut dyn FnMut(&Draw)| {
        let mut rng = block_rng(seed, Stream::MonteCarlo, b as u32);
        let count = MC_BLOCK.min(samples - b * MC_BLOCK);
        let mut z = vec![0.0; h];
        let mut d = Draw {
            theta: 0.0,
            rho: vec![0.0; h + 1],
            gamma: vec![0.0; h],
        };
        for _ in 0..count {
            sampler.draw(&mut rng, chi_t, nu, &mut z, &mut d);
            visit(&d);
        }
    };

    // Pass 1: means.
    let sums: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; n_stats];
            let mut buf = Vec::with_capacity(n_stats);
            run_block(b, &mut |d| {
                stats_of(d, &mut buf);
                for (a, x) in acc.iter_mut().zip(&buf) {
                    *a += x;
                }
            });
            acc
        })
        .collect();
    let nf = samples as f64;
    let mut mean = vec![0.0; n_stats];
    for s in &sums {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);

    let np = pairs.len();
    let (off_rt, off_r, off_gg, off_tg) = (np, np + h, np + 2 * h, 2 * np + 2 * h);
    let pair_index = |t: usize, s: usize| {
        let (t, s) = if t >= s { (t, s) } else { (s, t) };
        t * (t + 1) / 2 + s
    };
    let ql = rep.q * rep.lambda;
    let c0 = rep.kappa - rep.sigma_a_sq * (rep.lambda + rep.q * rep.lambda * rep.lambda);
    let e_hat: Vec<f64> = (0..h).map(|t| mean[off_tg + t] / ql).collect();
    // Influence coefficient of E[θγ] in C_ρ = σ²E[γγ] + (c0 + qκ²) e_t e_s.
    let big_b = (c0 + rep.q * rep.kappa * rep.kappa) / ql;

    // Pass 2: centred second moments of the raw statistics and of the
    // influence functions of the propagated estimates.
    let n_infl = np;
    let sq_sums: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; n_stats + n_infl];
            let mut buf = Vec::with_capacity(n_stats);
            run_block(b, &mut |d| {
                stats_of(d, &mut buf);
                for (i, x) in buf.iter().enumerate() {
                    acc[i] += (x - mean[i]).powi(2);
                }
                for (k, &(t, s)) in pairs.iter().enumerate() {
                    let infl = rep.sigma_a_sq * (buf[off_gg + k] - mean[off_gg + k])
                        + big_b
                            * (e_hat[s] * (buf[off_tg + t] - mean[off_tg + t])
                                + e_hat[t] * (buf[off_tg + s] - mean[off_tg + s]));
                    acc[n_stats + k] += infl * infl;
                }
            });
            acc
        })
        .collect();
    let mut var = vec![0.0; n_stats + n_infl];
    for s in &sq_sums {
        for (v, x) in var.iter_mut().zip(s) {
            *v += x;
        }
    }
    let se = |i: usize| (var[i] / (nf - 1.0) / nf).sqrt();

    let mut out = McEstimates {
        horizon: h,
        samples,
        c_rho: vec![0.0; h * h],
        c_rho_se: vec![0.0; h * h],
        kappa: (0..h).map(|t| mean[off_rt + t] / rep.q).collect(),
        kappa_se: (0..h).map(|t| se(off_rt + t) / rep.q).collect(),
        mean_rho: (0..h).map(|t| mean[off_r + t]).collect(),
        mean_rho_se: (0..h).map(|t| se(off_r + t)).collect(),
        propagated_c_rho: vec![0.0; h * h],
        propagated_c_rho_se: vec![0.0; h * h],
        propagated_kappa: e_hat.iter().map(|e| rep.kappa * e).collect(),
        propagated_kappa_se: (0..h).map(|t| rep.kappa * se(off_tg + t) / ql).collect(),
    };
    for t in 0..h {
        for s in 0..h {
            let k = pair_index(t, s);
            let i = t * h + s;
            out.c_rho[i] = mean[k];
            out.c_rho_se[i] = se(k);
            out.propagated_c_rho[i] = rep.sigma_a_sq * mean[off_gg + k]
                + (c0 + rep.q * rep.kappa * rep.kappa) * e_hat[t] * e_hat[s];
            out.propagated_c_rho_se[i] = se(n_stats + k);
        }
    }
    Ok(out)
}
