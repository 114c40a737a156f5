//! Eigendata of `K = XXᵀ`, its Green function and R-transform, and the
//! fixed coupling operator `A`.
//!
//! Only the range of `K` is ever represented. With `U` an `N × r` matrix of
//! orthonormal eigenvectors for the nonzero eigenvalues, every operator used
//! here has the form `U diag(s) Uᵀ + c (I − UUᵀ)`, so null-space directions
//! are handled through the scalar `c` and `K⁺` is never formed.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;

use crate::ensemble::{DesignKind, DesignMatrix};
use crate::error::{Error, Result};

/// Largest `N` accepted by the dense eigendecomposition unless overridden.
pub const DEFAULT_DENSE_CAP: usize = 8192;

/// Eigenvalues below this fraction of the largest are clamped to zero.
pub const EIGEN_CLAMP_REL: f64 = 1e-10;

const INVERSION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Numerical eigendecomposition of a dense design.
    Computed,
    /// Closed-form spectrum of the Hadamard design.
    Analytic,
    /// Eigenvalues given directly, `K = diag(d)` in the standard basis.
    Supplied,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Computed => "computed",
            Provenance::Analytic => "analytic",
            Provenance::Supplied => "supplied",
        }
    }
}

#[derive(Debug, Clone)]
enum Basis {
    /// Coordinate vectors `e_0 .. e_{r-1}`.
    Standard,
    /// Column-major `N × r`.
    Dense { cols: Vec<f64> },
    /// The design itself: its columns are orthonormal eigenvectors with
    /// eigenvalue one.
    Hadamard(DesignMatrix),
}

/// Spectrum of `K` (descending, length `N`) plus an orthonormal basis of
/// its range.
#[derive(Debug, Clone)]
pub struct SpectralData {
    n: usize,
    n_cols: usize,
    kind: Option<DesignKind>,
    d: Vec<f64>,
    rank: usize,
    basis: Basis,
    provenance: Provenance,
}

/// Spectral decomposition of the design's covariance with the default cap.
pub fn spectrum(design: &DesignMatrix) -> Result<SpectralData> {
    spectrum_with_cap(design, DEFAULT_DENSE_CAP)
}

pub fn spectrum_with_cap(design: &DesignMatrix, cap: usize) -> Result<SpectralData> {
    match design.kind() {
        DesignKind::Hadamard => Ok(hadamard_spectrum(design)),
        DesignKind::Gaussian => dense_spectrum(design, cap),
    }
}

fn hadamard_spectrum(design: &DesignMatrix) -> SpectralData {
    let (n, k) = (design.n_rows(), design.n_cols());
    let mut d = vec![0.0; n];
    d[..k].fill(1.0);
    SpectralData {
        n,
        n_cols: k,
        kind: Some(DesignKind::Hadamard),
        d,
        rank: k,
        basis: Basis::Hadamard(design.clone()),
        provenance: Provenance::Analytic,
    }
}

/// Eigenpairs of `XXᵀ` from the `K × K` Gram matrix `XᵀX = V S² Vᵀ`: the
/// range eigenvectors are `X V S⁻¹`.
fn dense_spectrum(design: &DesignMatrix, cap: usize) -> Result<SpectralData> {
    let (n, k) = (design.n_rows(), design.n_cols());
    if n > cap {
        return Err(Error::DenseCapExceeded { n, cap });
    }
    let entries = design
        .dense_entries()
        .ok_or_else(|| Error::Unsupported("dense spectrum of a structured design".into()))?;
    let x = Mat::<f64>::from_fn(n, k, |i, j| entries[i * k + j]);
    let gram = x.transpose() * &x;
    let evd = gram
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s2: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let v = evd.U();
    let max = s2.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::Eigen("covariance has no positive eigenvalue".into()));
    }
    if let Some(&neg) = s2.iter().find(|&&e| e < -EIGEN_CLAMP_REL * max) {
        return Err(Error::Eigen(format!("negative eigenvalue {neg:e}")));
    }
    // faer returns ascending order; keep descending, nonzero only.
    let keep: Vec<usize> = (0..k).rev().filter(|&j| s2[j] >= EIGEN_CLAMP_REL * max).collect();
    let rank = keep.len();
    let mut vk = Mat::<f64>::zeros(k, rank);
    for (c, &j) in keep.iter().enumerate() {
        let inv_s = 1.0 / s2[j].sqrt();
        for i in 0..k {
            vk[(i, c)] = v[(i, j)] * inv_s;
        }
    }
    let u = &x * &vk;
    let mut cols = Vec::with_capacity(n * rank);
    for c in 0..rank {
        cols.extend(u.col(c).iter().copied());
    }
    let mut d = vec![0.0; n];
    for (c, &j) in keep.iter().enumerate() {
        d[c] = s2[j];
    }
    Ok(SpectralData {
        n,
        n_cols: k,
        kind: Some(DesignKind::Gaussian),
        d,
        rank,
        basis: Basis::Dense { cols },
        provenance: Provenance::Computed,
    })
}

impl SpectralData {
    /// `K = diag(d)`; eigenvalues are sorted descending and tiny ones clamped.
    pub fn from_eigenvalues(mut d: Vec<f64>) -> Result<Self> {
        if d.is_empty() || d.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("eigenvalues must be finite and nonempty".into()));
        }
        let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= 0.0 {
            return Err(Error::InvalidParameter("spectrum is identically zero".into()));
        }
        if let Some(&neg) = d.iter().find(|&&x| x < -EIGEN_CLAMP_REL * max) {
            return Err(Error::Eigen(format!("negative eigenvalue {neg:e}")));
        }
        for x in d.iter_mut() {
            if *x < EIGEN_CLAMP_REL * max {
                *x = 0.0;
            }
        }
        d.sort_by(|a, b| b.total_cmp(a));
        let rank = d.iter().take_while(|&&x| x > 0.0).count();
        Ok(Self {
            n: d.len(),
            n_cols: rank,
            kind: None,
            d,
            rank,
            basis: Basis::Standard,
            provenance: Provenance::Supplied,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.d
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `q = tr K / N`.
    pub fn q(&self) -> f64 {
        self.range().iter().sum::<f64>() / self.n as f64
    }

    fn range(&self) -> &[f64] {
        &self.d[..self.rank]
    }

    /// `(1/N) Σ d / (λd + 1)`.
    pub fn g1(&self, lambda: f64) -> f64 {
        self.range().iter().map(|&d| d / (lambda * d + 1.0)).sum::<f64>() / self.n as f64
    }

    /// `(1/N) Σ d² / (λd + 1)²`.
    pub fn g2(&self, lambda: f64) -> f64 {
        self.range()
            .iter()
            .map(|&d| {
                let r = d / (lambda * d + 1.0);
                r * r
            })
            .sum::<f64>()
            / self.n as f64
    }

    /// Green function of `K⁺`, `G(z) = (1/N) Σ_{d>0} 1/(z − 1/d)`.
    pub fn green(&self, z: f64) -> f64 {
        self.range().iter().map(|&d| d / (z * d - 1.0)).sum::<f64>() / self.n as f64
    }

    /// Solves `g1(λ) = χ` for `χ ∈ (0, q)`, which puts `λ` in
    /// `(0, r/(Nχ)]`. Safeguarded Newton with bisection fallback.
    pub fn solve_lambda(&self, chi: f64) -> Result<f64> {
        let q = self.q();
        if !(chi > 0.0 && chi < q) {
            return Err(Error::Inversion(format!(
                "chi = {chi:e} outside the admissible interval (0, {q:e})"
            )));
        }
        let frac = self.rank as f64 / self.n as f64;
        let (mut lo, mut hi) = (0.0, frac / chi);
        // g1 is decreasing: g1(lo) > chi >= g1(hi).
        let mut lambda = 0.5 * (lo + hi);
        for _ in 0..500 {
            let r = self.g1(lambda) - chi;
            if r.abs() <= INVERSION_TOL * 1e-3 * chi {
                return Ok(lambda);
            }
            if r > 0.0 {
                lo = lambda;
            } else {
                hi = lambda;
            }
            let newton = lambda + r / self.g2(lambda);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - lambda).abs() <= 1e-16 * lambda.max(1.0) || hi - lo <= 1e-16 * hi {
                let r = self.g1(next) - chi;
                if r.abs() <= INVERSION_TOL * chi {
                    return Ok(next);
                }
                return Err(Error::Inversion(format!(
                    "bracket collapsed with residual {r:e} at chi = {chi:e}"
                )));
            }
            lambda = next;
        }
        Err(Error::Inversion(format!("no convergence at chi = {chi:e}")))
    }

    /// `R(ω)` and `R′(ω)` for `ω ∈ (−q, 0)`, where `R(ω) = G⁻¹(ω) − 1/ω`.
    ///
    /// Writing `ω = −χ` and `G⁻¹(ω) = −λ`: `R = 1/χ − λ` and
    /// `R′ = 1/G′(−λ) + 1/χ² = 1/χ² − 1/g2(λ)`.
    pub fn green_inverse_and_rprime(&self, omega: f64) -> Result<(f64, f64)> {
        if !(omega < 0.0) {
            return Err(Error::Inversion(format!("omega = {omega:e} must be negative")));
        }
        let chi = -omega;
        let lambda = self.solve_lambda(chi)?;
        // 1/χ² − 1/g2 = (g2 − g1²)/(χ² g2) at g1 = χ; the variance form
        // avoids cancelling two O(1/χ²) terms.
        let g1 = self.g1(lambda);
        let spread = self
            .range()
            .iter()
            .map(|&d| (d / (lambda * d + 1.0) - g1).powi(2))
            .sum::<f64>()
            + (self.n - self.rank) as f64 * g1 * g1;
        let var = spread / self.n as f64;
        Ok((1.0 / chi - lambda, var / (chi * chi * self.g2(lambda))))
    }

    /// `R(−χ)`.
    pub fn r_transform(&self, chi: f64) -> Result<f64> {
        Ok(self.green_inverse_and_rprime(-chi)?.0)
    }

    /// Mean square of the eigenvalues of `A(χ, λ)`, computed from the
    /// spectrum directly.
    pub fn sigma_a_sq(&self, chi: f64, lambda: f64) -> f64 {
        let range: f64 = self
            .range()
            .iter()
            .map(|&d| {
                let a = d / (chi * (lambda * d + 1.0)) - 1.0;
                a * a
            })
            .sum();
        (range + (self.n - self.rank) as f64) / self.n as f64
    }

    /// `Uᵀ v`, length `rank`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "project: wrong input length");
        match &self.basis {
            Basis::Standard => v[..self.rank].to_vec(),
            Basis::Hadamard(design) => design.apply_transpose(v),
            Basis::Dense { cols } => cols
                .par_chunks(self.n)
                .map(|c| c.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect(),
        }
    }

    /// `U c`, length `N`.
    pub fn lift(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.rank, "lift: wrong input length");
        match &self.basis {
            Basis::Standard => {
                let mut out = vec![0.0; self.n];
                out[..self.rank].copy_from_slice(c);
                out
            }
            Basis::Hadamard(design) => design.apply(c),
            Basis::Dense { cols } => {
                const ROWS: usize = 256;
                let n = self.n;
                let mut out = vec![0.0; n];
                out.par_chunks_mut(ROWS).enumerate().for_each(|(b, chunk)| {
                    let len = chunk.len();
                    let r0 = b * ROWS;
                    for (col, &cj) in cols.chunks(n).zip(c) {
                        for (o, u) in chunk.iter_mut().zip(&col[r0..r0 + len]) {
                            *o += u * cj;
                        }
                    }
                });
                out
            }
        }
    }

    /// `U diag(scale) Uᵀ v + null (I − UUᵀ) v`.
    pub fn apply_spectral(&self, v: &[f64], scale: &[f64], null: f64) -> Vec<f64> {
        let mut c = self.project(v);
        for (cj, s) in c.iter_mut().zip(scale) {
            *cj *= s - null;
        }
        let mut out = self.lift(&c);
        if null != 0.0 {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += null * vi;
            }
        }
        out
    }

    /// `K v`.
    pub fn apply_covariance(&self, v: &[f64]) -> Vec<f64> {
        self.apply_spectral(v, self.range(), 0.0)
    }

    /// Multiply-adds for one `project` plus one `lift`.
    pub fn flops_per_round_trip(&self) -> u64 {
        match &self.basis {
            Basis::Standard => 2 * self.n as u64,
            Basis::Dense { .. } => 2 * (self.n * self.rank) as u64,
            Basis::Hadamard(design) => 2 * design.flops_per_apply(),
        }
    }

    /// Writes one eigenvalue per line after a `# n=…,k=…,kind=…` header.
    pub fn write_eigenvalues_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let kind = self.kind.map_or("supplied", DesignKind::as_str);
        writeln!(out, "# n={},k={},kind={},provenance={}", self.n, self.n_cols, kind, self.provenance.as_str())?;
        writeln!(out, "eigenvalue")?;
        for d in &self.d {
            writeln!(out, "{d:e}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `A = (1/χ) U diag(d/(λd + 1)) Uᵀ − I`, applied matrix-free.
#[derive(Debug)]
pub struct AOperator {
    spectral: Arc<SpectralData>,
    chi: f64,
    lambda: f64,
    sigma_a_sq: f64,
    /// `d/(χ(λd + 1))` on the range.
    scale: Vec<f64>,
    flops: AtomicU64,
}

pub fn build_a(spectral: Arc<SpectralData>, chi: f64, lambda: f64) -> Result<AOperator> {
    if !(chi > 0.0) || !chi.is_finite() || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("build_a: chi = {chi:e}, lambda = {lambda:e}")));
    }
    let mut scale = Vec::with_capacity(spectral.rank);
    for &d in spectral.range() {
        let den = lambda * d + 1.0;
        if den.abs() <= 1e-14 {
            return Err(Error::InvalidParameter(format!(
                "lambda d + 1 vanishes at d = {d:e}"
            )));
        }
        scale.push(d / (chi * den));
    }
    let sigma_a_sq = spectral.sigma_a_sq(chi, lambda);
    Ok(AOperator {
        spectral,
        chi,
        lambda,
        sigma_a_sq,
        scale,
        flops: AtomicU64::new(0),
    })
}

impl AOperator {
    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma_a_sq(&self) -> f64 {
        self.sigma_a_sq
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn n(&self) -> usize {
        self.spectral.n
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.flops.fetch_add(self.flops_per_apply(), Ordering::Relaxed);
        let mut c = self.spectral.project(v);
        for (cj, s) in c.iter_mut().zip(&self.scale) {
            *cj *= s;
        }
        let mut out = self.spectral.lift(&c);
        for (o, vi) in out.iter_mut().zip(v) {
            *o -= vi;
        }
        out
    }

    pub fn flops_per_apply(&self) -> u64 {
        self.spectral.flops_per_round_trip() + self.spectral.rank as u64 + self.spectral.n as u64
    }

    /// Multiply-adds spent in `apply` so far.
    pub fn flop_count(&self) -> u64 {
        self.flops.load(Ordering::Relaxed)
    }

    /// All `N` eigenvalues of `A`, matching the order of the spectrum.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut a: Vec<f64> = self.scale.iter().map(|s| s - 1.0).collect();
        a.resize(self.spectral.n, -1.0);
        a
    }

    /// `tr A / N`.
    pub fn normalized_trace(&self) -> f64 {
        (self.scale.iter().sum::<f64>() - self.spectral.n as f64) / self.spectral.n as f64
    }

    /// Row-major dense `A`; intended for small diagnostic sizes.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.spectral.n;
        let mut out = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e);
            e[j] = 0.0;
            for i in 0..n {
                out[i * n + j] = col[i];
            }
        }
        // Symmetrize away rounding so downstream products see an exactly
        // symmetric matrix.
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (out[i * n + j] + out[j * n + i]);
                out[i * n + j] = m;
                out[j * n + i] = m;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{generate_gaussian_design, generate_hadamard_design};

    fn probe(n: usize, salt: u64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 + 0.5) * (salt as f64 + 1.3)).sin()).collect()
    }

    #[test]
    fn hadamard_projector_spectrum() {
        let d = generate_hadamard_design(8, 4, 1).unwrap();
        let s = spectrum(&d).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.provenance(), Provenance::Analytic);
        assert_eq!(s.q(), 0.5);
    }

    #[test]
    fn dense_decomposition_reconstructs_covariance() {
        let design = generate_gaussian_design(96, 40, 3).unwrap();
        let s = spectrum(&design).unwrap();
        assert_eq!(s.rank(), 40);
        for salt in 0..10 {
            let p = probe(96, salt);
            let direct = design.apply(&design.apply_transpose(&p));
            let via = s.apply_covariance(&p);
            let norm = direct.iter().map(|x| x * x).sum::<f64>().sqrt();
            let err = direct.iter().zip(&via).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-8 * norm, "err {err:e}");
            let back = s.project(&s.lift(&s.project(&p)));
            let once = s.project(&p);
            for (a, b) in back.iter().zip(&once) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        assert!((s.q() - design.normalized_trace()).abs() < 1e-12);
    }

    #[test]
    fn dense_cap_is_enforced() {
        let design = generate_gaussian_design(64, 32, 3).unwrap();
        assert!(matches!(
            spectrum_with_cap(&design, 32),
            Err(Error::DenseCapExceeded { n: 64, cap: 32 })
        ));
    }

    #[test]
    fn identity_covariance_has_flat_r_transform() {
        let s = SpectralData::from_eigenvalues(vec![1.0; 50]).unwrap();
        for &omega in &[-0.9, -0.5, -0.1, -1e-3] {
            let (r, rp) = s.green_inverse_and_rprime(omega).unwrap();
            assert!((r - 1.0).abs() < 1e-12, "R = {r}");
            assert!(rp.abs() < 1e-9, "R' = {rp}");
        }
        assert!(s.green_inverse_and_rprime(-1.0).is_err());
        assert!(s.green_inverse_and_rprime(0.0).is_err());
    }

    #[test]
    fn green_inverse_round_trip() {
        let s = SpectralData::from_eigenvalues((1..=40).map(|i| i as f64 / 7.0).chain([0.0; 10]).collect()).unwrap();
        for &chi in &[0.05, 0.3, 1.0, 2.0] {
            if chi >= s.q() {
                continue;
            }
            let lambda = s.solve_lambda(chi).unwrap();
            assert!((s.green(-lambda) + chi).abs() < 1e-12);
            // R′ against a centred difference of R.
            let h = 1e-5;
            let rp = s.green_inverse_and_rprime(-chi).unwrap().1;
            let fd = (s.r_transform(chi - h).unwrap() - s.r_transform(chi + h).unwrap()) / (2.0 * h);
            assert!((rp - fd).abs() < 1e-6 * rp.abs().max(1.0), "{rp} vs {fd}");
        }
    }

    #[test]
    fn hadamard_a_at_fixed_point() {
        let design = generate_hadamard_design(64, 32, 2).unwrap();
        let s = Arc::new(spectrum(&design).unwrap());
        let lambda = 0.7;
        let chi = s.g1(lambda);
        assert!((chi - 0.5 / 1.7).abs() < 1e-15);
        let a = build_a(s.clone(), chi, lambda).unwrap();
        for (i, ev) in a.eigenvalues().iter().enumerate() {
            let expect = if i < 32 { 1.0 } else { -1.0 };
            assert!((ev - expect).abs() < 1e-14);
        }
        assert!(a.normalized_trace().abs() < 1e-14);
        assert!((a.sigma_a_sq() - 1.0).abs() < 1e-14);
        // σ_A² through R′(−χ).
        let rp = s.green_inverse_and_rprime(-chi).unwrap().1;
        let x = chi * chi * rp;
        assert!((x / (1.0 - x) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn matrix_free_matches_dense_hadamard_operator() {
        for n in [16usize, 64, 256] {
            let design = generate_hadamard_design(n, n / 2 + 3, 8).unwrap();
            let k = design.n_cols();
            let s = Arc::new(spectrum(&design).unwrap());
            let (chi, lambda) = (0.31, 0.9);
            let a = build_a(s, chi, lambda).unwrap();
            let dense = a.to_dense();
            let c = 1.0 / (chi * (lambda + 1.0));
            for i in 0..n {
                for j in 0..n {
                    let xx: f64 = (0..k).map(|l| design.entry(i, l) * design.entry(j, l)).sum();
                    let expect = c * xx - if i == j { 1.0 } else { 0.0 };
                    assert!((dense[i * n + j] - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn dense_a_is_symmetric_and_counts_flops() {
        let design = generate_gaussian_design(64, 32, 5).unwrap();
        let s = Arc::new(spectrum(&design).unwrap());
        let lambda = 1.1;
        let a = build_a(s.clone(), s.g1(lambda), lambda).unwrap();
        assert!(a.normalized_trace().abs() < 1e-12);
        let p = probe(64, 1);
        let q = probe(64, 2);
        let lhs: f64 = a.apply(&p).iter().zip(&q).map(|(x, y)| x * y).sum();
        let rhs: f64 = a.apply(&q).iter().zip(&p).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() < 1e-12);
        assert_eq!(a.flop_count(), 2 * a.flops_per_apply());
        let direct = s.sigma_a_sq(a.chi(), lambda);
        let spec: f64 = a.eigenvalues().iter().map(|x| x * x).sum::<f64>() / 64.0;
        assert!((direct - spec).abs() < 1e-14);
    }

    #[test]
    fn eigenvalue_csv_has_header() {
        let s = SpectralData::from_eigenvalues(vec![2.0, 1.0, 0.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eig.csv");
        s.write_eigenvalues_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# n=3,k=2,kind=supplied"));
        assert_eq!(lines.len(), 5);
    }
}
