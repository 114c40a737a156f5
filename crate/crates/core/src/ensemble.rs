//! Teacher problem instances.
//!
//! Two design models are supported: a dense matrix with i.i.d. `N(0, 1/N)`
//! entries, and a column-orthonormal randomly-signed Hadamard matrix
//! `X = (1/√N) Z H_N P` applied matrix-free through the FWHT. The `K`
//! Walsh columns kept by `P` are drawn at random: keeping the leading `K`
//! columns of the Sylvester matrix would repeat every row `N/K` times when
//! `N/K` is a power of two, and the row-side `Z` alone cannot break that. Labels follow
//! `y = sign(Xw + ε)` with `w ~ N(0, I_K)` and `ε ~ N(0, σ₀² I_N)`.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fwht::fwht_in_place;
use crate::likelihood::{LikelihoodKind, LikelihoodModel};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DesignKind {
    Gaussian,
    Hadamard,
}

impl DesignKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DesignKind::Gaussian => "gaussian",
            DesignKind::Hadamard => "hadamard",
        }
    }
}

impl std::str::FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" | "dense" => Ok(DesignKind::Gaussian),
            "hadamard" | "signed-hadamard" => Ok(DesignKind::Hadamard),
            other => Err(Error::Parse(format!("unknown ensemble '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Payload {
    /// Row-major `N × K` entries.
    Dense(Vec<f64>),
    /// `Z_{ij} = signs[i] δ_{i, perm[j]}`; column `j` of `X` is Walsh
    /// column `cols[j]` of `H_N`.
    Hadamard {
        signs: Vec<f64>,
        perm: Vec<usize>,
        cols: Vec<usize>,
    },
}

/// An `N × K` data matrix, `N ≥ K`.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    n_rows: usize,
    n_cols: usize,
    seed: u64,
    payload: Payload,
}

pub fn generate_gaussian_design(n: usize, k: usize, seed: u64) -> Result<DesignMatrix> {
    check_dims(n, k)?;
    let mut rng = stream_rng(seed, Stream::DesignEntries);
    let sd = 1.0 / (n as f64).sqrt();
    let entries = (0..n * k)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect();
    Ok(DesignMatrix {
        n_rows: n,
        n_cols: k,
        seed,
        payload: Payload::Dense(entries),
    })
}

pub fn generate_hadamard_design(n: usize, k: usize, seed: u64) -> Result<DesignMatrix> {
    check_dims(n, k)?;
    if !n.is_power_of_two() {
        return Err(Error::InvalidDimensions(format!(
            "Hadamard design needs N to be a power of two, got {n}"
        )));
    }
    let mut sign_rng = stream_rng(seed, Stream::HadamardSigns);
    let signs = (0..n)
        .map(|_| if sign_rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream_rng(seed, Stream::HadamardPermutation));
    let mut cols: Vec<usize> = (0..n).collect();
    cols.shuffle(&mut stream_rng(seed, Stream::HadamardColumns));
    cols.truncate(k);
    Ok(DesignMatrix {
        n_rows: n,
        n_cols: k,
        seed,
        payload: Payload::Hadamard { signs, perm, cols },
    })
}

pub fn generate_design(kind: DesignKind, n: usize, k: usize, seed: u64) -> Result<DesignMatrix> {
    match kind {
        DesignKind::Gaussian => generate_gaussian_design(n, k, seed),
        DesignKind::Hadamard => generate_hadamard_design(n, k, seed),
    }
}

fn check_dims(n: usize, k: usize) -> Result<()> {
    if k == 0 || n < k {
        return Err(Error::InvalidDimensions(format!(
            "need N >= K >= 1, got N = {n}, K = {k}"
        )));
    }
    Ok(())
}

impl DesignMatrix {
    pub fn kind(&self) -> DesignKind {
        match self.payload {
            Payload::Dense(_) => DesignKind::Gaussian,
            Payload::Hadamard { .. } => DesignKind::Hadamard,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major entries of the dense kind.
    pub fn dense_entries(&self) -> Option<&[f64]> {
        match &self.payload {
            Payload::Dense(e) => Some(e),
            Payload::Hadamard { .. } => None,
        }
    }

    /// `X w` (length `N`).
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.n_cols, "apply: wrong input length");
        match &self.payload {
            Payload::Dense(entries) => entries
                .par_chunks(self.n_cols)
                .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum())
                .collect(),
            Payload::Hadamard { signs, perm, cols } => {
                let mut buf = vec![0.0; self.n_rows];
                for (&c, &wj) in cols.iter().zip(w) {
                    buf[c] = wj;
                }
                fwht_in_place(&mut buf);
                let scale = 1.0 / (self.n_rows as f64).sqrt();
                let mut out = vec![0.0; self.n_rows];
                for (j, &row) in perm.iter().enumerate() {
                    out[row] = signs[row] * buf[j] * scale;
                }
                out
            }
        }
    }

    /// `Xᵀ v` (length `K`).
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_rows, "apply_transpose: wrong input length");
        match &self.payload {
            Payload::Dense(entries) => {
                let k = self.n_cols;
                // Column blocks keep the reduction order fixed for any thread count.
                const BLOCK: usize = 64;
                let mut out = vec![0.0; k];
                out.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
                    let len = chunk.len();
                    let c0 = b * BLOCK;
                    for (row, &vi) in entries.chunks(k).zip(v) {
                        for (o, a) in chunk.iter_mut().zip(&row[c0..c0 + len]) {
                            *o += a * vi;
                        }
                    }
                });
                out
            }
            Payload::Hadamard { signs, perm, cols } => {
                let mut buf: Vec<f64> = perm.iter().map(|&row| signs[row] * v[row]).collect();
                fwht_in_place(&mut buf);
                let scale = 1.0 / (self.n_rows as f64).sqrt();
                cols.iter().map(|&c| buf[c] * scale).collect()
            }
        }
    }

    /// Entry `X_{ij}`. For the Hadamard kind this is `±1/√N`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.payload {
            Payload::Dense(e) => e[i * self.n_cols + j],
            Payload::Hadamard { signs, perm, cols } => {
                // (Z H)_{i, c} = ε_i H_{σ⁻¹(i), c}
                let src = perm.iter().position(|&r| r == i).expect("permutation");
                signs[i] * crate::fwht::hadamard_entry(src, cols[j]) / (self.n_rows as f64).sqrt()
            }
        }
    }

    /// `tr(X Xᵀ) / N`.
    pub fn normalized_trace(&self) -> f64 {
        match &self.payload {
            Payload::Dense(e) => e.iter().map(|x| x * x).sum::<f64>() / self.n_rows as f64,
            Payload::Hadamard { .. } => self.n_cols as f64 / self.n_rows as f64,
        }
    }

    /// Approximate multiply-adds for one `apply` or `apply_transpose`.
    pub fn flops_per_apply(&self) -> u64 {
        let n = self.n_rows as u64;
        match self.payload {
            Payload::Dense(_) => n * self.n_cols as u64,
            Payload::Hadamard { .. } => n * (n.trailing_zeros() as u64) + 2 * n,
        }
    }
}

/// One sampled teacher problem.
#[derive(Debug, Clone)]
pub struct TeacherInstance {
    pub design: DesignMatrix,
    pub w: Vec<f64>,
    pub theta: Vec<f64>,
    pub model: LikelihoodModel,
    pub y: Vec<f64>,
    pub seed: u64,
}

impl TeacherInstance {
    pub fn n(&self) -> usize {
        self.design.n_rows()
    }

    pub fn k(&self) -> usize {
        self.design.n_cols()
    }

    pub fn noise_var(&self) -> f64 {
        self.model.noise_var()
    }
}

/// Probit teacher: `y = sign(Xw + ε)`, `sign(0) = +1`.
pub fn generate_teacher(design: DesignMatrix, noise_var: f64, seed: u64) -> Result<TeacherInstance> {
    generate_teacher_with(design, LikelihoodModel::probit(noise_var)?, seed)
}

/// Teacher for either likelihood. The Gaussian kind observes `y = θ + ε`.
pub fn generate_teacher_with(
    design: DesignMatrix,
    model: LikelihoodModel,
    seed: u64,
) -> Result<TeacherInstance> {
    let k = design.n_cols();
    let n = design.n_rows();
    let mut w_rng = stream_rng(seed, Stream::TeacherWeights);
    let w: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut w_rng)).collect();
    let theta = design.apply(&w);
    let mut eps_rng = stream_rng(seed, Stream::LabelNoise);
    let sd = model.noise_var().sqrt();
    let y = theta
        .iter()
        .map(|&t| {
            let e: f64 = StandardNormal.sample(&mut eps_rng);
            let obs = t + sd * e;
            match model.kind() {
                LikelihoodKind::Probit => {
                    if obs >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                LikelihoodKind::Gaussian => obs,
            }
        })
        .collect::<Vec<_>>();
    debug_assert_eq!(y.len(), n);
    Ok(TeacherInstance {
        design,
        w,
        theta,
        model,
        y,
        seed,
    })
}

const INSTANCE_MAGIC: &str = "# memfree-instance v1";

/// Writes the instance container:
///
/// ```text
/// # memfree-instance v1
/// kind,n,k,design_seed,teacher_seed,likelihood,noise_var
/// gaussian,4096,2048,7,7,probit,0.01
/// field,index,value
/// w,0,0.3312...
/// y,0,1
/// ```
///
/// The design itself is not stored; it is regenerated from its seed.
pub fn write_instance_csv(teacher: &TeacherInstance, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{INSTANCE_MAGIC}")?;
    writeln!(out, "kind,n,k,design_seed,teacher_seed,likelihood,noise_var")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{:e}",
        teacher.design.kind().as_str(),
        teacher.n(),
        teacher.k(),
        teacher.design.seed(),
        teacher.seed,
        teacher.model.kind().as_str(),
        teacher.model.noise_var()
    )?;
    writeln!(out, "field,index,value")?;
    for (i, w) in teacher.w.iter().enumerate() {
        writeln!(out, "w,{i},{w:e}")?;
    }
    for (i, y) in teacher.y.iter().enumerate() {
        writeln!(out, "y,{i},{y:e}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads an instance container and regenerates the design from its seed.
pub fn read_instance_csv(path: &Path) -> Result<TeacherInstance> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines();
    let magic = lines.next().transpose()?.unwrap_or_default();
    if magic.trim() != INSTANCE_MAGIC {
        return Err(Error::Parse(format!("{}: not an instance file", path.display())));
    }
    let _header = lines.next().transpose()?;
    let meta = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Parse("missing instance metadata".into()))?;
    let fields: Vec<&str> = meta.split(',').collect();
    if fields.len() != 7 {
        return Err(Error::Parse(format!("bad instance metadata '{meta}'")));
    }
    let parse_u = |s: &str| s.parse::<u64>().map_err(|e| Error::Parse(e.to_string()));
    let kind: DesignKind = fields[0].parse()?;
    let n = parse_u(fields[1])? as usize;
    let k = parse_u(fields[2])? as usize;
    let design_seed = parse_u(fields[3])?;
    let teacher_seed = parse_u(fields[4])?;
    let lik: LikelihoodKind = fields[5].parse()?;
    let noise_var: f64 = fields[6].parse().map_err(|e: std::num::ParseFloatError| Error::Parse(e.to_string()))?;
    let _ = lines.next();
    let mut w = vec![f64::NAN; k];
    let mut y = vec![f64::NAN; n];
    for line in lines {
        let line = line?;
        let mut parts = line.split(',');
        let (Some(field), Some(idx), Some(val)) = (parts.next(), parts.next(), parts.next()) else {
            continue;
        };
        let idx: usize = idx.parse().map_err(|_| Error::Parse(format!("bad index in '{line}'")))?;
        let val: f64 = val.parse().map_err(|_| Error::Parse(format!("bad value in '{line}'")))?;
        match field {
            "w" if idx < k => w[idx] = val,
            "y" if idx < n => y[idx] = val,
            _ => return Err(Error::Parse(format!("unexpected record '{line}'"))),
        }
    }
    if w.iter().chain(&y).any(|v| v.is_nan()) {
        return Err(Error::Parse("instance payload incomplete".into()));
    }
    let design = generate_design(kind, n, k, design_seed)?;
    let theta = design.apply(&w);
    Ok(TeacherInstance {
        design,
        w,
        theta,
        model: LikelihoodModel::new(lik, noise_var)?,
        y,
        seed: teacher_seed,
    })
}
