//! Aggregation across seeds, threshold checks, and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, Stage, StageExt};

use super::config::ExperimentConfig;
use super::metrics::{capped_db, db_label, spread, to_db, RseMatrix, Spread};
use super::pipeline::{SeedReport, SeedRun};

/// One acceptance threshold of the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub rule: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedReport>,
    /// Elementwise median and quartiles of `rse` across seeds.
    pub rse_median: RseMatrix,
    pub rse_q1: RseMatrix,
    pub rse_q3: RseMatrix,
    pub rse_window_max: f64,
    pub rate_slope: Spread,
    pub ln_mu_rho: Spread,
    pub rate_rel_gap: Spread,
    pub tap_residual: Spread,
    pub vamp_tap_residual: Spread,
    pub fixed_point_rms: Spread,
    pub at_margin: Spread,
    pub at_margin_min: f64,
    pub self_avg_gap: Spread,
    pub checks: Vec<Check>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Aggregates per-seed reports and evaluates the configured thresholds.
pub fn aggregate(config: &ExperimentConfig, seeds: Vec<SeedReport>) -> Result<ComparisonReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("no seed reports to aggregate".into()));
    }
    let size = seeds[0].rse.size();
    let cells = size * size;
    let mut med = Vec::with_capacity(cells);
    let mut q1 = Vec::with_capacity(cells);
    let mut q3 = Vec::with_capacity(cells);
    for k in 0..cells {
        let col: Vec<f64> = seeds.iter().map(|s| s.rse.values()[k]).collect();
        let sp = spread(&col);
        med.push(sp.median);
        q1.push(sp.q1);
        q3.push(sp.q3);
    }
    let rse_median = RseMatrix::from_values(size, med)?;
    let rse_window_max = rse_median.max_in_window(config.tolerances.rse_window);
    let of = |f: &dyn Fn(&SeedReport) -> f64| spread(&seeds.iter().map(f).collect::<Vec<_>>());
    let nan = f64::NAN;
    let rate_slope = of(&|s| s.rate_fit.map_or(nan, |f| f.slope));
    let ln_mu_rho = of(&|s| s.mu_rho.ln());
    let rate_rel_gap = of(&|s| s.rate_rel_gap);
    let tap_residual = of(&|s| s.tap_residual);
    let vamp_tap_residual = of(&|s| s.vamp.map_or(nan, |v| v.tap_residual));
    let fixed_point_rms = of(&|s| s.vamp.map_or(nan, |v| v.fixed_point_rms));
    let at_margin = of(&|s| s.at_margin);
    let at_margin_min = seeds.iter().map(|s| s.at_margin).fold(f64::INFINITY, f64::min);
    let self_avg_gap = of(&|s| s.self_avg_gap);

    let tol = &config.tolerances;
    let mut checks = vec![
        Check {
            name: "rse",
            value: rse_window_max,
            threshold: tol.rse_max,
            pass: rse_window_max <= tol.rse_max,
            rule: "max over 1 <= t,s <= window of the seed-median rse",
        },
        Check {
            name: "rate",
            value: rate_rel_gap.median,
            threshold: tol.rate_rel,
            pass: rate_rel_gap.median <= tol.rate_rel,
            rule: "seed-median of |fitted slope - ln mu_rho| / |ln mu_rho|",
        },
        Check {
            name: "at_margin",
            value: at_margin_min,
            threshold: 0.0,
            pass: at_margin_min > 0.0,
            rule: "smallest 1 - E[m'^2] R'(-chi) over seeds, must be positive",
        },
    ];
    if config.vamp {
        let tap = tap_residual.median.max(vamp_tap_residual.median);
        checks.push(Check {
            name: "tap",
            value: tap,
            threshold: tol.tap,
            pass: tap <= tol.tap,
            rule: "larger of the seed-median TAP residuals of both fixed points",
        });
        checks.push(Check {
            name: "equivalence",
            value: fixed_point_rms.median,
            threshold: tol.equivalence,
            pass: fixed_point_rms.median <= tol.equivalence,
            rule: "seed-median RMS between the simplified and VAMP fixed points",
        });
    } else {
        checks.push(Check {
            name: "tap",
            value: tap_residual.median,
            threshold: tol.tap,
            pass: tap_residual.median <= tol.tap,
            rule: "seed-median TAP residual of the simplified fixed point",
        });
    }
    let mc: Vec<_> = seeds.iter().filter_map(|s| s.mc).collect();
    if !mc.is_empty() {
        let z = mc.iter().map(|m| m.max_abs_z.max(m.max_abs_z_propagated)).fold(0.0, f64::max);
        checks.push(Check {
            name: "mc",
            value: z,
            threshold: tol.mc_z,
            pass: z <= tol.mc_z,
            rule: "largest |z| of Monte Carlo C_rho against the recursion",
        });
    }
    Ok(ComparisonReport {
        config: config.clone(),
        seeds,
        rse_median,
        rse_q1: RseMatrix::from_values(size, q1)?,
        rse_q3: RseMatrix::from_values(size, q3)?,
        rse_window_max,
        rate_slope,
        ln_mu_rho,
        rate_rel_gap,
        tap_residual,
        vamp_tap_residual,
        fixed_point_rms,
        at_margin,
        at_margin_min,
        self_avg_gap,
        checks,
    })
}

/// Runs every configured seed (in parallel), aggregates, and writes the
/// experiment-level artifacts and manifest. The Monte Carlo oracle runs on
/// the first seed only; it checks the recursion, not the instance.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ComparisonReport> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let first = config.seeds[0];
    let seeds: Vec<SeedReport> = config
        .seeds
        .par_iter()
        .map(|&seed| SeedRun::open(config, seed)?.run_all(seed == first))
        .collect::<Result<_>>()?;
    let report = aggregate(config, seeds)?;
    write_report(&report, &config.out_dir).stage(Stage::Report)?;
    Ok(report)
}

/// Writes `config.kv`, `report.kv`, `rse_median.csv`, `seeds.csv`,
/// `summary.txt` and finally `manifest.csv`.
pub fn write_report(report: &ComparisonReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.kv"), report.config.to_kv())?;
    std::fs::write(dir.join("report.kv"), report_kv(report))?;
    write_rse_median(report, &dir.join("rse_median.csv"))?;
    write_seeds_csv(report, &dir.join("seeds.csv"))?;
    std::fs::write(dir.join("summary.txt"), summary_text(report))?;
    write_manifest(dir)?;
    Ok(())
}

fn fmt_spread(s: &Spread) -> String {
    format!("{:e},{:e},{:e}", s.median, s.q1, s.q3)
}

/// Flat `key = value` report; spreads are `median,q1,q3`.
pub fn report_kv(r: &ComparisonReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "name = {}", r.config.name);
    let _ = writeln!(s, "seeds = {}", r.seeds.len());
    let _ = writeln!(s, "rse_window = {}", r.config.tolerances.rse_window);
    let _ = writeln!(s, "rse_window_max = {:e}", r.rse_window_max);
    let _ = writeln!(s, "rse_window_min_db = {}", db_label(to_db(r.rse_window_max)));
    let _ = writeln!(s, "rate_slope = {}", fmt_spread(&r.rate_slope));
    let _ = writeln!(s, "ln_mu_rho = {}", fmt_spread(&r.ln_mu_rho));
    let _ = writeln!(s, "rate_rel_gap = {}", fmt_spread(&r.rate_rel_gap));
    let _ = writeln!(s, "tap_residual = {}", fmt_spread(&r.tap_residual));
    let _ = writeln!(s, "vamp_tap_residual = {}", fmt_spread(&r.vamp_tap_residual));
    let _ = writeln!(s, "fixed_point_rms = {}", fmt_spread(&r.fixed_point_rms));
    let _ = writeln!(s, "at_margin = {}", fmt_spread(&r.at_margin));
    let _ = writeln!(s, "at_margin_min = {:e}", r.at_margin_min);
    let _ = writeln!(s, "self_avg_gap = {}", fmt_spread(&r.self_avg_gap));
    for c in &r.checks {
        let _ = writeln!(
            s,
            "check.{} = {},{:e},{:e}",
            c.name,
            if c.pass { "pass" } else { "fail" },
            c.value,
            c.threshold
        );
    }
    let _ = writeln!(s, "passed = {}", r.passed());
    s
}

fn write_rse_median(r: &ComparisonReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "s", "rse_median", "rse_q1", "rse_q3", "rse_db"])?;
    let n = r.rse_median.size();
    for i in 0..n {
        for j in 0..n {
            let cell = |m: &RseMatrix| m.get(i, j).map_or_else(|| "flagged".to_string(), |v| format!("{v:e}"));
            let db = r.rse_median.db(i, j).map_or_else(|| "flagged".to_string(), db_label);
            w.write_record([
                (i + 1).to_string(),
                (j + 1).to_string(),
                cell(&r.rse_median),
                cell(&r.rse_q1),
                cell(&r.rse_q3),
                db,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_seeds_csv(r: &ComparisonReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "seed",
        "chi",
        "nu",
        "mu_rho",
        "at_margin",
        "rse_window_max",
        "rate_slope",
        "rate_rel_gap",
        "rate_truncated",
        "converged_at",
        "tap_residual",
        "vamp_tap_residual",
        "fixed_point_rms",
        "self_avg_gap",
    ])?;
    let none = || "none".to_string();
    for s in &r.seeds {
        w.write_record([
            s.seed.to_string(),
            format!("{:e}", s.replica.chi),
            format!("{:e}", s.replica.nu),
            format!("{:e}", s.mu_rho),
            format!("{:e}", s.at_margin),
            format!("{:e}", s.rse_window_max),
            s.rate_fit.map_or_else(none, |f| format!("{:e}", f.slope)),
            format!("{:e}", s.rate_rel_gap),
            s.rate_fit.map_or_else(none, |f| f.truncated.to_string()),
            s.converged_at.map_or_else(none, |t| t.to_string()),
            format!("{:e}", s.tap_residual),
            s.vamp.map_or_else(none, |v| format!("{:e}", v.tap_residual)),
            s.vamp.map_or_else(none, |v| format!("{:e}", v.fixed_point_rms)),
            format!("{:e}", s.self_avg_gap),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable summary; dB values are capped at 300.
pub fn summary_text(r: &ComparisonReport) -> String {
    let c = &r.config;
    let mut s = String::new();
    let _ = writeln!(s, "experiment {}: {} N={} K={} noise_var={}", c.name, c.ensemble.as_str(), c.n, c.k, c.noise_var);
    let _ = writeln!(s, "seeds: {:?}", c.seeds);
    let w = c.tolerances.rse_window.min(r.rse_median.size());
    let _ = writeln!(s, "median rse in dB, 1 <= t,s <= {w}:");
    for i in 0..w {
        let row: Vec<String> = (0..w)
            .map(|j| r.rse_median.db(i, j).map_or_else(|| "   flag".to_string(), |d| format!("{:7.1}", capped_db(d))))
            .collect();
        let _ = writeln!(s, "  {}", row.join(" "));
    }
    let _ = writeln!(
        s,
        "rate: slope {:.4} (IQR {:.4}), ln mu_rho {:.4}, relative gap {:.3}",
        r.rate_slope.median,
        r.rate_slope.iqr(),
        r.ln_mu_rho.median,
        r.rate_rel_gap.median
    );
    let _ = writeln!(s, "AT margin: min {:.4}", r.at_margin_min);
    let _ = writeln!(s, "self-averaging gap max|chi(t) - eta(t)|: {:.3e}", r.self_avg_gap.median);
    let _ = writeln!(
        s,
        "TAP residual: simplified {:.3e}, VAMP {:.3e}; fixed-point RMS {:.3e}",
        r.tap_residual.median, r.vamp_tap_residual.median, r.fixed_point_rms.median
    );
    for ch in &r.checks {
        let _ = writeln!(
            s,
            "{} {:<12} {:.3e} vs {:.3e}  ({})",
            if ch.pass { "PASS" } else { "FAIL" },
            ch.name,
            ch.value,
            ch.threshold,
            ch.rule
        );
    }
    s
}

pub const MANIFEST: &str = "manifest.csv";

/// Lists every file under `dir` (except the manifest) with its size and
/// SHA-256, sorted by relative path.
pub fn write_manifest(dir: &Path) -> Result<()> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.retain(|p| p.as_path() != Path::new(MANIFEST));
    files.sort();
    let mut w = csv::Writer::from_path(dir.join(MANIFEST))?;
    w.write_record(["path", "bytes", "sha256"])?;
    for rel in files {
        let bytes = std::fs::read(dir.join(&rel))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        let name = rel.to_string_lossy().replace('\\', "/");
        w.write_record([name, bytes.len().to_string(), digest])?;
    }
    w.flush()?;
    Ok(())
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("walk stays under root").to_path_buf());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::DesignKind;

    fn small(dir: &Path, ensemble: DesignKind) -> ExperimentConfig {
        let mut c = super::super::config::preset("fig1-desk").unwrap();
        c.name = "small".into();
        c.ensemble = ensemble;
        c.n = 256;
        c.k = 128;
        c.horizon = 6;
        c.run_steps = 60;
        c.seeds = vec![3, 4];
        c.mc_samples = 4000;
        c.mc_horizon = 3;
        c.out_dir = dir.to_path_buf();
        c
    }

    fn manifest(dir: &Path) -> String {
        std::fs::read_to_string(dir.join(MANIFEST)).unwrap()
    }

    #[test]
    fn reruns_are_byte_identical() {
        let d = tempfile::tempdir().unwrap();
        let cfg = small(&d.path().join("run"), DesignKind::Hadamard);
        let ra = run_experiment(&cfg).unwrap();
        let ma = manifest(&cfg.out_dir);
        std::fs::remove_dir_all(&cfg.out_dir).unwrap();
        let rb = run_experiment(&cfg).unwrap();
        assert_eq!(ra.seeds, rb.seeds);
        assert_eq!(ma, manifest(&cfg.out_dir));
        assert!(ma.contains("seed-3/c_rho.csv"));
        assert!(ra.checks.iter().any(|c| c.name == "mc"));
        assert!(ra.seeds[1].mc.is_none());
    }

    #[test]
    fn cached_stages_reproduce_the_report() {
        let d = tempfile::tempdir().unwrap();
        let cfg = small(d.path(), DesignKind::Gaussian);
        let first = run_experiment(&cfg).unwrap();
        let m1 = manifest(d.path());
        let second = run_experiment(&cfg).unwrap();
        assert_eq!(first.seeds, second.seeds);
        assert_eq!(m1, manifest(d.path()));

        // A changed configuration must not reuse stale artifacts.
        let mut other = cfg.clone();
        other.noise_var = 0.1;
        let third = run_experiment(&other).unwrap();
        assert_ne!(first.seeds[0].replica.chi, third.seeds[0].replica.chi);
    }

    #[test]
    fn horizon_one_is_supported() {
        let d = tempfile::tempdir().unwrap();
        let mut cfg = small(d.path(), DesignKind::Gaussian);
        cfg.horizon = 1;
        cfg.tolerances.rse_window = 1;
        cfg.mc_horizon = 1;
        cfg.seeds = vec![7];
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.rse_median.size(), 1);
        assert!(r.at_margin_min > 0.0);
        let text = std::fs::read_to_string(d.path().join("report.kv")).unwrap();
        assert!(text.contains("check.at_margin = pass"));
    }
}
