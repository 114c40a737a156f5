use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use memfree::harness::config::ExperimentConfig;
use memfree::harness::pipeline::SeedRun;
use memfree::harness::report::{run_experiment, summary_text, write_manifest};
use memfree::harness::preset;

#[derive(Parser)]
#[command(name = "memfree", version, about = "Memory-free inference experiments")]
struct Cli {
    /// Configuration file (`key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in scenario; ignored when --config is given.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Run this seed only.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set n=1024`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the design and teacher instance.
    Generate,
    /// Solve the static fixed point for the instance spectrum.
    Replica,
    /// Run the simplified algorithm.
    Run,
    /// Run VAMP.
    RunVamp,
    /// Evaluate the two-time theory recursion.
    Theory,
    /// Sample the single-node process and compare with the recursion.
    McOracle,
    /// Run every stage and compare the simulation with the theory.
    Compare,
    /// Full experiment over all seeds; exits with status 2 if a check fails.
    Report,
    /// Print the resolved configuration.
    Config,
}

fn resolve(cli: &Cli) -> memfree::Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => ExperimentConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| memfree::Error::Parse(format!("--set expects KEY=VALUE, got '{o}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn per_seed(cfg: &ExperimentConfig, f: impl Fn(&SeedRun) -> memfree::Result<String>) -> memfree::Result<()> {
    for &seed in &cfg.seeds {
        let run = SeedRun::open(cfg, seed)?;
        let text = f(&run)?;
        write_manifest(run.dir())?;
        println!("# seed {seed}: {}", run.dir().display());
        print!("{text}");
    }
    Ok(())
}

fn execute(cli: &Cli) -> memfree::Result<bool> {
    let cfg = resolve(cli)?;
    match cli.command {
        Command::Config => print!("{}", cfg.to_kv()),
        Command::Generate => per_seed(&cfg, |r| {
            let t = r.instance()?;
            Ok(format!("n = {}\nk = {}\npositive_labels = {}\n", t.n(), t.k(), t.y.iter().filter(|&&y| y > 0.0).count()))
        })?,
        Command::Replica => per_seed(&cfg, |r| {
            let t = r.instance()?;
            let s = r.spectral(&t)?;
            Ok(r.replica(&s)?.to_kv())
        })?,
        Command::Run => per_seed(&cfg, |r| {
            let t = r.instance()?;
            let s = r.spectral(&t)?;
            let rep = r.replica(&s)?;
            let traj = r.simulate(&s, &t, &rep)?;
            Ok(format!(
                "steps = {}\nconverged_at = {}\nfinal_eta = {:e}\nchi = {:e}\n",
                traj.steps(),
                traj.converged_at.map_or("none".to_string(), |c| c.to_string()),
                traj.eta.last().copied().unwrap_or(f64::NAN),
                rep.chi
            ))
        })?,
        Command::RunVamp => per_seed(&cfg, |r| {
            let t = r.instance()?;
            let s = r.spectral(&t)?;
            let rep = r.replica(&s)?;
            let (traj, _) = r.vamp(&s, &t, &rep)?;
            Ok(format!(
                "steps = {}\nconverged_at = {}\nfinal_nu = {:e}\nreplica_nu = {:e}\n",
                traj.steps(),
                traj.converged_at.map_or("none".to_string(), |c| c.to_string()),
                traj.final_nu,
                rep.nu
            ))
        })?,
        Command::Theory => per_seed(&cfg, |r| {
            let t = r.instance()?;
            let s = r.spectral(&t)?;
            let rep = r.replica(&s)?;
            let th = r.theory(&rep)?;
            Ok(format!(
                "horizon = {}\nmu_rho = {:e}\nat_margin = {:e}\nkappa_T = {:e}\nkappa = {:e}\n",
                cfg.horizon,
                th.mu_rho,
                th.at_margin,
                th.kappa_t.last().copied().unwrap_or(f64::NAN),
                rep.kappa
            ))
        })?,
        Command::McOracle => per_seed(&cfg, |r| {
            let t = r.instance()?;
            let s = r.spectral(&t)?;
            let rep = r.replica(&s)?;
            let m = r.mc(&r.theory(&rep)?)?;
            Ok(format!(
                "samples = {}\nhorizon = {}\nmax_abs_z = {:e}\nmax_abs_z_propagated = {:e}\n",
                m.samples, m.horizon, m.max_abs_z, m.max_abs_z_propagated
            ))
        })?,
        Command::Compare => per_seed(&cfg, |r| Ok(r.run_all(false)?.to_kv()))?,
        Command::Report => {
            let report = run_experiment(&cfg)?;
            print!("{}", summary_text(&report));
            println!("artifacts: {}", cfg.out_dir.display());
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
