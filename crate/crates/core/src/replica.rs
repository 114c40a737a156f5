//! Static fixed point `(χ, λ, ν)` of the replica-symmetric theory.
//!
//! The three equations solved here are
//!
//! ```text
//! χ = E[m′_ν(ρ, y)]          under p_rs(θ, y, ρ) = N(θ|0,q) p(y|θ) N(ρ|κθ, κ)
//! λ = 1/χ − ν
//! ν = (1/N Σ d/(λd + 1))⁻¹ − λ
//! ```
//!
//! with `κ = ν − 1/q`. The last two together say `ν = R(−χ)`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field::SingleField;
use crate::likelihood::LikelihoodModel;
use crate::quadrature::{NormalRule, QuadratureSpec};
use crate::spectral::SpectralData;

/// Converged static order parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaSolution {
    pub chi: f64,
    pub lambda: f64,
    pub nu: f64,
    pub kappa: f64,
    pub q: f64,
    pub sigma_a_sq: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Expectations under the replica-symmetric measure.
#[derive(Debug, Clone, Copy)]
pub struct RsMeasure<'a> {
    q: f64,
    kappa: f64,
    nu: f64,
    model: &'a LikelihoodModel,
    rule: &'a NormalRule,
}

impl<'a> RsMeasure<'a> {
    /// `κ = 0` is accepted: the field is then identically zero, which is the
    /// exact measure for a flat spectrum.
    pub fn new(
        q: f64,
        kappa: f64,
        nu: f64,
        model: &'a LikelihoodModel,
        rule: &'a NormalRule,
    ) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("q = {q:e} must be positive")));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kappa = {kappa:e}: replica-symmetric measure undefined"
            )));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(format!("nu = {nu:e} must be positive")));
        }
        Ok(Self { q, kappa, nu, model, rule })
    }

    pub fn from_solution(
        sol: &ReplicaSolution,
        model: &'a LikelihoodModel,
        rule: &'a NormalRule,
    ) -> Result<Self> {
        Self::new(sol.q, sol.kappa.max(0.0), sol.nu, model, rule)
    }

    pub fn field(&self) -> SingleField {
        SingleField::replica(self.q, self.kappa)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn model(&self) -> &LikelihoodModel {
        self.model
    }

    pub fn rule(&self) -> &NormalRule {
        self.rule
    }

    /// `E[g(ρ, y)]`.
    pub fn expect(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        self.field().expect(self.model, self.rule, g)
    }

    /// `E[θ g(ρ, y)]`.
    pub fn expect_theta(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        self.field().expect_theta(self.model, self.rule, g)
    }

    /// `E[m′_ν]`.
    pub fn mean_m_prime(&self) -> f64 {
        let (model, nu) = (self.model, self.nu);
        self.expect(|rho, y| model.moments_unchecked(rho, y, nu).m_prime)
    }

    /// `E[m′_ν²]`.
    pub fn mean_m_prime_sq(&self) -> f64 {
        let (model, nu) = (self.model, self.nu);
        self.expect(|rho, y| model.moments_unchecked(rho, y, nu).m_prime.powi(2))
    }
}

/// Parameters of the replica measure, for one-off expectations.
#[derive(Debug, Clone, Copy)]
pub struct RsParams {
    pub chi: f64,
    pub nu: f64,
    pub kappa: f64,
    pub q: f64,
}

/// `E[g(ρ, y)]` under `p_rs`.
pub fn rs_expectation(
    g: impl Fn(f64, f64) -> f64,
    params: RsParams,
    model: &LikelihoodModel,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let rule = quad.rule()?;
    Ok(RsMeasure::new(params.q, params.kappa, params.nu, model, &rule)?.expect(g))
}

/// One of the three fixed-point equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Update {
    Chi,
    Lambda,
    Nu,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Weight kept on the previous `ν` in the damped update.
    pub damping: f64,
    /// Relative change below which the iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Sweep order; any permutation of the three equations.
    pub order: [Update; 3],
    /// Starting `(χ, ν)`; defaults to `(q/2, 1/q + 1)`.
    pub init: Option<(f64, f64)>,
    /// Iterations without a new best residual before the step is halved.
    pub stall_window: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-12,
            max_iter: 10_000,
            order: [Update::Chi, Update::Lambda, Update::Nu],
            init: None,
            stall_window: 100,
        }
    }
}

/// Damped Gauss-Seidel iteration of the three equations.
pub fn solve_replica(
    spectral: &SpectralData,
    model: &LikelihoodModel,
    quad: &QuadratureSpec,
    options: &SolverOptions,
) -> Result<ReplicaSolution> {
    let rule = quad.rule()?;
    solve_with_rule(spectral, model, &rule, options)
}

pub(crate) fn solve_with_rule(
    spectral: &SpectralData,
    model: &LikelihoodModel,
    rule: &NormalRule,
    options: &SolverOptions,
) -> Result<ReplicaSolution> {
    check_options(options)?;
    let q = spectral.q();
    if !(q > 0.0) {
        return Err(Error::InvalidParameter("spectrum has q = 0".into()));
    }
    let (mut chi, mut nu) = options.init.unwrap_or((0.5 * q, 1.0 / q + 1.0));
    let mut lambda = 1.0 / chi - nu;
    let mut step = 1.0 - options.damping;
    let mut halved = false;
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let mut trace = String::new();

    for iter in 1..=options.max_iter {
        let (chi0, lambda0, nu0) = (chi, lambda, nu);
        for update in options.order {
            match update {
                Update::Chi => {
                    let kappa = nu - 1.0 / q;
                    if kappa < -options.tol * nu.abs().max(1.0) {
                        return Err(domain(iter, format!("kappa = {kappa:e}"), &trace));
                    }
                    let measure = RsMeasure::new(q, kappa.max(0.0), nu, model, rule)
                        .map_err(|e| domain(iter, e.to_string(), &trace))?;
                    chi = measure.mean_m_prime();
                    if !(chi > 0.0 && chi < q) {
                        return Err(domain(iter, format!("chi = {chi:e} outside (0, {q:e})"), &trace));
                    }
                }
                Update::Lambda => lambda = 1.0 / chi - nu,
                Update::Nu => {
                    let g1 = spectral.g1(lambda);
                    if !(g1 > 0.0) || !g1.is_finite() {
                        return Err(domain(iter, format!("g1({lambda:e}) = {g1:e}"), &trace));
                    }
                    nu += step * (1.0 / g1 - lambda - nu);
                }
            }
        }
        if ![chi, lambda, nu].iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { step: iter });
        }
        let change = rel(chi, chi0).max(rel(lambda, lambda0)).max(rel(nu, nu0));
        if trace.len() < 4096 {
            let _ = writeln!(trace, "  {iter}: chi={chi:e} lambda={lambda:e} nu={nu:e} change={change:e}");
        }
        if change < options.tol {
            return finish(spectral, model, rule, chi, nu, iter);
        }
        if change < best {
            best = change;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= options.stall_window {
                if halved {
                    return Err(Error::NoConvergence(format!(
                        "residual stalled at {best:e} after {iter} iterations (step already halved)"
                    )));
                }
                halved = true;
                step *= 0.5;
                since_best = 0;
            }
        }
    }
    Err(Error::NoConvergence(format!(
        "no convergence within {} iterations (best change {best:e})",
        options.max_iter
    )))
}

fn check_options(o: &SolverOptions) -> Result<()> {
    if !(0.0..1.0).contains(&o.damping) {
        return Err(Error::InvalidParameter(format!("damping {} not in [0, 1)", o.damping)));
    }
    if !(o.tol > 0.0) || o.max_iter == 0 {
        return Err(Error::InvalidParameter("tol must be positive, max_iter nonzero".into()));
    }
    let mut seen = [false; 3];
    for u in o.order {
        seen[u as usize] = true;
    }
    if seen != [true; 3] {
        return Err(Error::InvalidParameter("update order must be a permutation".into()));
    }
    Ok(())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1.0)
}

fn domain(iteration: usize, detail: String, trace: &str) -> Error {
    Error::Domain {
        iteration,
        detail: format!("{detail}\n recent iterates:\n{trace}"),
    }
}

/// Re-evaluates all three equations at the final `(χ, ν)` and records the
/// largest relative defect.
fn finish(
    spectral: &SpectralData,
    model: &LikelihoodModel,
    rule: &NormalRule,
    chi: f64,
    nu: f64,
    iterations: usize,
) -> Result<ReplicaSolution> {
    let q = spectral.q();
    let lambda = 1.0 / chi - nu;
    let kappa = nu - 1.0 / q;
    let chi_eq = RsMeasure::new(q, kappa.max(0.0), nu, model, rule)?.mean_m_prime();
    let nu_eq = 1.0 / spectral.g1(lambda) - lambda;
    let residual = rel(chi_eq, chi).max(rel(nu_eq, nu));
    Ok(ReplicaSolution {
        chi,
        lambda,
        nu,
        kappa,
        q,
        sigma_a_sq: spectral.sigma_a_sq(chi, lambda),
        residual,
        iterations,
    })
}

/// Outcome of damped restarts from spread initializations.
#[derive(Debug, Clone)]
pub struct MultistartReport {
    pub solutions: Vec<ReplicaSolution>,
    pub failures: Vec<String>,
    /// Solutions that differ in `χ` by more than `1e-8` relative.
    pub distinct: Vec<ReplicaSolution>,
}

pub fn solve_replica_multistart(
    spectral: &SpectralData,
    model: &LikelihoodModel,
    quad: &QuadratureSpec,
    options: &SolverOptions,
) -> Result<MultistartReport> {
    let rule = quad.rule()?;
    let q = spectral.q();
    let starts = [(0.5, 1.0), (0.1, 0.1), (0.9, 10.0), (0.25, 3.0), (0.75, 0.3)];
    let mut solutions = Vec::new();
    let mut failures = Vec::new();
    for (frac, excess) in starts {
        let opts = SolverOptions {
            init: Some((frac * q, 1.0 / q + excess)),
            ..options.clone()
        };
        match solve_with_rule(spectral, model, &rule, &opts) {
            Ok(s) => solutions.push(s),
            Err(e) => failures.push(e.to_string()),
        }
    }
    let mut distinct: Vec<ReplicaSolution> = Vec::new();
    for s in &solutions {
        if distinct.iter().all(|d| rel(d.chi, s.chi) > 1e-8) {
            distinct.push(*s);
        }
    }
    Ok(MultistartReport {
        solutions,
        failures,
        distinct,
    })
}

impl ReplicaSolution {
    pub fn to_kv(&self) -> String {
        format!(
            "chi={}\nlambda={}\nnu={}\nkappa={}\nq={}\nsigma_A_sq={}\nresidual={}\niterations={}\n",
            self.chi, self.lambda, self.nu, self.kappa, self.q, self.sigma_a_sq, self.residual, self.iterations
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let map = crate::harness::config::parse_kv(text)?;
        let get = |k: &str| -> Result<f64> {
            map.get(k)
                .ok_or_else(|| Error::Parse(format!("missing key '{k}'")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{k}: {e}")))
        };
        Ok(Self {
            chi: get("chi")?,
            lambda: get("lambda")?,
            nu: get("nu")?,
            kappa: get("kappa")?,
            q: get("q")?,
            sigma_a_sq: get("sigma_A_sq")?,
            residual: get("residual")?,
            iterations: get("iterations")? as usize,
        })
    }
}
