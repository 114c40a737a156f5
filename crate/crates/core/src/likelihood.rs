//! Single-site moment functions.
//!
//! For a likelihood `p(y|θ)` and a Gaussian tilt, the single-site partition
//! function is `Z_ν(ρ, y) = ∫ dθ p(y|θ) exp(-ν θ²/2 + ρ θ)`. Its first two
//! log-derivatives in `ρ` are the posterior mean `m_ν` and variance `m'_ν` of
//! `θ` under the prior `N(ρ/ν, 1/ν)`. Everything here is expressed through the
//! more general "tilted" moments for a prior `N(mean, var)`, which the
//! expectation engine also needs when conditioning the latent on Gaussian
//! fields.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use errorfunctions::RealErrorFunctions;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LikelihoodKind {
    /// `p(y|θ) = Φ(yθ/σ₀)`, labels `y ∈ {-1, +1}`.
    Probit,
    /// `p(y|θ) = N(y | θ, σ²)`, real labels.
    Gaussian,
}

impl LikelihoodKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LikelihoodKind::Probit => "probit",
            LikelihoodKind::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for LikelihoodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "probit" => Ok(LikelihoodKind::Probit),
            "gaussian" => Ok(LikelihoodKind::Gaussian),
            other => Err(Error::Parse(format!("unknown likelihood kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodModel {
    kind: LikelihoodKind,
    noise_var: f64,
}

/// Posterior mean and variance of the single-site measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub m: f64,
    pub m_prime: f64,
}

impl LikelihoodModel {
    /// Probit likelihood with label-noise variance `σ₀²`; `σ₀² = 0` is the hard
    /// sign likelihood.
    pub fn probit(noise_var: f64) -> Result<Self> {
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "probit noise variance must be finite and >= 0, got {noise_var}"
            )));
        }
        Ok(Self {
            kind: LikelihoodKind::Probit,
            noise_var,
        })
    }

    /// Conjugate Gaussian likelihood with observation variance `σ² > 0`.
    pub fn gaussian(noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gaussian noise variance must be finite and > 0, got {noise_var}"
            )));
        }
        Ok(Self {
            kind: LikelihoodKind::Gaussian,
            noise_var,
        })
    }

    pub fn new(kind: LikelihoodKind, noise_var: f64) -> Result<Self> {
        match kind {
            LikelihoodKind::Probit => Self::probit(noise_var),
            LikelihoodKind::Gaussian => Self::gaussian(noise_var),
        }
    }

    pub fn kind(&self) -> LikelihoodKind {
        self.kind
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn check_label(&self, y: f64) -> Result<()> {
        match self.kind {
            LikelihoodKind::Probit if y != 1.0 && y != -1.0 => Err(Error::InvalidParameter(
                format!("probit label must be -1 or +1, got {y}"),
            )),
            _ if !y.is_finite() => Err(Error::InvalidParameter(format!("non-finite label {y}"))),
            _ => Ok(()),
        }
    }

    /// Posterior mean and variance of `θ` under prior `N(mean, var)` and one
    /// observation `y`. `var = 0` returns the prior point mass.
    pub fn tilted(&self, mean: f64, var: f64, y: f64) -> (f64, f64) {
        if var <= 0.0 {
            return (mean, 0.0);
        }
        match self.kind {
            LikelihoodKind::Probit => probit_tilted(self.noise_var, mean, var, y),
            LikelihoodKind::Gaussian => {
                let precision = 1.0 / var + 1.0 / self.noise_var;
                ((mean / var + y / self.noise_var) / precision, 1.0 / precision)
            }
        }
    }

    /// Probability of a probit label under the predictive `∫ N(θ|mean, var) p(y|θ)`.
    ///
    /// For the Gaussian kind the predictive is a density and is handled by the
    /// quadrature directly; this returns the probit mass only.
    pub(crate) fn label_probability(&self, mean: f64, var: f64, y: f64) -> f64 {
        debug_assert_eq!(self.kind, LikelihoodKind::Probit);
        let scale2 = self.noise_var + var;
        if scale2 <= 0.0 {
            return if mean * y > 0.0 {
                1.0
            } else if mean == 0.0 {
                0.5
            } else {
                0.0
            };
        }
        normal_cdf(y * mean / scale2.sqrt())
    }

    /// `(m_ν(ρ, y), m'_ν(ρ, y))` without argument validation.
    #[inline]
    pub fn moments_unchecked(&self, rho: f64, y: f64, nu: f64) -> Moments {
        let (m, m_prime) = self.tilted(rho / nu, 1.0 / nu, y);
        Moments { m, m_prime }
    }
}

/// `(m_ν(ρ, y), m'_ν(ρ, y))`: posterior mean and variance of the single-site
/// measure `∝ p(y|θ) exp(-ν θ²/2 + ρ θ)`.
pub fn moments(model: &LikelihoodModel, rho: f64, y: f64, nu: f64) -> Result<Moments> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "precision nu must be > 0, got {nu}"
        )));
    }
    model.check_label(y)?;
    Ok(model.moments_unchecked(rho, y, nu))
}

/// Update nonlinearity `f_η(ρ, y) = m_ν(ρ, y)/η - ρ`.
pub fn f_eta(model: &LikelihoodModel, rho: f64, y: f64, eta: f64, nu: f64) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta must be > 0, got {eta}")));
    }
    Ok(moments(model, rho, y, nu)?.m / eta - rho)
}

/// `∂f_η/∂ρ = m'_ν(ρ, y)/η - 1`.
pub fn f_eta_prime(model: &LikelihoodModel, rho: f64, y: f64, eta: f64, nu: f64) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta must be > 0, got {eta}")));
    }
    Ok(moments(model, rho, y, nu)?.m_prime / eta - 1.0)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    let tail = 0.5 * (x.abs() * FRAC_1_SQRT_2).erfcx() * (-0.5 * x * x).exp();
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Mills ratio `φ(u)/Φ(u)`.
pub fn mills_ratio(u: f64) -> f64 {
    probit_tail(u).0
}

// Below this point the Laplace continued fraction replaces the erfcx route.
const TAIL_SWITCH: f64 = -5.0;
const CF_DEPTH: usize = 160;

/// Returns `(R, u + R, 1 - R (u + R))` with `R = φ(u)/Φ(u)`.
///
/// The second and third values vanish like `1/|u|` and `1/u²` as `u → -∞`;
/// they are computed without cancellation from the tails
/// `F_k = x + k / F_{k+1}` (`x = -u`) of the continued fraction
/// `Φ(-x)/φ(x) = 1/F_1`.
fn probit_tail(u: f64) -> (f64, f64, f64) {
    if u > TAIL_SWITCH {
        let r = (2.0 / PI).sqrt() / (-u * FRAC_1_SQRT_2).erfcx();
        let delta = u + r;
        return (r, delta, 1.0 - r * delta);
    }
    let x = -u;
    let mut f = x;
    let mut tails = [0.0f64; 5];
    for k in (1..=CF_DEPTH).rev() {
        f = x + k as f64 / f;
        if k <= 4 {
            tails[k] = f;
        }
    }
    let (f1, f2, f3, f4) = (tails[1], tails[2], tails[3], tails[4]);
    let one_minus = (x + 4.0 / f3 - 3.0 / f4) / (f2 * f2 * f3);
    (f1, 1.0 / f2, one_minus)
}

fn probit_tilted(noise_var: f64, mean: f64, var: f64, y: f64) -> (f64, f64) {
    let s2 = noise_var + var;
    let s = s2.sqrt();
    let u = y * mean / s;
    let (_, delta, one_minus) = probit_tail(u);
    // w = var/s² ∈ (0, 1]; splitting off (1 - w) keeps both moments free of
    // cancellation when the label contradicts the prior.
    let w = var / s2;
    let post_mean = mean * (noise_var / s2) + y * (var / s) * delta;
    let post_var = var * ((1.0 - w) + w * one_minus);
    (post_mean, post_var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_conjugate_closed_form() {
        let g = LikelihoodModel::gaussian(1.0).unwrap();
        let mm = moments(&g, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(mm.m, 0.0);
        assert!((mm.m_prime - 0.5).abs() < 1e-15);
        let f = f_eta(&g, 0.0, 2.0, 1.0, 1.0).unwrap();
        assert!((f - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_derivative_vanishes_at_eta_equal_m_prime() {
        let g = LikelihoodModel::gaussian(0.3).unwrap();
        for rho in [-3.0, 0.0, 1.7] {
            let eta = moments(&g, rho, 0.4, 2.0).unwrap().m_prime;
            assert!(f_eta_prime(&g, rho, 0.4, eta, 2.0).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn hard_probit_at_origin() {
        let p = LikelihoodModel::probit(0.0).unwrap();
        let mm = moments(&p, 0.0, 1.0, 1.0).unwrap();
        assert!((mm.m - (2.0 / PI).sqrt()).abs() < 1e-14);
        assert!((mm.m_prime - (1.0 - 2.0 / PI)).abs() < 1e-14);
    }

    #[test]
    fn continued_fraction_agrees_with_erfcx_route_near_switch() {
        for u in [-5.5, -6.0, -7.0, -8.0] {
            let r = (2.0 / PI).sqrt() / (-u * FRAC_1_SQRT_2).erfcx();
            let delta = u + r;
            let one_minus = 1.0 - r * delta;
            let (cr, cd, co) = probit_tail(u);
            assert!(((cr - r) / r).abs() < 1e-14, "R at {u}");
            assert!(((cd - delta) / delta).abs() < 1e-11, "delta at {u}");
            assert!(((co - one_minus) / one_minus).abs() < 1e-10, "1-R delta at {u}");
        }
    }

    #[test]
    fn tail_is_continuous_across_switch() {
        let below = probit_tail(TAIL_SWITCH - 1e-9);
        let above = probit_tail(TAIL_SWITCH + 1e-9);
        assert!((below.0 - above.0).abs() < 1e-8);
        assert!((below.2 - above.2).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = LikelihoodModel::probit(0.01).unwrap();
        assert!(moments(&p, 0.0, 0.5, 1.0).is_err());
        assert!(moments(&p, 0.0, 1.0, 0.0).is_err());
        assert!(moments(&p, 0.0, 1.0, -1.0).is_err());
        assert!(f_eta(&p, 0.0, 1.0, 0.0, 1.0).is_err());
        assert!(LikelihoodModel::probit(-1.0).is_err());
        assert!(LikelihoodModel::gaussian(0.0).is_err());
    }

    #[test]
    fn finite_over_wide_range() {
        for &s0 in &[0.0, 1e-2, 1.0] {
            let p = LikelihoodModel::probit(s0).unwrap();
            for i in 0..=200 {
                let rho = -50.0 + i as f64 * 0.5;
                for &nu in &[1e-2, 1.0, 1e2, 1e4] {
                    for &y in &[-1.0, 1.0] {
                        let mm = moments(&p, rho, y, nu).unwrap();
                        assert!(mm.m.is_finite() && mm.m_prime.is_finite());
                        assert!(mm.m_prime > 0.0 && mm.m_prime <= 1.0 / nu * (1.0 + 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-10.0) / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-13);
    }
}
