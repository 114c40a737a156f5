//! One-dimensional rules for standard-normal expectations.
//!
//! Two schemes are available. The default is the trapezoidal rule on a
//! truncated grid: for integrands that are analytic in a strip around the
//! real axis it converges geometrically in the node count, and for the
//! sigmoid-shaped posterior moments of the probit model it is several orders
//! of magnitude more accurate than Gauss-Hermite at equal cost (61 nodes:
//! about `1e-12` against `4e-8` on a field of variance 21). Gauss-Hermite is
//! kept as an alternative and as a cross-check.

use gauss_quad::hermite::GaussHermite;

use crate::error::{Error, Result};

pub const DEFAULT_NODES: usize = 61;
pub const MIN_NODES: usize = 21;

/// Largest half-width of the trapezoidal grid, in standard deviations.
/// The Gaussian mass beyond it is below `1e-18`.
const TRAPEZOID_MAX_HALF_WIDTH: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadratureScheme {
    #[default]
    Trapezoid,
    GaussHermite,
}

impl QuadratureScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            QuadratureScheme::Trapezoid => "trapezoid",
            QuadratureScheme::GaussHermite => "gauss-hermite",
        }
    }
}

impl std::str::FromStr for QuadratureScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "trapezoid" => Ok(QuadratureScheme::Trapezoid),
            "gauss-hermite" | "hermite" => Ok(QuadratureScheme::GaussHermite),
            other => Err(Error::Parse(format!("unknown quadrature scheme '{other}'"))),
        }
    }
}

/// Quadrature configuration shared by the replica solver and the theory
/// recursion: a tensor rule with `nodes_per_dim` points in every Gaussian
/// direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub scheme: QuadratureScheme,
    pub nodes_per_dim: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            scheme: QuadratureScheme::default(),
            nodes_per_dim: DEFAULT_NODES,
        }
    }
}

impl QuadratureSpec {
    pub fn new(nodes_per_dim: usize) -> Result<Self> {
        Self::with_scheme(QuadratureScheme::default(), nodes_per_dim)
    }

    pub fn with_scheme(scheme: QuadratureScheme, nodes_per_dim: usize) -> Result<Self> {
        if nodes_per_dim < MIN_NODES {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs at least {MIN_NODES} nodes per dimension, got {nodes_per_dim}"
            )));
        }
        Ok(Self { scheme, nodes_per_dim })
    }

    pub fn rule(&self) -> Result<NormalRule> {
        match self.scheme {
            QuadratureScheme::Trapezoid => NormalRule::trapezoid(self.nodes_per_dim),
            QuadratureScheme::GaussHermite => NormalRule::gauss_hermite(self.nodes_per_dim),
        }
    }
}

/// Nodes and weights with `Σ w f(x) ≈ E[f(X)]`, `X ~ N(0, 1)`. Weights are
/// positive and normalized to sum to one.
#[derive(Debug, Clone)]
pub struct NormalRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl NormalRule {
    /// Rule of the default scheme.
    pub fn new(n: usize) -> Result<Self> {
        Self::trapezoid(n)
    }

    /// `n` equally spaced nodes on `[-L, L]` with `L = min(√(π(n−1)), 9)`,
    /// weighted by the normal density. The first bound balances aliasing
    /// against truncation for entire integrands; the cap keeps the spacing
    /// fine for integrands with nearby complex singularities.
    pub fn trapezoid(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("trapezoidal rule needs n >= 2, got {n}")));
        }
        let half = (std::f64::consts::PI * (n - 1) as f64).sqrt().min(TRAPEZOID_MAX_HALF_WIDTH);
        let h = 2.0 * half / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| -half + h * i as f64).collect();
        let raw: Vec<f64> = nodes.iter().map(|x| (-0.5 * x * x).exp()).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        Ok(Self { nodes, weights })
    }

    pub fn gauss_hermite(n: usize) -> Result<Self> {
        let n = std::num::NonZeroUsize::new(n)
            .ok_or_else(|| Error::InvalidParameter("quadrature with zero nodes".into()))?;
        let rule = GaussHermite::new(n);
        // Physicists' rule integrates against exp(-x²); rescale to N(0, 1).
        let mut pairs: Vec<(f64, f64)> = rule
            .iter()
            .map(|(x, w)| (x * std::f64::consts::SQRT_2, *w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let nodes = pairs.iter().map(|p| p.0).collect();
        let weights = pairs.iter().map(|p| p.1 / total).collect();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}
