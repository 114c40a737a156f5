//! Expectations over jointly Gaussian fields and a latent teacher variable.
//!
//! Both the replica measure and the effective single-node process have the
//! same structure: a latent `θ ~ N(0, q)`, a label `y ~ p(y|θ)`, and one or
//! two fields `ρ` that are jointly Gaussian with `θ`. Functions of interest
//! depend on `(ρ, y)` only, and `θ` enters at most linearly (`E[θ g]`).
//!
//! Rather than integrating over `θ` directly, which would put the near-step
//! probit likelihood inside the quadrature, the latent is conditioned on the
//! fields: `θ | ρ` is Gaussian, the label then has a closed-form predictive,
//! and `E[θ | ρ, y]` is a tilted mean. What remains is a tensor Gauss-Hermite
//! rule over smooth functions of the fields (plus one Gaussian direction for
//! real-valued labels).

use crate::likelihood::{LikelihoodKind, LikelihoodModel};
use crate::quadrature::NormalRule;

/// Relative threshold below which a conditional direction is treated as
/// degenerate.
const DEGENERATE_REL: f64 = 1e-14;

/// Same for the innovation of the second field of a pair. It is much
/// smaller because late-time fields differ by amounts far below `1e-14`
/// of their variance, and that difference is exactly what is being
/// integrated; `delta` is supplied accurately, so the factor stays exact.
const PAIR_DEGENERATE_REL: f64 = 1e-30;

/// One quadrature point of a single-field expectation.
#[derive(Debug, Clone, Copy)]
pub struct Point1 {
    pub weight: f64,
    pub rho: f64,
    pub y: f64,
    /// `E[θ | ρ, y]`
    pub theta_mean: f64,
}

/// One quadrature point of a two-field expectation.
#[derive(Debug, Clone, Copy)]
pub struct Point2 {
    pub weight: f64,
    pub rho_a: f64,
    pub rho_b: f64,
    pub y: f64,
    pub theta_mean: f64,
}

/// Field `ρ` with `Var ρ = var_rho` and `Cov(ρ, θ) = cov_theta`, `θ ~ N(0, q)`.
#[derive(Debug, Clone, Copy)]
pub struct SingleField {
    pub var_rho: f64,
    pub cov_theta: f64,
    pub q: f64,
}

impl SingleField {
    /// The replica-symmetric measure `N(θ|0,q) p(y|θ) N(ρ|κθ, κ)`.
    pub fn replica(q: f64, kappa: f64) -> Self {
        Self {
            var_rho: kappa * kappa * q + kappa,
            cov_theta: kappa * q,
            q,
        }
    }

    /// `ρ = φ + k θ` with `φ ~ N(0, var_phi)` independent of `θ`.
    pub fn process(q: f64, k: f64, var_phi: f64) -> Self {
        Self {
            var_rho: var_phi + k * k * q,
            cov_theta: k * q,
            q,
        }
    }

    pub fn visit(&self, model: &LikelihoodModel, rule: &NormalRule, mut f: impl FnMut(&Point1)) {
        let degenerate = self.var_rho <= DEGENERATE_REL * self.q.max(f64::MIN_POSITIVE);
        let (sd, slope, theta_var) = if degenerate {
            (0.0, 0.0, self.q)
        } else {
            let slope = self.cov_theta / self.var_rho;
            (
                self.var_rho.sqrt(),
                slope,
                (self.q - slope * self.cov_theta).max(0.0),
            )
        };
        let mut emit = |w: f64, rho: f64| {
            let mu = slope * rho;
            visit_labels(model, rule, mu, theta_var, |wy, y, theta_mean| {
                f(&Point1 {
                    weight: w * wy,
                    rho,
                    y,
                    theta_mean,
                })
            });
        };
        if degenerate {
            emit(1.0, 0.0);
        } else {
            for (x, w) in rule.iter() {
                emit(w, sd * x);
            }
        }
    }

    pub fn expect(
        &self,
        model: &LikelihoodModel,
        rule: &NormalRule,
        g: impl Fn(f64, f64) -> f64,
    ) -> f64 {
        let mut acc = 0.0;
        self.visit(model, rule, |p| acc += p.weight * g(p.rho, p.y));
        acc
    }

    pub fn expect_theta(
        &self,
        model: &LikelihoodModel,
        rule: &NormalRule,
        g: impl Fn(f64, f64) -> f64,
    ) -> f64 {
        let mut acc = 0.0;
        self.visit(model, rule, |p| acc += p.weight * p.theta_mean * g(p.rho, p.y));
        acc
    }
}

/// Two fields `(ρ_a, ρ_b)` jointly Gaussian with each other and with `θ`.
///
/// `delta` is `Var(ρ_a - ρ_b)`. It is supplied separately because at late
/// times the fields are almost perfectly correlated and the determinant of
/// their covariance can only be resolved from an accurately known difference
/// variance, not from the entries.
#[derive(Debug, Clone, Copy)]
pub struct PairField {
    pub var_a: f64,
    pub var_b: f64,
    pub delta: f64,
    pub cov_theta_a: f64,
    pub cov_theta_b: f64,
    pub q: f64,
}

impl PairField {
    /// Lower-triangular factor of the covariance of `(ρ_a, ρ_b, θ)`, with
    /// degenerate directions zeroed.
    fn factor(&self) -> [[f64; 3]; 3] {
        let scale = self.var_a.max(self.var_b).max(self.q);
        let mut l = [[0.0; 3]; 3];
        let cov_ab = 0.5 * (self.var_a + self.var_b - self.delta);
        if self.var_a > DEGENERATE_REL * scale {
            let l11 = self.var_a.sqrt();
            l[0][0] = l11;
            l[1][0] = cov_ab / l11;
            l[2][0] = self.cov_theta_a / l11;
            // det = [Δ - (√a - √b)²][(√a + √b)² - Δ] / 4
            let (sa, sb) = (self.var_a.sqrt(), self.var_b.sqrt());
            let diff = (self.var_a - self.var_b) / (sa + sb);
            let det = 0.25 * (self.delta - diff * diff) * ((sa + sb).powi(2) - self.delta);
            let l22_sq = det / self.var_a;
            if l22_sq > PAIR_DEGENERATE_REL * scale {
                let l22 = l22_sq.sqrt();
                l[1][1] = l22;
                l[2][1] = (self.cov_theta_b - l[1][0] * l[2][0]) / l22;
            }
        } else if self.var_b > DEGENERATE_REL * scale {
            let l22 = self.var_b.sqrt();
            l[1][1] = l22;
            l[2][1] = self.cov_theta_b / l22;
        }
        let rest = self.q - l[2][0] * l[2][0] - l[2][1] * l[2][1];
        l[2][2] = rest.max(0.0).sqrt();
        l
    }

    pub fn visit(&self, model: &LikelihoodModel, rule: &NormalRule, mut f: impl FnMut(&Point2)) {
        let l = self.factor();
        let single = [(0.0, 1.0)];
        let dim = |active: bool| -> Vec<(f64, f64)> {
            if active {
                rule.iter().collect()
            } else {
                single.to_vec()
            }
        };
        let xs = dim(l[0][0] != 0.0);
        let zs = dim(l[1][1] != 0.0);
        let theta_var = l[2][2] * l[2][2];
        for &(x1, w1) in &xs {
            for &(x2, w2) in &zs {
                let rho_a = l[0][0] * x1;
                let rho_b = l[1][0] * x1 + l[1][1] * x2;
                let mu = l[2][0] * x1 + l[2][1] * x2;
                let w = w1 * w2;
                visit_labels(model, rule, mu, theta_var, |wy, y, theta_mean| {
                    f(&Point2 {
                        weight: w * wy,
                        rho_a,
                        rho_b,
                        y,
                        theta_mean,
                    })
                });
            }
        }
    }
}

/// Enumerates labels given `θ ~ N(mu, var)`: the exact two-point sum for the
/// probit likelihood, a Gauss-Hermite rule over the predictive for the
/// Gaussian one. The callback receives `(weight, y, E[θ | y])`.
fn visit_labels(
    model: &LikelihoodModel,
    rule: &NormalRule,
    mu: f64,
    var: f64,
    mut f: impl FnMut(f64, f64, f64),
) {
    match model.kind() {
        LikelihoodKind::Probit => {
            for y in [1.0, -1.0] {
                let p = model.label_probability(mu, var, y);
                if p > 0.0 {
                    f(p, y, model.tilted(mu, var, y).0);
                }
            }
        }
        LikelihoodKind::Gaussian => {
            let sd = (var + model.noise_var()).sqrt();
            for (x, w) in rule.iter() {
                let y = mu + sd * x;
                f(w, y, model.tilted(mu, var, y).0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probit() -> LikelihoodModel {
        LikelihoodModel::probit(0.01).unwrap()
    }

    #[test]
    fn single_field_normalization_and_moments() {
        let rule = NormalRule::new(61).unwrap();
        let (q, kappa) = (0.5, 1.7);
        let field = SingleField::replica(q, kappa);
        for model in [probit(), LikelihoodModel::gaussian(0.3).unwrap()] {
            assert!((field.expect(&model, &rule, |_, _| 1.0) - 1.0).abs() < 1e-13);
            let e_rho2 = field.expect(&model, &rule, |r, _| r * r);
            assert!((e_rho2 - (kappa * kappa * q + kappa)).abs() < 1e-12);
            // E[θ ρ] = κ q, E[θ²] = q through the tilted means.
            let e_theta_rho = field.expect_theta(&model, &rule, |r, _| r);
            assert!((e_theta_rho - kappa * q).abs() < 1e-12);
        }
    }

    #[test]
    fn probit_label_marginal_is_balanced() {
        let rule = NormalRule::new(61).unwrap();
        let field = SingleField::replica(0.5, 2.0);
        let p_plus = field.expect(&probit(), &rule, |_, y| if y > 0.0 { 1.0 } else { 0.0 });
        assert!((p_plus - 0.5).abs() < 1e-13);
    }

    #[test]
    fn degenerate_field_uses_prior_latent() {
        let rule = NormalRule::new(21).unwrap();
        let field = SingleField::process(0.5, 0.0, 0.0);
        let mut count = 0;
        field.visit(&probit(), &rule, |p| {
            assert_eq!(p.rho, 0.0);
            count += 1;
        });
        assert_eq!(count, 2);
    }

    #[test]
    fn pair_field_reduces_to_single_when_identical() {
        let rule = NormalRule::new(41).unwrap();
        let (q, k, c) = (0.5, 0.8, 1.3);
        let var = c + k * k * q;
        let pair = PairField {
            var_a: var,
            var_b: var,
            delta: 0.0,
            cov_theta_a: k * q,
            cov_theta_b: k * q,
            q,
        };
        let single = SingleField::process(q, k, c);
        let model = probit();
        let g = |r: f64, y: f64| (r * y).tanh() + 0.1 * r * r;
        let mut acc = 0.0;
        pair.visit(&model, &rule, |p| {
            assert!((p.rho_a - p.rho_b).abs() < 1e-12);
            acc += p.weight * g(p.rho_a, p.y) * g(p.rho_b, p.y);
        });
        let direct = single.expect(&model, &rule, |r, y| g(r, y).powi(2));
        assert!((acc - direct).abs() < 1e-12);
    }

    #[test]
    fn pair_field_second_moments() {
        let rule = NormalRule::new(41).unwrap();
        let pair = PairField {
            var_a: 1.2,
            var_b: 0.9,
            delta: 1.2 + 0.9 - 2.0 * 0.4,
            cov_theta_a: 0.3,
            cov_theta_b: -0.1,
            q: 0.5,
        };
        let model = LikelihoodModel::gaussian(0.2).unwrap();
        let mut m = [0.0; 5];
        pair.visit(&model, &rule, |p| {
            m[0] += p.weight;
            m[1] += p.weight * p.rho_a * p.rho_b;
            m[2] += p.weight * p.theta_mean * p.rho_a;
            m[3] += p.weight * p.theta_mean * p.rho_b;
            m[4] += p.weight * p.y * p.y;
        });
        assert!((m[0] - 1.0).abs() < 1e-13);
        assert!((m[1] - 0.4).abs() < 1e-12);
        assert!((m[2] - 0.3).abs() < 1e-12);
        assert!((m[3] + 0.1).abs() < 1e-12);
        assert!((m[4] - 0.7).abs() < 1e-12);
    }
}
