//! Reference implementations used only by the integration tests. They share
//! no code with the library: the error function comes from `libm` and the
//! integrals from an adaptive Gauss-Kronrod rule written here.

#![allow(dead_code)]

use libm::erfc;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// 15-point Kronrod estimate and its difference to the embedded 7-point
/// Gauss estimate.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let (f1, f2) = (f(c - h * XGK[i]), f(c + h * XGK[i]));
        k += WGK[i] * (f1 + f2);
        if i % 2 == 1 {
            g += WG[i / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]` to absolute
/// tolerance `abs_tol` (bisection of every panel whose error is too large).
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let (v, err) = gk15(f, a, b);
        // Rounding in the integrand (log-space differences of large numbers)
        // puts a floor under the Kronrod-Gauss difference.
        if err <= tol || err <= 1e-12 * v.abs() || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    rec(f, a, b, abs_tol, 24)
}

/// `ln Φ(z)`, via `erfc` and the asymptotic tail series below `z = −30`.
pub fn ln_normal_cdf(z: f64) -> f64 {
    if z > -30.0 {
        (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln()
    } else {
        let z2 = z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=10 {
            term *= -((2 * k - 1) as f64) / z2;
            sum += term;
        }
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + sum.ln()
    }
}

/// Posterior mean and variance of `θ` under `p(y|θ) exp(−νθ²/2 + ρθ)` with
/// the probit channel `p(y|θ) = Φ(yθ/σ₀)` (a step for `σ₀ = 0`, `y = +1`
/// on `θ ≥ 0`), by direct integration over `θ`.
pub fn probit_moments_oracle(rho: f64, y: f64, nu: f64, noise_var: f64) -> (f64, f64) {
    let mu = rho / nu;
    let s = 1.0 / nu.sqrt();
    let sigma0 = noise_var.sqrt();
    // The step channel is handled through the integration limits alone.
    let ln_lik = |t: f64| if sigma0 == 0.0 { 0.0 } else { ln_normal_cdf(y * t / sigma0) };
    let (lo_lim, hi_lim) = match (sigma0 == 0.0, y > 0.0) {
        (true, true) => (0.0, f64::INFINITY),
        (true, false) => (f64::NEG_INFINITY, 0.0),
        _ => (f64::NEG_INFINITY, f64::INFINITY),
    };
    // Log-density up to a constant, concave in θ.
    let ln_g = |t: f64| -0.5 * nu * (t - mu) * (t - mu) + ln_lik(t);
    let (mut a, mut b) = ((mu.min(0.0) - 60.0 * s).max(lo_lim), (mu.max(0.0) + 60.0 * s).min(hi_lim));
    for _ in 0..400 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if ln_g(m1) < ln_g(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let mode = 0.5 * (a + b);
    let lik_mode = ln_lik(mode);
    // ln g(θ) − ln g(mode), with the quadratic part factored so that no two
    // large numbers are subtracted.
    let rel = |t: f64| -0.5 * nu * (t - mode) * (t + mode - 2.0 * mu) + ln_lik(t) - lik_mode;
    let step = 0.25 * s;
    let mut left = mode;
    while left > lo_lim && rel(left) > -80.0 {
        left -= step;
    }
    let left = left.max(lo_lim);
    let mut right = mode;
    while right < hi_lim && rel(right) > -80.0 {
        right += step;
    }
    let right = right.min(hi_lim);
    let g = |t: f64| rel(t).exp();
    // Split at the mode so the peak is never straddled by a coarse panel.
    let int = |f: &dyn Fn(f64) -> f64, tol: f64| integrate(f, left, mode, tol) + integrate(f, mode, right, tol);
    let z = int(&g, 1e-14 * s);
    let tol = 1e-14 * z;
    let m = int(&|t| t * g(t), tol * s) / z;
    let v = int(&|t| (t - m).powi(2) * g(t), tol * s * s) / z;
    (m, v)
}

/// `E[f(X)]`, `X ~ N(0, 1)`, by adaptive integration over `[−12, 12]`.
pub fn gaussian_expectation(f: &dyn Fn(f64) -> f64) -> f64 {
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let h = |x: f64| f(x) * pdf(x);
    integrate(&h, -12.0, 0.0, 1e-14) + integrate(&h, 0.0, 12.0, 1e-14)
}
