use std::sync::Arc;

use memfree::ensemble::generate_design;
use memfree::fwht::{fwht_normalized, hadamard_entry};
use memfree::quadrature::{NormalRule, QuadratureScheme, QuadratureSpec};
use memfree::spectral::{build_a, spectrum, SpectralData};
use memfree::DesignKind;
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_fwht_is_an_involution(log_n in 0u32..10, seed in any::<u64>()) {
        let n = 1usize << log_n;
        let v: Vec<f64> = (0..n).map(|i| ((i as u64 ^ seed) % 1000) as f64 / 100.0 - 5.0).collect();
        let mut w = v.clone();
        fwht_normalized(&mut w);
        let energy = dot(&w, &w);
        fwht_normalized(&mut w);
        for (a, b) in v.iter().zip(&w) {
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
        prop_assert!((energy - dot(&v, &v)).abs() < 1e-10 * (1.0 + energy));
    }

    #[test]
    fn hadamard_entries_are_orthogonal(log_n in 1u32..7, i in 0usize..64, j in 0usize..64) {
        let n = 1usize << log_n;
        let (i, j) = (i % n, j % n);
        let s: f64 = (0..n).map(|k| hadamard_entry(i, k) * hadamard_entry(j, k)).sum();
        prop_assert_eq!(s, if i == j { n as f64 } else { 0.0 });
    }

    #[test]
    fn design_transpose_is_adjoint(
        hadamard in any::<bool>(),
        log_n in 3u32..8,
        seed in 0u64..1000,
    ) {
        let n = 1usize << log_n;
        let k = n / 2;
        let kind = if hadamard { DesignKind::Hadamard } else { DesignKind::Gaussian };
        let x = generate_design(kind, n, k, seed).unwrap();
        let w: Vec<f64> = (0..k).map(|j| ((j * 31 + 7) % 11) as f64 - 5.0).collect();
        let v: Vec<f64> = (0..n).map(|i| ((i * 17 + 3) % 13) as f64 - 6.0).collect();
        let xw = x.apply(&w);
        let xtv = x.apply_transpose(&v);
        prop_assert!((dot(&xw, &v) - dot(&w, &xtv)).abs() < 1e-9 * (1.0 + dot(&xw, &v).abs()));
        // Dense entries agree with the matrix-free product.
        for i in [0, n / 3, n - 1] {
            let row: f64 = (0..k).map(|j| x.entry(i, j) * w[j]).sum();
            prop_assert!((row - xw[i]).abs() < 1e-10 * (1.0 + row.abs()));
        }
    }

    #[test]
    fn lambda_inversion_round_trips(
        d in proptest::collection::vec(0.01f64..20.0, 4..40),
        zeros in 0usize..20,
        frac in 0.02f64..0.98,
    ) {
        let mut all = d.clone();
        all.extend(vec![0.0; zeros]);
        let s = SpectralData::from_eigenvalues(all).unwrap();
        let chi = frac * s.q();
        let lambda = s.solve_lambda(chi).unwrap();
        prop_assert!(lambda > 0.0);
        prop_assert!((s.g1(lambda) - chi).abs() < 1e-10 * chi);
    }

    #[test]
    fn coupling_is_traceless_with_predicted_variance(
        d in proptest::collection::vec(0.05f64..10.0, 8..32),
        zeros in 0usize..16,
        frac in 0.05f64..0.95,
    ) {
        let mut all = d.clone();
        all.extend(vec![0.0; zeros]);
        let s = Arc::new(SpectralData::from_eigenvalues(all).unwrap());
        let chi = frac * s.q();
        let lambda = s.solve_lambda(chi).unwrap();
        let a = build_a(s.clone(), chi, lambda).unwrap();
        prop_assert!(a.normalized_trace().abs() < 1e-10);
        let ev = a.eigenvalues();
        let var = ev.iter().map(|x| x * x).sum::<f64>() / ev.len() as f64;
        prop_assert!((var - a.sigma_a_sq()).abs() < 1e-9 * (1.0 + var));
    }

    #[test]
    fn rules_integrate_low_moments(n in 21usize..151, hermite in any::<bool>()) {
        let scheme = if hermite { QuadratureScheme::GaussHermite } else { QuadratureScheme::Trapezoid };
        let rule: NormalRule = QuadratureSpec::with_scheme(scheme, n).unwrap().rule().unwrap();
        prop_assert!((rule.expect(|_| 1.0) - 1.0).abs() < 1e-13);
        prop_assert!(rule.expect(|x| x).abs() < 1e-13);
        prop_assert!((rule.expect(|x| x * x) - 1.0).abs() < 1e-11);
        prop_assert!((rule.expect(|x| x.powi(4)) - 3.0).abs() < 1e-10);
    }
}

#[test]
fn hadamard_spectrum_is_a_projector() {
    let x = generate_design(DesignKind::Hadamard, 256, 96, 3).unwrap();
    let s = spectrum(&x).unwrap();
    let ev = s.eigenvalues();
    assert_eq!(s.rank(), 96);
    // The kept Walsh columns are orthonormal, so XᵀX = I_K and every
    // nonzero eigenvalue of K = XXᵀ is one.
    assert!(ev[..96].iter().all(|&d| (d - 1.0).abs() < 1e-12));
}
