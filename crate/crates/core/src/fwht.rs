//! In-place fast Walsh-Hadamard transform in Sylvester ordering.

/// Overwrites `data` with `H_N · data`, where `H_N` is the unnormalized
/// Sylvester-Hadamard matrix (`H_1 = 1`, `H_2k = [[H_k, H_k], [H_k, -H_k]]`).
///
/// `data.len()` must be a power of two. Cost is `N log2 N` additions.
pub fn fwht_in_place(data: &mut [f64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "FWHT length {n} is not a power of two");
    let mut half = 1;
    while half < n {
        for block in data.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half *= 2;
    }
}

/// Orthonormal variant: `H_N · data / sqrt(N)`.
pub fn fwht_normalized(data: &mut [f64]) {
    fwht_in_place(data);
    let scale = 1.0 / (data.len() as f64).sqrt();
    data.iter_mut().for_each(|x| *x *= scale);
}

/// Entry `(i, j)` of the Sylvester-Hadamard matrix: `(-1)^popcount(i & j)`.
pub fn hadamard_entry(i: usize, j: usize) -> f64 {
    if (i & j).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recursive_hadamard(n: usize) -> Vec<Vec<f64>> {
        if n == 1 {
            return vec![vec![1.0]];
        }
        let h = recursive_hadamard(n / 2);
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n / 2 {
            for j in 0..n / 2 {
                out[i][j] = h[i][j];
                out[i][j + n / 2] = h[i][j];
                out[i + n / 2][j] = h[i][j];
                out[i + n / 2][j + n / 2] = -h[i][j];
            }
        }
        out
    }

    #[test]
    fn h2_matches_recursion() {
        let mut e0 = vec![1.0, 0.0];
        let mut e1 = vec![0.0, 1.0];
        fwht_in_place(&mut e0);
        fwht_in_place(&mut e1);
        assert_eq!(e0, vec![1.0, 1.0]);
        assert_eq!(e1, vec![1.0, -1.0]);
    }

    #[test]
    fn matches_dense_recursion_up_to_64() {
        for n in [1usize, 2, 4, 8, 16, 64] {
            let h = recursive_hadamard(n);
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut y = x.clone();
            fwht_in_place(&mut y);
            for i in 0..n {
                let expect: f64 = (0..n).map(|j| h[i][j] * x[j]).sum();
                assert!((y[i] - expect).abs() < 1e-12);
                for j in 0..n {
                    assert_eq!(h[i][j], hadamard_entry(i, j));
                }
            }
        }
    }

    #[test]
    fn normalized_transform_is_an_involution() {
        let x: Vec<f64> = (0..256).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
        let mut y = x.clone();
        fwht_normalized(&mut y);
        fwht_normalized(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
