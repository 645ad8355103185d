//! Companion linearization of the order-n system.
//!
//! The operator i^n y^(n) + i^(n-1) P_1 y^(n-1) + ... + P_n y = λy is
//! rewritten for the stacked state (y, y', ..., y^(n-1)): block rows
//! 1..n-1 are shifts, and the last block row solves for y^(n):
//!
//!   y^(n) = i^(-n)(λI - P_n(x)) y - Σ_{k=1..n-1} i^(-k) P_k(x) y^(n-k).

use num_complex::Complex64;

use crate::cmatrix::CMat;
use crate::coefficients::{CoefficientProvider, CoefficientSet};

/// i^(-k), exact by index mod 4.
pub fn inv_i_power(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// The mn×mn system matrix A(x, λ).
pub fn assemble_companion(set: &dyn CoefficientProvider, lambda: Complex64, x: f64) -> CMat {
    let n = set.order();
    let m = set.dim();
    let d = n * m;
    let mut a = CMat::zeros(d, d);

    // Shift blocks: x_j' = x_{j+1}.
    for block in 0..n - 1 {
        for i in 0..m {
            a[(block * m + i, (block + 1) * m + i)] = Complex64::ONE;
        }
    }

    // Last block row. Column block 0 holds i^(-n)(λI - P_n); column block
    // n-k holds -i^(-k) P_k for k = 1..n-1.
    let r0 = (n - 1) * m;
    let pn = set.coefficient_matrix(n, x);
    let win = inv_i_power(n);
    for i in 0..m {
        for j in 0..m {
            let lam_ij = if i == j { lambda } else { Complex64::ZERO };
            a[(r0 + i, j)] = win * (lam_ij - pn[(i, j)]);
        }
    }
    for k in 1..n {
        let pk = set.coefficient_matrix(k, x);
        let w = -inv_i_power(k);
        let c0 = (n - k) * m;
        for i in 0..m {
            for j in 0..m {
                a[(r0 + i, c0 + j)] = w * pk[(i, j)];
            }
        }
    }
    a
}

/// Exact ∫₀¹ tr A(x, λ) dx in the Fourier representation. Only the diagonal
/// of the last block row contributes: -i^(-1) P_1 for n ≥ 2, plus the λ
/// block when n = 1.
pub fn companion_trace_integral(set: &CoefficientSet, lambda: Complex64) -> Complex64 {
    let p1_mean: f64 = set.diagonal_mean_sum(1).expect("k=1 always in range");
    let i = Complex64::I;
    if set.n() == 1 {
        // A = -i(λI - P_1): trace integral is -iλm + i·tr∫P_1.
        -i * lambda * set.m() as f64 + i * p1_mean
    } else {
        i * p1_mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::FourierEntry;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_first_order_block() {
        // i y' = λ y  =>  y' = -iλ y.
        let set = CoefficientSet::zero(1, 1);
        let a = assemble_companion(&set, c(2.0, 0.5), 0.3);
        assert!((a[(0, 0)] - -Complex64::I * c(2.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn scalar_second_order_block() {
        // -y'' = λ y  =>  y'' = -λ y.
        let lambda = c(1.7, 0.0);
        let set = CoefficientSet::zero(2, 1);
        let a = assemble_companion(&set, lambda, 0.0);
        assert!((a[(0, 1)] - Complex64::ONE).norm() < 1e-15);
        assert!((a[(1, 0)] - -lambda).norm() < 1e-15);
        assert!(a[(0, 0)].norm() < 1e-15);
        assert!(a[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn scalar_third_order_block() {
        // i³ y''' = λ y  =>  y''' = iλ y; plane waves e^{iωx} then need ω³ = -λ.
        let lambda = c(0.4, -1.1);
        let set = CoefficientSet::zero(3, 1);
        let a = assemble_companion(&set, lambda, 0.9);
        assert!((a[(2, 0)] - Complex64::I * lambda).norm() < 1e-15);
        assert!((a[(0, 1)] - Complex64::ONE).norm() < 1e-15);
        assert!((a[(1, 2)] - Complex64::ONE).norm() < 1e-15);
        // ω³ = -λ check: the symbol of the assembled bottom row.
        let omega = (-lambda).powf(1.0 / 3.0);
        let row_sum = a[(2, 0)]; // coefficient of y
        assert!((row_sum - Complex64::I * lambda).norm() < 1e-15);
        assert!(((omega * omega * omega) - -lambda).norm() < 1e-12);
    }

    #[test]
    fn matches_independent_dense_construction() {
        let set = CoefficientSet::random_pt(3, 2, 2, 1.5, 11).unwrap();
        let lambda = c(-0.6, 0.8);
        for step in 0..7 {
            let x = -0.5 + 0.23 * step as f64;
            let a = assemble_companion(&set, lambda, x);
            // Dense reference built entry by entry from the definition.
            let (n, m) = (3usize, 2usize);
            let mut want = CMat::zeros(n * m, n * m);
            for block in 0..n - 1 {
                for i in 0..m {
                    want[(block * m + i, (block + 1) * m + i)] = Complex64::ONE;
                }
            }
            let pn = set.eval_matrix(n, x).unwrap();
            for i in 0..m {
                for j in 0..m {
                    let lam = if i == j { lambda } else { Complex64::ZERO };
                    want[((n - 1) * m + i, j)] = inv_i_power(n) * (lam - pn[(i, j)]);
                }
            }
            for k in 1..n {
                let pk = set.eval_matrix(k, x).unwrap();
                for i in 0..m {
                    for j in 0..m {
                        want[((n - 1) * m + i, (n - k) * m + j)] = -inv_i_power(k) * pk[(i, j)];
                    }
                }
            }
            assert_eq!(&a - &want, CMat::zeros(n * m, n * m));
        }
    }

    #[test]
    fn one_periodic_in_x() {
        let set = CoefficientSet::random_pt(2, 2, 3, 1.0, 3).unwrap();
        let lambda = c(0.9, -0.2);
        for step in 0..9 {
            let x = -1.0 + 0.25 * step as f64;
            let a0 = assemble_companion(&set, lambda, x);
            let a1 = assemble_companion(&set, lambda, x + 1.0);
            assert!((&a1 - &a0).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn trace_integral_examples() {
        // n=3, m=1, P_1 mean 5 -> 5i.
        let mut entries = vec![vec![vec![FourierEntry::zero()]]; 3];
        entries[0][0][0] = FourierEntry::new(vec![5.0, 0.3], vec![0.2]);
        let set = CoefficientSet::new(3, 1, entries).unwrap();
        assert!((companion_trace_integral(&set, c(9.0, 2.0)) - c(0.0, 5.0)).norm() < 1e-15);

        // n=1, m=1, zero potential, λ=π -> -iπ.
        let set = CoefficientSet::zero(1, 1);
        let got = companion_trace_integral(&set, c(std::f64::consts::PI, 0.0));
        assert!((got - c(0.0, -std::f64::consts::PI)).norm() < 1e-15);

        // Any n ≥ 2 with P_1 = 0 -> 0.
        let set = CoefficientSet::zero(2, 3);
        assert_eq!(companion_trace_integral(&set, c(4.2, -1.0)), Complex64::ZERO);
    }

    #[test]
    fn trace_integral_matches_quadrature() {
        let set = CoefficientSet::random_pt(2, 3, 2, 1.0, 99).unwrap();
        let lambda = c(1.3, 0.4);
        let exact = companion_trace_integral(&set, lambda);
        let steps = 2048;
        let mut acc = Complex64::ZERO;
        for k in 0..steps {
            let a = assemble_companion(&set, lambda, k as f64 / steps as f64);
            for i in 0..a.rows() {
                acc += a[(i, i)];
            }
        }
        let quad = acc / steps as f64;
        assert!((exact - quad).norm() < 1e-12, "exact {exact} vs quad {quad}");
    }
}
