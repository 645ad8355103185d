//! Dense complex eigenvalue and determinant kernel.
//!
//! Eigenvalues come from Householder reduction to upper Hessenberg form
//! followed by single-shift QR iteration with Wilkinson shifts and
//! deflation. Determinants use LU with partial pivoting. Both are written
//! for the small dimensions that appear here (companion systems up to
//! ~12×12), with no external linear-algebra dependency.

use num_complex::Complex64;
use thiserror::Error;

use crate::cmatrix::CMat;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("QR iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

/// All eigenvalues with algebraic multiplicity, in deterministic order
/// (sorted by modulus, then phase).
pub fn eigenvalues(m: &CMat) -> Result<Vec<Complex64>, EigenError> {
    if !m.is_square() {
        return Err(EigenError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(EigenError::NonFinite);
    }
    let d = m.rows();
    if d == 1 {
        return Ok(vec![m[(0, 0)]]);
    }

    let mut h = hessenberg(m);
    let mut eigs = qr_eigenvalues(&mut h)?;
    sort_by_modulus_phase(&mut eigs);
    Ok(eigs)
}

/// Determinant via LU with partial pivoting. Singular inputs return 0.
pub fn determinant(m: &CMat) -> Complex64 {
    assert!(m.is_square(), "determinant of non-square matrix");
    let d = m.rows();
    let mut lu = m.clone();
    let mut det = Complex64::ONE;
    for k in 0..d {
        // Pivot on the largest modulus in column k.
        let mut piv = k;
        let mut best = lu[(k, k)].norm();
        for i in k + 1..d {
            let v = lu[(i, k)].norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return Complex64::ZERO;
        }
        if piv != k {
            for j in 0..d {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
            det = -det;
        }
        let pivot = lu[(k, k)];
        det *= pivot;
        for i in k + 1..d {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            for j in k + 1..d {
                let s = f * lu[(k, j)];
                lu[(i, j)] -= s;
            }
        }
    }
    det
}

/// Householder reduction to upper Hessenberg form (unitary similarity).
fn hessenberg(m: &CMat) -> CMat {
    let d = m.rows();
    let mut h = m.clone();
    if d < 3 {
        return h;
    }
    for col in 0..d - 2 {
        // Reflector that zeroes h[col+2.., col].
        let mut v: Vec<Complex64> = (col + 1..d).map(|i| h[(i, col)]).collect();
        let norm_x = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            continue;
        }
        // alpha = -phase(x0) * ||x|| avoids cancellation in v[0] = x0 - alpha.
        let x0 = v[0];
        let phase = if x0 == Complex64::ZERO {
            Complex64::ONE
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm_x;
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // P = I - 2 v v^H applied from both sides: H <- P H P.
        // Left: rows col+1..d, all columns.
        for j in 0..d {
            let mut dot = Complex64::ZERO;
            for (k, vk) in v.iter().enumerate() {
                dot += vk.conj() * h[(col + 1 + k, j)];
            }
            let dot2 = dot * 2.0;
            for (k, vk) in v.iter().enumerate() {
                let upd = vk * dot2;
                h[(col + 1 + k, j)] -= upd;
            }
        }
        // Right: all rows, columns col+1..d.
        for i in 0..d {
            let mut dot = Complex64::ZERO;
            for (k, vk) in v.iter().enumerate() {
                dot += h[(i, col + 1 + k)] * vk;
            }
            let dot2 = dot * 2.0;
            for (k, vk) in v.iter().enumerate() {
                let upd = dot2 * vk.conj();
                h[(i, col + 1 + k)] -= upd;
            }
        }
        // Entries below the subdiagonal are zero by construction.
        h[(col + 1, col)] = alpha;
        for i in col + 2..d {
            h[(i, col)] = Complex64::ZERO;
        }
    }
    h
}

/// Shifted QR iteration on an upper Hessenberg matrix. Consumes `h`.
fn qr_eigenvalues(h: &mut CMat) -> Result<Vec<Complex64>, EigenError> {
    let d = h.rows();
    let mut eigs = vec![Complex64::ZERO; d];
    let scale = h.max_abs().max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let max_total = 40 * d.max(4);

    let mut hi = d - 1;
    let mut iters_this_block = 0usize;
    let mut total_iters = 0usize;

    loop {
        // Zero out negligible subdiagonals.
        for k in 1..=hi {
            let off = h[(k, k - 1)].norm();
            let local = h[(k - 1, k - 1)].norm() + h[(k, k)].norm();
            let thresh = if local > 0.0 { eps * local } else { eps * scale };
            if off <= thresh {
                h[(k, k - 1)] = Complex64::ZERO;
            }
        }

        // Deflate converged 1x1 blocks at the bottom.
        while hi > 0 && h[(hi, hi - 1)] == Complex64::ZERO {
            eigs[hi] = h[(hi, hi)];
            hi -= 1;
            iters_this_block = 0;
        }
        if hi == 0 {
            eigs[0] = h[(0, 0)];
            return Ok(eigs);
        }

        // Active block [lo..=hi]: walk up while the subdiagonal is nonzero.
        let mut lo = hi;
        while lo > 0 && h[(lo, lo - 1)] != Complex64::ZERO {
            lo -= 1;
        }

        if total_iters >= max_total {
            return Err(EigenError::NoConvergence {
                iterations: total_iters,
            });
        }
        total_iters += 1;
        iters_this_block += 1;

        let shift = if iters_this_block % 12 == 0 {
            // Exceptional shift to break symmetric cycles.
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };

        qr_step(h, lo, hi, shift);

        if !h.is_finite() {
            return Err(EigenError::NoConvergence {
                iterations: total_iters,
            });
        }
    }
}

/// Eigenvalue of the trailing 2x2 closest to its bottom-right entry.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let tr_half = (a + d) * 0.5;
    let diff_half = (a - d) * 0.5;
    let disc = (diff_half * diff_half + b * c).sqrt();
    let e1 = tr_half + disc;
    let e2 = tr_half - disc;
    if (e1 - d).norm() <= (e2 - d).norm() {
        e1
    } else {
        e2
    }
}

/// One explicit single-shift QR step on the decoupled block [lo..=hi]:
/// H - σI = QR (Givens sweep), then H <- RQ + σI.
fn qr_step(h: &mut CMat, lo: usize, hi: usize, shift: Complex64) {
    for i in lo..=hi {
        h[(i, i)] -= shift;
    }

    // Left sweep: G_k zeroes the subdiagonal entry (k+1, k).
    let mut rotations = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        for j in k..=hi {
            let a = h[(k, j)];
            let b = h[(k + 1, j)];
            h[(k, j)] = c * a + s * b;
            h[(k + 1, j)] = -s.conj() * a + c * b;
        }
        h[(k + 1, k)] = Complex64::ZERO;
        rotations.push((c, s));
    }

    // Right sweep: H <- R * Q with Q = G_lo^H ... G_{hi-1}^H. Touching rows
    // lo..=k+1 restores the subdiagonal entry in column k.
    for (idx, &(c, s)) in rotations.iter().enumerate() {
        let k = lo + idx;
        for i in lo..=(k + 1).min(hi) {
            let a = h[(i, k)];
            let b = h[(i, k + 1)];
            h[(i, k)] = c * a + s.conj() * b;
            h[(i, k + 1)] = -s * a + c * b;
        }
    }

    for i in lo..=hi {
        h[(i, i)] += shift;
    }
}

/// Unitary rotation [[c, s], [-conj(s), c]] with c real mapping (x, y) to (r, 0).
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let xn = x.norm();
    let yn = y.norm();
    if yn == 0.0 {
        return (1.0, Complex64::ZERO);
    }
    let r = xn.hypot(yn);
    if xn == 0.0 {
        return (0.0, y.conj() / yn);
    }
    let c = xn / r;
    let s = (x / xn) * y.conj() / r;
    (c, s)
}

fn sort_by_modulus_phase(zs: &mut [Complex64]) {
    zs.sort_by(|a, b| {
        (a.norm(), a.arg())
            .partial_cmp(&(b.norm(), b.arg()))
            .expect("finite eigenvalues")
    });
}

/// Greedy nearest-match pairing of two equal-size multisets, after sorting
/// both by (modulus, phase). Returns the largest matched-pair distance, or
/// `None` when the sizes differ. This is the comparison convention used by
/// every multiplier-level check downstream.
pub fn multiset_pair_distance(xs: &[Complex64], ys: &[Complex64]) -> Option<f64> {
    if xs.len() != ys.len() {
        return None;
    }
    let mut xs = xs.to_vec();
    let mut ys = ys.to_vec();
    sort_by_modulus_phase(&mut xs);
    sort_by_modulus_phase(&mut ys);
    let mut used = vec![false; ys.len()];
    let mut worst = 0.0f64;
    for x in &xs {
        let mut best = f64::INFINITY;
        let mut best_j = usize::MAX;
        for (j, y) in ys.iter().enumerate() {
            if used[j] {
                continue;
            }
            let dist = (x - y).norm();
            if dist < best {
                best = dist;
                best_j = j;
            }
        }
        used[best_j] = true;
        worst = worst.max(best);
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_multiset_close(got: &[Complex64], want: &[Complex64], tol: f64) {
        let dist = multiset_pair_distance(got, want).expect("same size");
        assert!(
            dist <= tol,
            "multisets differ by {dist:.3e} > {tol:.1e}\n got: {got:?}\nwant: {want:?}"
        );
    }

    #[test]
    fn swap_matrix_eigenvalues() {
        let m = CMat::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]);
        let eigs = eigenvalues(&m).unwrap();
        assert_multiset_close(&eigs, &[c(1.0, 0.0), c(-1.0, 0.0)], 1e-14);
    }

    #[test]
    fn rotation_matrix_eigenvalues() {
        let m = CMat::from_rows(&[vec![c(0.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]);
        let eigs = eigenvalues(&m).unwrap();
        assert_multiset_close(&eigs, &[c(0.0, 1.0), c(0.0, -1.0)], 1e-14);
    }

    #[test]
    fn identity_eigenvalues() {
        let eigs = eigenvalues(&CMat::identity(3)).unwrap();
        assert_multiset_close(&eigs, &[Complex64::ONE; 3], 0.0);
    }

    #[test]
    fn triangular_eigenvalues_are_diagonal() {
        let m = CMat::from_rows(&[
            vec![c(1.0, 2.0), c(5.0, -1.0), c(0.5, 0.0)],
            vec![c(0.0, 0.0), c(-3.0, 0.5), c(2.0, 2.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, -4.0)],
        ]);
        let eigs = eigenvalues(&m).unwrap();
        assert_multiset_close(&eigs, &[c(1.0, 2.0), c(-3.0, 0.5), c(0.0, -4.0)], 1e-13);
    }

    #[test]
    fn companion_of_unity_roots() {
        // Companion matrix of z^d - 1: eigenvalues are the d-th roots of unity.
        for d in 2..=9usize {
            let mut m = CMat::zeros(d, d);
            for i in 1..d {
                m[(i, i - 1)] = Complex64::ONE;
            }
            m[(0, d - 1)] = Complex64::ONE;
            let eigs = eigenvalues(&m).unwrap();
            let want: Vec<Complex64> = (0..d)
                .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / d as f64))
                .collect();
            assert_multiset_close(&eigs, &want, 1e-10);
        }
    }

    #[test]
    fn determinant_known_values() {
        let diag = CMat::from_rows(&[vec![c(2.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(3.0, 0.0)]]);
        assert!((determinant(&diag) - c(6.0, 0.0)).norm() < 1e-15);

        let singular = CMat::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 0.0)]]);
        assert_eq!(determinant(&singular), Complex64::ZERO);

        assert!((determinant(&CMat::identity(5)) - Complex64::ONE).norm() < 1e-15);
    }

    #[test]
    fn determinant_complex_2x2() {
        // det [[a, b], [c, d]] = ad - bc.
        let m = CMat::from_rows(&[vec![c(1.0, 1.0), c(2.0, -1.0)], vec![c(0.0, 3.0), c(1.0, -2.0)]]);
        let want = c(1.0, 1.0) * c(1.0, -2.0) - c(2.0, -1.0) * c(0.0, 3.0);
        assert!((determinant(&m) - want).norm() < 1e-14);
    }

    #[test]
    fn eigenvalue_product_matches_determinant() {
        let mut rng = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for d in 1..=12usize {
            let m = CMat::from_fn(d, d, |_, _| c(next(), next()));
            let eigs = eigenvalues(&m).unwrap();
            let prod: Complex64 = eigs.iter().product();
            let det = determinant(&m);
            let denom = det.norm().max(1e-30);
            assert!(
                (prod - det).norm() / denom < 1e-8,
                "dim {d}: eig product {prod} vs det {det}"
            );
        }
    }

    #[test]
    fn multiset_pairing_handles_phase_wrap() {
        // Values straddling the arg = ±π cut must still pair up.
        let a = vec![c(-1.0, 1e-9), c(2.0, 0.0)];
        let b = vec![c(-1.0, -1e-9), c(2.0, 0.0)];
        let dist = multiset_pair_distance(&a, &b).unwrap();
        assert!(dist < 1e-8, "dist {dist}");
    }

    #[test]
    fn multiset_size_mismatch_is_none() {
        assert!(multiset_pair_distance(&[Complex64::ONE], &[]).is_none());
    }
}
