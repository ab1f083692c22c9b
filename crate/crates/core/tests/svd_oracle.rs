//! Independent algebraic route for the singular values: a test-local
//! cyclic Jacobi eigensolver on the Gram matrix AᵀA. The two computations
//! share no code below the matrix type, so agreement pins both.

// The rotation updates index two rows and two columns at once; the index
// form is the direct transcription of the math.
#![allow(clippy::needless_range_loop)]

use sigrep_core::rng::seeded_matrix;
use sigrep_core::svd::svd;
use sigrep_core::Matrix;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// descending. Test-only oracle; panics if the sweep budget runs out.
fn jacobi_eigenvalues(sym: &Matrix) -> Vec<f64> {
    let n = sym.rows();
    assert_eq!(n, sym.cols());
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| sym.row(i).to_vec()).collect();

    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[i][j].abs());
            }
        }
        let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0_f64, f64::max);
        if off <= 1e-14 * scale.max(1e-300) {
            let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
            eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
            return eig;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    panic!("jacobi oracle did not converge");
}

#[test]
fn singular_values_match_gram_eigenvalues() {
    for seed in 0..30u64 {
        let rows = 3 + (seed as usize % 10);
        let cols = 2 + (seed as usize * 3 % 12);
        let m = seeded_matrix(rows, cols, seed);
        let gram = m.transpose().matmul(&m).unwrap();
        let eig = jacobi_eigenvalues(&gram);
        let r = svd(&m).unwrap();
        let norm_sq = m.frobenius_norm_sq();
        for (i, s) in r.s.iter().enumerate() {
            let want = eig[i].max(0.0).sqrt();
            assert!(
                (s - want).abs() <= 1e-8 * norm_sq.sqrt().max(1e-12),
                "seed {seed} σ[{i}]: {s} vs oracle {want}"
            );
        }
    }
}

#[test]
fn rank_deficient_spectra_agree() {
    for seed in 0..10u64 {
        let a = seeded_matrix(8, 3, seed);
        let b = seeded_matrix(3, 12, seed + 400);
        let m = a.matmul(&b).unwrap();
        let gram = m.transpose().matmul(&m).unwrap();
        let eig = jacobi_eigenvalues(&gram);
        let r = svd(&m).unwrap();
        for (i, s) in r.s.iter().enumerate() {
            let want = eig[i].max(0.0).sqrt();
            assert!(
                (s - want).abs() <= 1e-7 * r.s[0].max(1e-12),
                "seed {seed} σ[{i}]: {s} vs oracle {want}"
            );
        }
    }
}
