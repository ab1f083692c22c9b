//! Dense singular value decomposition.
//!
//! Householder bidiagonalization followed by Golub-Kahan implicit-shift QR
//! on the bidiagonal form. Wide inputs are decomposed through their
//! transpose, so the returned factors are always the economy (thin) ones:
//! for an r×c input, `u` is r×min(r,c), `s` has min(r,c) entries sorted
//! descending, and `vt` is min(r,c)×c. Reconstruction `u·diag(s)·vt`
//! recovers the input; `uᵀu = I` holds to the documented defect bound.
//!
//! Convergence: off-diagonal entries are deflated once they drop below
//! `SVD_CONVERGENCE_TOL` relative to their diagonal neighbors; the QR loop
//! is capped at `30 · min(r, c)` sweeps and reports `NoConvergence` rather
//! than returning unconverged factors.

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

/// Relative deflation tolerance of the bidiagonal QR iteration.
pub const SVD_CONVERGENCE_TOL: f64 = 1e-12;

/// Economy SVD factors: `m = u · diag(s) · vt`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Left singular vectors, column-orthonormal, rows × min(rows, cols).
    pub u: Matrix,
    /// Singular values, descending, non-negative.
    pub s: Vec<f64>,
    /// Right singular vectors as rows, min(rows, cols) × cols.
    pub vt: Matrix,
}

/// Singular value decomposition of a nonempty matrix.
///
/// Extreme input scales are handled by an exact power-of-two prescale
/// (binary scaling commutes with rounding, so in-range inputs are
/// unaffected bit for bit); singular values whose true magnitude exceeds
/// the f64 range still fail, with an explicit error.
pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(invalid("svd", "matrix must be nonempty"));
    }

    // Squared column norms overflow (or lose all precision to denormals)
    // well inside the finite range; rescale by 2^e to put the magnitude
    // near 1 first. Division by a power of two is exact.
    let max_abs = m.max_abs();
    if max_abs != 0.0 && !(1e-140..=1e140).contains(&max_abs) {
        let scale = 2.0_f64.powi(max_abs.log2().floor() as i32);
        let scaled = Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] / scale)?;
        let mut r = svd(&scaled)?;
        for s in &mut r.s {
            *s *= scale;
            if !s.is_finite() {
                return Err(Error::NonFinite { op: "svd" });
            }
        }
        return Ok(r);
    }

    if m.rows() >= m.cols() {
        svd_tall(m)
    } else {
        let r = svd_tall(&m.transpose())?;
        Ok(SvdResult {
            u: r.vt.transpose(),
            s: r.s,
            vt: r.u.transpose(),
        })
    }
}

/// Scalars the `svd` path materializes beyond its input, for the given
/// input shape. Mirrors the allocation inventory of `svd_tall` (work copy,
/// thin U, V plus its transpose, diagonals and reflector scales) and the
/// transpose round-trip taken for wide inputs. Used by the iterative-SVD
/// peak-memory accounting.
pub fn svd_aux_scalars(rows: usize, cols: usize) -> usize {
    fn tall(p: usize, q: usize) -> usize {
        2 * p * q + 2 * q * q + 4 * q
    }
    if rows >= cols {
        tall(rows, cols)
    } else {
        // transpose copy + tall path + the two result transposes
        rows * cols + tall(cols, rows) + rows * rows + rows * cols
    }
}

// ── Householder bidiagonalization ───────────────────────────────────

/// Reduce a tall p×q matrix (p ≥ q) to upper bidiagonal form in place.
///
/// Reflector tails are stored in the zeroed-out parts of `work` (scaled so
/// the implicit leading element is 1); `tau_left`/`tau_right` hold the
/// reflector scales, 0 where no reflector was applied.
fn bidiagonalize(
    work: &mut Matrix,
    diag: &mut [f64],
    off_diag: &mut [f64],
    tau_left: &mut [f64],
    tau_right: &mut [f64],
) {
    let p = work.rows();
    let q = work.cols();

    for k in 0..q {
        // Left reflector: zero out work[k+1.., k].
        let mut norm_sq = 0.0;
        for i in k..p {
            let v = work[(i, k)];
            norm_sq += v * v;
        }
        if norm_sq > f64::MIN_POSITIVE {
            let norm = norm_sq.sqrt();
            let akk = work[(k, k)];
            let sigma = if akk == 0.0 { norm } else { norm * akk.signum() };
            let v0 = akk + sigma;
            work[(k, k)] = v0;
            for i in (k + 1)..p {
                work[(i, k)] /= v0;
            }
            let tau = v0 / sigma;
            tau_left[k] = tau;

            // Apply to trailing columns.
            for j in (k + 1)..q {
                let mut dot = work[(k, j)];
                for i in (k + 1)..p {
                    dot += work[(i, k)] * work[(i, j)];
                }
                dot *= tau;
                work[(k, j)] -= dot;
                for i in (k + 1)..p {
                    let w = work[(i, k)];
                    work[(i, j)] -= dot * w;
                }
            }
            diag[k] = -sigma;
        } else {
            tau_left[k] = 0.0;
            diag[k] = work[(k, k)];
        }

        // Right reflector: zero out work[k, k+2..]. Needed only when at
        // least two entries sit right of the diagonal.
        if k + 2 < q {
            let mut norm_sq = 0.0;
            for j in (k + 1)..q {
                let v = work[(k, j)];
                norm_sq += v * v;
            }
            if norm_sq > f64::MIN_POSITIVE {
                let norm = norm_sq.sqrt();
                let akj = work[(k, k + 1)];
                let sigma = if akj == 0.0 { norm } else { norm * akj.signum() };
                let v0 = akj + sigma;
                work[(k, k + 1)] = v0;
                for j in (k + 2)..q {
                    work[(k, j)] /= v0;
                }
                let tau = v0 / sigma;
                tau_right[k] = tau;

                // Apply from the right to the remaining rows.
                for i in (k + 1)..p {
                    let mut dot = work[(i, k + 1)];
                    for j in (k + 2)..q {
                        dot += work[(i, j)] * work[(k, j)];
                    }
                    dot *= tau;
                    work[(i, k + 1)] -= dot;
                    for j in (k + 2)..q {
                        let w = work[(k, j)];
                        work[(i, j)] -= dot * w;
                    }
                }
                off_diag[k] = -sigma;
            } else {
                tau_right[k] = 0.0;
                off_diag[k] = work[(k, k + 1)];
            }
        } else if k + 1 < q {
            tau_right[k] = 0.0;
            off_diag[k] = work[(k, k + 1)];
        }
    }
}

/// Back-accumulate the thin left transform: U = H_0 · H_1 ⋯ H_{q−1} · E,
/// where E is the first q columns of I_p.
fn accumulate_u(work: &Matrix, tau_left: &[f64]) -> Matrix {
    let p = work.rows();
    let q = work.cols();
    let mut u = Matrix::zeros(p, q);
    for j in 0..q {
        u[(j, j)] = 1.0;
    }
    for k in (0..q).rev() {
        let tau = tau_left[k];
        if tau == 0.0 {
            continue;
        }
        for j in 0..q {
            let mut s = u[(k, j)];
            for i in (k + 1)..p {
                s += work[(i, k)] * u[(i, j)];
            }
            s *= tau;
            u[(k, j)] -= s;
            for i in (k + 1)..p {
                let w = work[(i, k)];
                u[(i, j)] -= s * w;
            }
        }
    }
    u
}

/// Back-accumulate the right transform V = G_0 · G_1 ⋯ acting on I_q.
fn accumulate_v(work: &Matrix, tau_right: &[f64]) -> Matrix {
    let q = work.cols();
    let mut v = Matrix::identity(q);
    if q < 3 {
        return v;
    }
    for k in (0..q - 2).rev() {
        let tau = tau_right[k];
        if tau == 0.0 {
            continue;
        }
        // Reflector acts on indices k+1..q with implicit leading 1.
        for j in 0..q {
            let mut s = v[(k + 1, j)];
            for i in (k + 2)..q {
                s += work[(k, i)] * v[(i, j)];
            }
            s *= tau;
            v[(k + 1, j)] -= s;
            for i in (k + 2)..q {
                let w = work[(k, i)];
                v[(i, j)] -= s * w;
            }
        }
    }
    v
}

// ── Bidiagonal QR iteration ─────────────────────────────────────────

/// Givens rotation (c, s) with c·a + s·b = r and −s·a + c·b = 0.
fn givens(a: f64, b: f64) -> (f64, f64) {
    let r = a.hypot(b);
    if r == 0.0 {
        (1.0, 0.0)
    } else {
        (a / r, b / r)
    }
}

fn rotate_columns(m: &mut Matrix, j0: usize, j1: usize, c: f64, s: f64) {
    for row in 0..m.rows() {
        let a = m[(row, j0)];
        let b = m[(row, j1)];
        m[(row, j0)] = c * a + s * b;
        m[(row, j1)] = c * b - s * a;
    }
}

/// Golub-Kahan implicit-shift QR on a bidiagonal matrix; rotations are
/// accumulated into the columns of `u` and `v`. On success `diag` holds
/// non-negative singular values sorted descending.
fn bidiagonal_qr(
    diag: &mut [f64],
    off_diag: &mut [f64],
    u: &mut Matrix,
    v: &mut Matrix,
) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }

    let scale = diag
        .iter()
        .chain(off_diag.iter())
        .fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let zero_thresh = SVD_CONVERGENCE_TOL * scale;

    let max_iter = 30 * n.max(4);
    let mut iter = 0usize;
    let mut hi = n - 1;

    while hi > 0 {
        // Deflate a negligible trailing off-diagonal.
        let threshold = SVD_CONVERGENCE_TOL * (diag[hi - 1].abs() + diag[hi].abs());
        if off_diag[hi - 1].abs() <= threshold {
            off_diag[hi - 1] = 0.0;
            hi -= 1;
            continue;
        }

        // Start of the unreduced block ending at hi.
        let mut lo = hi - 1;
        while lo > 0 {
            let threshold = SVD_CONVERGENCE_TOL * (diag[lo - 1].abs() + diag[lo].abs());
            if off_diag[lo - 1].abs() <= threshold {
                off_diag[lo - 1] = 0.0;
                break;
            }
            lo -= 1;
        }

        iter += 1;
        if iter > max_iter {
            return Err(Error::NoConvergence {
                op: "svd",
                iterations: iter,
            });
        }

        // A zero diagonal inside the block breaks the shift formula; chase
        // the corresponding off-diagonal off the bottom with left rotations.
        let mut found_zero = false;
        for idx in lo..hi {
            if diag[idx].abs() <= zero_thresh {
                diag[idx] = 0.0;
                let mut z = off_diag[idx];
                off_diag[idx] = 0.0;
                for j in (idx + 1)..=hi {
                    let (c, s) = givens(diag[j], z);
                    diag[j] = c * diag[j] + s * z;
                    if j < hi {
                        z = -s * off_diag[j];
                        off_diag[j] *= c;
                    }
                    // Left rotation mixes U columns (j, idx).
                    for row in 0..u.rows() {
                        let uj = u[(row, j)];
                        let ui = u[(row, idx)];
                        u[(row, j)] = c * uj + s * ui;
                        u[(row, idx)] = c * ui - s * uj;
                    }
                }
                found_zero = true;
                break;
            }
        }
        if found_zero {
            continue;
        }

        // Wilkinson shift from the trailing 2×2 of BᵀB.
        let d_hi = diag[hi];
        let d_hi1 = diag[hi - 1];
        let e_hi1 = off_diag[hi - 1];
        let e_hi2 = if hi >= 2 && hi - 2 >= lo {
            off_diag[hi - 2]
        } else {
            0.0
        };
        let t11 = d_hi1 * d_hi1 + e_hi2 * e_hi2;
        let t12 = d_hi1 * e_hi1;
        let t22 = d_hi * d_hi + e_hi1 * e_hi1;
        let d = (t11 - t22) / 2.0;
        let sign_d = if d >= 0.0 { 1.0 } else { -1.0 };
        let mu = t22 - t12 * t12 / (d + sign_d * (d * d + t12 * t12).sqrt());

        // Implicit QR chase down the block.
        let mut x = diag[lo] * diag[lo] - mu;
        let mut z = diag[lo] * off_diag[lo];

        for k in lo..hi {
            let (c, s) = givens(x, z);
            if k > lo {
                off_diag[k - 1] = c * x + s * z;
            }

            let dk = diag[k];
            let ek = off_diag[k];
            let dk1 = diag[k + 1];
            diag[k] = c * dk + s * ek;
            off_diag[k] = c * ek - s * dk;
            let bulge = s * dk1;
            diag[k + 1] = c * dk1;
            rotate_columns(v, k, k + 1, c, s);

            let (c2, s2) = givens(diag[k], bulge);
            diag[k] = c2 * diag[k] + s2 * bulge;
            let old_ek = off_diag[k];
            let old_dk1 = diag[k + 1];
            off_diag[k] = c2 * old_ek + s2 * old_dk1;
            diag[k + 1] = c2 * old_dk1 - s2 * old_ek;
            if k + 1 < hi {
                let old_ek1 = off_diag[k + 1];
                x = off_diag[k];
                z = s2 * old_ek1;
                off_diag[k + 1] = c2 * old_ek1;
            }
            rotate_columns(u, k, k + 1, c2, s2);
        }
    }

    // Non-negative singular values.
    for i in 0..n {
        if diag[i] < 0.0 {
            diag[i] = -diag[i];
            for row in 0..u.rows() {
                u[(row, i)] = -u[(row, i)];
            }
        }
        diag[i] = diag[i].max(0.0);
    }

    // Sort descending, permuting U and V columns alongside.
    for i in 0..n {
        let mut max_idx = i;
        for j in (i + 1)..n {
            if diag[j] > diag[max_idx] {
                max_idx = j;
            }
        }
        if max_idx != i {
            diag.swap(i, max_idx);
            for row in 0..u.rows() {
                let tmp = u[(row, i)];
                u[(row, i)] = u[(row, max_idx)];
                u[(row, max_idx)] = tmp;
            }
            for row in 0..v.rows() {
                let tmp = v[(row, i)];
                v[(row, i)] = v[(row, max_idx)];
                v[(row, max_idx)] = tmp;
            }
        }
    }

    Ok(())
}

fn svd_tall(a: &Matrix) -> Result<SvdResult> {
    let p = a.rows();
    let q = a.cols();
    debug_assert!(p >= q);

    let mut work = a.clone();
    let mut diag = vec![0.0; q];
    let mut off_diag = vec![0.0; q.saturating_sub(1)];
    let mut tau_left = vec![0.0; q];
    let mut tau_right = vec![0.0; q];

    bidiagonalize(&mut work, &mut diag, &mut off_diag, &mut tau_left, &mut tau_right);
    let mut u = accumulate_u(&work, &tau_left);
    let mut v = accumulate_v(&work, &tau_right);
    bidiagonal_qr(&mut diag, &mut off_diag, &mut u, &mut v)?;

    Ok(SvdResult {
        u,
        s: diag,
        vt: v.transpose(),
    })
}
