//! Significant-representation extraction: k-rank column bases under a
//! Frobenius-energy threshold.
//!
//! `k_rank_basis` keeps the left singular vectors with the largest singular
//! values until the retained squared-singular-value mass crosses the
//! threshold. Two threshold conventions exist in the source material and
//! both are implemented:
//!
//! - [`ThresholdMode::EnergyAtLeast`] (default): k is the smallest count
//!   whose cumulative energy ratio is ≥ γ_th, so the retained-energy
//!   guarantee holds whenever the input is nonzero.
//! - [`ThresholdMode::Algorithm1Literal`]: k counts the prefix positions
//!   whose cumulative ratio is strictly below γ_th, which retains strictly
//!   less than the threshold (an off-by-one relative to the guarantee, but
//!   a convention some published pseudocode uses).
//!
//! Zero matrices and γ_th = 0 yield k = 0; the empty basis is a first-class
//! value and flows through projection and streaming without special cases.

use crate::error::{dim_mismatch, invalid, Result};
use crate::matrix::Matrix;
use crate::svd::svd;

/// Maximum allowed `‖UᵀU − I‖_max` for a basis to be accepted.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

/// How the retained rank k is chosen against the energy threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdMode {
    /// Smallest k with cumulative energy ratio ≥ γ_th.
    #[default]
    EnergyAtLeast,
    /// Count of prefix positions with cumulative ratio strictly < γ_th.
    Algorithm1Literal,
}

/// Column-orthonormal basis of the significant subspace, together with the
/// threshold that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificantBasis {
    basis: Matrix,
    gamma_th: f64,
    retained_energy: f64,
}

impl SignificantBasis {
    /// Wrap a column-orthonormal matrix as a basis. Rejects matrices whose
    /// orthonormality defect exceeds [`ORTHONORMALITY_TOL`].
    pub fn new(basis: Matrix, gamma_th: f64, retained_energy: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma_th) {
            return Err(invalid("SignificantBasis::new", "gamma_th must lie in [0, 1]"));
        }
        if basis.cols() > basis.rows() {
            return Err(invalid(
                "SignificantBasis::new",
                format!("{} columns exceed dimension {}", basis.cols(), basis.rows()),
            ));
        }
        if orthonormality_defect(&basis) > ORTHONORMALITY_TOL {
            return Err(invalid(
                "SignificantBasis::new",
                "columns are not orthonormal within tolerance",
            ));
        }
        Ok(Self {
            basis,
            gamma_th,
            retained_energy,
        })
    }

    /// The k = 0 basis of a d-dimensional space.
    pub fn empty(dim: usize, gamma_th: f64) -> Self {
        Self {
            basis: Matrix::zeros(dim, 0),
            gamma_th,
            retained_energy: 0.0,
        }
    }

    #[inline]
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    #[inline]
    pub fn gamma_th(&self) -> f64 {
        self.gamma_th
    }

    #[inline]
    pub fn retained_energy(&self) -> f64 {
        self.retained_energy
    }

    /// Number of retained directions.
    #[inline]
    pub fn k(&self) -> usize {
        self.basis.cols()
    }

    /// Ambient dimension d.
    #[inline]
    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.k() == 0
    }

    /// Orthogonal projection `ÛÛᵀm` onto the spanned subspace; the empty
    /// basis projects everything to zero.
    pub fn apply_projector(&self, m: &Matrix) -> Result<Matrix> {
        if m.rows() != self.dim() {
            return Err(dim_mismatch(
                "apply_projector",
                format!("{} rows", self.dim()),
                format!("{}", m.rows()),
            ));
        }
        if self.is_empty() {
            return Ok(Matrix::zeros(m.rows(), m.cols()));
        }
        let coeffs = self.basis.transpose().matmul(m)?;
        self.basis.matmul(&coeffs)
    }
}

/// `‖UᵀU − I‖_max`: how far the columns of `u` are from orthonormal.
pub fn orthonormality_defect(u: &Matrix) -> f64 {
    let k = u.cols();
    if k == 0 {
        return 0.0;
    }
    let gram = u.transpose().matmul(u).expect("square product");
    let mut defect = 0.0_f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((gram[(i, j)] - target).abs());
        }
    }
    defect
}

/// Significant basis of `m` under threshold `gamma_th`.
///
/// The zero matrix yields the empty basis. The spanned subspace, not the
/// individual columns, is the contract: equal singular values are retained
/// in the deterministic solver's index order.
pub fn k_rank_basis(m: &Matrix, gamma_th: f64, mode: ThresholdMode) -> Result<SignificantBasis> {
    if !(0.0..=1.0).contains(&gamma_th) {
        return Err(invalid("k_rank_basis", "gamma_th must lie in [0, 1]"));
    }
    if m.frobenius_norm_sq() == 0.0 {
        return Ok(SignificantBasis::empty(m.rows(), gamma_th));
    }
    let decomp = svd(m)?;
    // Partial sums share the total's summation order, so the final partial
    // sum equals the total bit-for-bit and γ_th = 1.0 terminates exactly.
    let total: f64 = decomp.s.iter().map(|s| s * s).sum();
    let k = match mode {
        ThresholdMode::EnergyAtLeast => {
            let target = gamma_th * total;
            let mut cum = 0.0;
            let mut k = 0;
            while cum < target && k < decomp.s.len() {
                cum += decomp.s[k] * decomp.s[k];
                k += 1;
            }
            k
        }
        ThresholdMode::Algorithm1Literal => {
            let mut cum = 0.0;
            let mut k = 0;
            for s in &decomp.s {
                cum += s * s;
                if cum / total < gamma_th {
                    k += 1;
                }
            }
            k
        }
    };
    let retained: f64 = decomp.s[..k].iter().map(|s| s * s).sum();
    SignificantBasis::new(decomp.u.col_slice(0, k), gamma_th, retained / total)
}

/// Frobenius bound on the sine of the largest principal angle between the
/// spans of two column-orthonormal bases. Zero means identical spans; the
/// bound is symmetric and conservative (it dominates the true sine).
pub fn subspace_gap(a: &SignificantBasis, b: &SignificantBasis) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(dim_mismatch(
            "subspace_gap",
            format!("{} rows", a.dim()),
            format!("{}", b.dim()),
        ));
    }
    let one_way = |from: &SignificantBasis, to: &SignificantBasis| -> Result<f64> {
        if from.is_empty() {
            return Ok(0.0);
        }
        let projected = to.apply_projector(from.basis())?;
        Ok(from.basis().sub(&projected)?.frobenius_norm_sq().sqrt())
    };
    Ok(one_way(a, b)?.max(one_way(b, a)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_matrix;

    #[test]
    fn defect_hand_cases() {
        assert_eq!(orthonormality_defect(&Matrix::identity(4)), 0.0);
        // UᵀU = diag(1, 4): max |UᵀU − I| = 3.
        let u = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 2.0]]).unwrap();
        assert_eq!(orthonormality_defect(&u), 3.0);
        assert_eq!(orthonormality_defect(&Matrix::zeros(3, 0)), 0.0);
    }

    #[test]
    fn diag_2_1_mode_split() {
        // Energy ratios are [0.8, 0.2] against γ_th = 0.9.
        let m = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]).unwrap();
        let at_least = k_rank_basis(&m, 0.9, ThresholdMode::EnergyAtLeast).unwrap();
        assert_eq!(at_least.k(), 2);
        assert!(at_least.retained_energy() >= 0.9);
        let literal = k_rank_basis(&m, 0.9, ThresholdMode::Algorithm1Literal).unwrap();
        assert_eq!(literal.k(), 1);
    }

    #[test]
    fn full_retention_keeps_full_rank() {
        let m = seeded_matrix(4, 9, 11);
        let b = k_rank_basis(&m, 1.0, ThresholdMode::EnergyAtLeast).unwrap();
        assert_eq!(b.k(), 4);
        assert!((b.retained_energy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_threshold_keeps_nothing() {
        let m = seeded_matrix(4, 9, 11);
        for mode in [ThresholdMode::EnergyAtLeast, ThresholdMode::Algorithm1Literal] {
            assert_eq!(k_rank_basis(&m, 0.0, mode).unwrap().k(), 0);
        }
    }

    #[test]
    fn zero_matrix_yields_empty_basis() {
        let b = k_rank_basis(&Matrix::zeros(5, 8), 0.98, ThresholdMode::EnergyAtLeast).unwrap();
        assert_eq!(b.k(), 0);
        assert_eq!(b.dim(), 5);
    }

    #[test]
    fn gamma_out_of_range_is_rejected() {
        let m = Matrix::identity(2);
        assert!(k_rank_basis(&m, -0.1, ThresholdMode::EnergyAtLeast).is_err());
        assert!(k_rank_basis(&m, 1.1, ThresholdMode::EnergyAtLeast).is_err());
    }

    #[test]
    fn basis_is_orthonormal_by_construction() {
        for seed in 0..50u64 {
            let m = seeded_matrix(8, 33, seed);
            let b = k_rank_basis(&m, 0.9, ThresholdMode::EnergyAtLeast).unwrap();
            assert!(orthonormality_defect(b.basis()) <= 1e-8);
        }
    }

    #[test]
    fn k_is_monotone_in_gamma() {
        let gammas = [0.0, 0.1, 0.5, 0.9, 0.99, 0.999, 1.0];
        for seed in 0..20u64 {
            let m = seeded_matrix(10, 40, seed);
            for mode in [ThresholdMode::EnergyAtLeast, ThresholdMode::Algorithm1Literal] {
                let ks: Vec<usize> = gammas
                    .iter()
                    .map(|&g| k_rank_basis(&m, g, mode).unwrap().k())
                    .collect();
                for w in ks.windows(2) {
                    assert!(w[0] <= w[1], "seed {seed}: k not monotone: {ks:?}");
                }
            }
        }
    }

    #[test]
    fn energy_guarantee_restated() {
        for seed in 0..30u64 {
            let m = seeded_matrix(12, 50, seed);
            for gamma in [0.5, 0.9, 0.98, 0.999, 1.0] {
                let b = k_rank_basis(&m, gamma, ThresholdMode::EnergyAtLeast).unwrap();
                assert!(
                    b.retained_energy() >= gamma - 1e-12,
                    "seed {seed} gamma {gamma}: retained {}",
                    b.retained_energy()
                );
            }
        }
    }

    #[test]
    fn rank_one_stream_keeps_single_direction() {
        let m = Matrix::from_rows(&[&[2.0, 5.0], &[0.0, 0.0], &[0.0, 0.0]]).unwrap();
        let b = k_rank_basis(&m, 1.0, ThresholdMode::EnergyAtLeast).unwrap();
        assert_eq!(b.k(), 1);
        assert!((b.basis()[(0, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subspace_gap_detects_equality_and_difference() {
        let m = seeded_matrix(10, 30, 5);
        let a = k_rank_basis(&m, 1.0, ThresholdMode::EnergyAtLeast).unwrap();
        let b = k_rank_basis(&m.scale(3.0), 1.0, ThresholdMode::EnergyAtLeast).unwrap();
        assert!(subspace_gap(&a, &b).unwrap() <= 1e-10);

        let e1 = SignificantBasis::new(
            Matrix::from_rows(&[&[1.0], &[0.0]]).unwrap(),
            1.0,
            1.0,
        )
        .unwrap();
        let e2 = SignificantBasis::new(
            Matrix::from_rows(&[&[0.0], &[1.0]]).unwrap(),
            1.0,
            1.0,
        )
        .unwrap();
        assert!((subspace_gap(&e1, &e2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projector_on_empty_basis_is_zero() {
        let b = SignificantBasis::empty(3, 0.5);
        let m = seeded_matrix(3, 4, 1);
        assert_eq!(b.apply_projector(&m).unwrap(), Matrix::zeros(3, 4));
    }
}
