//! Iterative significant-representation computation over a block stream.
//!
//! The full feature matrix M (d × Λ, Λ ≫ d) is consumed one block at a
//! time: the running basis Û is concatenated with the incoming block and
//! re-truncated, so only the concatenated working set is ever live instead
//! of the whole matrix. `significant_basis_direct` is the whole-matrix
//! oracle the streamed result is validated against, and `estimate_memory`
//! carries the scalar-count cost model for both routes.
//!
//! One scale caveat is inherited from the recursion itself: the running
//! basis columns are unit-norm while incoming blocks carry raw activation
//! scale, so the energy threshold mixes the two scales. The stream follows
//! that definition literally; [`IsvdState::with_basis_rescale`] is an
//! opt-in hook to re-weight the basis columns before each concatenation.

use crate::basis::{k_rank_basis, SignificantBasis, ThresholdMode};
use crate::error::{dim_mismatch, invalid, Result};
use crate::matrix::Matrix;
use crate::svd::svd_aux_scalars;

/// Guard for normalizing residuals of (near-)zero columns.
pub const RESIDUAL_EPS: f64 = 1e-12;

/// In-progress iterative decomposition.
#[derive(Debug, Clone)]
pub struct IsvdState {
    dim_d: usize,
    gamma_th: f64,
    basis: SignificantBasis,
    blocks_absorbed: usize,
    peak_aux_scalars: usize,
    basis_rescale: Option<f64>,
}

impl IsvdState {
    #[inline]
    pub fn dim_d(&self) -> usize {
        self.dim_d
    }

    #[inline]
    pub fn gamma_th(&self) -> f64 {
        self.gamma_th
    }

    #[inline]
    pub fn basis(&self) -> &SignificantBasis {
        &self.basis
    }

    #[inline]
    pub fn blocks_absorbed(&self) -> usize {
        self.blocks_absorbed
    }

    /// Largest scalar working set any absorb step has materialized so far
    /// (concatenated matrix plus the decomposition's documented
    /// allocations). Non-decreasing across absorbs.
    #[inline]
    pub fn peak_aux_scalars(&self) -> usize {
        self.peak_aux_scalars
    }

    /// Multiply the running basis columns by `scale` before each
    /// concatenation. Off by default.
    pub fn with_basis_rescale(mut self, scale: f64) -> Self {
        self.basis_rescale = Some(scale);
        self
    }

    /// Fold one d × m block into the running basis.
    ///
    /// An all-zero block leaves the basis untouched (it has no column
    /// space) but still counts as absorbed.
    pub fn absorb_block(&self, block: &Matrix) -> Result<IsvdState> {
        if block.rows() != self.dim_d {
            return Err(dim_mismatch(
                "absorb_block",
                format!("{} rows", self.dim_d),
                format!("{}", block.rows()),
            ));
        }
        if block.cols() == 0 {
            return Err(invalid("absorb_block", "block must have at least one column"));
        }
        let mut next = self.clone();
        next.blocks_absorbed += 1;
        if block.frobenius_norm_sq() == 0.0 {
            return Ok(next);
        }
        let carried = match self.basis_rescale {
            Some(scale) if !self.basis.is_empty() => self.basis.basis().scale(scale),
            _ => self.basis.basis().clone(),
        };
        let concat = carried.hstack(block)?;
        let step_aux = concat.len() + svd_aux_scalars(concat.rows(), concat.cols());
        next.peak_aux_scalars = next.peak_aux_scalars.max(step_aux);
        next.basis = k_rank_basis(&concat, self.gamma_th, ThresholdMode::EnergyAtLeast)?;
        Ok(next)
    }

    /// The current overall significant representation. The state stays
    /// usable; further absorbs are allowed.
    pub fn finalize(&self) -> SignificantBasis {
        self.basis.clone()
    }
}

/// Open a stream over a d-dimensional feature space. A seed basis carries a
/// prior task's representation across the boundary; `None` starts empty.
pub fn init_stream(
    dim_d: usize,
    gamma_th: f64,
    seed_basis: Option<SignificantBasis>,
) -> Result<IsvdState> {
    if dim_d == 0 {
        return Err(invalid("init_stream", "dim_d must be positive"));
    }
    if !(0.0..=1.0).contains(&gamma_th) {
        return Err(invalid("init_stream", "gamma_th must lie in [0, 1]"));
    }
    let basis = match seed_basis {
        Some(seed) => {
            if seed.dim() != dim_d {
                return Err(dim_mismatch(
                    "init_stream",
                    format!("seed with {dim_d} rows"),
                    format!("{}", seed.dim()),
                ));
            }
            seed
        }
        None => SignificantBasis::empty(dim_d, gamma_th),
    };
    Ok(IsvdState {
        dim_d,
        gamma_th,
        basis,
        blocks_absorbed: 0,
        peak_aux_scalars: 0,
        basis_rescale: None,
    })
}

/// Split `m` column-wise into `n_blocks` near-equal blocks (first blocks get
/// the remainder; no padding) and absorb them in order.
pub fn stream_blocks(
    m: &Matrix,
    gamma_th: f64,
    n_blocks: usize,
    seed_basis: Option<SignificantBasis>,
) -> Result<IsvdState> {
    if n_blocks == 0 {
        return Err(invalid("stream_blocks", "n_blocks must be at least 1"));
    }
    if n_blocks > m.cols() {
        return Err(invalid(
            "stream_blocks",
            format!("n_blocks {} exceeds column count {}", n_blocks, m.cols()),
        ));
    }
    let mut state = init_stream(m.rows(), gamma_th, seed_basis)?;
    let base = m.cols() / n_blocks;
    let remainder = m.cols() % n_blocks;
    let mut lo = 0;
    for b in 0..n_blocks {
        let width = base + usize::from(b < remainder);
        let block = m.col_slice(lo, lo + width);
        state = state.absorb_block(&block)?;
        lo += width;
    }
    Ok(state)
}

/// Whole-matrix significant representation: the oracle iSVD is validated
/// against.
pub fn significant_basis_direct(m: &Matrix, gamma_th: f64) -> Result<SignificantBasis> {
    k_rank_basis(m, gamma_th, ThresholdMode::EnergyAtLeast)
}

/// Per-column normalized projection residuals `‖c − ÛÛᵀc‖₂ / max(‖c‖₂, ε)`.
pub fn residual_spectrum(m: &Matrix, basis: &SignificantBasis) -> Result<Vec<f64>> {
    if basis.dim() != m.rows() {
        return Err(dim_mismatch(
            "residual_spectrum",
            format!("{} rows", basis.dim()),
            format!("{}", m.rows()),
        ));
    }
    let projected = basis.apply_projector(m)?;
    let mut out = Vec::with_capacity(m.cols());
    for j in 0..m.cols() {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..m.rows() {
            let c = m[(i, j)];
            let r = c - projected[(i, j)];
            num += r * r;
            den += c * c;
        }
        out.push(num.sqrt() / den.sqrt().max(RESIDUAL_EPS));
    }
    Ok(out)
}

/// Scalar-count cost model for the direct and iterative routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryEstimate {
    /// dΛ + d² + Λ² + min(d, Λ): matrix plus full factors, direct route.
    pub svd_scalars: usize,
    /// d(m+k) + d² + (m+k)² + min(d, m+k) with m = ⌈Λ/n⌉: one absorb step.
    pub isvd_scalars: usize,
    /// 1 − isvd/svd. Can dip marginally below zero at n = 1, where the
    /// carried basis makes the concatenation wider than the matrix itself.
    pub saving_rate: f64,
}

/// Evaluate the cost model. `k` is the observed retained rank (it is
/// data-dependent, so the caller measures it and feeds it back).
///
/// The counts are scalars, not device bytes: allocator behavior and memory
/// sharing make hardware-measured savings fall short of the model, so the
/// n² asymptote is a ceiling the trend approaches, not a promise.
pub fn estimate_memory(
    d: usize,
    lambda_total: usize,
    n_blocks: usize,
    k: usize,
) -> Result<MemoryEstimate> {
    if n_blocks == 0 {
        return Err(invalid("estimate_memory", "n_blocks must be at least 1"));
    }
    if lambda_total < n_blocks {
        return Err(invalid(
            "estimate_memory",
            format!("lambda_total {lambda_total} smaller than n_blocks {n_blocks}"),
        ));
    }
    if k > d {
        return Err(invalid("estimate_memory", format!("k {k} exceeds d {d}")));
    }
    let m = lambda_total.div_ceil(n_blocks);
    let svd_scalars = d * lambda_total + d * d + lambda_total * lambda_total + d.min(lambda_total);
    let mk = m + k;
    let isvd_scalars = d * mk + d * d + mk * mk + d.min(mk);
    let saving_rate = 1.0 - isvd_scalars as f64 / svd_scalars as f64;
    Ok(MemoryEstimate {
        svd_scalars,
        isvd_scalars,
        saving_rate,
    })
}
