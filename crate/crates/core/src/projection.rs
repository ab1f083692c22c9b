//! Orthogonal gradient projection.
//!
//! A gradient is replaced by its component orthogonal to the significant
//! basis of previous tasks' activations, `∇ − ÛÛᵀ∇`, so the weight update
//! cannot move outputs on inputs that lie in the protected span. The empty
//! basis is the "initial task" case and passes gradients through untouched.

use crate::basis::SignificantBasis;
use crate::error::{dim_mismatch, invalid, Result};
use crate::matrix::Matrix;

const NORM_EPS: f64 = 1e-12;

/// Per-layer protected bases plus the learning rate they guard.
#[derive(Debug, Clone)]
pub struct ProjectionState {
    per_layer_bases: Vec<SignificantBasis>,
    eta: f64,
}

impl ProjectionState {
    /// A state with no bases yet (nothing is protected).
    pub fn new(eta: f64) -> Result<Self> {
        if eta <= 0.0 || !eta.is_finite() {
            return Err(invalid("ProjectionState::new", "eta must be positive and finite"));
        }
        Ok(Self {
            per_layer_bases: Vec::new(),
            eta,
        })
    }

    #[inline]
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// True once any layer has a nonempty basis.
    pub fn has_bases(&self) -> bool {
        self.per_layer_bases.iter().any(|b| !b.is_empty())
    }

    pub fn bases(&self) -> &[SignificantBasis] {
        &self.per_layer_bases
    }

    pub fn basis_for_layer(&self, layer: usize) -> Option<&SignificantBasis> {
        self.per_layer_bases.get(layer)
    }

    /// Replace the whole per-layer list (ordered by layer index).
    pub fn set_bases(&mut self, bases: Vec<SignificantBasis>) {
        self.per_layer_bases = bases;
    }
}

/// `∇ − ÛÛᵀ∇`: the gradient component orthogonal to the protected span.
/// The empty basis returns the input unchanged.
pub fn project_orthogonal(grad: &Matrix, basis: &SignificantBasis) -> Result<Matrix> {
    if basis.is_empty() {
        return Ok(grad.clone());
    }
    if basis.dim() != grad.rows() {
        return Err(dim_mismatch(
            "project_orthogonal",
            format!("{} rows", basis.dim()),
            format!("{}", grad.rows()),
        ));
    }
    let projected = basis.apply_projector(grad)?;
    grad.sub(&projected)
}

/// Normalized interference `‖X_pre · ∇_orth‖_F / (‖X_pre‖_F · ‖∇_orth‖_F + ε)`.
/// Near zero means the update leaves the previous tasks' outputs alone.
pub fn interference(x_pre: &Matrix, grad_orth: &Matrix) -> Result<f64> {
    if x_pre.cols() != grad_orth.rows() {
        return Err(dim_mismatch(
            "interference",
            format!("inner dim {}", x_pre.cols()),
            format!("{}", grad_orth.rows()),
        ));
    }
    let prod = x_pre.matmul(grad_orth)?;
    let num = prod.frobenius_norm_sq().sqrt();
    let den = x_pre.frobenius_norm_sq().sqrt() * grad_orth.frobenius_norm_sq().sqrt();
    Ok(num / (den + NORM_EPS))
}

/// One SGD step `W − η·∇`, optionally projecting the gradient first.
pub fn apply_update(
    weights: &Matrix,
    grad: &Matrix,
    basis: &SignificantBasis,
    eta: f64,
    project: bool,
) -> Result<Matrix> {
    if weights.rows() != grad.rows() || weights.cols() != grad.cols() {
        return Err(dim_mismatch(
            "apply_update",
            format!("{}x{}", weights.rows(), weights.cols()),
            format!("{}x{}", grad.rows(), grad.cols()),
        ));
    }
    if !eta.is_finite() {
        return Err(invalid("apply_update", "eta must be finite"));
    }
    let step = if project {
        project_orthogonal(grad, basis)?
    } else {
        grad.clone()
    };
    weights.sub(&step.scale(eta))
}
