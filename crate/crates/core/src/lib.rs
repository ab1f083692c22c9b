//! Memory-bounded significant-representation computation and orthogonal
//! gradient projection, with a desk-scale continual anomaly-scoring harness.
//!
//! The crate is organized along the pipeline:
//!
//! - [`matrix`], [`svd`](mod@svd), [`basis`]: dense primitives — row-major matrices,
//!   an economy SVD, and energy-thresholded k-rank bases.
//! - [`isvd`]: streaming (block-iterative) significant-representation
//!   computation with a memory-cost model and its direct-SVD oracle.
//! - [`projection`]: orthogonal gradient projection against a basis and the
//!   interference diagnostic.
//! - [`net`], [`harness`]: a small dense autoencoder trained task-by-task
//!   with projected SGD, activation capture, and anomaly scoring.
//! - [`metrics`]: anomaly maps, AUROC, and the continual-learning metric
//!   table (average score and forgetting measure).

pub mod basis;
pub mod error;
pub mod harness;
pub mod isvd;
pub mod matrix;
pub mod metrics;
pub mod net;
pub mod projection;
pub mod rng;
pub mod svd;

pub use basis::{k_rank_basis, orthonormality_defect, subspace_gap, SignificantBasis, ThresholdMode};
pub use error::{Error, Result};
pub use harness::{
    capture_and_update_basis, evaluate_task, make_tasks, run_sequence, train_task, FrameMode,
    RunReport, SequenceConfig, TaskData, TaskGenConfig, TaskSequence, TrainHyper,
};
pub use isvd::{
    estimate_memory, init_stream, residual_spectrum, significant_basis_direct, stream_blocks,
    IsvdState, MemoryEstimate,
};
pub use matrix::Matrix;
pub use metrics::{
    a_metric, anomaly_map, auroc, bilinear_upsample, forgetting_measure, image_score,
    FeatureStack, MetricTable, Tensor3,
};
pub use net::{backward, mse_loss, Activation, DenseLayer, DenseNet, ForwardTrace, Gradients};
pub use projection::{apply_update, interference, project_orthogonal, ProjectionState};
pub use svd::{svd, SvdResult};
