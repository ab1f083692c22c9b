//! Desk-scale continual learning harness.
//!
//! A dense autoencoder is trained task-by-task with plain SGD. Weight
//! gradients are optionally projected orthogonal to per-layer significant
//! bases; bias gradients are applied raw (biases sit outside the activation
//! × weight model the projection protects, and are off by default in the
//! nullification suites). After each task, the per-layer activation
//! capture is subsampled and streamed into the running bases, seeded with
//! each layer's prior basis. Anomaly scoring is per-sample squared
//! reconstruction error, rated by AUROC against perturbed eval samples.

use serde::{Deserialize, Serialize};

use crate::basis::SignificantBasis;
use crate::error::{invalid, Error, Result};
use crate::isvd::stream_blocks;
use crate::matrix::Matrix;
use crate::metrics::{a_metric, auroc, forgetting_measure, MetricTable};
use crate::net::{backward, Activation, DenseNet};
use crate::projection::{project_orthogonal, ProjectionState};
use crate::rng::{chacha, gaussian, shuffled_indices};

/// Default retention threshold for basis capture.
pub const DEFAULT_GAMMA_TH: f64 = 0.999;
/// Default fraction of samples whose activations feed the basis update.
pub const DEFAULT_SAMPLE_FRAC: f64 = 0.1;

fn mix_seed(seed: u64, salt: u64) -> u64 {
    seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

// ── Task generation ─────────────────────────────────────────────────

/// How per-task subspace frames relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameMode {
    /// Pairwise-orthogonal frames (requires task_count · rank_r ≤ d_in):
    /// maximally conflicting tasks.
    Orthogonal,
    /// Independent random frames: overlapping subspaces.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGenConfig {
    pub d_in: usize,
    pub task_count: usize,
    /// Dimension of each task's activation subspace.
    pub rank_r: usize,
    pub train_n: usize,
    pub eval_n: usize,
    /// Magnitude of the sparse additive perturbation on anomalous samples.
    pub anomaly_scale: f64,
    /// Fraction of coordinates perturbed per anomalous sample.
    pub anomaly_frac: f64,
    pub frame_mode: FrameMode,
    /// Strength of the smooth latent nonlinearity (0 = affine manifold).
    pub latent_bend: f64,
}

/// One continual step's data. Train inputs are normal samples only.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub task_id: usize,
    pub train_inputs: Matrix,
    pub eval_normal: Matrix,
    pub eval_anomalous: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSequence {
    pub tasks: Vec<TaskData>,
}

/// Gram-Schmidt orthonormalization of the columns (input must be full
/// column rank, which Gaussian draws are almost surely).
fn orthonormalize_columns(m: &Matrix) -> Result<Matrix> {
    let (d, k) = (m.rows(), m.cols());
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| m.col(j)).collect();
    for j in 0..k {
        let (done, rest) = cols.split_at_mut(j);
        let col = &mut rest[0];
        for prev in done.iter() {
            let dot: f64 = col.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (c, p) in col.iter_mut().zip(prev) {
                *c -= dot * p;
            }
        }
        let norm: f64 = col.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(invalid("orthonormalize_columns", "rank-deficient frame"));
        }
        for c in col.iter_mut() {
            *c /= norm;
        }
    }
    Matrix::from_fn(d, k, |i, j| cols[j][i])
}

/// Synthetic task sequence: task t's normal samples lie on a task-specific
/// rank-r manifold (orthonormal frame applied to a smoothly warped latent),
/// anomalous eval samples are fresh normals with sparse additive
/// perturbations. Deterministic per seed.
pub fn make_tasks(cfg: &TaskGenConfig, seed: u64) -> Result<TaskSequence> {
    if cfg.rank_r > cfg.d_in {
        return Err(invalid(
            "make_tasks",
            format!("rank_r {} exceeds d_in {}", cfg.rank_r, cfg.d_in),
        ));
    }
    if cfg.task_count == 0 || cfg.train_n == 0 || cfg.eval_n == 0 {
        return Err(invalid("make_tasks", "task_count, train_n, eval_n must be positive"));
    }
    if cfg.frame_mode == FrameMode::Orthogonal && cfg.task_count * cfg.rank_r > cfg.d_in {
        return Err(invalid(
            "make_tasks",
            format!(
                "orthogonal frames need task_count·rank_r ≤ d_in ({}·{} > {})",
                cfg.task_count, cfg.rank_r, cfg.d_in
            ),
        ));
    }
    if !(0.0..=1.0).contains(&cfg.anomaly_frac) {
        return Err(invalid("make_tasks", "anomaly_frac must lie in [0, 1]"));
    }
    if cfg.anomaly_scale < 0.0 {
        return Err(invalid("make_tasks", "anomaly_scale must be non-negative"));
    }

    let mut rng = chacha(mix_seed(seed, 0xA5));
    let frames: Vec<Matrix> = match cfg.frame_mode {
        FrameMode::Orthogonal => {
            let joint = Matrix::from_fn(cfg.d_in, cfg.task_count * cfg.rank_r, |_, _| {
                gaussian(&mut rng)
            })?;
            let ortho = orthonormalize_columns(&joint)?;
            (0..cfg.task_count)
                .map(|t| ortho.col_slice(t * cfg.rank_r, (t + 1) * cfg.rank_r))
                .collect()
        }
        FrameMode::Random => {
            let mut frames = Vec::with_capacity(cfg.task_count);
            for _ in 0..cfg.task_count {
                let raw = Matrix::from_fn(cfg.d_in, cfg.rank_r, |_, _| gaussian(&mut rng))?;
                frames.push(orthonormalize_columns(&raw)?);
            }
            frames
        }
    };

    let n_pert = ((cfg.anomaly_frac * cfg.d_in as f64).ceil() as usize).min(cfg.d_in);
    let mut tasks = Vec::with_capacity(cfg.task_count);
    for (t, frame) in frames.iter().enumerate() {
        let offset: Vec<f64> = (0..cfg.rank_r).map(|_| gaussian(&mut rng)).collect();
        let draw_normals = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Result<Matrix> {
            let mut latent = Matrix::zeros(cfg.rank_r, n);
            for j in 0..n {
                for i in 0..cfg.rank_r {
                    let z = gaussian(rng);
                    latent[(i, j)] = offset[i] + z + cfg.latent_bend * z.tanh();
                }
            }
            Ok(frame.matmul(&latent)?.transpose())
        };
        let train_inputs = draw_normals(cfg.train_n, &mut rng)?;
        let eval_normal = draw_normals(cfg.eval_n, &mut rng)?;
        let mut eval_anomalous = draw_normals(cfg.eval_n, &mut rng)?;
        for i in 0..cfg.eval_n {
            let coords = shuffled_indices(cfg.d_in, &mut rng);
            for &c in coords.iter().take(n_pert) {
                eval_anomalous[(i, c)] += cfg.anomaly_scale * gaussian(&mut rng);
            }
        }
        tasks.push(TaskData {
            task_id: t,
            train_inputs,
            eval_normal,
            eval_anomalous,
        });
    }
    Ok(TaskSequence { tasks })
}

// ── Training ────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub eta: f64,
    pub seed: u64,
}

/// SGD over the task's train set (reconstruction targets are the inputs).
/// Weight gradients are projected against the per-layer bases in `proj`
/// when present; bias gradients are applied raw. Returns the trained net
/// and the per-epoch loss curve.
pub fn train_task(
    net: &DenseNet,
    task: &TaskData,
    proj: &ProjectionState,
    hyper: &TrainHyper,
) -> Result<(DenseNet, Vec<f64>)> {
    if hyper.batch_size == 0 {
        return Err(invalid("train_task", "batch_size must be positive"));
    }
    let n = task.train_inputs.rows();
    let mut net = net.clone();
    let mut rng = chacha(hyper.seed);
    let mut curve = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        let order = shuffled_indices(n, &mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(hyper.batch_size) {
            let batch = task.train_inputs.select_rows(chunk);
            let grads = backward(&net, &batch, &batch)?;
            if !grads.loss.is_finite() {
                return Err(Error::TrainingFailure {
                    step: epoch,
                    reason: "loss diverged to NaN/Inf".to_string(),
                });
            }
            epoch_loss += grads.loss * chunk.len() as f64;
            for (l, layer) in net.layers.iter_mut().enumerate() {
                let step = match proj.basis_for_layer(l) {
                    Some(basis) => project_orthogonal(&grads.weights[l], basis)?,
                    None => grads.weights[l].clone(),
                };
                layer.weights = layer.weights.sub(&step.scale(hyper.eta))?;
                if !layer.bias.is_empty() {
                    for (b, g) in layer.bias.iter_mut().zip(grads.biases[l].iter()) {
                        *b -= hyper.eta * g;
                    }
                }
            }
        }
        curve.push(epoch_loss / n as f64);
    }
    Ok((net, curve))
}

/// Stream a subsample of each layer's captured activations into that
/// layer's basis, seeded with the prior basis, and return the updated
/// projection state.
pub fn capture_and_update_basis(
    net: &DenseNet,
    task: &TaskData,
    proj: &ProjectionState,
    gamma_th: f64,
    sample_frac: f64,
    n_blocks: usize,
    seed: u64,
) -> Result<ProjectionState> {
    if !(sample_frac > 0.0 && sample_frac <= 1.0) {
        return Err(invalid(
            "capture_and_update_basis",
            "sample_frac must lie in (0, 1]",
        ));
    }
    if n_blocks == 0 {
        return Err(invalid("capture_and_update_basis", "n_blocks must be positive"));
    }
    let trace = net.forward(&task.train_inputs)?;
    let n = task.train_inputs.rows();
    let keep = ((sample_frac * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = chacha(seed);
    let mut sample: Vec<usize> = shuffled_indices(n, &mut rng).into_iter().take(keep).collect();
    // A subset, not a reordering: keep original row order so a full sample
    // reproduces the direct capture exactly.
    sample.sort_unstable();

    let mut bases: Vec<SignificantBasis> = Vec::with_capacity(net.layers.len());
    for (l, captured) in trace.layer_inputs.iter().enumerate() {
        let activations = captured.select_rows(&sample).transpose();
        let seed_basis = proj.basis_for_layer(l).cloned();
        let blocks = n_blocks.min(activations.cols());
        let state = stream_blocks(&activations, gamma_th, blocks, seed_basis)?;
        bases.push(state.finalize());
    }
    let mut next = proj.clone();
    next.set_bases(bases);
    Ok(next)
}

/// Per-sample squared reconstruction errors.
fn reconstruction_scores(net: &DenseNet, inputs: &Matrix) -> Result<Vec<f64>> {
    let outputs = net.forward(inputs)?.outputs;
    let diff = outputs.sub(inputs)?;
    Ok((0..diff.rows())
        .map(|i| diff.row(i).iter().map(|v| v * v).sum())
        .collect())
}

/// AUROC of reconstruction error, anomalous vs normal eval samples.
pub fn evaluate_task(net: &DenseNet, task: &TaskData) -> Result<f64> {
    let mut scores = reconstruction_scores(net, &task.eval_normal)?;
    let mut labels = vec![false; scores.len()];
    let anomalous = reconstruction_scores(net, &task.eval_anomalous)?;
    labels.extend(std::iter::repeat_n(true, anomalous.len()));
    scores.extend(anomalous);
    auroc(&scores, &labels)
}

// ── Sequence runner ─────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceConfig {
    pub task_gen: TaskGenConfig,
    /// Hidden layer widths; the autoencoder is d_in → hidden… → d_in.
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub use_bias: bool,
    pub epochs_base: usize,
    pub epochs_incremental: usize,
    pub batch_size: usize,
    pub eta: f64,
    pub projection: bool,
    pub gamma_th: f64,
    pub sample_frac: f64,
    pub n_blocks: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: SequenceConfig,
    pub metric_table: MetricTable,
    /// Per-step training loss curves.
    pub per_step_losses: Vec<Vec<f64>>,
    pub a_metric: f64,
    /// Undefined for single-task runs.
    pub forgetting_measure: Option<f64>,
}

/// Train the task sequence step by step, evaluating every seen task after
/// each step and filling the lower-triangular metric table.
pub fn run_sequence(cfg: &SequenceConfig) -> Result<RunReport> {
    if !(0.0..=1.0).contains(&cfg.gamma_th) {
        return Err(invalid("run_sequence", "gamma_th must lie in [0, 1]"));
    }
    let tasks = make_tasks(&cfg.task_gen, cfg.seed)?;
    let mut dims = Vec::with_capacity(cfg.hidden_dims.len() + 2);
    dims.push(cfg.task_gen.d_in);
    dims.extend_from_slice(&cfg.hidden_dims);
    dims.push(cfg.task_gen.d_in);
    let mut net = DenseNet::new(&dims, cfg.activation, cfg.use_bias, mix_seed(cfg.seed, 1))?;
    let mut proj = ProjectionState::new(cfg.eta)?;

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(tasks.tasks.len());
    let mut per_step_losses = Vec::with_capacity(tasks.tasks.len());

    for (b, task) in tasks.tasks.iter().enumerate() {
        let hyper = TrainHyper {
            epochs: if b == 0 { cfg.epochs_base } else { cfg.epochs_incremental },
            batch_size: cfg.batch_size,
            eta: cfg.eta,
            seed: mix_seed(cfg.seed, 1000 + b as u64),
        };
        let (trained, curve) = train_task(&net, task, &proj, &hyper).map_err(|e| match e {
            Error::TrainingFailure { step, reason } => Error::TrainingFailure {
                step,
                reason: format!("task {b}: {reason}"),
            },
            other => other,
        })?;
        net = trained;
        per_step_losses.push(curve);

        if cfg.projection {
            proj = capture_and_update_basis(
                &net,
                task,
                &proj,
                cfg.gamma_th,
                cfg.sample_frac,
                cfg.n_blocks,
                mix_seed(cfg.seed, 2000 + b as u64),
            )?;
        }

        let mut row = Vec::with_capacity(b + 1);
        for prior in &tasks.tasks[..=b] {
            row.push(evaluate_task(&net, prior)?);
        }
        rows.push(row);
    }

    let metric_table = MetricTable::new(rows)?;
    let a = a_metric(&metric_table)?;
    let fm = if metric_table.t_steps() >= 2 {
        Some(forgetting_measure(&metric_table)?)
    } else {
        None
    };
    Ok(RunReport {
        config: cfg.clone(),
        metric_table,
        per_step_losses,
        a_metric: a,
        forgetting_measure: fm,
    })
}
