//! Acceptance suite: the library-level exit criteria, one test per
//! criterion, each printing a pass line with its runtime budget. Criteria 2
//! and 8 exercise the CLI surface and live in the CLI crate's acceptance
//! suite.
//!
//! Run with `cargo test -p sigrep-core --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use sigrep_core::basis::subspace_gap;
use sigrep_core::harness::{
    capture_and_update_basis, make_tasks, run_sequence, train_task, FrameMode, SequenceConfig,
    TaskGenConfig, TrainHyper,
};
use sigrep_core::isvd::{estimate_memory, residual_spectrum, stream_blocks};
use sigrep_core::metrics::{a_metric, auroc, forgetting_measure, MetricTable};
use sigrep_core::net::{backward, mse_loss, Activation, DenseNet};
use sigrep_core::projection::{interference, project_orthogonal, ProjectionState};
use sigrep_core::rng::{chacha, seeded_matrix};
use sigrep_core::Matrix;
use rand::Rng;

fn finish(criterion: &str, what: &str, start: Instant, budget: Duration) {
    let elapsed = start.elapsed();
    println!("criterion {criterion}: PASS — {what} ({elapsed:.2?})");
    assert!(
        elapsed <= budget,
        "criterion {criterion} exceeded its {budget:?} budget: {elapsed:?}"
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

// ── Criterion 1 ─────────────────────────────────────────────────────
// Streamed basis at full retention expresses every column of the source:
// 20 seeded matrices up to 64×4096, block counts {1, 2, 4, 8, 16},
// per-column relative residual ≤ 1e−6.
#[test]
fn criterion_1_isvd_equals_svd_at_full_retention() {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for seed in 0..20u64 {
        let (rows, cols) = if seed == 0 {
            (64, 4096)
        } else {
            (
                8 + (seed as usize * 7919) % 57,
                64 + (seed as usize * 104_729) % 4033,
            )
        };
        let m = seeded_matrix(rows, cols, seed);
        for n in [1usize, 2, 4, 8, 16] {
            let basis = stream_blocks(&m, 1.0, n, None).unwrap().finalize();
            let residuals = residual_spectrum(&m, &basis).unwrap();
            let max_res = residuals.iter().cloned().fold(0.0_f64, f64::max);
            assert!(
                max_res <= 1e-6,
                "seed {seed} ({rows}x{cols}) n {n}: residual {max_res}"
            );
            worst = worst.max(max_res);
        }
    }
    finish(
        "1",
        &format!("full-retention stream ≡ direct SVD, worst residual {worst:.2e}"),
        start,
        Duration::from_secs(120),
    );
}

// ── Criterion 3 ─────────────────────────────────────────────────────
// Memory model: exact hand case, measured peak within 1.25× of the model,
// saving rate increasing in n toward (n²−1)/n².
#[test]
fn criterion_3_memory_model() {
    let start = Instant::now();

    // Hand case: d = 4, Λ = 100, n = 2, k = 4.
    let hand = estimate_memory(4, 100, 2, 4).unwrap();
    assert_eq!(hand.svd_scalars, 10_420);
    assert_eq!(hand.isvd_scalars, 3_152);
    assert!((hand.saving_rate - 0.6975).abs() < 1e-3, "saving {}", hand.saving_rate);

    // Accounting honesty: measured peak vs the model at the observed k.
    let (d, lambda) = (128usize, 5000usize);
    let m = seeded_matrix(d, lambda, 77);
    let mut savings = Vec::new();
    for n in [1usize, 2, 5, 10] {
        let state = stream_blocks(&m, 0.98, n, None).unwrap();
        let k = state.basis().k();
        let est = estimate_memory(d, lambda, n, k).unwrap();
        assert!(
            state.peak_aux_scalars() as f64 <= est.isvd_scalars as f64 * 1.25,
            "n {n}: peak {} exceeds 1.25× model {}",
            state.peak_aux_scalars(),
            est.isvd_scalars
        );
        savings.push(est.saving_rate);
        let asymptote = (n * n - 1) as f64 / (n * n) as f64;
        assert!(
            est.saving_rate <= asymptote,
            "n {n}: estimate {} above the asymptote {asymptote}",
            est.saving_rate
        );
    }
    for w in savings.windows(2) {
        assert!(w[1] > w[0], "saving rate not increasing: {savings:?}");
    }
    assert!(
        (savings[3] - 0.99).abs() <= 0.02,
        "n = 10 saving {} not near the (n²−1)/n² asymptote",
        savings[3]
    );
    finish(
        "3",
        &format!("memory model exact; savings by n {savings:.3?} toward (n²−1)/n²"),
        start,
        Duration::from_secs(120),
    );
}

// ── Criterion 4 ─────────────────────────────────────────────────────
// Nullification at γ_th = 1.0 with exactly rank-r activations: per-layer
// normalized interference ≤ 1e−6 and prior-task outputs moving ≤ 1e−4
// relative after incremental training.
#[test]
fn criterion_4_projection_nullification() {
    let start = Instant::now();
    let gen = TaskGenConfig {
        d_in: 32,
        task_count: 2,
        rank_r: 4,
        train_n: 256,
        eval_n: 128,
        anomaly_scale: 1.0,
        anomaly_frac: 0.15,
        frame_mode: FrameMode::Orthogonal,
        latent_bend: 0.5,
    };
    let tasks = make_tasks(&gen, 314).unwrap();
    // Linear activations keep every layer's task activations exactly rank
    // r, so each protected span is a proper subspace and the normalized
    // interference ratio is well-conditioned.
    let net = DenseNet::new(&[32, 24, 16, 24, 32], Activation::Linear, false, 3).unwrap();
    let proj = ProjectionState::new(0.01).unwrap();
    let hyper = TrainHyper {
        epochs: 200,
        batch_size: 32,
        eta: 0.01,
        seed: 11,
    };
    let (net0, _) = train_task(&net, &tasks.tasks[0], &proj, &hyper).unwrap();
    let proj = capture_and_update_basis(&net0, &tasks.tasks[0], &proj, 1.0, 1.0, 4, 13).unwrap();

    // Interference of projected task-1 gradients against task-0 activations.
    let trace0 = net0.forward(&tasks.tasks[0].train_inputs).unwrap();
    let grads = backward(&net0, &tasks.tasks[1].train_inputs, &tasks.tasks[1].train_inputs).unwrap();
    let mut worst_interf = 0.0_f64;
    for (l, grad) in grads.weights.iter().enumerate() {
        let grad_orth = project_orthogonal(grad, proj.basis_for_layer(l).unwrap()).unwrap();
        let i = interference(&trace0.layer_inputs[l], &grad_orth).unwrap();
        assert!(i <= 1e-6, "layer {l}: interference {i}");
        worst_interf = worst_interf.max(i);
    }

    // Prior-task outputs after incremental training.
    let before = net0.forward(&tasks.tasks[0].eval_normal).unwrap().outputs;
    let hyper1 = TrainHyper {
        epochs: 80,
        batch_size: 32,
        eta: 0.01,
        seed: 17,
    };
    let (net1, _) = train_task(&net0, &tasks.tasks[1], &proj, &hyper1).unwrap();
    let after = net1.forward(&tasks.tasks[0].eval_normal).unwrap().outputs;
    let rel = after.sub(&before).unwrap().frobenius_norm_sq().sqrt()
        / before.frobenius_norm_sq().sqrt();
    assert!(rel <= 1e-4, "prior-task outputs moved by {rel}");

    finish(
        "4",
        &format!("interference ≤ {worst_interf:.2e}, prior outputs moved {rel:.2e}"),
        start,
        Duration::from_secs(120),
    );
}

// ── Criteria 5 and 6 share the harness configuration ────────────────

fn suite_config(projection: bool, gamma_th: f64, frame_mode: FrameMode, seed: u64) -> SequenceConfig {
    SequenceConfig {
        task_gen: TaskGenConfig {
            d_in: 32,
            task_count: 5,
            rank_r: 4,
            train_n: 256,
            eval_n: 128,
            anomaly_scale: 1.0,
            anomaly_frac: 0.15,
            frame_mode,
            latent_bend: 0.5,
        },
        hidden_dims: vec![24, 16, 24],
        activation: Activation::Tanh,
        use_bias: false,
        epochs_base: 200,
        epochs_incremental: 80,
        batch_size: 32,
        eta: 0.05,
        projection,
        gamma_th,
        sample_frac: 0.1,
        n_blocks: 4,
        seed,
    }
}

// ── Criterion 5 ─────────────────────────────────────────────────────
// Five conflicting tasks, ten seeds: median FM with projection ≤ 0.25× the
// unprotected median, and the A-metric does not pay for it.
#[test]
fn criterion_5_forgetting_reduction() {
    let start = Instant::now();
    let mut fm_on = Vec::new();
    let mut fm_off = Vec::new();
    let mut a_on = Vec::new();
    let mut a_off = Vec::new();
    for seed in 0..10u64 {
        let on = run_sequence(&suite_config(true, 0.999, FrameMode::Orthogonal, seed)).unwrap();
        let off = run_sequence(&suite_config(false, 0.999, FrameMode::Orthogonal, seed)).unwrap();
        fm_on.push(on.forgetting_measure.unwrap());
        fm_off.push(off.forgetting_measure.unwrap());
        a_on.push(on.a_metric);
        a_off.push(off.a_metric);
    }
    let (m_on, m_off) = (median(fm_on), median(fm_off));
    assert!(
        m_on <= 0.25 * m_off,
        "median FM {m_on:.4} not ≤ 0.25× unprotected {m_off:.4}"
    );
    let (am_on, am_off) = (median(a_on), median(a_off));
    assert!(
        am_on >= am_off,
        "A-metric regressed under projection: {am_on:.4} vs {am_off:.4}"
    );
    finish(
        "5",
        &format!("median FM {m_on:.4} vs {m_off:.4} (ratio {:.3}), A {am_on:.3} ≥ {am_off:.3}", m_on / m_off),
        start,
        Duration::from_secs(600),
    );
}

// ── Criterion 6 ─────────────────────────────────────────────────────
// γ_th sweep on the mixed (random-frame) suite, ten seeds per point: mean
// FM non-increasing within a one-sided noise slack, and full retention
// strictly costs plasticity (A at 1.0 below A at 0.999).
#[test]
fn criterion_6_gamma_threshold_sweep() {
    let start = Instant::now();
    const NOISE_SLACK: f64 = 0.02;
    let gammas = [0.0, 0.9, 0.99, 0.999, 1.0];
    let mut fm_means = Vec::new();
    let mut a_means = Vec::new();
    for &gamma in &gammas {
        let mut fms = Vec::new();
        let mut ams = Vec::new();
        for seed in 0..10u64 {
            let rep = run_sequence(&suite_config(true, gamma, FrameMode::Random, seed)).unwrap();
            fms.push(rep.forgetting_measure.unwrap());
            ams.push(rep.a_metric);
        }
        fm_means.push(mean(&fms));
        a_means.push(mean(&ams));
    }
    for (idx, w) in fm_means.windows(2).enumerate() {
        assert!(
            w[1] <= w[0] + NOISE_SLACK,
            "FM increased from γ={} to γ={}: {} → {}",
            gammas[idx],
            gammas[idx + 1],
            w[0],
            w[1]
        );
    }
    let (a_full, a_near) = (a_means[4], a_means[3]);
    assert!(
        a_full < a_near,
        "full retention should cost plasticity: A(1.0) {a_full:.4} vs A(0.999) {a_near:.4}"
    );
    finish(
        "6",
        &format!("FM by γ {fm_means:.4?}; A(1.0) {a_full:.3} < A(0.999) {a_near:.3}"),
        start,
        Duration::from_secs(900),
    );
}

// ── Criterion 7 ─────────────────────────────────────────────────────
// Metric oracles: AUROC vs exhaustive pair counting, table metrics vs an
// exhaustive small-table oracle, backprop vs central differences.
#[test]
fn criterion_7_metric_oracles() {
    let start = Instant::now();

    // AUROC against O(N²) pair counting, exactly, 200 random 50-sample
    // cases (quantized so ties occur).
    let mut rng = chacha(4242);
    let mut cases = 0;
    while cases < 200 {
        let scores: Vec<f64> = (0..50).map(|_| (rng.gen::<f64>() * 16.0).round() / 16.0).collect();
        let labels: Vec<bool> = (0..50).map(|_| rng.gen::<bool>()).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let fast = auroc(&scores, &labels).unwrap();
        let mut acc = 0.0;
        let mut pairs = 0usize;
        for (sp, &lp) in scores.iter().zip(&labels) {
            if !lp {
                continue;
            }
            for (sq, &lq) in scores.iter().zip(&labels) {
                if lq {
                    continue;
                }
                pairs += 1;
                if sp > sq {
                    acc += 1.0;
                } else if sp == sq {
                    acc += 0.5;
                }
            }
        }
        assert_eq!(fast, acc / pairs as f64, "case {cases}");
        cases += 1;
    }

    // Table metrics against exhaustive enumeration of 3-step tables.
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    for &a11 in &grid {
        for &a21 in &grid {
            for &a22 in &grid {
                for &a31 in &grid {
                    for &a32 in &grid {
                        for &a33 in &grid {
                            let t = MetricTable::new(vec![
                                vec![a11],
                                vec![a21, a22],
                                vec![a31, a32, a33],
                            ])
                            .unwrap();
                            let fm_want = ((a11 - a31).max(a21 - a31) + (a22 - a32)) / 2.0;
                            assert!((forgetting_measure(&t).unwrap() - fm_want).abs() < 1e-15);
                            let a_want = (a31 + a32 + a33) / 3.0;
                            assert!((a_metric(&t).unwrap() - a_want).abs() < 1e-15);
                        }
                    }
                }
            }
        }
    }

    // Backprop vs central finite differences, every parameter, 10 seeds.
    for seed in 0..10u64 {
        let mut net = DenseNet::new(&[4, 5, 3, 4], Activation::Tanh, true, seed).unwrap();
        net.perturb(0.1, seed + 1000);
        let x = seeded_matrix(6, 4, seed + 2000);
        let y = seeded_matrix(6, 4, seed + 3000);
        let grads = backward(&net, &x, &y).unwrap();
        let h = 1e-5;
        for l in 0..net.layers.len() {
            for i in 0..net.layers[l].weights.rows() {
                for j in 0..net.layers[l].weights.cols() {
                    let mut plus = net.clone();
                    plus.layers[l].weights[(i, j)] += h;
                    let mut minus = net.clone();
                    minus.layers[l].weights[(i, j)] -= h;
                    let fd = (mse_loss(&plus.forward(&x).unwrap().outputs, &y).unwrap()
                        - mse_loss(&minus.forward(&x).unwrap().outputs, &y).unwrap())
                        / (2.0 * h);
                    let analytic = grads.weights[l][(i, j)];
                    let denom = analytic.abs().max(fd.abs()).max(1e-6);
                    assert!(
                        (fd - analytic).abs() / denom <= 1e-4,
                        "seed {seed} layer {l} ({i},{j}): fd {fd} vs {analytic}"
                    );
                }
            }
            for j in 0..net.layers[l].bias.len() {
                let mut plus = net.clone();
                plus.layers[l].bias[j] += h;
                let mut minus = net.clone();
                minus.layers[l].bias[j] -= h;
                let fd = (mse_loss(&plus.forward(&x).unwrap().outputs, &y).unwrap()
                    - mse_loss(&minus.forward(&x).unwrap().outputs, &y).unwrap())
                    / (2.0 * h);
                let analytic = grads.biases[l][j];
                let denom = analytic.abs().max(fd.abs()).max(1e-6);
                assert!((fd - analytic).abs() / denom <= 1e-4);
            }
        }
    }

    finish(
        "7",
        "AUROC, table metrics, and gradients all match their oracles",
        start,
        Duration::from_secs(300),
    );
}

// Lemma-style seeded sanity on low-rank streams, beyond the random
// full-rank family of criterion 1.
#[test]
fn low_rank_streams_preserve_span() {
    let start = Instant::now();
    for seed in 0..10u64 {
        let a = seeded_matrix(48, 6, seed);
        let b = seeded_matrix(6, 1024, seed + 5000);
        let m = a.matmul(&b).unwrap();
        for n in [2usize, 8] {
            let basis = stream_blocks(&m, 1.0, n, None).unwrap().finalize();
            assert!(basis.k() <= 7, "rank blew up: {}", basis.k());
            let worst = residual_spectrum(&m, &basis)
                .unwrap()
                .into_iter()
                .fold(0.0_f64, f64::max);
            assert!(worst <= 1e-6, "seed {seed} n {n}: residual {worst}");
        }
    }
    let direct = stream_blocks(&Matrix::identity(16), 1.0, 1, None).unwrap();
    let streamed = stream_blocks(&Matrix::identity(16), 1.0, 4, None).unwrap();
    assert!(subspace_gap(direct.basis(), streamed.basis()).unwrap() <= 1e-8);
    println!("low-rank stream sanity: PASS ({:.2?})", start.elapsed());
}
