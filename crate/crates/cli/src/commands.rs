//! The four operator commands: streaming-SVD benchmark, continual-learning
//! runs, feature-stack scoring, and run-report aggregation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sigrep_core::harness::RunReport;
use sigrep_core::isvd::{estimate_memory, residual_spectrum, significant_basis_direct, stream_blocks};
use sigrep_core::metrics::{anomaly_map, image_score};
use sigrep_core::rng::seeded_matrix;

use crate::config::{ContinualRunConfig, IsvdBenchConfig, ScoreConfig};
use crate::error::{CliError, CliResult};
use crate::fmat;

fn ensure_out_dir(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out.display(), e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path.display(), e))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let idx = (p / 100.0 * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

// ── isvd-bench ──────────────────────────────────────────────────────

/// Per (block count, seed): stream the seeded matrix, compare residuals
/// against the direct decomposition, and record both the measured peak
/// working set and the cost model. Emits `bench.csv` and the residual
/// histogram data `residual_hist.csv` (fixed [0, 1] bins).
pub fn cmd_isvd_bench(cfg: &IsvdBenchConfig, out: &Path) -> CliResult<()> {
    ensure_out_dir(out)?;
    let mut bench = String::from(
        "n,seed,k_svd,k_isvd,peak_aux_scalars,est_svd_scalars,est_isvd_scalars,\
         saving_rate_est,saving_rate_asymptotic,mean_resid_svd,mean_resid_isvd,\
         p50_resid_svd,p50_resid_isvd,p90_resid_svd,p90_resid_isvd\n",
    );
    let mut hist = String::from("seed,n,bin_lo,bin_hi,count_svd,count_isvd\n");
    let bins = cfg.hist_bins;
    let histogram = |residuals: &[f64]| -> Vec<usize> {
        let mut counts = vec![0usize; bins];
        for &r in residuals {
            let idx = ((r * bins as f64) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        counts
    };

    for &seed in &cfg.seeds {
        let m = seeded_matrix(cfg.d, cfg.lambda, seed);
        let direct = significant_basis_direct(&m, cfg.gamma_th)?;
        let resid_svd = residual_spectrum(&m, &direct)?;
        let mut sorted_svd = resid_svd.clone();
        sorted_svd.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let hist_svd = histogram(&resid_svd);

        for &n in &cfg.blocks {
            let state = stream_blocks(&m, cfg.gamma_th, n, None)?;
            let basis = state.finalize();
            let resid_isvd = residual_spectrum(&m, &basis)?;
            let mut sorted_isvd = resid_isvd.clone();
            sorted_isvd.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let est = estimate_memory(cfg.d, cfg.lambda, n, basis.k().min(cfg.d))?;
            let asymptotic = (n * n - 1) as f64 / (n * n) as f64;

            writeln!(
                bench,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                n,
                seed,
                direct.k(),
                basis.k(),
                state.peak_aux_scalars(),
                est.svd_scalars,
                est.isvd_scalars,
                est.saving_rate,
                asymptotic,
                mean(&resid_svd),
                mean(&resid_isvd),
                percentile(&sorted_svd, 50.0),
                percentile(&sorted_isvd, 50.0),
                percentile(&sorted_svd, 90.0),
                percentile(&sorted_isvd, 90.0),
            )
            .expect("string write");

            let hist_isvd = histogram(&resid_isvd);
            for b in 0..bins {
                writeln!(
                    hist,
                    "{},{},{},{},{},{}",
                    seed,
                    n,
                    b as f64 / bins as f64,
                    (b + 1) as f64 / bins as f64,
                    hist_svd[b],
                    hist_isvd[b],
                )
                .expect("string write");
            }
        }
    }

    write_text(&out.join("bench.csv"), &bench)?;
    write_text(&out.join("residual_hist.csv"), &hist)?;
    println!(
        "isvd-bench: wrote {} and {}",
        out.join("bench.csv").display(),
        out.join("residual_hist.csv").display()
    );
    Ok(())
}

// ── continual-run ───────────────────────────────────────────────────

fn report_paths(out: &Path, projected: bool, seed: u64) -> (PathBuf, PathBuf) {
    let suffix = if projected { "projected" } else { "unprojected" };
    (
        out.join(format!("report_{suffix}_seed{seed}.json")),
        out.join(format!("metric_table_{suffix}_seed{seed}.csv")),
    )
}

/// Run the configured task sequence for every (seed, projection) pair, and
/// write each run's report JSON plus its metric table CSV as soon as the
/// run finishes (earlier artifacts survive a later failure).
pub fn cmd_continual_run(cfg: &ContinualRunConfig, out: &Path) -> CliResult<()> {
    ensure_out_dir(out)?;
    for &seed in &cfg.seeds {
        for projected in cfg.projection_mode.variants() {
            let mut sequence = cfg.sequence.clone();
            sequence.seed = seed;
            sequence.projection = projected;
            let report = sigrep_core::harness::run_sequence(&sequence)?;

            let (json_path, csv_path) = report_paths(out, projected, seed);
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::io(json_path.display(), e))?;
            write_text(&json_path, &(json + "\n"))?;

            let mut csv = String::from("step,task,auroc\n");
            for (b, row) in report.metric_table.rows().iter().enumerate() {
                for (i, v) in row.iter().enumerate() {
                    writeln!(csv, "{b},{i},{v}").expect("string write");
                }
            }
            write_text(&csv_path, &csv)?;
            println!(
                "continual-run: seed {seed} projection {} → A {:.4} FM {}",
                if projected { "on" } else { "off" },
                report.a_metric,
                report
                    .forgetting_measure
                    .map_or("n/a".to_string(), |f| format!("{f:.4}")),
            );
        }
    }
    Ok(())
}

// ── score ───────────────────────────────────────────────────────────

/// Score two feature-stack files: anomaly map written as a 2-D FMAT
/// record (plus an optional CSV copy for inspection), image score printed
/// to stdout.
pub fn cmd_score(
    file_a: &Path,
    file_b: &Path,
    score_cfg: ScoreConfig,
    out: &Path,
    csv_copy: bool,
) -> CliResult<()> {
    let stack_a = fmat::records_to_stack(file_a, fmat::read_records(file_a)?)?;
    let stack_b = fmat::records_to_stack(file_b, fmat::read_records(file_b)?)?;

    let max_h = stack_a.layers.iter().map(|l| l.height()).max().unwrap_or(0);
    let max_w = stack_a.layers.iter().map(|l| l.width()).max().unwrap_or(0);
    let out_h = score_cfg.out_h.unwrap_or(max_h);
    let out_w = score_cfg.out_w.unwrap_or(max_w);

    let map = anomaly_map(&stack_a, &stack_b, out_h, out_w)?;
    let score = image_score(&map)?;

    ensure_out_dir(out)?;
    let map_path = out.join("map.fmat");
    fmat::write_records(&map_path, &[fmat::matrix_record(&map)])?;
    if csv_copy {
        let mut csv = String::new();
        for i in 0..map.rows() {
            let row: Vec<String> = map.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(csv, "{}", row.join(",")).expect("string write");
        }
        write_text(&out.join("map.csv"), &csv)?;
    }
    println!("score {score}");
    println!("map {}", map_path.display());
    Ok(())
}

// ── report ──────────────────────────────────────────────────────────

struct ReportRow {
    gamma_th: f64,
    projection: bool,
    a_metric: f64,
    forgetting: Option<f64>,
    seed: u64,
    source: String,
}

/// Aggregate run reports across directories into one CSV, sorted by γ_th.
/// Unreadable entries are listed on stderr and skipped.
pub fn cmd_report(dirs: &[PathBuf], out: Option<&Path>) -> CliResult<()> {
    let mut rows = Vec::new();
    for dir in dirs {
        let entries = match fs::read_dir(dir) {
            Ok(entries) => entries,
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", dir.display());
                continue;
            }
        };
        let mut names: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("report") && n.ends_with(".json"))
            })
            .collect();
        names.sort();
        if names.is_empty() {
            eprintln!("warning: no report files in {}", dir.display());
            continue;
        }
        for path in names {
            let text = match fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("warning: skipping {}: {e}", path.display());
                    continue;
                }
            };
            let report: RunReport = match serde_json::from_str(&text) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("warning: skipping {}: not a run report ({e})", path.display());
                    continue;
                }
            };
            rows.push(ReportRow {
                gamma_th: report.config.gamma_th,
                projection: report.config.projection,
                a_metric: report.a_metric,
                forgetting: report.forgetting_measure,
                seed: report.config.seed,
                source: path.display().to_string(),
            });
        }
    }
    if rows.is_empty() {
        return Err(CliError::Io("no valid run reports found".to_string()));
    }
    rows.sort_by(|a, b| {
        a.gamma_th
            .partial_cmp(&b.gamma_th)
            .unwrap()
            .then_with(|| a.source.cmp(&b.source))
    });

    let mut csv = String::from("gamma_th,projection,a_metric,fm,seed,source\n");
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            row.gamma_th,
            if row.projection { "on" } else { "off" },
            row.a_metric,
            row.forgetting.map_or(String::new(), |f| f.to_string()),
            row.seed,
            row.source,
        )
        .expect("string write");
    }
    print!("{csv}");
    if let Some(out) = out {
        ensure_out_dir(out)?;
        write_text(&out.join("summary.csv"), &csv)?;
    }
    Ok(())
}
