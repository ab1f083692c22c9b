//! Config document parsing and schema validation.
//!
//! The format is a flat sectioned key-value document:
//!
//! ```text
//! # comment
//! [experiment]
//! kind = continual-run
//!
//! [tasks]
//! d_in = 32
//! count = 5
//! ```
//!
//! Every key is validated against the schema of the declared experiment
//! kind before any compute runs; unknown keys are rejected by name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sigrep_core::harness::{FrameMode, SequenceConfig, TaskGenConfig};
use sigrep_core::net::Activation;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMode {
    On,
    Off,
    Both,
}

impl ProjectionMode {
    pub fn variants(self) -> Vec<bool> {
        match self {
            ProjectionMode::On => vec![true],
            ProjectionMode::Off => vec![false],
            ProjectionMode::Both => vec![false, true],
        }
    }
}

#[derive(Debug, Clone)]
pub struct IsvdBenchConfig {
    pub d: usize,
    pub lambda: usize,
    pub gamma_th: f64,
    pub blocks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub hist_bins: usize,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ContinualRunConfig {
    /// Template; `seed` and `projection` are filled per run.
    pub sequence: SequenceConfig,
    pub projection_mode: ProjectionMode,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreConfig {
    pub out_h: Option<usize>,
    pub out_w: Option<usize>,
}

#[derive(Debug, Clone)]
pub enum ExperimentConfig {
    IsvdBench(IsvdBenchConfig),
    ContinualRun(ContinualRunConfig),
}

// ── Raw document ────────────────────────────────────────────────────

struct RawConfig {
    // section.key → (value, consumed)
    entries: BTreeMap<String, (String, bool)>,
}

impl RawConfig {
    fn parse(path: &Path, text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(idx) => &raw_line[..idx],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                if section.is_empty() {
                    return Err(CliError::Usage(format!(
                        "{}:{}: empty section name",
                        path.display(),
                        lineno + 1
                    )));
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{}:{}: expected `key = value`, got `{line}`",
                    path.display(),
                    lineno + 1
                )));
            };
            if section.is_empty() {
                return Err(CliError::Usage(format!(
                    "{}:{}: key outside any [section]",
                    path.display(),
                    lineno + 1
                )));
            }
            let full = format!("{section}.{}", key.trim());
            if entries.contains_key(&full) {
                return Err(CliError::Usage(format!(
                    "{}:{}: duplicate key `{full}`",
                    path.display(),
                    lineno + 1
                )));
            }
            entries.insert(full, (value.trim().to_string(), false));
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        if let Some((value, consumed)) = self.entries.get_mut(key) {
            *consumed = true;
            return Some(value.clone());
        }
        None
    }

    fn reject_unknown(&self, path: &Path) -> CliResult<()> {
        let unknown: Vec<&str> = self
            .entries
            .iter()
            .filter(|(_, (_, consumed))| !consumed)
            .map(|(k, _)| k.as_str())
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "{}: unknown config key(s): {}",
                path.display(),
                unknown.join(", ")
            )))
        }
    }
}

// ── Typed accessors ─────────────────────────────────────────────────

fn parse_as<T: std::str::FromStr>(path: &Path, key: &str, value: &str) -> CliResult<T> {
    value.parse::<T>().map_err(|_| {
        CliError::Usage(format!(
            "{}: key `{key}`: cannot parse `{value}` as {}",
            path.display(),
            std::any::type_name::<T>()
        ))
    })
}

fn parse_list<T: std::str::FromStr>(path: &Path, key: &str, value: &str) -> CliResult<Vec<T>> {
    let mut out = Vec::new();
    for part in value.split(',') {
        out.push(parse_as(path, key, part.trim())?);
    }
    Ok(out)
}

struct Schema<'a> {
    path: &'a Path,
    raw: RawConfig,
}

impl<'a> Schema<'a> {
    fn required<T: std::str::FromStr>(&mut self, key: &str) -> CliResult<T> {
        match self.raw.take(key) {
            Some(v) => parse_as(self.path, key, &v),
            None => Err(CliError::Usage(format!(
                "{}: missing required key `{key}`",
                self.path.display()
            ))),
        }
    }

    fn optional<T: std::str::FromStr>(&mut self, key: &str, default: T) -> CliResult<T> {
        match self.raw.take(key) {
            Some(v) => parse_as(self.path, key, &v),
            None => Ok(default),
        }
    }

    fn optional_raw(&mut self, key: &str) -> Option<String> {
        self.raw.take(key)
    }

    fn optional_list<T: std::str::FromStr>(&mut self, key: &str, default: Vec<T>) -> CliResult<Vec<T>> {
        match self.raw.take(key) {
            Some(v) => parse_list(self.path, key, &v),
            None => Ok(default),
        }
    }

    fn range_check(&self, key: &str, value: f64, lo: f64, hi: f64) -> CliResult<()> {
        if value.is_finite() && (lo..=hi).contains(&value) {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "{}: key `{key}`: {value} outside [{lo}, {hi}]",
                self.path.display()
            )))
        }
    }
}

/// Load and validate the whole document for the declared experiment kind.
pub fn load_experiment(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    let raw = RawConfig::parse(path, &text)?;
    let mut schema = Schema { path, raw };

    let kind: String = schema.required("experiment.kind")?;
    let config = match kind.as_str() {
        "isvd-bench" => ExperimentConfig::IsvdBench(load_isvd_bench(&mut schema)?),
        "continual-run" => ExperimentConfig::ContinualRun(load_continual_run(&mut schema)?),
        other => {
            return Err(CliError::Usage(format!(
                "{}: experiment.kind must be `isvd-bench` or `continual-run`, got `{other}`",
                path.display()
            )));
        }
    };
    schema.raw.reject_unknown(path)?;
    Ok(config)
}

fn load_isvd_bench(schema: &mut Schema) -> CliResult<IsvdBenchConfig> {
    let d: usize = schema.required("isvd.d")?;
    let lambda: usize = schema.required("isvd.lambda")?;
    let gamma_th: f64 = schema.optional("isvd.gamma_th", 0.98)?;
    schema.range_check("isvd.gamma_th", gamma_th, 0.0, 1.0)?;
    let blocks: Vec<usize> = schema.optional_list("isvd.blocks", vec![1, 2, 5, 10])?;
    let seeds: Vec<u64> = schema.optional_list("run.seeds", vec![0])?;
    let hist_bins: usize = schema.optional("isvd.hist_bins", 40)?;
    let out = schema.optional_raw("run.out").map(PathBuf::from);
    if d == 0 || lambda == 0 {
        return Err(CliError::Usage(format!(
            "{}: isvd.d and isvd.lambda must be positive",
            schema.path.display()
        )));
    }
    if blocks.is_empty() || blocks.iter().any(|&n| n == 0 || n > lambda) {
        return Err(CliError::Usage(format!(
            "{}: isvd.blocks must be nonempty, positive, and ≤ lambda",
            schema.path.display()
        )));
    }
    if hist_bins == 0 {
        return Err(CliError::Usage(format!(
            "{}: isvd.hist_bins must be positive",
            schema.path.display()
        )));
    }
    Ok(IsvdBenchConfig {
        d,
        lambda,
        gamma_th,
        blocks,
        seeds,
        hist_bins,
        out,
    })
}

fn load_continual_run(schema: &mut Schema) -> CliResult<ContinualRunConfig> {
    let d_in: usize = schema.required("tasks.d_in")?;
    let task_count: usize = schema.required("tasks.count")?;
    let rank_r: usize = schema.required("tasks.rank")?;
    let train_n: usize = schema.optional("tasks.train_n", 256)?;
    let eval_n: usize = schema.optional("tasks.eval_n", 128)?;
    let anomaly_scale: f64 = schema.optional("tasks.anomaly_scale", 1.0)?;
    let anomaly_frac: f64 = schema.optional("tasks.anomaly_frac", 0.15)?;
    schema.range_check("tasks.anomaly_frac", anomaly_frac, 0.0, 1.0)?;
    let latent_bend: f64 = schema.optional("tasks.latent_bend", 0.5)?;
    let frames = match schema.optional_raw("tasks.frames").as_deref() {
        None | Some("orthogonal") => FrameMode::Orthogonal,
        Some("random") => FrameMode::Random,
        Some(other) => {
            return Err(CliError::Usage(format!(
                "{}: tasks.frames must be `orthogonal` or `random`, got `{other}`",
                schema.path.display()
            )));
        }
    };

    let hidden_dims: Vec<usize> = schema.optional_list("model.hidden", vec![24, 16, 24])?;
    let activation = match schema.optional_raw("model.activation").as_deref() {
        None | Some("tanh") => Activation::Tanh,
        Some("relu") => Activation::Relu,
        Some("linear") => Activation::Linear,
        Some(other) => {
            return Err(CliError::Usage(format!(
                "{}: model.activation must be tanh, relu, or linear, got `{other}`",
                schema.path.display()
            )));
        }
    };
    let use_bias: bool = schema.optional("model.bias", true)?;

    let epochs_base: usize = schema.optional("train.epochs_base", 200)?;
    let epochs_incremental: usize = schema.optional("train.epochs_incremental", 50)?;
    let batch_size: usize = schema.optional("train.batch", 32)?;
    let eta: f64 = schema.optional("train.eta", 0.05)?;
    schema.range_check("train.eta", eta, f64::MIN_POSITIVE, 1e3)?;

    let projection_mode = match schema.optional_raw("projection.mode").as_deref() {
        None | Some("on") => ProjectionMode::On,
        Some("off") => ProjectionMode::Off,
        Some("both") => ProjectionMode::Both,
        Some(other) => {
            return Err(CliError::Usage(format!(
                "{}: projection.mode must be on, off, or both, got `{other}`",
                schema.path.display()
            )));
        }
    };
    let gamma_th: f64 = schema.optional("projection.gamma_th", sigrep_core::harness::DEFAULT_GAMMA_TH)?;
    schema.range_check("projection.gamma_th", gamma_th, 0.0, 1.0)?;
    let sample_frac: f64 =
        schema.optional("projection.sample_frac", sigrep_core::harness::DEFAULT_SAMPLE_FRAC)?;
    schema.range_check("projection.sample_frac", sample_frac, 1e-9, 1.0)?;
    let n_blocks: usize = schema.optional("projection.n_blocks", 4)?;

    let seeds: Vec<u64> = schema.optional_list("run.seeds", vec![0])?;
    let out = schema.optional_raw("run.out").map(PathBuf::from);

    if n_blocks == 0 {
        return Err(CliError::Usage(format!(
            "{}: projection.n_blocks must be positive",
            schema.path.display()
        )));
    }

    let sequence = SequenceConfig {
        task_gen: TaskGenConfig {
            d_in,
            task_count,
            rank_r,
            train_n,
            eval_n,
            anomaly_scale,
            anomaly_frac,
            frame_mode: frames,
            latent_bend,
        },
        hidden_dims,
        activation,
        use_bias,
        epochs_base,
        epochs_incremental,
        batch_size,
        eta,
        projection: true,
        gamma_th,
        sample_frac,
        n_blocks,
        seed: 0,
    };
    Ok(ContinualRunConfig {
        sequence,
        projection_mode,
        seeds,
        out,
    })
}

/// Optional `[score]` section for cmd_score (map output size overrides).
pub fn load_score(path: &Path) -> CliResult<ScoreConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    let raw = RawConfig::parse(path, &text)?;
    let mut schema = Schema { path, raw };
    let out_h = match schema.optional_raw("score.out_h") {
        Some(v) => Some(parse_as::<usize>(path, "score.out_h", &v)?),
        None => None,
    };
    let out_w = match schema.optional_raw("score.out_w") {
        Some(v) => Some(parse_as::<usize>(path, "score.out_w", &v)?),
        None => None,
    };
    schema.raw.reject_unknown(path)?;
    Ok(ScoreConfig { out_h, out_w })
}
