//! Command implementations behind the `cobweb` binary.
//!
//! Output files are written via a temp file in the destination
//! directory followed by a rename, so an aborted run never leaves a
//! truncated CSV behind. No command mutates its input files, and no
//! command reads ambient entropy: all randomness flows from the
//! configured seed.

use crate::config::{ConfigError, RunConfig, BOOTSTRAP_LEVEL};
use crate::dataset::{self, DataError, NormalizedDataset};
use crate::eval::{compare, EvalError, EvalParams};
use crate::models::{Cobweb3, ModelDocError, ModelFile, ModelKind, MODEL_FORMAT_VERSION};
use crate::tree::TREE_FORMAT_VERSION;
use serde_json::json;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Data(#[from] DataError),
    #[error("{0}")]
    Model(#[from] ModelDocError),
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    /// 1 usage/config, 2 data, 3 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) | CliError::Model(_) | CliError::Write { .. } => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        CliError::Internal(e.to_string())
    }
}

/// Write via a sibling temp file plus rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let wrap = |source| CliError::Write {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(wrap)?;
    std::fs::rename(&tmp, path).map_err(wrap)
}

fn load_normalized(config: &RunConfig) -> Result<NormalizedDataset, CliError> {
    let raw = dataset::RawDataset::load(&config.images, &config.labels)?;
    Ok(dataset::normalize(&raw)?)
}

fn eval_params(config: &RunConfig) -> EvalParams {
    EvalParams {
        seed: config.seed,
        acuity: config.acuity,
        filter_size: config.filter_size,
        bootstrap_resamples: config.bootstrap_resamples,
        bootstrap_level: BOOTSTRAP_LEVEL,
        lowess_frac: config.lowess_frac,
    }
}

fn summary_json(config: &RunConfig, data: &NormalizedDataset, run_list_hash: u64) -> String {
    let doc = json!({
        "format_version": 1,
        "seed": config.seed,
        "per_class": config.per_class,
        "num_runs": config.num_runs,
        "sequence_length": config.per_class * 10,
        "models": config.models.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        "acuity": config.acuity,
        "filter_size": config.filter_size,
        "bootstrap": {
            "resamples": config.bootstrap_resamples,
            "level": BOOTSTRAP_LEVEL,
            "method": "percentile",
            "rng": "chacha8",
        },
        "lowess": { "frac": config.lowess_frac, "iterations": 0 },
        "normalization": { "mean": data.norm_mean, "std": data.norm_std },
        "dataset": {
            "images": config.images.display().to_string(),
            "labels": config.labels.display().to_string(),
            "count": data.images.len(),
            "rows": data.rows,
            "cols": data.cols,
        },
        "workers": config.workers,
        "run_list_hash": format!("{run_list_hash:#018x}"),
        "versions": {
            "tree_format": TREE_FORMAT_VERSION,
            "model_format": MODEL_FORMAT_VERSION,
        },
    });
    serde_json::to_string_pretty(&doc).expect("summary serialization cannot fail")
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))
}

/// Load, normalize, build runs, evaluate every configured model, and
/// write `overall.csv`, `curve.csv`, and `summary.json`.
pub fn cmd_eval(config: &RunConfig) -> Result<(), CliError> {
    let data = load_normalized(config)?;
    let spec = dataset::SequenceSpec {
        seed: config.seed,
        per_class: config.per_class,
        num_runs: config.num_runs,
    };
    let runs = dataset::build_runs(&data, &spec)?;
    let params = eval_params(config);
    let pool = thread_pool(config.workers)?;
    let report = pool.install(|| compare(&config.models, &data, &runs, &params))?;

    std::fs::create_dir_all(&config.out_dir).map_err(|source| CliError::Write {
        path: config.out_dir.display().to_string(),
        source,
    })?;
    write_atomic(
        &config.out_dir.join("overall.csv"),
        report.overall_csv().as_bytes(),
    )?;
    write_atomic(
        &config.out_dir.join("curve.csv"),
        report.curve_csv().as_bytes(),
    )?;
    let summary = summary_json(config, &data, report.run_list_hash);
    write_atomic(&config.out_dir.join("summary.json"), summary.as_bytes())?;
    Ok(())
}

/// Train the single configured model on the first generated sequence
/// and write the serialized model.
pub fn cmd_fit(config: &RunConfig, model_out: &Path) -> Result<(), CliError> {
    let kind = config.require_one_model("fit")?;
    let data = load_normalized(config)?;
    let spec = dataset::SequenceSpec {
        seed: config.seed,
        per_class: config.per_class,
        num_runs: 1,
    };
    let runs = dataset::build_runs(&data, &spec)?;
    let sequence = &runs[0];
    let file = match kind {
        ModelKind::Cobweb3 => {
            let mut model = Cobweb3::new(data.rows, data.cols, config.acuity);
            for &idx in sequence {
                model
                    .fit(&data.images[idx])
                    .map_err(|e| CliError::Internal(e.to_string()))?;
            }
            ModelFile::Cobweb3(model)
        }
        ModelKind::ConvCobweb => {
            let mut model = crate::conv::ConvCobwebModel::new(
                data.rows,
                data.cols,
                config.filter_size,
                config.acuity,
            )
            .map_err(|e| CliError::Internal(e.to_string()))?;
            for &idx in sequence {
                model
                    .fit_image(&data.images[idx])
                    .map_err(|e| CliError::Internal(e.to_string()))?;
            }
            ModelFile::ConvCobweb(model)
        }
    };
    if let Some(parent) = model_out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| CliError::Write {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    write_atomic(model_out, file.to_json_string().as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DotTarget {
    Filters,
    Classifier,
}

/// Render one hierarchy of a saved model as DOT.
pub fn cmd_export_dot(model_in: &Path, out: &Path, which: DotTarget) -> Result<(), CliError> {
    let text = std::fs::read_to_string(model_in).map_err(|source| {
        CliError::Data(DataError::Io {
            path: model_in.display().to_string(),
            source,
        })
    })?;
    let model = ModelFile::from_json_str(&text)?;
    let dot = match (&model, which) {
        (ModelFile::Cobweb3(m), DotTarget::Classifier) => m.tree().to_dot(),
        (ModelFile::Cobweb3(_), DotTarget::Filters) => {
            return Err(CliError::Config(ConfigError::BadModel(
                "model has no filter hierarchy".into(),
            )))
        }
        (ModelFile::ConvCobweb(m), DotTarget::Filters) => m.filters_to_dot(),
        (ModelFile::ConvCobweb(m), DotTarget::Classifier) => m.classifier_to_dot(),
    };
    write_atomic(out, dot.as_bytes())
}

/// Print hierarchy shapes and the configuration echo for a saved model.
pub fn cmd_inspect(model_in: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(model_in).map_err(|source| {
        CliError::Data(DataError::Io {
            path: model_in.display().to_string(),
            source,
        })
    })?;
    let model = ModelFile::from_json_str(&text)?;
    match &model {
        ModelFile::Cobweb3(m) => {
            m.tree().validate().map_err(CliError::Internal)?;
            println!("kind: cobweb3");
            println!("grid: {}x{}", m.rows(), m.cols());
            println!("acuity: {}", m.tree().acuity());
            println!("format_version: {MODEL_FORMAT_VERSION}");
            println!(
                "tree: nodes={} depth={} leaves={} instances={}",
                m.tree().node_count(),
                m.tree().depth(),
                m.tree().leaf_count(),
                m.tree().total_instances()
            );
        }
        ModelFile::ConvCobweb(m) => {
            m.filters().validate().map_err(CliError::Internal)?;
            m.classifier().validate().map_err(CliError::Internal)?;
            println!("kind: convcobweb");
            println!("grid: {}x{}", m.rows(), m.cols());
            println!("filter_size: {}", m.filter_size());
            println!("acuity: {}", m.filters().acuity());
            println!("format_version: {MODEL_FORMAT_VERSION}");
            println!(
                "filters: nodes={} depth={} leaves={} instances={}",
                m.filters().node_count(),
                m.filters().depth(),
                m.filters().leaf_count(),
                m.filters().total_instances()
            );
            println!(
                "classifier: nodes={} depth={} leaves={} instances={}",
                m.classifier().node_count(),
                m.classifier().depth(),
                m.classifier().leaf_count(),
                m.classifier().total_instances()
            );
        }
    }
    Ok(())
}
