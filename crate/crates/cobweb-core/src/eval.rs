//! The incremental predict-then-learn protocol, error aggregation, and
//! learning-curve construction.
//!
//! Every image in a sequence is first predicted (read-only), the
//! prediction is scored, and only then is the labeled image handed to
//! the model for learning. Runs are embarrassingly parallel: each
//! (model, run) pair owns a fresh model, and aggregation happens after
//! all pairs finish, in fixed order, so reported numbers are
//! independent of worker count and scheduling.

use crate::bootstrap::bootstrap_ci;
use crate::conv::ConvCobwebModel;
use crate::dataset::NormalizedDataset;
use crate::image::{Digit, LabeledImage};
use crate::lowess::lowess;
use crate::models::{Cobweb3, IncrementalModel, ModelError, ModelKind};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

/// One prediction event in the incremental protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub run_index: usize,
    /// 1-based position in the sequence.
    pub step: usize,
    pub predicted: Option<Digit>,
    pub actual: Digit,
    /// `predicted == Some(actual)`; an abstained prediction counts as
    /// incorrect.
    pub correct: bool,
}

/// All step records of one model over one sequence.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub model_name: String,
    pub run_index: usize,
    pub records: Vec<StepRecord>,
    pub wall_clock: Duration,
}

impl RunResult {
    /// Fraction of incorrect predictions.
    pub fn error_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let wrong = self.records.iter().filter(|r| !r.correct).count();
        wrong as f64 / self.records.len() as f64
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no runs to aggregate")]
    NoRuns,
    #[error("runs have unequal lengths ({0} vs {1})")]
    UnequalLengths(usize, usize),
    #[error("unlabeled image at run {run}, step {step}")]
    UnlabeledImage { run: usize, step: usize },
    #[error("model '{model}' aborted in run {run} at step {step}: {source}")]
    Aborted {
        model: String,
        run: usize,
        step: usize,
        source: ModelError,
        /// Records completed before the failure.
        partial: Vec<StepRecord>,
    },
    #[error("models were handed different run lists (hash {0:#x} vs {1:#x})")]
    RunListMismatch(u64, u64),
}

/// Drive one model through one sequence: predict, record, then learn.
pub fn run_incremental(
    model: &mut dyn IncrementalModel,
    sequence: &[&LabeledImage],
    run_index: usize,
) -> Result<RunResult, EvalError> {
    let start = Instant::now();
    let name = model.name().to_string();
    let mut records = Vec::with_capacity(sequence.len());
    for (i, image) in sequence.iter().enumerate() {
        let step = i + 1;
        let actual = image.label().ok_or(EvalError::UnlabeledImage {
            run: run_index,
            step,
        })?;
        let abort = |source: ModelError, partial: &[StepRecord]| EvalError::Aborted {
            model: name.clone(),
            run: run_index,
            step,
            source,
            partial: partial.to_vec(),
        };
        let predicted = match model.predict(&image.with_label(None)) {
            Ok(p) => p,
            Err(e) => return Err(abort(e, &records)),
        };
        records.push(StepRecord {
            run_index,
            step,
            predicted,
            actual,
            correct: predicted == Some(actual),
        });
        if let Err(e) = model.learn(image) {
            return Err(abort(e, &records));
        }
    }
    Ok(RunResult {
        model_name: name,
        run_index,
        records,
        wall_clock: start.elapsed(),
    })
}

/// Mean of the per-run error fractions.
pub fn overall_error(results: &[RunResult]) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::NoRuns);
    }
    let len = results[0].records.len();
    for r in results {
        if r.records.len() != len {
            return Err(EvalError::UnequalLengths(len, r.records.len()));
        }
    }
    Ok(results.iter().map(RunResult::error_rate).sum::<f64>() / results.len() as f64)
}

/// Aggregation and reporting parameters.
#[derive(Debug, Clone)]
pub struct EvalParams {
    pub seed: u64,
    pub acuity: f64,
    pub filter_size: usize,
    pub bootstrap_resamples: usize,
    pub bootstrap_level: f64,
    pub lowess_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverallRow {
    pub model: String,
    pub mean_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub runs: usize,
    pub wall_clock_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub model: String,
    pub step: usize,
    pub mean_error: f64,
    pub lowess: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Everything `compare` produces: the two figure-style tables plus the
/// raw per-run results for downstream inspection.
pub struct ComparisonReport {
    pub overall: Vec<OverallRow>,
    pub curve: Vec<CurveRow>,
    pub results: Vec<Vec<RunResult>>,
    pub run_list_hash: u64,
}

impl ComparisonReport {
    pub fn overall_csv(&self) -> String {
        let mut out = String::from("model,meanError,ciLow,ciHigh,runs,wallClockMean\n");
        for row in &self.overall {
            writeln!(
                out,
                "{},{},{},{},{},{:.3}",
                row.model, row.mean_error, row.ci_low, row.ci_high, row.runs, row.wall_clock_mean
            )
            .unwrap();
        }
        out
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from("model,step,meanError,lowess,ciLow,ciHigh\n");
        for row in &self.curve {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                row.model, row.step, row.mean_error, row.lowess, row.ci_low, row.ci_high
            )
            .unwrap();
        }
        out
    }
}

fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for part in parts {
        for &b in *part {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

fn hash_runs(runs: &[Vec<usize>]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for run in runs {
        hash ^= run.len() as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        for &idx in run {
            hash ^= idx as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

fn build_model(
    kind: ModelKind,
    data: &NormalizedDataset,
    params: &EvalParams,
) -> Box<dyn IncrementalModel> {
    match kind {
        ModelKind::Cobweb3 => Box::new(Cobweb3::new(data.rows, data.cols, params.acuity)),
        ModelKind::ConvCobweb => Box::new(
            ConvCobwebModel::new(data.rows, data.cols, params.filter_size, params.acuity)
                .expect("filter size validated by configuration"),
        ),
    }
}

/// Run every model over the identical run list and aggregate overall
/// errors (with bootstrap CIs) and per-step learning curves (with
/// Lowess smoothing and per-step CI bands).
pub fn compare(
    models: &[ModelKind],
    data: &NormalizedDataset,
    runs: &[Vec<usize>],
    params: &EvalParams,
) -> Result<ComparisonReport, EvalError> {
    if runs.is_empty() || models.is_empty() {
        return Err(EvalError::NoRuns);
    }
    let run_list_hash = hash_runs(runs);

    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|m| (0..runs.len()).map(move |r| (m, r)))
        .collect();
    let outcomes: Result<Vec<(RunResult, u64)>, EvalError> = jobs
        .into_par_iter()
        .map(|(mi, ri)| {
            // Each pair re-hashes the run list it was handed so the
            // cross-model fairness check is evidence, not assumption.
            let seen_hash = hash_runs(runs);
            let sequence: Vec<&LabeledImage> = runs[ri].iter().map(|&i| &data.images[i]).collect();
            let mut model = build_model(models[mi], data, params);
            let result = run_incremental(model.as_mut(), &sequence, ri)?;
            Ok((result, seen_hash))
        })
        .collect();
    let outcomes = outcomes?;
    for (_, seen) in &outcomes {
        if *seen != run_list_hash {
            return Err(EvalError::RunListMismatch(run_list_hash, *seen));
        }
    }
    let mut results: Vec<Vec<RunResult>> = Vec::with_capacity(models.len());
    let mut iter = outcomes.into_iter().map(|(r, _)| r);
    for _ in models {
        results.push(iter.by_ref().take(runs.len()).collect());
    }

    let seq_len = runs[0].len();
    for run in runs {
        if run.len() != seq_len {
            return Err(EvalError::UnequalLengths(seq_len, run.len()));
        }
    }

    let mut overall = Vec::with_capacity(models.len());
    let mut curve = Vec::with_capacity(models.len() * seq_len);
    for (mi, kind) in models.iter().enumerate() {
        let model_name = kind.to_string();
        let model_results = &results[mi];
        let rates: Vec<f64> = model_results.iter().map(RunResult::error_rate).collect();
        let mean_error = overall_error(model_results)?;
        let seed = params.seed ^ fnv1a(&[model_name.as_bytes(), b"overall"]);
        let (ci_low, ci_high) = bootstrap_ci(
            &rates,
            params.bootstrap_resamples,
            params.bootstrap_level,
            seed,
        );
        let wall_clock_mean = model_results
            .iter()
            .map(|r| r.wall_clock.as_secs_f64())
            .sum::<f64>()
            / model_results.len() as f64;
        overall.push(OverallRow {
            model: model_name.clone(),
            mean_error,
            ci_low,
            ci_high,
            runs: runs.len(),
            wall_clock_mean,
        });

        // Per-step mean error across runs, its bootstrap band, and the
        // Lowess curve over the step/mean-error series.
        let step_rows: Vec<(f64, f64, f64)> = (0..seq_len)
            .into_par_iter()
            .map(|s| {
                let values: Vec<f64> = model_results
                    .iter()
                    .map(|r| if r.records[s].correct { 0.0 } else { 1.0 })
                    .collect();
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let step_tag = (s as u64 + 1).to_le_bytes();
                let seed = params.seed ^ fnv1a(&[model_name.as_bytes(), b"step", &step_tag]);
                let (lo, hi) = bootstrap_ci(
                    &values,
                    params.bootstrap_resamples,
                    params.bootstrap_level,
                    seed,
                );
                (mean, lo, hi)
            })
            .collect();
        let points: Vec<(f64, f64)> = step_rows
            .iter()
            .enumerate()
            .map(|(s, &(mean, _, _))| ((s + 1) as f64, mean))
            .collect();
        let smoothed = lowess(&points, params.lowess_frac);
        for (s, (&(mean, lo, hi), &(_, smooth))) in
            step_rows.iter().zip(smoothed.iter()).enumerate()
        {
            curve.push(CurveRow {
                model: model_name.clone(),
                step: s + 1,
                mean_error: mean,
                lowess: smooth,
                ci_low: lo,
                ci_high: hi,
            });
        }
    }

    Ok(ComparisonReport {
        overall,
        curve,
        results,
        run_list_hash,
    })
}
