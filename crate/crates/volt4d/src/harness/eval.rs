//! Test-set evaluation and inference timing.

use std::time::Instant;

use rayon::iter::{IntoParallelRefIterator, ParallelIterator};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::synthgen::{MotionLabels, Sample};
use crate::tensor::Tensor;
use crate::zoo::{ArchId, Model, MotionPrediction};

use super::metrics::{acc_metric_detailed, mae_metric, Horizon, MeanStd};

/// Everything one model run reports on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub arch: ArchId,
    /// Per-horizon mean absolute error in mm, indexed as
    /// [`Horizon::ALL`](Horizon::ALL).
    pub mae: [MeanStd; 3],
    pub acc_percent: f64,
    pub skipped_components: Vec<usize>,
    /// Per-sample forward-pass time; single-threaded so architectures stay
    /// comparable.
    pub inference_ms: MeanStd,
    pub samples: usize,
    pub model_seed: u64,
    pub data_seed: u64,
}

impl EvalReport {
    pub fn mae_for(&self, horizon: Horizon) -> MeanStd {
        self.mae[horizon as usize]
    }
}

fn summarize(
    arch: ArchId,
    model_seed: u64,
    data_seed: u64,
    preds: &[MotionPrediction],
    targets: &[MotionLabels],
    timings_ms: &[f64],
) -> Result<EvalReport> {
    let acc = acc_metric_detailed(preds, targets)?;
    Ok(EvalReport {
        arch,
        mae: [
            mae_metric(preds, targets, Horizon::Now)?,
            mae_metric(preds, targets, Horizon::Plus1)?,
            mae_metric(preds, targets, Horizon::Plus2)?,
        ],
        acc_percent: acc.percent,
        skipped_components: acc.skipped_components,
        inference_ms: MeanStd::of(timings_ms)?,
        samples: preds.len(),
        model_seed,
        data_seed,
    })
}

/// Run the model over a split and aggregate MAE, correlation, and timing.
/// Forward passes run one at a time so the recorded latencies mean the same
/// thing for every architecture.
pub fn evaluate(model: &Model, samples: &[Sample], data_seed: u64) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation split".into()));
    }
    let mut preds = Vec::with_capacity(samples.len());
    let mut targets = Vec::with_capacity(samples.len());
    let mut timings = Vec::with_capacity(samples.len());
    for sample in samples {
        let started = Instant::now();
        let pred = model.forward(&sample.sequence)?;
        timings.push(started.elapsed().as_secs_f64() * 1e3);
        preds.push(pred);
        targets.push(sample.labels);
    }
    summarize(model.arch, model.seed, data_seed, &preds, &targets, &timings)
}

/// Latency and throughput of single-sequence forward passes.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub arch: ArchId,
    /// One entry per timed run, ms.
    pub timings_ms: Vec<f64>,
    pub ms: MeanStd,
    /// Sequences per second for one sequential stream: 1000 / ms.mean.
    pub hz: f64,
    /// Sequences per second when the same runs are spread over the worker
    /// pool; reported separately because it depends on core count.
    pub parallel_hz: f64,
    pub warmup_runs: usize,
}

/// Time repeated forward passes on a fixed random sequence. Warmup runs are
/// discarded; at least 10 timed runs are required for the spread to mean
/// anything.
pub fn benchmark_inference(model: &Model, n_warmup: usize, n_runs: usize) -> Result<BenchReport> {
    if n_runs < 10 {
        return Err(Error::Config(format!(
            "n_runs must be >= 10, got {n_runs}"
        )));
    }
    let t = model.config.sequence_length;
    let s = model.config.volume_size;
    let mut r = rng::stream(model.seed, Domain::Noise, 0);
    let seq = Tensor::uniform_from(&[t, 1, s, s, s], 0.0, 1.0, &mut r)?;

    for _ in 0..n_warmup {
        model.forward(&seq)?;
    }
    let mut timings = Vec::with_capacity(n_runs);
    for _ in 0..n_runs {
        let started = Instant::now();
        model.forward(&seq)?;
        timings.push(started.elapsed().as_secs_f64() * 1e3);
    }
    let ms = MeanStd::of(&timings)?;

    let runs: Vec<usize> = (0..n_runs).collect();
    let started = Instant::now();
    runs.par_iter()
        .map(|_| model.forward(&seq).map(|_| ()))
        .collect::<Result<Vec<()>>>()?;
    let parallel_hz = n_runs as f64 / started.elapsed().as_secs_f64();

    Ok(BenchReport {
        arch: model.arch,
        timings_ms: timings,
        ms,
        hz: 1000.0 / ms.mean,
        parallel_hz,
        warmup_runs: n_warmup,
    })
}
