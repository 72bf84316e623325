//! Evaluation metrics: per-horizon mean absolute error and the average
//! correlation coefficient.

use crate::error::{Error, Result};
use crate::synthgen::MotionLabels;
use crate::zoo::MotionPrediction;

/// Which predicted displacement a metric is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Now,
    Plus1,
    Plus2,
}

impl Horizon {
    pub const ALL: [Horizon; 3] = [Horizon::Now, Horizon::Plus1, Horizon::Plus2];

    pub fn name(self) -> &'static str {
        match self {
            Horizon::Now => "ds_now",
            Horizon::Plus1 => "ds_plus1",
            Horizon::Plus2 => "ds_plus2",
        }
    }

    /// Offset of this horizon's 3 components in the flat 9-vector.
    fn offset(self) -> usize {
        match self {
            Horizon::Now => 0,
            Horizon::Plus1 => 3,
            Horizon::Plus2 => 6,
        }
    }
}

/// Population mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Result<MeanStd> {
        if values.is_empty() {
            return Err(Error::Empty("mean/std of zero values".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(MeanStd {
            mean,
            std: var.sqrt(),
        })
    }
}

fn check_paired(preds: &[MotionPrediction], targets: &[MotionLabels]) -> Result<()> {
    if preds.len() != targets.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} predictions", targets.len()),
            got: format!("{}", preds.len()),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty("metric over zero samples".into()));
    }
    Ok(())
}

/// Mean absolute error on one horizon, mm. The per-sample error is the mean
/// of |prediction - target| over the horizon's 3 components; the result is
/// the population mean and std of that error across samples.
pub fn mae_metric(
    preds: &[MotionPrediction],
    targets: &[MotionLabels],
    horizon: Horizon,
) -> Result<MeanStd> {
    check_paired(preds, targets)?;
    let off = horizon.offset();
    let errors: Vec<f64> = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let p = p.to_flat();
            let t = t.to_flat();
            (off..off + 3).map(|i| (p[i] - t[i]).abs()).sum::<f64>() / 3.0
        })
        .collect();
    MeanStd::of(&errors)
}

/// Average correlation coefficient with per-component detail.
#[derive(Debug, Clone, PartialEq)]
pub struct AccReport {
    /// Mean Pearson correlation over the used components, in percent.
    pub percent: f64,
    /// Components excluded because prediction or target had zero variance.
    pub skipped_components: Vec<usize>,
}

/// Pearson correlation per output component (9 series across samples),
/// averaged over components, in percent. Components with zero variance on
/// either side are skipped and reported; if every component is skipped the
/// correlation is undefined.
pub fn acc_metric_detailed(
    preds: &[MotionPrediction],
    targets: &[MotionLabels],
) -> Result<AccReport> {
    check_paired(preds, targets)?;
    if preds.len() < 2 {
        return Err(Error::Empty(
            "correlation needs at least 2 samples".into(),
        ));
    }
    let n = preds.len() as f64;
    let mut used = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..9 {
        let xs: Vec<f64> = preds.iter().map(|p| p.to_flat()[c]).collect();
        let ys: Vec<f64> = targets.iter().map(|t| t.to_flat()[c]).collect();
        // a constant series must be caught by value equality; its computed
        // mean can carry rounding residue that keeps the variance nonzero
        let constant = |vs: &[f64]| vs.iter().all(|&v| v == vs[0]);
        if constant(&xs) || constant(&ys) {
            skipped.push(c);
            continue;
        }
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        let mut sxy = 0.0;
        for i in 0..xs.len() {
            let dx = xs[i] - mx;
            let dy = ys[i] - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        if sxx == 0.0 || syy == 0.0 {
            skipped.push(c);
        } else {
            used.push(sxy / (sxx.sqrt() * syy.sqrt()));
        }
    }
    if used.is_empty() {
        return Err(Error::UndefinedCorrelation);
    }
    Ok(AccReport {
        percent: 100.0 * used.iter().sum::<f64>() / used.len() as f64,
        skipped_components: skipped,
    })
}

/// Average correlation coefficient in percent.
pub fn acc_metric(preds: &[MotionPrediction], targets: &[MotionLabels]) -> Result<f64> {
    Ok(acc_metric_detailed(preds, targets)?.percent)
}
