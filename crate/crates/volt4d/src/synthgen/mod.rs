//! Synthetic data generation: tissue-like value-noise phantoms, smooth
//! spline motion trajectories, trilinear-resampled volume sequences, and an
//! on-disk dataset format with geometric displacement labels.

pub mod dataset;
pub mod phantom;
pub mod render;
pub mod spline;
pub mod trajectory;

pub use dataset::{
    build_dataset, read_dataset, Dataset, DatasetConfig, DatasetManifest, Split,
    DATASET_FORMAT_VERSION,
};
pub use phantom::{generate_phantom, required_phantom_extents, Phantom};
pub use render::{render_sequence, RenderConfig, Sample};
pub use spline::spline_eval;
pub use trajectory::{generate_trajectory, Trajectory, TRAJECTORY_SAMPLES};

use crate::error::{Error, Result};

/// Field of view in mm, per volume axis (depth, height, width).
pub const FOV_MM: [f64; 3] = [5.0, 5.0, 3.5];

/// Maximum per-step motion magnitudes in mm; each trajectory draws its
/// class uniformly from these.
pub const MAGNITUDE_CLASSES: [f64; 3] = [0.5, 1.0, 2.0];

/// Default standard deviation of additive Gaussian intensity noise.
pub const NOISE_SIGMA_DEFAULT: f64 = 0.02;

/// Every sampled trajectory position stays within this multiple of the
/// magnitude class from the origin; phantoms are padded accordingly.
pub const EXCURSION_CAP_FACTOR: f64 = 2.2;

/// Ground-truth displacements in mm relative to the ROI position at t0:
/// the motion accumulated over the observed window plus two forecast points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionLabels {
    pub ds_now: [f64; 3],
    pub ds_plus1: [f64; 3],
    pub ds_plus2: [f64; 3],
}

impl MotionLabels {
    /// Labels for a window of `sequence_length` observed volumes: the
    /// trajectory must carry two additional future samples.
    pub fn from_samples(samples: &[[f64; 3]], sequence_length: usize) -> Result<Self> {
        if samples.len() != sequence_length + 2 {
            return Err(Error::Config(format!(
                "trajectory has {} samples, need {} (sequence length {} plus two forecasts)",
                samples.len(),
                sequence_length + 2,
                sequence_length
            )));
        }
        let origin = samples[0];
        let rel = |p: [f64; 3]| [p[0] - origin[0], p[1] - origin[1], p[2] - origin[2]];
        Ok(MotionLabels {
            ds_now: rel(samples[sequence_length - 1]),
            ds_plus1: rel(samples[sequence_length]),
            ds_plus2: rel(samples[sequence_length + 1]),
        })
    }

    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != 9 {
            return Err(Error::ShapeMismatch {
                expected: "9 label components".into(),
                got: format!("{}", values.len()),
            });
        }
        Ok(MotionLabels {
            ds_now: [values[0], values[1], values[2]],
            ds_plus1: [values[3], values[4], values[5]],
            ds_plus2: [values[6], values[7], values[8]],
        })
    }

    pub fn to_flat(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        out[..3].copy_from_slice(&self.ds_now);
        out[3..6].copy_from_slice(&self.ds_plus1);
        out[6..].copy_from_slice(&self.ds_plus2);
        out
    }
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}
