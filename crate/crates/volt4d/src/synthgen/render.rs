//! Rendering: resample a phantom over a field of view that follows a
//! trajectory, producing the observed volume sequence and its geometric
//! labels.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::tensor::Tensor;

use super::phantom::Phantom;
use super::trajectory::{Trajectory, TRAJECTORY_SAMPLES};
use super::MotionLabels;

#[derive(Debug, Clone)]
pub struct RenderConfig {
    /// Cubic field-of-view edge length in voxels.
    pub volume_size: usize,
    /// Observed volumes per sample; the trajectory carries two more points
    /// for the forecast labels.
    pub sequence_length: usize,
    /// Additive Gaussian intensity noise; 0 disables.
    pub noise_sigma: f64,
    pub noise_seed: u64,
    pub roi_id: u32,
    pub trajectory_id: u32,
}

/// One labeled training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// (T, 1, D, H, W) intensity sequence. Values carry 32-bit float
    /// precision, matching the storage format exactly.
    pub sequence: Tensor,
    pub labels: MotionLabels,
    pub roi_id: u32,
    pub trajectory_id: u32,
}

/// Render the volume sequence seen by a field of view anchored at
/// `roi_origin_mm` (corner position in phantom space) while the tissue
/// under it moves along `trajectory`.
pub fn render_sequence(
    phantom: &Phantom,
    roi_origin_mm: [f64; 3],
    trajectory: &Trajectory,
    cfg: &RenderConfig,
) -> Result<Sample> {
    if cfg.sequence_length + 2 != TRAJECTORY_SAMPLES {
        return Err(Error::Config(format!(
            "sequence length {} incompatible with {}-sample trajectories",
            cfg.sequence_length, TRAJECTORY_SAMPLES
        )));
    }
    if trajectory.samples.len() != TRAJECTORY_SAMPLES {
        return Err(Error::Config(format!(
            "trajectory has {} samples, expected {}",
            trajectory.samples.len(),
            TRAJECTORY_SAMPLES
        )));
    }
    let s = cfg.volume_size;
    let pitch = phantom.voxel_pitch;
    let origin_vox: [f64; 3] = std::array::from_fn(|a| roi_origin_mm[a] / pitch[a]);

    let mut sequence = Tensor::zeros(&[cfg.sequence_length, 1, s, s, s]);
    {
        let data = sequence.data_mut();
        let mut idx = 0;
        for t in 0..cfg.sequence_length {
            let disp = trajectory.samples[t];
            let shift: [f64; 3] = std::array::from_fn(|a| origin_vox[a] + disp[a] / pitch[a]);
            for i in 0..s {
                for j in 0..s {
                    for k in 0..s {
                        let p = [
                            shift[0] + i as f64,
                            shift[1] + j as f64,
                            shift[2] + k as f64,
                        ];
                        data[idx] = phantom.volume.trilinear_sample(p).map_err(|_| {
                            Error::FovOutOfBounds { timestep: t }
                        })?;
                        idx += 1;
                    }
                }
            }
        }
    }

    if cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma)
            .map_err(|e| Error::Config(format!("invalid noise sigma: {e}")))?;
        let mut r = rng::stream(cfg.noise_seed, Domain::Noise, 0);
        for v in sequence.data_mut() {
            *v += normal.sample(&mut r);
        }
    }

    // quantize to the precision samples are stored at, so in-memory and
    // on-disk values agree exactly
    for v in sequence.data_mut() {
        *v = *v as f32 as f64;
    }

    let labels = MotionLabels::from_samples(&trajectory.samples, cfg.sequence_length)?;
    Ok(Sample {
        sequence,
        labels,
        roi_id: cfg.roi_id,
        trajectory_id: cfg.trajectory_id,
    })
}
