//! Tissue-like test volumes: multi-octave value noise normalized to [0,1],
//! padded so a field of view can sweep the full trajectory excursion
//! without leaving the volume.

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::tensor::Tensor;

use super::{EXCURSION_CAP_FACTOR, FOV_MM, MAGNITUDE_CLASSES};

/// Number of value-noise octaves summed per phantom.
const OCTAVES: usize = 4;

/// A super-volume that rendered fields of view sample from.
#[derive(Debug, Clone)]
pub struct Phantom {
    /// Rank-3 intensity volume in [0,1].
    pub volume: Tensor,
    /// mm per voxel, per axis.
    pub voxel_pitch: [f64; 3],
    pub seed: u64,
}

/// Minimum phantom extents for a given field-of-view size: the FOV itself,
/// the largest possible trajectory excursion on both sides, and a guard
/// voxel for interpolation and origin jitter.
pub fn required_phantom_extents(fov_voxels: usize, pitch: [f64; 3]) -> [usize; 3] {
    let max_class = MAGNITUDE_CLASSES.iter().cloned().fold(0.0, f64::max);
    let excursion_mm = EXCURSION_CAP_FACTOR * max_class;
    std::array::from_fn(|a| {
        let margin = (excursion_mm / pitch[a]).ceil() as usize + 2;
        fov_voxels + 2 * margin
    })
}

/// Deterministically generate a phantom. `size` are the volume extents in
/// voxels; `pitch` is mm per voxel. The extents must cover the field of
/// view implied by the pitch plus the maximum trajectory excursion.
pub fn generate_phantom(seed: u64, size: [usize; 3], pitch: [f64; 3]) -> Result<Phantom> {
    for (a, &p) in pitch.iter().enumerate() {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Config(format!(
                "voxel pitch must be positive, got {p} on axis {a}"
            )));
        }
    }
    let fov_voxels = (0..3)
        .map(|a| (FOV_MM[a] / pitch[a]).round() as usize)
        .max()
        .unwrap();
    let required = required_phantom_extents(fov_voxels, pitch);
    for a in 0..3 {
        if size[a] < required[a] {
            return Err(Error::Config(format!(
                "phantom extent {} on axis {a} is too small; need at least {} \
                 to cover the field of view plus trajectory excursion",
                size[a], required[a]
            )));
        }
    }

    let mut volume = Tensor::zeros(&size);
    let mut amplitude = 1.0;
    for octave in 0..OCTAVES {
        let nodes = (1 << (octave + 2)) + 1;
        let mut r = rng::stream(seed, Domain::Phantom, octave as u64);
        let lattice = Tensor::uniform_from(&[nodes, nodes, nodes], 0.0, 1.0, &mut r)?;
        let scale: [f64; 3] =
            std::array::from_fn(|a| (nodes - 1) as f64 / (size[a] - 1) as f64);
        let data = volume.data_mut();
        let mut idx = 0;
        for i in 0..size[0] {
            for j in 0..size[1] {
                for k in 0..size[2] {
                    let p = [
                        i as f64 * scale[0],
                        j as f64 * scale[1],
                        k as f64 * scale[2],
                    ];
                    data[idx] += amplitude * lattice.trilinear_sample(p)?;
                    idx += 1;
                }
            }
        }
        amplitude *= 0.5;
    }

    let lo = volume.min();
    let hi = volume.max();
    let range = hi - lo;
    if range > 0.0 {
        for v in volume.data_mut() {
            *v = (*v - lo) / range;
        }
    }

    Ok(Phantom {
        volume,
        voxel_pitch: pitch,
        seed,
    })
}
