//! On-disk dataset layout and generation.
//!
//! A dataset directory holds `manifest.txt` plus one binary file per sample
//! under `samples/roi<RR>_traj<TTT>.bin`.
//!
//! Sample file layout (all integers little-endian):
//!
//! | bytes      | content                                   |
//! |------------|-------------------------------------------|
//! | 0..8       | magic `V4DSAMPL`                          |
//! | 8..12      | format version (u32)                      |
//! | 12..16     | roi id (u32)                              |
//! | 16..20     | trajectory id (u32)                       |
//! | 20..40     | sequence shape t,c,d,h,w (5 x u32)        |
//! | 40..44     | label count (u32, always 9)               |
//! | ..         | t*c*d*h*w volume voxels (f32 LE, t-major) |
//! | ..         | 9 labels (f64 LE)                         |
//! | last 4     | CRC32 of all preceding bytes (u32 LE)     |
//!
//! The manifest is line-oriented text: a `volt4d-dataset v<N>` header, then
//! `key=value` pairs, with ROI splits as comma-separated id lists.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::iter::{IntoParallelIterator, ParallelIterator};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::tensor::Tensor;

use super::phantom::{generate_phantom, required_phantom_extents};
use super::render::{render_sequence, RenderConfig, Sample};
use super::trajectory::{generate_trajectory, TRAJECTORY_SAMPLES};
use super::{MotionLabels, FOV_MM, MAGNITUDE_CLASSES, NOISE_SIGMA_DEFAULT};

pub const DATASET_FORMAT_VERSION: u32 = 1;

const SAMPLE_MAGIC: &[u8; 8] = b"V4DSAMPL";
const MANIFEST_PREFIX: &str = "volt4d-dataset v";

/// Seed-space offsets keeping per-purpose derived seeds disjoint.
const TRAJECTORY_SEED_BASE: u64 = 1 << 32;
const NOISE_SEED_BASE: u64 = 1 << 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub rois: u32,
    pub trajectories_per_roi: u32,
    /// Cubic field-of-view edge length in voxels.
    pub volume_size: usize,
    pub sequence_length: usize,
    pub val_rois: u32,
    pub test_rois: u32,
    pub noise_sigma: f64,
    pub master_seed: u64,
}

impl DatasetConfig {
    /// Benchmark-scale counts: 40 ROIs x 100 trajectories, 30/5/5 split.
    pub fn paper_shaped(master_seed: u64) -> Self {
        DatasetConfig {
            rois: 40,
            trajectories_per_roi: 100,
            volume_size: 12,
            sequence_length: 5,
            val_rois: 5,
            test_rois: 5,
            noise_sigma: NOISE_SIGMA_DEFAULT,
            master_seed,
        }
    }

    /// Single-machine scale: 16 ROIs x 25 trajectories, 12/2/2 split.
    pub fn desk(master_seed: u64) -> Self {
        DatasetConfig {
            rois: 16,
            trajectories_per_roi: 25,
            volume_size: 12,
            sequence_length: 5,
            val_rois: 2,
            test_rois: 2,
            noise_sigma: NOISE_SIGMA_DEFAULT,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rois == 0 || self.trajectories_per_roi == 0 {
            return Err(Error::Config("dataset needs at least one ROI and trajectory".into()));
        }
        if self.val_rois + self.test_rois >= self.rois {
            return Err(Error::Config(format!(
                "{} val + {} test ROIs leave no training ROIs out of {}",
                self.val_rois, self.test_rois, self.rois
            )));
        }
        if self.sequence_length + 2 != TRAJECTORY_SAMPLES {
            return Err(Error::Config(format!(
                "sequence length must be {}, got {}",
                TRAJECTORY_SAMPLES - 2,
                self.sequence_length
            )));
        }
        if self.volume_size < 2 {
            return Err(Error::Config("volume_size must be at least 2".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sigma must be nonnegative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    pub fn voxel_pitch(&self) -> [f64; 3] {
        std::array::from_fn(|a| FOV_MM[a] / self.volume_size as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub version: u32,
    pub master_seed: u64,
    pub rois: u32,
    pub trajectories_per_roi: u32,
    pub volume_size: usize,
    pub sequence_length: usize,
    pub fov_mm: [f64; 3],
    pub noise_sigma: f64,
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

impl DatasetManifest {
    pub fn split_rois(&self, split: Split) -> &[u32] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn total_samples(&self) -> usize {
        self.rois as usize * self.trajectories_per_roi as usize
    }

    fn render(&self) -> String {
        let ids = |v: &[u32]| -> String {
            v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
        };
        format!(
            "{MANIFEST_PREFIX}{}\n\
             master_seed={}\n\
             rois={}\n\
             trajectories_per_roi={}\n\
             volume_size={}\n\
             sequence_length={}\n\
             fov_mm={},{},{}\n\
             noise_sigma={}\n\
             split.train={}\n\
             split.val={}\n\
             split.test={}\n",
            self.version,
            self.master_seed,
            self.rois,
            self.trajectories_per_roi,
            self.volume_size,
            self.sequence_length,
            self.fov_mm[0],
            self.fov_mm[1],
            self.fov_mm[2],
            self.noise_sigma,
            ids(&self.train),
            ids(&self.val),
            ids(&self.test),
        )
    }

    fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(path, "empty manifest"))?;
        let version: u32 = header
            .strip_prefix(MANIFEST_PREFIX)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::format(path, format!("header line {header:?}")))?;
        if version != DATASET_FORMAT_VERSION {
            return Err(Error::Version {
                path: path.to_path_buf(),
                found: version,
                expected: DATASET_FORMAT_VERSION,
            });
        }

        let mut fields = std::collections::BTreeMap::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(path, format!("manifest line {line:?}")))?;
            if fields.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::format(path, format!("duplicate key {k:?}")));
            }
        }
        let mut take = |key: &str| -> Result<String> {
            fields
                .remove(key)
                .ok_or_else(|| Error::format(path, format!("missing key {key:?}")))
        };
        let parse_num = |key: &str, v: String| -> Result<u64> {
            v.parse()
                .map_err(|_| Error::format(path, format!("value for {key:?}: {v:?}")))
        };
        let master_seed = parse_num("master_seed", take("master_seed")?)?;
        let rois = parse_num("rois", take("rois")?)? as u32;
        let trajectories_per_roi = parse_num("trajectories_per_roi", take("trajectories_per_roi")?)? as u32;
        let volume_size = parse_num("volume_size", take("volume_size")?)? as usize;
        let sequence_length = parse_num("sequence_length", take("sequence_length")?)? as usize;

        let fov_raw = take("fov_mm")?;
        let fov_parts: Vec<f64> = fov_raw
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(path, format!("fov_mm value {fov_raw:?}")))?;
        if fov_parts.len() != 3 {
            return Err(Error::format(path, format!("fov_mm value {fov_raw:?}")));
        }
        let noise_raw = take("noise_sigma")?;
        let noise_sigma: f64 = noise_raw
            .parse()
            .map_err(|_| Error::format(path, format!("noise_sigma value {noise_raw:?}")))?;

        let parse_ids = |key: &str, v: String| -> Result<Vec<u32>> {
            if v.trim().is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<u32>()
                        .map_err(|_| Error::format(path, format!("value for {key:?}: {v:?}")))
                })
                .collect()
        };
        let train = parse_ids("split.train", take("split.train")?)?;
        let val = parse_ids("split.val", take("split.val")?)?;
        let test = parse_ids("split.test", take("split.test")?)?;
        if let Some(extra) = fields.keys().next() {
            return Err(Error::format(path, format!("unknown key {extra:?}")));
        }

        let manifest = DatasetManifest {
            version,
            master_seed,
            rois,
            trajectories_per_roi,
            volume_size,
            sequence_length,
            fov_mm: [fov_parts[0], fov_parts[1], fov_parts[2]],
            noise_sigma,
            train,
            val,
            test,
        };
        manifest.check_split_cover(path)?;
        Ok(manifest)
    }

    fn check_split_cover(&self, path: &Path) -> Result<()> {
        let mut seen = vec![0u32; self.rois as usize];
        for &id in self.train.iter().chain(&self.val).chain(&self.test) {
            if id >= self.rois {
                return Err(Error::format(path, format!("split ROI id {id} out of range")));
            }
            seen[id as usize] += 1;
        }
        if let Some(id) = seen.iter().position(|&c| c != 1) {
            return Err(Error::format(
                path,
                format!("ROI {id} appears in {} splits, expected exactly 1", seen[id]),
            ));
        }
        Ok(())
    }
}

/// Seed for (roi, trajectory) pair generation, derived from the master seed.
pub fn trajectory_seed(master_seed: u64, roi: u32, traj: u32) -> u64 {
    rng::derive_seed(
        master_seed,
        TRAJECTORY_SEED_BASE + (roi as u64) * 65536 + traj as u64,
    )
}

fn noise_seed(master_seed: u64, roi: u32, traj: u32) -> u64 {
    rng::derive_seed(
        master_seed,
        NOISE_SEED_BASE + (roi as u64) * 65536 + traj as u64,
    )
}

fn phantom_seed(master_seed: u64, roi: u32) -> u64 {
    rng::derive_seed(master_seed, roi as u64)
}

/// Magnitude class assigned to a trajectory, drawn from its seed.
pub fn magnitude_class_for(traj_seed: u64) -> f64 {
    let mut r = rng::stream(traj_seed, Domain::Magnitude, 0);
    MAGNITUDE_CLASSES[r.random_range(0..MAGNITUDE_CLASSES.len())]
}

pub fn sample_file_name(roi: u32, traj: u32) -> String {
    format!("roi{roi:02}_traj{traj:03}.bin")
}

/// Field-of-view corner for a ROI, in mm within its phantom: centered, with
/// sub-voxel jitter so distinct ROIs never share an origin exactly.
fn roi_origin_mm(
    master_seed: u64,
    roi: u32,
    phantom_extents: [usize; 3],
    volume_size: usize,
    pitch: [f64; 3],
) -> [f64; 3] {
    let mut r = rng::stream(phantom_seed(master_seed, roi), Domain::Phantom, 64);
    std::array::from_fn(|a| {
        let corner = (phantom_extents[a] - volume_size) as f64 / 2.0;
        (corner + r.random_range(-1.0..1.0)) * pitch[a]
    })
}

/// Generate every sample and the manifest under `dir`. Deterministic: the
/// same config writes byte-identical files. ROIs are generated in parallel;
/// each owns its files exclusively.
pub fn build_dataset(cfg: &DatasetConfig, dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    let samples_dir = dir.join("samples");
    fs::create_dir_all(&samples_dir).map_err(|e| Error::io(&samples_dir, e))?;

    let mut ids: Vec<u32> = (0..cfg.rois).collect();
    let mut split_rng = rng::stream(cfg.master_seed, Domain::Split, 0);
    ids.shuffle(&mut split_rng);
    let mut val: Vec<u32> = ids[..cfg.val_rois as usize].to_vec();
    let mut test: Vec<u32> = ids[cfg.val_rois as usize..(cfg.val_rois + cfg.test_rois) as usize].to_vec();
    let mut train: Vec<u32> = ids[(cfg.val_rois + cfg.test_rois) as usize..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();

    let pitch = cfg.voxel_pitch();
    let extents = required_phantom_extents(cfg.volume_size, pitch);

    (0..cfg.rois).into_par_iter().try_for_each(|roi| -> Result<()> {
        let phantom = generate_phantom(phantom_seed(cfg.master_seed, roi), extents, pitch)?;
        let origin = roi_origin_mm(cfg.master_seed, roi, extents, cfg.volume_size, pitch);
        for traj in 0..cfg.trajectories_per_roi {
            let tseed = trajectory_seed(cfg.master_seed, roi, traj);
            let trajectory = generate_trajectory(tseed, magnitude_class_for(tseed))?;
            let render_cfg = RenderConfig {
                volume_size: cfg.volume_size,
                sequence_length: cfg.sequence_length,
                noise_sigma: cfg.noise_sigma,
                noise_seed: noise_seed(cfg.master_seed, roi, traj),
                roi_id: roi,
                trajectory_id: traj,
            };
            let sample = render_sequence(&phantom, origin, &trajectory, &render_cfg)?;
            write_sample_file(&samples_dir.join(sample_file_name(roi, traj)), &sample)?;
        }
        Ok(())
    })?;

    let manifest = DatasetManifest {
        version: DATASET_FORMAT_VERSION,
        master_seed: cfg.master_seed,
        rois: cfg.rois,
        trajectories_per_roi: cfg.trajectories_per_roi,
        volume_size: cfg.volume_size,
        sequence_length: cfg.sequence_length,
        fov_mm: FOV_MM,
        noise_sigma: cfg.noise_sigma,
        train,
        val,
        test,
    };
    let manifest_path = dir.join("manifest.txt");
    fs::write(&manifest_path, manifest.render()).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

pub fn write_sample_file(path: &Path, sample: &Sample) -> Result<()> {
    let shape = sample.sequence.shape();
    debug_assert_eq!(shape.len(), 5);
    let mut bytes = Vec::with_capacity(48 + sample.sequence.len() * 4 + 72);
    bytes.extend_from_slice(SAMPLE_MAGIC);
    bytes.extend_from_slice(&DATASET_FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&sample.roi_id.to_le_bytes());
    bytes.extend_from_slice(&sample.trajectory_id.to_le_bytes());
    for &dim in shape {
        bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    bytes.extend_from_slice(&9u32.to_le_bytes());
    for &v in sample.sequence.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for v in sample.labels.to_flat() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))
}

pub fn read_sample_file(path: &Path) -> Result<Sample> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 4 {
        return Err(Error::format(path, "file shorter than its checksum"));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    if body.len() < 44 {
        return Err(Error::format(path, "truncated header"));
    }
    if &body[..8] != SAMPLE_MAGIC {
        return Err(Error::format(path, "magic bytes"));
    }
    let u32_at = |off: usize| u32::from_le_bytes(body[off..off + 4].try_into().unwrap());
    let version = u32_at(8);
    if version != DATASET_FORMAT_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
            expected: DATASET_FORMAT_VERSION,
        });
    }
    let roi_id = u32_at(12);
    let trajectory_id = u32_at(16);
    let shape: Vec<usize> = (0..5).map(|i| u32_at(20 + 4 * i) as usize).collect();
    let label_count = u32_at(40) as usize;
    if label_count != 9 {
        return Err(Error::format(path, format!("label count {label_count}")));
    }
    let voxels: usize = shape.iter().product();
    let expected_len = 44 + voxels * 4 + label_count * 8;
    if body.len() != expected_len {
        return Err(Error::format(
            path,
            format!("payload length {} (expected {expected_len})", body.len()),
        ));
    }
    let mut data = Vec::with_capacity(voxels);
    for i in 0..voxels {
        let off = 44 + i * 4;
        let v = f32::from_le_bytes(body[off..off + 4].try_into().unwrap());
        data.push(v as f64);
    }
    let mut labels = [0.0f64; 9];
    for (i, l) in labels.iter_mut().enumerate() {
        let off = 44 + voxels * 4 + i * 8;
        *l = f64::from_le_bytes(body[off..off + 8].try_into().unwrap());
    }
    Ok(Sample {
        sequence: Tensor::from_vec(&shape, data)?,
        labels: MotionLabels::from_flat(&labels)?,
        roi_id,
        trajectory_id,
    })
}

/// A dataset directory opened for reading.
#[derive(Debug, Clone)]
pub struct Dataset {
    manifest: DatasetManifest,
    root: PathBuf,
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.txt");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest = DatasetManifest::parse(&manifest_path, &text)?;
    Ok(Dataset {
        manifest,
        root: dir.to_path_buf(),
    })
}

impl Dataset {
    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn sample_path(&self, roi: u32, traj: u32) -> PathBuf {
        self.root.join("samples").join(sample_file_name(roi, traj))
    }

    pub fn load_sample(&self, roi: u32, traj: u32) -> Result<Sample> {
        read_sample_file(&self.sample_path(roi, traj))
    }

    /// (roi, trajectory) ids of a split, in deterministic roi-major order.
    pub fn sample_ids(&self, split: Split) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for &roi in self.manifest.split_rois(split) {
            for traj in 0..self.manifest.trajectories_per_roi {
                out.push((roi, traj));
            }
        }
        out
    }

    pub fn load_split(&self, split: Split) -> Result<Vec<Sample>> {
        self.sample_ids(split)
            .into_iter()
            .map(|(r, t)| self.load_sample(r, t))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::norm3;
    use tempfile::tempdir;

    fn mini_config() -> DatasetConfig {
        DatasetConfig {
            rois: 4,
            trajectories_per_roi: 3,
            volume_size: 8,
            sequence_length: 5,
            val_rois: 1,
            test_rois: 1,
            noise_sigma: NOISE_SIGMA_DEFAULT,
            master_seed: 77,
        }
    }

    #[test]
    fn build_then_read_round_trips() {
        let dir = tempdir().unwrap();
        let built = build_dataset(&mini_config(), dir.path()).unwrap();
        let ds = read_dataset(dir.path()).unwrap();
        assert_eq!(*ds.manifest(), built);
        assert_eq!(ds.manifest().train.len(), 2);
        assert_eq!(ds.manifest().val.len(), 1);
        assert_eq!(ds.manifest().test.len(), 1);
        let all: usize = Split::ALL.iter().map(|&s| ds.sample_ids(s).len()).sum();
        assert_eq!(all, 12);
        for split in Split::ALL {
            for (roi, traj) in ds.sample_ids(split) {
                let s = ds.load_sample(roi, traj).unwrap();
                assert_eq!(s.roi_id, roi);
                assert_eq!(s.trajectory_id, traj);
                assert_eq!(s.sequence.shape(), [5, 1, 8, 8, 8]);
                assert!(s.sequence.all_finite());
            }
        }
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let dir_a = tempdir().unwrap();
        let dir_b = tempdir().unwrap();
        build_dataset(&mini_config(), dir_a.path()).unwrap();
        build_dataset(&mini_config(), dir_b.path()).unwrap();
        let manifest_a = fs::read(dir_a.path().join("manifest.txt")).unwrap();
        let manifest_b = fs::read(dir_b.path().join("manifest.txt")).unwrap();
        assert_eq!(manifest_a, manifest_b);
        for roi in 0..4 {
            for traj in 0..3 {
                let name = sample_file_name(roi, traj);
                let a = fs::read(dir_a.path().join("samples").join(&name)).unwrap();
                let b = fs::read(dir_b.path().join("samples").join(&name)).unwrap();
                assert_eq!(a, b, "{name} differs between runs");
            }
        }
    }

    #[test]
    fn sample_write_read_is_identity() {
        let dir = tempdir().unwrap();
        build_dataset(&mini_config(), dir.path()).unwrap();
        let ds = read_dataset(dir.path()).unwrap();
        let sample = ds.load_sample(0, 0).unwrap();
        let copy_path = dir.path().join("copy.bin");
        write_sample_file(&copy_path, &sample).unwrap();
        let reread = read_sample_file(&copy_path).unwrap();
        assert_eq!(sample, reread);
    }

    #[test]
    fn truncation_and_corruption_are_checksum_errors() {
        let dir = tempdir().unwrap();
        build_dataset(&mini_config(), dir.path()).unwrap();
        let path = dir.path().join("samples").join(sample_file_name(0, 1));
        let bytes = fs::read(&path).unwrap();

        let truncated = dir.path().join("truncated.bin");
        fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            read_sample_file(&truncated).unwrap_err(),
            Error::Checksum { .. }
        ));

        let mut flipped = bytes.clone();
        flipped[100] ^= 0x40;
        let corrupt = dir.path().join("corrupt.bin");
        fs::write(&corrupt, &flipped).unwrap();
        assert!(matches!(
            read_sample_file(&corrupt).unwrap_err(),
            Error::Checksum { .. }
        ));
    }

    #[test]
    fn foreign_format_version_is_a_version_error() {
        let dir = tempdir().unwrap();
        build_dataset(&mini_config(), dir.path()).unwrap();
        let path = dir.path().join("samples").join(sample_file_name(0, 0));
        let mut bytes = fs::read(&path).unwrap();
        bytes[8..12].copy_from_slice(&99u32.to_le_bytes());
        let body_len = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&crc.to_le_bytes());
        let bumped = dir.path().join("bumped.bin");
        fs::write(&bumped, &bytes).unwrap();
        match read_sample_file(&bumped).unwrap_err() {
            Error::Version { found, expected, .. } => {
                assert_eq!(found, 99);
                assert_eq!(expected, DATASET_FORMAT_VERSION);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn labels_match_regenerated_trajectory_geometry() {
        let dir = tempdir().unwrap();
        let cfg = mini_config();
        build_dataset(&cfg, dir.path()).unwrap();
        let ds = read_dataset(dir.path()).unwrap();
        for roi in 0..cfg.rois {
            for traj in 0..cfg.trajectories_per_roi {
                let sample = ds.load_sample(roi, traj).unwrap();
                let tseed = trajectory_seed(cfg.master_seed, roi, traj);
                let t = generate_trajectory(tseed, magnitude_class_for(tseed)).unwrap();
                let expect = MotionLabels::from_samples(&t.samples, cfg.sequence_length).unwrap();
                let (a, b) = (sample.labels.to_flat(), expect.to_flat());
                for i in 0..9 {
                    assert!((a[i] - b[i]).abs() < 1e-12, "roi {roi} traj {traj} label {i}");
                }
                assert!(norm3(sample.labels.ds_now) <= t.path_length() + 1e-12);
            }
        }
    }

    #[test]
    fn forecast_targets_are_farther_than_current_motion_on_average() {
        let dir = tempdir().unwrap();
        let mut cfg = mini_config();
        cfg.rois = 8;
        cfg.trajectories_per_roi = 10;
        cfg.val_rois = 1;
        cfg.test_rois = 1;
        build_dataset(&cfg, dir.path()).unwrap();
        let ds = read_dataset(dir.path()).unwrap();
        let mut sum_now = 0.0;
        let mut sum_plus2 = 0.0;
        let mut n = 0usize;
        for split in Split::ALL {
            for s in ds.load_split(split).unwrap() {
                sum_now += norm3(s.labels.ds_now);
                sum_plus2 += norm3(s.labels.ds_plus2);
                n += 1;
            }
        }
        assert_eq!(n, 80);
        assert!(
            sum_plus2 / n as f64 >= sum_now / n as f64,
            "mean |ds_plus2| {} < mean |ds_now| {}",
            sum_plus2 / n as f64,
            sum_now / n as f64
        );
    }

    #[test]
    fn manifest_rejects_split_violations() {
        let dir = tempdir().unwrap();
        build_dataset(&mini_config(), dir.path()).unwrap();
        let path = dir.path().join("manifest.txt");
        let text = fs::read_to_string(&path).unwrap();

        let dup = text.replace("split.val=", "split.train=");
        // duplicate key detected first
        assert!(DatasetManifest::parse(&path, &dup).is_err());

        let missing = text
            .lines()
            .map(|l| {
                if let Some(rest) = l.strip_prefix("split.val=") {
                    format!("split.val={}", rest.split(',').skip(1).collect::<Vec<_>>().join(","))
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        let err = DatasetManifest::parse(&path, &missing).unwrap_err();
        assert!(err.to_string().contains("splits"), "{err}");
    }

    #[test]
    fn bad_config_is_rejected() {
        let mut cfg = mini_config();
        cfg.val_rois = 2;
        cfg.test_rois = 2;
        assert!(cfg.validate().is_err());

        let mut cfg = mini_config();
        cfg.sequence_length = 4;
        assert!(cfg.validate().is_err());
    }
}
