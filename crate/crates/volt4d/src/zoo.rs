//! The five network architectures for volumetric motion estimation and
//! forecasting, all sharing the same building blocks: a two-conv feature
//! path, a densenet backbone (3D or 4D), global average pooling, and a
//! 9-output regression head predicting three displacement vectors.
//!
//! - `TwoPathCnn3d`: two shared-weight 3D paths on the first and last
//!   volume, fused by channel concatenation.
//! - `NPathCnn3d`: one shared-weight 3D path per input volume, fused by
//!   channel concatenation.
//! - `Cnn4d`: three 4D convolutions over the raw sequence, then a 4D
//!   densenet.
//! - `NPathCnn4d`: one shared-weight 3D path per volume, outputs stacked on
//!   a fresh time axis, then a 4D densenet.
//! - `GruCnn3d`: a convolutional GRU consumes the volumes sequentially; the
//!   final hidden state feeds the 3D densenet.

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::gru::{conv_gru_tape_step, GruParams};
use crate::layers::tape::{NodeId, Tape};
use crate::layers::{Activation, ConvSpec, ParamId, ParamStore};
use crate::rng::{self, Domain};
use crate::tensor::Tensor;

/// Spatial kernel extent used by every convolution in the zoo.
const SPATIAL_KERNEL: usize = 3;

/// Architecture identifiers, in the fixed reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchId {
    TwoPathCnn3d,
    NPathCnn3d,
    Cnn4d,
    NPathCnn4d,
    GruCnn3d,
}

impl ArchId {
    pub const ALL: [ArchId; 5] = [
        ArchId::TwoPathCnn3d,
        ArchId::NPathCnn3d,
        ArchId::Cnn4d,
        ArchId::NPathCnn4d,
        ArchId::GruCnn3d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArchId::TwoPathCnn3d => "2-path-cnn3d",
            ArchId::NPathCnn3d => "n-path-cnn3d",
            ArchId::Cnn4d => "cnn4d",
            ArchId::NPathCnn4d => "n-path-cnn4d",
            ArchId::GruCnn3d => "gru-cnn3d",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|a| a.name()).collect();
                Error::Config(format!(
                    "unknown architecture {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

impl std::fmt::Display for ArchId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Structural hyperparameters. The paper-scale geometry (32-voxel volumes)
/// and the desk-scale default (12) differ only in `volume_size`; every
/// structural property is preserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    /// Input sequence length T.
    pub sequence_length: usize,
    /// Cubic volume edge length in voxels.
    pub volume_size: usize,
    /// Channel widths of the per-volume feature path, one conv per entry,
    /// each followed by spatial average pooling where the extent allows.
    pub path_channels: Vec<usize>,
    /// Channels added by each densenet layer.
    pub growth_rate: usize,
    pub blocks: usize,
    pub layers_per_block: usize,
    /// Temporal kernel extent of 4D convolutions (odd, for extent-preserving
    /// padding).
    pub temporal_kernel: usize,
    /// Widths of the three leading 4D convolutions of `Cnn4d`.
    pub cnn4d_channels: Vec<usize>,
    /// Hidden channels of the convolutional GRU.
    pub gru_channels: usize,
    /// Always 9: three 3-vectors (current motion plus two forecasts).
    pub head_outputs: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::desk()
    }
}

impl ModelConfig {
    /// Desk-scale default: tractable on a single CPU core while keeping the
    /// full structure (T=5, 12-voxel volumes).
    pub fn desk() -> Self {
        ModelConfig {
            sequence_length: 5,
            volume_size: 12,
            path_channels: vec![8, 16],
            growth_rate: 8,
            blocks: 3,
            layers_per_block: 3,
            temporal_kernel: 3,
            cnn4d_channels: vec![8, 8, 16],
            gru_channels: 8,
            head_outputs: 9,
        }
    }

    /// Gradient-check scale: small enough to perturb every parameter.
    pub fn tiny() -> Self {
        ModelConfig {
            sequence_length: 3,
            volume_size: 6,
            path_channels: vec![2, 3],
            growth_rate: 2,
            blocks: 2,
            layers_per_block: 2,
            temporal_kernel: 3,
            cnn4d_channels: vec![2, 2, 3],
            gru_channels: 2,
            head_outputs: 9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.head_outputs != 9 {
            return Err(Error::Build(format!(
                "head_outputs must be 9 (three 3-vectors), got {}",
                self.head_outputs
            )));
        }
        if self.sequence_length < 2 {
            return Err(Error::Build(
                "sequence_length must be >= 2 (first and last volume must differ)".into(),
            ));
        }
        if self.volume_size < SPATIAL_KERNEL {
            return Err(Error::Build(format!(
                "volume_size {} is smaller than the {SPATIAL_KERNEL}-voxel kernel",
                self.volume_size
            )));
        }
        if self.path_channels.is_empty() || self.path_channels.contains(&0) {
            return Err(Error::Build("path_channels must be nonempty and positive".into()));
        }
        if self.cnn4d_channels.is_empty() || self.cnn4d_channels.contains(&0) {
            return Err(Error::Build("cnn4d_channels must be nonempty and positive".into()));
        }
        if self.growth_rate == 0 || self.blocks == 0 || self.layers_per_block == 0 {
            return Err(Error::Build(
                "growth_rate, blocks, and layers_per_block must be >= 1".into(),
            ));
        }
        if self.gru_channels == 0 {
            return Err(Error::Build("gru_channels must be >= 1".into()));
        }
        if self.temporal_kernel % 2 == 0 {
            return Err(Error::Build(format!(
                "temporal_kernel must be odd for extent-preserving padding, got {}",
                self.temporal_kernel
            )));
        }
        if self.temporal_kernel > 2 * self.sequence_length - 1 {
            return Err(Error::Build(format!(
                "temporal_kernel {} exceeds the padded time axis for T={}",
                self.temporal_kernel, self.sequence_length
            )));
        }
        Ok(())
    }
}

/// Predicted displacements in mm, relative to the ROI position at t0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionPrediction {
    pub ds_now: [f64; 3],
    pub ds_plus1: [f64; 3],
    pub ds_plus2: [f64; 3],
}

impl MotionPrediction {
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != 9 {
            return Err(Error::ShapeMismatch {
                expected: "9 output components".into(),
                got: format!("{}", values.len()),
            });
        }
        Ok(MotionPrediction {
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

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

/// Pooling rule used throughout: halve an extent whenever it is even,
/// otherwise leave it alone.
fn pool_window(extent: usize) -> usize {
    if extent % 2 == 0 {
        2
    } else {
        1
    }
}

#[derive(Debug, Clone)]
struct ConvParams {
    w: ParamId,
    b: ParamId,
    spec: ConvSpec,
}

/// The shared per-volume feature path: conv, relu, spatial pool per stage.
#[derive(Debug, Clone)]
struct PathStage {
    convs: Vec<ConvParams>,
    pools: Vec<usize>,
    out_channels: usize,
    out_size: usize,
}

fn build_path(
    store: &mut ParamStore,
    cfg: &ModelConfig,
    rng: &mut impl Rng,
) -> PathStage {
    let mut convs = Vec::new();
    let mut pools = Vec::new();
    let mut channels = 1;
    let mut size = cfg.volume_size;
    for (i, &width) in cfg.path_channels.iter().enumerate() {
        let spec = ConvSpec::same(channels, width, &[SPATIAL_KERNEL; 3]);
        let w = store.add_he_uniform(
            format!("path.conv{i}.w"),
            &spec.weight_shape(),
            spec.fan_in(),
            rng,
        );
        let b = store.add_zeros(format!("path.conv{i}.b"), &spec.bias_shape());
        convs.push(ConvParams { w, b, spec });
        let win = pool_window(size);
        pools.push(win);
        size /= win;
        channels = width;
    }
    PathStage {
        convs,
        pools,
        out_channels: channels,
        out_size: size,
    }
}

fn path_forward(
    tape: &mut Tape,
    store: &ParamStore,
    stage: &PathStage,
    volume: NodeId,
) -> Result<NodeId> {
    let mut node = volume;
    for (conv, &win) in stage.convs.iter().zip(&stage.pools) {
        node = tape.conv3d(store, node, conv.w, Some(conv.b), &conv.spec)?;
        node = tape.activation(node, Activation::Relu)?;
        if win > 1 {
            node = tape.avg_pool(node, &[1, win, win, win])?;
        }
    }
    Ok(node)
}

/// Densenet backbone: `blocks` blocks of `layers_per_block` layers; each
/// layer applies relu then a growth-rate conv to the running concatenation.
/// Blocks are joined by spatial average pooling where extents allow.
#[derive(Debug, Clone)]
struct Densenet {
    layers: Vec<ConvParams>,
    /// Pool window after each block except the last.
    block_pools: Vec<usize>,
    /// 3 for (C,D,H,W) features, 4 for (T,C,D,H,W).
    conv_axes: usize,
    out_channels: usize,
}

fn build_densenet(
    store: &mut ParamStore,
    prefix: &str,
    conv_axes: usize,
    in_channels: usize,
    in_size: usize,
    cfg: &ModelConfig,
    rng: &mut impl Rng,
) -> Densenet {
    let mut layers = Vec::new();
    let mut block_pools = Vec::new();
    let mut channels = in_channels;
    let mut size = in_size;
    for b in 0..cfg.blocks {
        for l in 0..cfg.layers_per_block {
            let kernel: Vec<usize> = if conv_axes == 4 {
                vec![cfg.temporal_kernel, SPATIAL_KERNEL, SPATIAL_KERNEL, SPATIAL_KERNEL]
            } else {
                vec![SPATIAL_KERNEL; 3]
            };
            let spec = ConvSpec::same(channels, cfg.growth_rate, &kernel);
            let w = store.add_he_uniform(
                format!("{prefix}.b{b}.l{l}.w"),
                &spec.weight_shape(),
                spec.fan_in(),
                rng,
            );
            let bias = store.add_zeros(format!("{prefix}.b{b}.l{l}.b"), &spec.bias_shape());
            layers.push(ConvParams { w, b: bias, spec });
            channels += cfg.growth_rate;
        }
        if b + 1 < cfg.blocks {
            let win = pool_window(size);
            block_pools.push(win);
            size /= win;
        }
    }
    Densenet {
        layers,
        block_pools,
        conv_axes,
        out_channels: channels,
    }
}

fn densenet_forward(
    tape: &mut Tape,
    store: &ParamStore,
    net: &Densenet,
    cfg: &ModelConfig,
    input: NodeId,
) -> Result<NodeId> {
    let channel_axis = if net.conv_axes == 4 { 1 } else { 0 };
    let mut state = input;
    for (i, layer) in net.layers.iter().enumerate() {
        let pre = tape.activation(state, Activation::Relu)?;
        let grown = if net.conv_axes == 4 {
            tape.conv4d(store, pre, layer.w, Some(layer.b), &layer.spec)?
        } else {
            tape.conv3d(store, pre, layer.w, Some(layer.b), &layer.spec)?
        };
        state = tape.concat(&[state, grown], channel_axis)?;
        let block_end = (i + 1) % cfg.layers_per_block == 0;
        if block_end {
            let block_idx = (i + 1) / cfg.layers_per_block - 1;
            if let Some(&win) = net.block_pools.get(block_idx) {
                if win > 1 {
                    let window = if net.conv_axes == 4 {
                        vec![1, 1, win, win, win]
                    } else {
                        vec![1, win, win, win]
                    };
                    state = tape.avg_pool(state, &window)?;
                }
            }
        }
    }
    Ok(state)
}

#[derive(Debug, Clone)]
struct Head {
    w: ParamId,
    b: ParamId,
}

fn build_head(
    store: &mut ParamStore,
    in_features: usize,
    cfg: &ModelConfig,
    rng: &mut impl Rng,
) -> Head {
    let w = store.add_he_uniform(
        "head.w",
        &[cfg.head_outputs, in_features],
        in_features,
        rng,
    );
    let b = store.add_zeros("head.b", &[cfg.head_outputs]);
    Head { w, b }
}

/// Global average pooling over every non-channel axis, then the regression
/// head.
fn head_forward(
    tape: &mut Tape,
    store: &ParamStore,
    head: &Head,
    conv_axes: usize,
    features: NodeId,
) -> Result<NodeId> {
    let axes: Vec<usize> = if conv_axes == 4 {
        vec![0, 2, 3, 4]
    } else {
        vec![1, 2, 3]
    };
    let pooled = tape.reduce_mean(features, &axes)?;
    tape.dense(store, pooled, head.w, head.b)
}

#[derive(Debug, Clone)]
enum Wiring {
    /// TwoPathCnn3d and NPathCnn3d: shared path per selected volume,
    /// channel-axis fusion, 3D densenet.
    MultiPath3d {
        stage: PathStage,
        dense: Densenet,
        head: Head,
        first_and_last_only: bool,
    },
    /// Cnn4d: leading 4D convolutions (spatial pooling after each of the
    /// first two), 4D densenet.
    Lead4d {
        convs: Vec<ConvParams>,
        pools: Vec<usize>,
        dense: Densenet,
        head: Head,
    },
    /// NPathCnn4d: shared path per volume, outputs stacked on a fresh time
    /// axis, 4D densenet.
    MultiPath4d {
        stage: PathStage,
        dense: Densenet,
        head: Head,
    },
    /// GruCnn3d: recurrent pass over the sequence, final hidden state into
    /// the 3D densenet.
    Gru {
        gru: GruParams,
        dense: Densenet,
        head: Head,
    },
}

/// A built architecture: parameter store plus the wiring that replays it on
/// a tape. Immutable during inference; training mutates the store.
#[derive(Debug, Clone)]
pub struct Model {
    pub arch: ArchId,
    pub config: ModelConfig,
    pub store: ParamStore,
    pub seed: u64,
    wiring: Wiring,
}

/// Construct and seed-initialize an architecture. The same seed and config
/// always produce bitwise-identical parameters. Multi-path variants register
/// one shared path parameter set used by every path.
pub fn build_model(arch: ArchId, cfg: &ModelConfig, seed: u64) -> Result<Model> {
    cfg.validate()?;
    let mut store = ParamStore::new();
    let mut r = rng::stream(seed, Domain::ParamInit, 0);

    let wiring = match arch {
        ArchId::TwoPathCnn3d | ArchId::NPathCnn3d => {
            let stage = build_path(&mut store, cfg, &mut r);
            let paths = if arch == ArchId::TwoPathCnn3d {
                2
            } else {
                cfg.sequence_length
            };
            let dense = build_densenet(
                &mut store,
                "dense",
                3,
                stage.out_channels * paths,
                stage.out_size,
                cfg,
                &mut r,
            );
            let head = build_head(&mut store, dense.out_channels, cfg, &mut r);
            Wiring::MultiPath3d {
                stage,
                dense,
                head,
                first_and_last_only: arch == ArchId::TwoPathCnn3d,
            }
        }
        ArchId::Cnn4d => {
            let mut convs = Vec::new();
            let mut pools = Vec::new();
            let mut channels = 1;
            let mut size = cfg.volume_size;
            for (i, &width) in cfg.cnn4d_channels.iter().enumerate() {
                let spec = ConvSpec::same(
                    channels,
                    width,
                    &[cfg.temporal_kernel, SPATIAL_KERNEL, SPATIAL_KERNEL, SPATIAL_KERNEL],
                );
                let w = store.add_he_uniform(
                    format!("lead.conv{i}.w"),
                    &spec.weight_shape(),
                    spec.fan_in(),
                    &mut r,
                );
                let b = store.add_zeros(format!("lead.conv{i}.b"), &spec.bias_shape());
                convs.push(ConvParams { w, b, spec });
                channels = width;
                if i + 1 < cfg.cnn4d_channels.len() {
                    let win = pool_window(size);
                    pools.push(win);
                    size /= win;
                } else {
                    pools.push(1);
                }
            }
            let dense = build_densenet(&mut store, "dense", 4, channels, size, cfg, &mut r);
            let head = build_head(&mut store, dense.out_channels, cfg, &mut r);
            Wiring::Lead4d {
                convs,
                pools,
                dense,
                head,
            }
        }
        ArchId::NPathCnn4d => {
            let stage = build_path(&mut store, cfg, &mut r);
            let dense = build_densenet(
                &mut store,
                "dense",
                4,
                stage.out_channels,
                stage.out_size,
                cfg,
                &mut r,
            );
            let head = build_head(&mut store, dense.out_channels, cfg, &mut r);
            Wiring::MultiPath4d { stage, dense, head }
        }
        ArchId::GruCnn3d => {
            let gru = GruParams::init(
                &mut store,
                "gru",
                1,
                cfg.gru_channels,
                [SPATIAL_KERNEL; 3],
                &mut r,
            );
            let dense = build_densenet(
                &mut store,
                "dense",
                3,
                cfg.gru_channels,
                cfg.volume_size,
                cfg,
                &mut r,
            );
            let head = build_head(&mut store, dense.out_channels, cfg, &mut r);
            Wiring::Gru { gru, dense, head }
        }
    };

    Ok(Model {
        arch,
        config: cfg.clone(),
        store,
        seed,
        wiring,
    })
}

impl Model {
    fn check_sequence(&self, seq: &Tensor) -> Result<()> {
        let s = self.config.volume_size;
        let expect = [self.config.sequence_length, 1, s, s, s];
        if seq.shape() != expect {
            return Err(Error::ShapeMismatch {
                expected: format!("{expect:?}"),
                got: format!("{:?}", seq.shape()),
            });
        }
        Ok(())
    }

    /// Record the full forward pass for a (T,1,D,H,W) sequence; returns the
    /// 9-component output node.
    pub fn forward_tape(&self, tape: &mut Tape, seq: &Tensor) -> Result<NodeId> {
        self.check_sequence(seq)?;
        let t_len = self.config.sequence_length;
        match &self.wiring {
            Wiring::MultiPath3d {
                stage,
                dense,
                head,
                first_and_last_only,
            } => {
                let steps: Vec<usize> = if *first_and_last_only {
                    vec![0, t_len - 1]
                } else {
                    (0..t_len).collect()
                };
                let mut outs = Vec::with_capacity(steps.len());
                for t in steps {
                    let vol = tape.leaf(seq.index_axis(0, t)?);
                    outs.push(path_forward(tape, &self.store, stage, vol)?);
                }
                let fused = tape.concat(&outs, 0)?;
                let feats = densenet_forward(tape, &self.store, dense, &self.config, fused)?;
                head_forward(tape, &self.store, head, 3, feats)
            }
            Wiring::Lead4d {
                convs,
                pools,
                dense,
                head,
            } => {
                let mut node = tape.leaf(seq.clone());
                for (conv, &win) in convs.iter().zip(pools) {
                    node = tape.conv4d(&self.store, node, conv.w, Some(conv.b), &conv.spec)?;
                    node = tape.activation(node, Activation::Relu)?;
                    if win > 1 {
                        node = tape.avg_pool(node, &[1, 1, win, win, win])?;
                    }
                }
                let feats = densenet_forward(tape, &self.store, dense, &self.config, node)?;
                head_forward(tape, &self.store, head, 4, feats)
            }
            Wiring::MultiPath4d { stage, dense, head } => {
                let mut frames = Vec::with_capacity(t_len);
                let (c, s) = (stage.out_channels, stage.out_size);
                for t in 0..t_len {
                    let vol = tape.leaf(seq.index_axis(0, t)?);
                    let out = path_forward(tape, &self.store, stage, vol)?;
                    frames.push(tape.reshape(out, &[1, c, s, s, s])?);
                }
                let stacked = tape.concat(&frames, 0)?;
                let feats = densenet_forward(tape, &self.store, dense, &self.config, stacked)?;
                head_forward(tape, &self.store, head, 4, feats)
            }
            Wiring::Gru { gru, dense, head } => {
                let s = self.config.volume_size;
                let mut hidden =
                    tape.leaf(Tensor::zeros(&[self.config.gru_channels, s, s, s]));
                for t in 0..t_len {
                    let vol = tape.leaf(seq.index_axis(0, t)?);
                    hidden = conv_gru_tape_step(tape, &self.store, vol, hidden, gru)?;
                }
                let feats = densenet_forward(tape, &self.store, dense, &self.config, hidden)?;
                head_forward(tape, &self.store, head, 3, feats)
            }
        }
    }

    /// Inference entry point: forward pass, split into three 3-vectors.
    pub fn forward(&self, seq: &Tensor) -> Result<MotionPrediction> {
        let mut tape = Tape::new();
        let out = self.forward_tape(&mut tape, seq)?;
        let pred = MotionPrediction::from_flat(tape.value(out).data())?;
        debug_assert!(pred.is_finite());
        Ok(pred)
    }

    /// Total scalar parameter count; shared paths are counted once.
    pub fn count_parameters(&self) -> usize {
        self.store.scalar_count()
    }

    /// Feature-path output for a single (1,D,H,W) volume, for architectures
    /// that have a path stage. Exposed for weight-sharing diagnostics.
    pub fn path_output(&self, volume: &Tensor) -> Result<Option<Tensor>> {
        let stage = match &self.wiring {
            Wiring::MultiPath3d { stage, .. } | Wiring::MultiPath4d { stage, .. } => stage,
            _ => return Ok(None),
        };
        let mut tape = Tape::new();
        let vol = tape.leaf(volume.clone());
        let out = path_forward(&mut tape, &self.store, stage, vol)?;
        Ok(Some(tape.value(out).clone()))
    }
}
