//! Network layers with explicit forward and backward passes.
//!
//! Parameters live in a flat [`ParamStore`]; layers reference them by
//! [`ParamId`]. Forward composition is recorded on a [`tape::Tape`], whose
//! reverse walk produces exact gradients for every parameter and input.

pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod gru;
pub mod pool;
pub mod tape;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Convolution geometry: channel counts plus per-axis kernel extents,
/// strides, and zero padding. Three axis entries describe a 3D convolution
/// over (depth, height, width); four describe a 4D one over
/// (time, depth, height, width).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: Vec<usize>,
    pub stride: Vec<usize>,
    pub padding: Vec<usize>,
}

impl ConvSpec {
    /// Unit stride, zero padding.
    pub fn new(in_channels: usize, out_channels: usize, kernel: &[usize]) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: kernel.to_vec(),
            stride: vec![1; kernel.len()],
            padding: vec![0; kernel.len()],
        }
    }

    /// Unit stride with padding `(k - 1) / 2` per axis, preserving extents
    /// for odd kernels.
    pub fn same(in_channels: usize, out_channels: usize, kernel: &[usize]) -> Self {
        let padding = kernel.iter().map(|&k| (k - 1) / 2).collect();
        ConvSpec {
            in_channels,
            out_channels,
            kernel: kernel.to_vec(),
            stride: vec![1; kernel.len()],
            padding,
        }
    }

    pub fn with_stride(mut self, stride: &[usize]) -> Self {
        self.stride = stride.to_vec();
        self
    }

    pub fn with_padding(mut self, padding: &[usize]) -> Self {
        self.padding = padding.to_vec();
        self
    }

    pub fn axes(&self) -> usize {
        self.kernel.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes() != 3 && self.axes() != 4 {
            return Err(Error::InvalidShape(format!(
                "convolution kernel must cover 3 or 4 axes, got {}",
                self.axes()
            )));
        }
        if self.stride.len() != self.axes() || self.padding.len() != self.axes() {
            return Err(Error::InvalidShape(
                "stride and padding must match kernel axis count".into(),
            ));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::InvalidShape("channel counts must be >= 1".into()));
        }
        if self.kernel.iter().any(|&k| k == 0) || self.stride.iter().any(|&s| s == 0) {
            return Err(Error::InvalidShape(
                "kernel extents and strides must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Output length of one axis: `(len + 2 pad - kernel) / stride + 1`.
    pub fn out_extent(len: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
        let padded = len + 2 * padding;
        if padded < kernel {
            return Err(Error::InvalidShape(format!(
                "kernel {kernel} exceeds padded axis length {padded}"
            )));
        }
        Ok((padded - kernel) / stride + 1)
    }

    /// Per-axis output extents for the given input extents.
    pub fn out_extents(&self, input: &[usize]) -> Result<Vec<usize>> {
        input
            .iter()
            .zip(&self.kernel)
            .zip(&self.stride)
            .zip(&self.padding)
            .map(|(((&l, &k), &s), &p)| Self::out_extent(l, k, s, p))
            .collect()
    }

    /// `[out_channels, in_channels, kernel...]`
    pub fn weight_shape(&self) -> Vec<usize> {
        let mut shape = vec![self.out_channels, self.in_channels];
        shape.extend_from_slice(&self.kernel);
        shape
    }

    pub fn bias_shape(&self) -> Vec<usize> {
        vec![self.out_channels]
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel.iter().product::<usize>()
    }
}

/// Elementwise nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply_scalar(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    pub fn apply(self, input: &Tensor) -> Tensor {
        input.map(|x| self.apply_scalar(x))
    }

    /// Derivative at one element given the pre-activation `x` and the
    /// already-computed output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Handle into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Flat registry of named parameter tensors and their gradient accumulators.
/// Gradients always share the shape of their parameter; `zero_grad` resets
/// every accumulator to exactly zero.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let id = ParamId(self.values.len());
        self.grads.push(Tensor::zeros(value.shape()));
        self.values.push(value);
        self.names.push(name.into());
        id
    }

    /// He-style fan-in scaled uniform init: `U(-sqrt(6/fan_in), +sqrt(6/fan_in))`.
    pub fn add_he_uniform(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let bound = (6.0 / fan_in as f64).sqrt();
        let value = Tensor::uniform_from(shape, -bound, bound, rng).expect("valid shape");
        self.add(name, value)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total scalar parameter count.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.data_mut().fill(0.0);
        }
    }

    /// Fresh zeroed gradient buffers, one per parameter, for workers that
    /// accumulate outside the store.
    pub fn grad_buffers(&self) -> Vec<Tensor> {
        self.values.iter().map(|v| Tensor::zeros(v.shape())).collect()
    }

    /// Sum external buffers into the store accumulators, in parameter order.
    pub fn accumulate_buffers(&mut self, buffers: &[Tensor]) -> Result<()> {
        if buffers.len() != self.grads.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} gradient buffers", self.grads.len()),
                got: format!("{}", buffers.len()),
            });
        }
        for (g, b) in self.grads.iter_mut().zip(buffers) {
            if g.shape() != b.shape() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{:?}", g.shape()),
                    got: format!("{:?}", b.shape()),
                });
            }
            for (gv, bv) in g.data_mut().iter_mut().zip(b.data()) {
                *gv += bv;
            }
        }
        Ok(())
    }

    pub(crate) fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub(crate) fn split_values_grads(&mut self) -> (&[Tensor], &mut [Tensor]) {
        (&self.values, &mut self.grads)
    }
}
