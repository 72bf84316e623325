//! Define-by-run gradient tape.
//!
//! Forward builders compute values eagerly and record one node per
//! operation; nodes only ever reference earlier nodes, so a single reverse
//! walk from the loss node yields exact reverse-mode gradients. Parameters
//! are referenced by [`ParamId`] and their gradients accumulate into the
//! owning [`ParamStore`] (or into detached buffers for concurrent workers).

use crate::error::{Error, Result};
use crate::layers::conv::{
    conv3d_backward, conv3d_forward, conv4d_backward, conv4d_forward, Conv4dStrategy,
};
use crate::layers::dense::{dense_backward, dense_forward};
use crate::layers::pool::{avg_pool_backward, avg_pool_forward};
use crate::layers::{Activation, ConvSpec, ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to a recorded value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv3d {
        input: NodeId,
        weight: ParamId,
        bias: Option<ParamId>,
        spec: ConvSpec,
    },
    Conv4d {
        input: NodeId,
        weight: ParamId,
        bias: Option<ParamId>,
        spec: ConvSpec,
    },
    AvgPool {
        input: NodeId,
        window: Vec<usize>,
    },
    Dense {
        input: NodeId,
        weight: ParamId,
        bias: ParamId,
    },
    Act {
        input: NodeId,
        kind: Activation,
    },
    Concat {
        inputs: Vec<NodeId>,
        axis: usize,
    },
    ReduceMean {
        input: NodeId,
        axes: Vec<usize>,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    OneMinus {
        input: NodeId,
    },
    Reshape {
        input: NodeId,
        from: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded forward graph.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn add_into(slot: &mut Option<Tensor>, delta: Tensor) {
    match slot {
        Some(t) => {
            for (a, b) in t.data_mut().iter_mut().zip(delta.data()) {
                *a += b;
            }
        }
        None => *slot = Some(delta),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.0 >= self.nodes.len() {
            return Err(Error::Build(format!(
                "node {} not on this tape ({} recorded)",
                id.0,
                self.nodes.len()
            )));
        }
        Ok(())
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn conv3d(
        &mut self,
        store: &ParamStore,
        input: NodeId,
        weight: ParamId,
        bias: Option<ParamId>,
        spec: &ConvSpec,
    ) -> Result<NodeId> {
        self.check(input)?;
        let value = conv3d_forward(
            self.value(input),
            store.value(weight),
            bias.map(|b| store.value(b)),
            spec,
        )?;
        Ok(self.push(
            value,
            Op::Conv3d {
                input,
                weight,
                bias,
                spec: spec.clone(),
            },
        ))
    }

    /// Recorded 4D convolution; runs the temporal-decomposition strategy,
    /// which is equivalent to the direct sum.
    pub fn conv4d(
        &mut self,
        store: &ParamStore,
        input: NodeId,
        weight: ParamId,
        bias: Option<ParamId>,
        spec: &ConvSpec,
    ) -> Result<NodeId> {
        self.check(input)?;
        let value = conv4d_forward(
            self.value(input),
            store.value(weight),
            bias.map(|b| store.value(b)),
            spec,
            Conv4dStrategy::TemporalDecomposition,
        )?;
        Ok(self.push(
            value,
            Op::Conv4d {
                input,
                weight,
                bias,
                spec: spec.clone(),
            },
        ))
    }

    pub fn avg_pool(&mut self, input: NodeId, window: &[usize]) -> Result<NodeId> {
        self.check(input)?;
        let value = avg_pool_forward(self.value(input), window)?;
        Ok(self.push(
            value,
            Op::AvgPool {
                input,
                window: window.to_vec(),
            },
        ))
    }

    pub fn dense(
        &mut self,
        store: &ParamStore,
        input: NodeId,
        weight: ParamId,
        bias: ParamId,
    ) -> Result<NodeId> {
        self.check(input)?;
        let value = dense_forward(self.value(input), store.value(weight), store.value(bias))?;
        Ok(self.push(
            value,
            Op::Dense {
                input,
                weight,
                bias,
            },
        ))
    }

    pub fn activation(&mut self, input: NodeId, kind: Activation) -> Result<NodeId> {
        self.check(input)?;
        let value = kind.apply(self.value(input));
        Ok(self.push(value, Op::Act { input, kind }))
    }

    pub fn concat(&mut self, inputs: &[NodeId], axis: usize) -> Result<NodeId> {
        for &id in inputs {
            self.check(id)?;
        }
        let tensors: Vec<&Tensor> = inputs.iter().map(|&id| self.value(id)).collect();
        let value = Tensor::concat(&tensors, axis)?;
        Ok(self.push(
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
        ))
    }

    pub fn reduce_mean(&mut self, input: NodeId, axes: &[usize]) -> Result<NodeId> {
        self.check(input)?;
        let value = self.value(input).reduce_mean(axes)?;
        Ok(self.push(
            value,
            Op::ReduceMean {
                input,
                axes: axes.to_vec(),
            },
        ))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add { a, b }))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check(a)?;
        self.check(b)?;
        let value = self.value(a).mul(self.value(b))?;
        Ok(self.push(value, Op::Mul { a, b }))
    }

    pub fn one_minus(&mut self, input: NodeId) -> Result<NodeId> {
        self.check(input)?;
        let value = self.value(input).map(|v| 1.0 - v);
        Ok(self.push(value, Op::OneMinus { input }))
    }

    pub fn reshape(&mut self, input: NodeId, shape: &[usize]) -> Result<NodeId> {
        self.check(input)?;
        let from = self.value(input).shape().to_vec();
        let value = self.value(input).reshape(shape)?;
        Ok(self.push(value, Op::Reshape { input, from }))
    }

    /// Reverse walk from `out`, accumulating parameter gradients into the
    /// store. Returns the per-node gradients so callers can read gradients
    /// of leaves (inputs) as well.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        out: NodeId,
        seed: &Tensor,
    ) -> Result<Vec<Option<Tensor>>> {
        let (values, grads) = store.split_values_grads();
        self.backward_into(values, grads, out, seed)
    }

    /// Like [`Tape::backward`] but accumulating into detached gradient
    /// buffers (one per parameter, in store order); used by parallel workers.
    pub fn backward_into(
        &self,
        param_values: &[Tensor],
        param_grads: &mut [Tensor],
        out: NodeId,
        seed: &Tensor,
    ) -> Result<Vec<Option<Tensor>>> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyTape);
        }
        self.check(out)?;
        if seed.shape() != self.value(out).shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.value(out).shape()),
                got: format!("{:?}", seed.shape()),
            });
        }
        let mut node_grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        node_grads[out.0] = Some(seed.clone());

        for i in (0..=out.0).rev() {
            let Some(grad) = node_grads[i].take() else {
                continue;
            };
            match &self.nodes[i].op {
                Op::Leaf => {
                    node_grads[i] = Some(grad);
                    continue;
                }
                Op::Conv3d {
                    input,
                    weight,
                    bias,
                    spec,
                } => {
                    let g = conv3d_backward(
                        self.value(*input),
                        &param_values[weight.0],
                        spec,
                        &grad,
                    )?;
                    add_into(&mut node_grads[input.0], g.input);
                    accumulate_param(&mut param_grads[weight.0], &g.weight);
                    if let Some(b) = bias {
                        accumulate_param(&mut param_grads[b.0], &g.bias);
                    }
                }
                Op::Conv4d {
                    input,
                    weight,
                    bias,
                    spec,
                } => {
                    let g = conv4d_backward(
                        self.value(*input),
                        &param_values[weight.0],
                        spec,
                        &grad,
                    )?;
                    add_into(&mut node_grads[input.0], g.input);
                    accumulate_param(&mut param_grads[weight.0], &g.weight);
                    if let Some(b) = bias {
                        accumulate_param(&mut param_grads[b.0], &g.bias);
                    }
                }
                Op::AvgPool { input, window } => {
                    let gi =
                        avg_pool_backward(self.value(*input).shape(), window, &grad)?;
                    add_into(&mut node_grads[input.0], gi);
                }
                Op::Dense {
                    input,
                    weight,
                    bias,
                } => {
                    let g = dense_backward(self.value(*input), &param_values[weight.0], &grad)?;
                    add_into(&mut node_grads[input.0], g.input);
                    accumulate_param(&mut param_grads[weight.0], &g.weight);
                    accumulate_param(&mut param_grads[bias.0], &g.bias);
                }
                Op::Act { input, kind } => {
                    let x = self.value(*input);
                    let y = &self.nodes[i].value;
                    let mut gi = grad.clone();
                    for ((g, &xv), &yv) in
                        gi.data_mut().iter_mut().zip(x.data()).zip(y.data())
                    {
                        *g *= kind.derivative(xv, yv);
                    }
                    add_into(&mut node_grads[input.0], gi);
                }
                Op::Concat { inputs, axis } => {
                    let mut offset = 0;
                    for &src in inputs {
                        let extent = self.value(src).shape()[*axis];
                        let piece = grad.slice_axis(*axis, offset, extent)?;
                        add_into(&mut node_grads[src.0], piece);
                        offset += extent;
                    }
                }
                Op::ReduceMean { input, axes } => {
                    let gi = spread_mean_grad(self.value(*input).shape(), axes, &grad);
                    add_into(&mut node_grads[input.0], gi);
                }
                Op::Add { a, b } => {
                    add_into(&mut node_grads[b.0], grad.clone());
                    add_into(&mut node_grads[a.0], grad);
                }
                Op::Mul { a, b } => {
                    let ga = grad.mul(self.value(*b))?;
                    let gb = grad.mul(self.value(*a))?;
                    add_into(&mut node_grads[a.0], ga);
                    add_into(&mut node_grads[b.0], gb);
                }
                Op::OneMinus { input } => {
                    add_into(&mut node_grads[input.0], grad.scale(-1.0));
                }
                Op::Reshape { input, from } => {
                    add_into(&mut node_grads[input.0], grad.reshape(from)?);
                }
            }
        }
        Ok(node_grads)
    }
}

fn accumulate_param(acc: &mut Tensor, delta: &Tensor) {
    debug_assert_eq!(acc.shape(), delta.shape());
    for (a, d) in acc.data_mut().iter_mut().zip(delta.data()) {
        *a += d;
    }
}

/// Adjoint of reduce_mean: every input element receives the gradient of its
/// output cell divided by the number of elements folded into that cell.
fn spread_mean_grad(in_shape: &[usize], axes: &[usize], grad_out: &Tensor) -> Tensor {
    let rank = in_shape.len();
    let mut reduced = vec![false; rank];
    for &ax in axes {
        reduced[ax] = true;
    }
    let slab: usize = (0..rank)
        .filter(|ax| reduced[*ax])
        .map(|ax| in_shape[ax])
        .product();
    let inv = 1.0 / slab as f64;
    let kept: Vec<usize> = (0..rank).filter(|ax| !reduced[*ax]).collect();

    let mut out_strides = vec![0usize; rank];
    let mut stride = 1;
    for &ax in kept.iter().rev() {
        out_strides[ax] = stride;
        stride *= in_shape[ax];
    }

    let mut gi = Tensor::zeros(in_shape);
    let g = grad_out.data();
    let dst = gi.data_mut();
    let mut idx = vec![0usize; rank];
    for v in dst.iter_mut() {
        let mut out_lin = 0;
        for ax in 0..rank {
            out_lin += idx[ax] * out_strides[ax];
        }
        *v = g[out_lin] * inv;
        let mut carry = true;
        for ax in (0..rank).rev() {
            if carry {
                idx[ax] += 1;
                if idx[ax] == in_shape[ax] {
                    idx[ax] = 0;
                } else {
                    carry = false;
                }
            }
        }
    }
    gi
}
