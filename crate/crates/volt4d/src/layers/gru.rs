//! Convolutional GRU cell over volumetric feature maps.
//!
//! Gates are computed with 3D convolutions (unit stride, extent-preserving
//! padding):
//!
//! ```text
//! z  = sigmoid(conv(x; W_z) + conv(h; U_z))
//! r  = sigmoid(conv(x; W_r) + conv(h; U_r))
//! h~ = tanh(conv(x; W_h) + conv(r .* h; U_h))
//! h' = (1 - z) .* h + z .* h~
//! ```
//!
//! The candidate is tanh-bounded and the update is a convex mix, so hidden
//! values stay in [-1, 1] when the state starts at zero. Input-to-hidden
//! weights carry the biases; hidden-to-hidden weights are bias-free and
//! start at zero so the first step is driven by the input alone.

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::conv::conv3d_forward;
use crate::layers::tape::{NodeId, Tape};
use crate::layers::{Activation, ConvSpec, ParamId, ParamStore};
use crate::tensor::Tensor;

/// Recurrent hidden state, shaped (channels, depth, height, width).
#[derive(Debug, Clone, PartialEq)]
pub struct GruState {
    pub hidden: Tensor,
}

impl GruState {
    pub fn zeros(channels: usize, dims: [usize; 3]) -> Self {
        GruState {
            hidden: Tensor::zeros(&[channels, dims[0], dims[1], dims[2]]),
        }
    }
}

/// Parameter handles for one cell: three input-to-hidden convolutions with
/// biases and three bias-free hidden-to-hidden convolutions.
#[derive(Debug, Clone)]
pub struct GruParams {
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
    pub input_spec: ConvSpec,
    pub hidden_spec: ConvSpec,
}

impl GruParams {
    /// Register all nine tensors: He-uniform input weights, zero
    /// hidden-to-hidden weights, zero biases.
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        in_channels: usize,
        hidden_channels: usize,
        kernel: [usize; 3],
        rng: &mut impl Rng,
    ) -> Self {
        let input_spec = ConvSpec::same(in_channels, hidden_channels, &kernel);
        let hidden_spec = ConvSpec::same(hidden_channels, hidden_channels, &kernel);
        let input_shape = input_spec.weight_shape();
        let fan_in = input_spec.fan_in();
        let w_z = store.add_he_uniform(format!("{prefix}.w_z"), &input_shape, fan_in, rng);
        let w_r = store.add_he_uniform(format!("{prefix}.w_r"), &input_shape, fan_in, rng);
        let w_h = store.add_he_uniform(format!("{prefix}.w_h"), &input_shape, fan_in, rng);
        let hidden_shape = hidden_spec.weight_shape();
        let u_z = store.add_zeros(format!("{prefix}.u_z"), &hidden_shape);
        let u_r = store.add_zeros(format!("{prefix}.u_r"), &hidden_shape);
        let u_h = store.add_zeros(format!("{prefix}.u_h"), &hidden_shape);
        let b_z = store.add_zeros(format!("{prefix}.b_z"), &[hidden_channels]);
        let b_r = store.add_zeros(format!("{prefix}.b_r"), &[hidden_channels]);
        let b_h = store.add_zeros(format!("{prefix}.b_h"), &[hidden_channels]);
        GruParams {
            w_z,
            u_z,
            b_z,
            w_r,
            u_r,
            b_r,
            w_h,
            u_h,
            b_h,
            input_spec,
            hidden_spec,
        }
    }
}

/// One recurrence step, evaluated directly (no tape). Used as the reference
/// for the recorded variant and by inference paths that skip gradients.
pub fn conv_gru_step(
    input: &Tensor,
    state: &GruState,
    params: &GruParams,
    store: &ParamStore,
) -> Result<GruState> {
    let h = &state.hidden;
    if h.shape()[1..] != input.shape()[1..] {
        return Err(Error::ShapeMismatch {
            expected: format!("state spatial dims {:?}", &input.shape()[1..]),
            got: format!("{:?}", &h.shape()[1..]),
        });
    }
    let gate = |w: ParamId, b: ParamId, u: ParamId, hin: &Tensor| -> Result<Tensor> {
        let xs = conv3d_forward(input, store.value(w), Some(store.value(b)), &params.input_spec)?;
        let hs = conv3d_forward(hin, store.value(u), None, &params.hidden_spec)?;
        xs.add(&hs)
    };
    let z = Activation::Sigmoid.apply(&gate(params.w_z, params.b_z, params.u_z, h)?);
    let r = Activation::Sigmoid.apply(&gate(params.w_r, params.b_r, params.u_r, h)?);
    let rh = r.mul(h)?;
    let cand = Activation::Tanh.apply(&gate(params.w_h, params.b_h, params.u_h, &rh)?);
    let keep = z.map(|v| 1.0 - v);
    let new_hidden = keep.mul(h)?.add(&z.mul(&cand)?)?;
    debug_assert!(new_hidden.data().iter().all(|v| v.abs() <= 1.0 + 1e-12));
    Ok(GruState { hidden: new_hidden })
}

/// The same step recorded on a tape so gradients flow through the
/// recurrence. Numerically identical to [`conv_gru_step`].
pub fn conv_gru_tape_step(
    tape: &mut Tape,
    store: &ParamStore,
    input: NodeId,
    hidden: NodeId,
    params: &GruParams,
) -> Result<NodeId> {
    let zx = tape.conv3d(store, input, params.w_z, Some(params.b_z), &params.input_spec)?;
    let zh = tape.conv3d(store, hidden, params.u_z, None, &params.hidden_spec)?;
    let z_pre = tape.add(zx, zh)?;
    let z = tape.activation(z_pre, Activation::Sigmoid)?;

    let rx = tape.conv3d(store, input, params.w_r, Some(params.b_r), &params.input_spec)?;
    let rh_ = tape.conv3d(store, hidden, params.u_r, None, &params.hidden_spec)?;
    let r_pre = tape.add(rx, rh_)?;
    let r = tape.activation(r_pre, Activation::Sigmoid)?;

    let gated = tape.mul(r, hidden)?;
    let cx = tape.conv3d(store, input, params.w_h, Some(params.b_h), &params.input_spec)?;
    let ch = tape.conv3d(store, gated, params.u_h, None, &params.hidden_spec)?;
    let c_pre = tape.add(cx, ch)?;
    let cand = tape.activation(c_pre, Activation::Tanh)?;

    let keep = tape.one_minus(z)?;
    let old_part = tape.mul(keep, hidden)?;
    let new_part = tape.mul(z, cand)?;
    tape.add(old_part, new_part)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Domain};
    use crate::tensor::Fill;

    fn init(seed: u64, c_in: usize, c_h: usize) -> (ParamStore, GruParams) {
        let mut store = ParamStore::new();
        let mut r = rng::stream(seed, Domain::ParamInit, 0);
        let params = GruParams::init(&mut store, "gru", c_in, c_h, [3, 3, 3], &mut r);
        (store, params)
    }

    fn randomize(store: &mut ParamStore, seed: u64) {
        let mut r = rng::stream(seed, Domain::GradCheck, 0);
        for id in store.ids().collect::<Vec<_>>() {
            let shape = store.value(id).shape().to_vec();
            *store.value_mut(id) = Tensor::uniform_from(&shape, -0.5, 0.5, &mut r).unwrap();
        }
    }

    #[test]
    fn zero_everything_is_a_fixed_point() {
        let (store, params) = init(1, 2, 3);
        let mut zero_store = store.clone();
        for id in zero_store.ids().collect::<Vec<_>>() {
            zero_store.value_mut(id).data_mut().fill(0.0);
        }
        let x = Tensor::zeros(&[2, 4, 4, 4]);
        let s0 = GruState::zeros(3, [4, 4, 4]);
        let s1 = conv_gru_step(&x, &s0, &params, &zero_store).unwrap();
        assert!(s1.hidden.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn large_negative_update_bias_freezes_state() {
        let (mut store, params) = init(2, 1, 2);
        store.value_mut(params.b_z).data_mut().fill(-40.0);
        let x = Tensor::new(
            &[1, 3, 3, 3],
            Fill::Uniform {
                seed: 5,
                lo: -1.0,
                hi: 1.0,
            },
        )
        .unwrap();
        let h0 = Tensor::new(
            &[2, 3, 3, 3],
            Fill::Uniform {
                seed: 6,
                lo: -0.9,
                hi: 0.9,
            },
        )
        .unwrap();
        let s1 = conv_gru_step(&x, &GruState { hidden: h0.clone() }, &params, &store).unwrap();
        let drift = s1
            .hidden
            .data()
            .iter()
            .zip(h0.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(drift < 1e-6, "state drifted by {drift}");
    }

    #[test]
    fn direct_and_tape_steps_agree() {
        let (mut store, params) = init(3, 2, 2);
        randomize(&mut store, 30);
        let x = Tensor::new(
            &[2, 4, 4, 4],
            Fill::Uniform {
                seed: 7,
                lo: -1.0,
                hi: 1.0,
            },
        )
        .unwrap();
        let h0 = Tensor::new(
            &[2, 4, 4, 4],
            Fill::Uniform {
                seed: 8,
                lo: -0.5,
                hi: 0.5,
            },
        )
        .unwrap();
        let direct = conv_gru_step(&x, &GruState { hidden: h0.clone() }, &params, &store).unwrap();
        let mut tape = Tape::new();
        let xn = tape.leaf(x);
        let hn = tape.leaf(h0);
        let out = conv_gru_tape_step(&mut tape, &store, xn, hn, &params).unwrap();
        let diff = tape
            .value(out)
            .data()
            .iter()
            .zip(direct.hidden.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-14);
    }

    /// Scalar per-voxel reimplementation for 1x1x1 kernels: every voxel
    /// evolves independently with plain matrix-vector gate math.
    #[test]
    fn matches_scalarized_reference_for_pointwise_kernels() {
        let (c_in, c_h, n) = (2usize, 3usize, 4usize);
        let mut store = ParamStore::new();
        let mut r = rng::stream(11, Domain::ParamInit, 0);
        let params = GruParams::init(&mut store, "g", c_in, c_h, [1, 1, 1], &mut r);
        randomize(&mut store, 12);
        let x = Tensor::new(
            &[c_in, n, n, n],
            Fill::Uniform {
                seed: 13,
                lo: -1.0,
                hi: 1.0,
            },
        )
        .unwrap();
        let h0 = Tensor::new(
            &[c_h, n, n, n],
            Fill::Uniform {
                seed: 14,
                lo: -0.8,
                hi: 0.8,
            },
        )
        .unwrap();
        let got = conv_gru_step(&x, &GruState { hidden: h0.clone() }, &params, &store).unwrap();

        let wmat = |id: ParamId, rows: usize, cols: usize| -> Vec<f64> {
            let t = store.value(id);
            (0..rows * cols).map(|i| t.data()[i]).collect()
        };
        let wz = wmat(params.w_z, c_h, c_in);
        let uz = wmat(params.u_z, c_h, c_h);
        let wr = wmat(params.w_r, c_h, c_in);
        let ur = wmat(params.u_r, c_h, c_h);
        let wh = wmat(params.w_h, c_h, c_in);
        let uh = wmat(params.u_h, c_h, c_h);
        let sigm = |v: f64| 1.0 / (1.0 + (-v).exp());

        let mut worst = 0.0f64;
        for d in 0..n {
            for hh in 0..n {
                for w in 0..n {
                    let xv: Vec<f64> = (0..c_in).map(|c| x.at(&[c, d, hh, w])).collect();
                    let hv: Vec<f64> = (0..c_h).map(|c| h0.at(&[c, d, hh, w])).collect();
                    for co in 0..c_h {
                        let dot = |m: &[f64], v: &[f64], cols: usize| -> f64 {
                            (0..cols).map(|ci| m[co * cols + ci] * v[ci]).sum()
                        };
                        let z = sigm(
                            dot(&wz, &xv, c_in)
                                + dot(&uz, &hv, c_h)
                                + store.value(params.b_z).data()[co],
                        );
                        let rr = |co2: usize| -> f64 {
                            sigm(
                                (0..c_in)
                                    .map(|ci| wr[co2 * c_in + ci] * xv[ci])
                                    .sum::<f64>()
                                    + (0..c_h)
                                        .map(|ch| ur[co2 * c_h + ch] * hv[ch])
                                        .sum::<f64>()
                                    + store.value(params.b_r).data()[co2],
                            )
                        };
                        let rh: Vec<f64> = (0..c_h).map(|ch| rr(ch) * hv[ch]).collect();
                        let cand = (dot(&wh, &xv, c_in)
                            + dot(&uh, &rh, c_h)
                            + store.value(params.b_h).data()[co])
                        .tanh();
                        let want = (1.0 - z) * hv[co] + z * cand;
                        let diff = (got.hidden.at(&[co, d, hh, w]) - want).abs();
                        worst = worst.max(diff);
                    }
                }
            }
        }
        assert!(worst < 1e-10, "worst voxel difference {worst}");
    }

    #[test]
    fn hidden_stays_bounded_over_many_steps() {
        let (mut store, params) = init(4, 2, 2);
        randomize(&mut store, 40);
        let mut state = GruState::zeros(2, [4, 4, 4]);
        for step in 0..20 {
            let x = Tensor::new(
                &[2, 4, 4, 4],
                Fill::Uniform {
                    seed: 100 + step,
                    lo: -3.0,
                    hi: 3.0,
                },
            )
            .unwrap();
            state = conv_gru_step(&x, &state, &params, &store).unwrap();
            assert!(state.hidden.data().iter().all(|v| v.abs() <= 1.0));
        }
    }
}
