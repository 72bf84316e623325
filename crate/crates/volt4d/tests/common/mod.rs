//! Reference implementations used by the integration suites: direct
//! index-walking loops with no lowering, no GEMM, and no code shared with
//! the library kernels. Slow, small, and obviously correct.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use volt4d::layers::conv::{conv3d_forward, conv4d_forward, Conv4dStrategy};
use volt4d::layers::dense::dense_forward;
use volt4d::layers::gru::{conv_gru_step, GruParams, GruState};
use volt4d::layers::pool::avg_pool_forward;
use volt4d::layers::{ConvSpec, ParamId, ParamStore};
use volt4d::tensor::Tensor;

pub fn case_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape(), "comparing tensors of different shape");
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn uniform(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::uniform_from(shape, -1.0, 1.0, rng).unwrap()
}

/// Plain seven-loop 3D cross-correlation over one (C, D, H, W) volume.
pub fn naive_conv3d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    spec: &ConvSpec,
) -> Tensor {
    let dims = [input.shape()[1], input.shape()[2], input.shape()[3]];
    let out = spec.out_extents(&dims).unwrap();
    let mut result = Tensor::zeros(&[spec.out_channels, out[0], out[1], out[2]]);
    for co in 0..spec.out_channels {
        for od in 0..out[0] {
            for oh in 0..out[1] {
                for ow in 0..out[2] {
                    let mut acc = bias.map_or(0.0, |b| b.at(&[co]));
                    for ci in 0..spec.in_channels {
                        for kz in 0..spec.kernel[0] {
                            let z = (od * spec.stride[0] + kz) as isize
                                - spec.padding[0] as isize;
                            if z < 0 || z as usize >= dims[0] {
                                continue;
                            }
                            for ky in 0..spec.kernel[1] {
                                let y = (oh * spec.stride[1] + ky) as isize
                                    - spec.padding[1] as isize;
                                if y < 0 || y as usize >= dims[1] {
                                    continue;
                                }
                                for kx in 0..spec.kernel[2] {
                                    let x = (ow * spec.stride[2] + kx) as isize
                                        - spec.padding[2] as isize;
                                    if x < 0 || x as usize >= dims[2] {
                                        continue;
                                    }
                                    acc += input.at(&[ci, z as usize, y as usize, x as usize])
                                        * weight.at(&[co, ci, kz, ky, kx]);
                                }
                            }
                        }
                    }
                    result.set(&[co, od, oh, ow], acc);
                }
            }
        }
    }
    result
}

/// Plain nine-loop 4D cross-correlation over a (T, C, D, H, W) sequence.
pub fn naive_conv4d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    spec: &ConvSpec,
) -> Tensor {
    let t_in = input.shape()[0];
    let dims = [input.shape()[2], input.shape()[3], input.shape()[4]];
    let t_out =
        ConvSpec::out_extent(t_in, spec.kernel[0], spec.stride[0], spec.padding[0]).unwrap();
    let out = [
        ConvSpec::out_extent(dims[0], spec.kernel[1], spec.stride[1], spec.padding[1]).unwrap(),
        ConvSpec::out_extent(dims[1], spec.kernel[2], spec.stride[2], spec.padding[2]).unwrap(),
        ConvSpec::out_extent(dims[2], spec.kernel[3], spec.stride[3], spec.padding[3]).unwrap(),
    ];
    let mut result = Tensor::zeros(&[t_out, spec.out_channels, out[0], out[1], out[2]]);
    for to in 0..t_out {
        for co in 0..spec.out_channels {
            for od in 0..out[0] {
                for oh in 0..out[1] {
                    for ow in 0..out[2] {
                        let mut acc = bias.map_or(0.0, |b| b.at(&[co]));
                        for ci in 0..spec.in_channels {
                            for kt in 0..spec.kernel[0] {
                                let t = (to * spec.stride[0] + kt) as isize
                                    - spec.padding[0] as isize;
                                if t < 0 || t as usize >= t_in {
                                    continue;
                                }
                                for kz in 0..spec.kernel[1] {
                                    let z = (od * spec.stride[1] + kz) as isize
                                        - spec.padding[1] as isize;
                                    if z < 0 || z as usize >= dims[0] {
                                        continue;
                                    }
                                    for ky in 0..spec.kernel[2] {
                                        let y = (oh * spec.stride[2] + ky) as isize
                                            - spec.padding[2] as isize;
                                        if y < 0 || y as usize >= dims[1] {
                                            continue;
                                        }
                                        for kx in 0..spec.kernel[3] {
                                            let x = (ow * spec.stride[3] + kx) as isize
                                                - spec.padding[3] as isize;
                                            if x < 0 || x as usize >= dims[2] {
                                                continue;
                                            }
                                            acc += input.at(&[
                                                t as usize,
                                                ci,
                                                z as usize,
                                                y as usize,
                                                x as usize,
                                            ]) * weight.at(&[co, ci, kt, kz, ky, kx]);
                                        }
                                    }
                                }
                            }
                        }
                        result.set(&[to, co, od, oh, ow], acc);
                    }
                }
            }
        }
    }
    result
}

fn odometer(idx: &mut [usize], bounds: &[usize]) -> bool {
    for ax in (0..idx.len()).rev() {
        idx[ax] += 1;
        if idx[ax] < bounds[ax] {
            return true;
        }
        idx[ax] = 0;
    }
    false
}

/// Windowed mean over every axis, any rank, by explicit index arithmetic.
pub fn naive_avg_pool(input: &Tensor, window: &[usize]) -> Tensor {
    let out_shape: Vec<usize> = input
        .shape()
        .iter()
        .zip(window)
        .map(|(&n, &w)| n / w)
        .collect();
    let volume = window.iter().product::<usize>() as f64;
    let mut out = Tensor::zeros(&out_shape);
    let mut idx = vec![0usize; out_shape.len()];
    loop {
        let mut sum = 0.0;
        let mut win = vec![0usize; window.len()];
        loop {
            let src: Vec<usize> = idx
                .iter()
                .zip(window)
                .zip(&win)
                .map(|((&o, &w), &k)| o * w + k)
                .collect();
            sum += input.at(&src);
            if !odometer(&mut win, window) {
                break;
            }
        }
        out.set(&idx, sum / volume);
        if !odometer(&mut idx, &out_shape) {
            break;
        }
    }
    out
}

/// Row-by-row affine map on a vector.
pub fn naive_dense(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Tensor {
    let rows = weight.shape()[0];
    let cols = weight.shape()[1];
    let mut out = Tensor::zeros(&[rows]);
    for r in 0..rows {
        let mut acc = bias.at(&[r]);
        for c in 0..cols {
            acc += weight.at(&[r, c]) * input.at(&[c]);
        }
        out.set(&[r], acc);
    }
    out
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data: Vec<f64> = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.shape(), data).unwrap()
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data: Vec<f64> = a.data().iter().map(|&x| f(x)).collect();
    Tensor::from_vec(a.shape(), data).unwrap()
}

/// One gated recurrence step built from the reference convolution and
/// scalar gate arithmetic.
pub fn naive_gru_step(
    input: &Tensor,
    hidden: &Tensor,
    store: &ParamStore,
    p: &GruParams,
) -> Tensor {
    let pre = |w: ParamId, b: ParamId, u: ParamId, hin: &Tensor| -> Tensor {
        let from_input = naive_conv3d(input, store.value(w), Some(store.value(b)), &p.input_spec);
        let from_hidden = naive_conv3d(hin, store.value(u), None, &p.hidden_spec);
        zip_map(&from_input, &from_hidden, |a, b| a + b)
    };
    let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
    let z = map(&pre(p.w_z, p.b_z, p.u_z, hidden), sigmoid);
    let r = map(&pre(p.w_r, p.b_r, p.u_r, hidden), sigmoid);
    let gated = zip_map(&r, hidden, |a, b| a * b);
    let cand = map(&pre(p.w_h, p.b_h, p.u_h, &gated), f64::tanh);
    let keep = zip_map(&z, hidden, |zv, hv| (1.0 - zv) * hv);
    let take = zip_map(&z, &cand, |zv, cv| zv * cv);
    zip_map(&keep, &take, |a, b| a + b)
}

fn random_spec(
    rng: &mut impl Rng,
    axes: usize,
    max_channels: usize,
    max_kernel: usize,
    max_stride: usize,
    max_padding: usize,
) -> ConvSpec {
    let kernel: Vec<usize> = (0..axes).map(|_| rng.random_range(1..=max_kernel)).collect();
    let stride: Vec<usize> = (0..axes).map(|_| rng.random_range(1..=max_stride)).collect();
    let padding: Vec<usize> = (0..axes).map(|_| rng.random_range(0..=max_padding)).collect();
    ConvSpec::new(
        rng.random_range(1..=max_channels),
        rng.random_range(1..=max_channels),
        &kernel,
    )
    .with_stride(&stride)
    .with_padding(&padding)
}

/// Input extents that keep every output extent at least 1.
fn random_extents(rng: &mut impl Rng, spec: &ConvSpec, slack: usize) -> Vec<usize> {
    spec.kernel
        .iter()
        .zip(&spec.padding)
        .map(|(&k, &p)| {
            let min = k.saturating_sub(2 * p).max(1);
            rng.random_range(min..min + slack)
        })
        .collect()
}

pub fn conv3d_oracle_max_diff(cases: usize, seed: u64) -> f64 {
    let mut rng = case_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let spec = random_spec(&mut rng, 3, 3, 3, 3, 2);
        let dims = random_extents(&mut rng, &spec, 5);
        let input = uniform(&[spec.in_channels, dims[0], dims[1], dims[2]], &mut rng);
        let weight = uniform(&spec.weight_shape(), &mut rng);
        let bias = rng
            .random_bool(0.5)
            .then(|| uniform(&[spec.out_channels], &mut rng));
        let got = conv3d_forward(&input, &weight, bias.as_ref(), &spec).unwrap();
        let want = naive_conv3d(&input, &weight, bias.as_ref(), &spec);
        worst = worst.max(max_abs_diff(&got, &want));
    }
    worst
}

pub fn conv4d_oracle_max_diff(cases: usize, seed: u64, strategy: Conv4dStrategy) -> f64 {
    let mut rng = case_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let spec = random_spec(&mut rng, 4, 2, 3, 2, 1);
        let ext = random_extents(&mut rng, &spec, 3);
        let input = uniform(
            &[ext[0], spec.in_channels, ext[1], ext[2], ext[3]],
            &mut rng,
        );
        let weight = uniform(&spec.weight_shape(), &mut rng);
        let bias = rng
            .random_bool(0.5)
            .then(|| uniform(&[spec.out_channels], &mut rng));
        let got = conv4d_forward(&input, &weight, bias.as_ref(), &spec, strategy).unwrap();
        let want = naive_conv4d(&input, &weight, bias.as_ref(), &spec);
        worst = worst.max(max_abs_diff(&got, &want));
    }
    worst
}

/// Direct vs decomposed 4D convolution over a wider geometry grid than the
/// oracle runs: longer kernels, coarser strides, heavier padding.
pub fn conv4d_strategy_max_diff(cases: usize, seed: u64) -> f64 {
    let mut rng = case_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let spec = random_spec(&mut rng, 4, 3, 4, 3, 2);
        let ext = random_extents(&mut rng, &spec, 3);
        let input = uniform(
            &[ext[0], spec.in_channels, ext[1], ext[2], ext[3]],
            &mut rng,
        );
        let weight = uniform(&spec.weight_shape(), &mut rng);
        let bias = rng
            .random_bool(0.5)
            .then(|| uniform(&[spec.out_channels], &mut rng));
        let direct =
            conv4d_forward(&input, &weight, bias.as_ref(), &spec, Conv4dStrategy::Direct).unwrap();
        let decomposed = conv4d_forward(
            &input,
            &weight,
            bias.as_ref(),
            &spec,
            Conv4dStrategy::TemporalDecomposition,
        )
        .unwrap();
        worst = worst.max(max_abs_diff(&direct, &decomposed));
    }
    worst
}

pub fn pool_oracle_max_diff(cases: usize, seed: u64) -> f64 {
    let mut rng = case_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let rank = rng.random_range(3..=5);
        let window: Vec<usize> = (0..rank).map(|_| rng.random_range(1..=3)).collect();
        let shape: Vec<usize> = window
            .iter()
            .map(|&w| w * rng.random_range(1..=3))
            .collect();
        let input = uniform(&shape, &mut rng);
        let got = avg_pool_forward(&input, &window).unwrap();
        let want = naive_avg_pool(&input, &window);
        worst = worst.max(max_abs_diff(&got, &want));
    }
    worst
}

pub fn dense_oracle_max_diff(cases: usize, seed: u64) -> f64 {
    let mut rng = case_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let rows = rng.random_range(1..=8);
        let cols = rng.random_range(1..=16);
        let input = uniform(&[cols], &mut rng);
        let weight = uniform(&[rows, cols], &mut rng);
        let bias = uniform(&[rows], &mut rng);
        let got = dense_forward(&input, &weight, &bias).unwrap();
        let want = naive_dense(&input, &weight, &bias);
        worst = worst.max(max_abs_diff(&got, &want));
    }
    worst
}

pub fn gru_oracle_max_diff(cases: usize, seed: u64) -> f64 {
    let mut rng = case_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let c_in = rng.random_range(1..=3);
        let c_h = rng.random_range(1..=3);
        let k = if rng.random_bool(0.5) { 1 } else { 3 };
        let dims = [
            rng.random_range(2..=4),
            rng.random_range(2..=4),
            rng.random_range(2..=4),
        ];
        let mut store = ParamStore::new();
        let params = GruParams::init(&mut store, "gru", c_in, c_h, [k, k, k], &mut rng);
        for id in store.ids().collect::<Vec<_>>() {
            let shape = store.value(id).shape().to_vec();
            *store.value_mut(id) = uniform(&shape, &mut rng);
        }
        let input = uniform(&[c_in, dims[0], dims[1], dims[2]], &mut rng);
        let hidden = uniform(&[c_h, dims[0], dims[1], dims[2]], &mut rng);
        let got = conv_gru_step(
            &input,
            &GruState {
                hidden: hidden.clone(),
            },
            &params,
            &store,
        )
        .unwrap();
        let want = naive_gru_step(&input, &hidden, &store, &params);
        worst = worst.max(max_abs_diff(&got.hidden, &want));
    }
    worst
}
