//! 3D and 4D cross-correlation with zero padding.
//!
//! The 3D kernel lowers each window to a column (im2col) and delegates the
//! contraction to a GEMM microkernel; the backward pass reuses the same
//! lowering with transposed operands plus a scatter-add (col2im).
//!
//! 4D convolution comes in two strategies. `Direct` is the literal
//! seven-loop sum over (time, depth, height, width) and both channel axes.
//! `TemporalDecomposition` rewrites the 4D product as a sum of k_t
//! time-shifted 3D convolutions, one per temporal kernel offset, which runs
//! on the GEMM path. The two are numerically equivalent and tested as such;
//! gradients are implemented once via the decomposition.

use matrixmultiply::dgemm;

use crate::error::{Error, Result};
use crate::layers::ConvSpec;
use crate::tensor::Tensor;

/// Which 4D evaluation order to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conv4dStrategy {
    Direct,
    TemporalDecomposition,
}

/// Gradients of one convolution application.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Spatial geometry shared by the 3D kernel and the per-offset slices of the
/// 4D decomposition.
#[derive(Debug, Clone)]
struct Geom3 {
    c_in: usize,
    c_out: usize,
    kernel: [usize; 3],
    stride: [usize; 3],
    padding: [usize; 3],
    in_dims: [usize; 3],
    out_dims: [usize; 3],
    /// im2col rows: c_in * kd * kh * kw
    rows: usize,
    /// im2col columns: od * oh * ow
    cols: usize,
}

fn geom3(
    c_in: usize,
    c_out: usize,
    kernel: &[usize],
    stride: &[usize],
    padding: &[usize],
    in_dims: [usize; 3],
) -> Result<Geom3> {
    let mut out_dims = [0usize; 3];
    for ax in 0..3 {
        out_dims[ax] = ConvSpec::out_extent(in_dims[ax], kernel[ax], stride[ax], padding[ax])?;
    }
    let kernel = [kernel[0], kernel[1], kernel[2]];
    Ok(Geom3 {
        c_in,
        c_out,
        kernel,
        stride: [stride[0], stride[1], stride[2]],
        padding: [padding[0], padding[1], padding[2]],
        in_dims,
        out_dims,
        rows: c_in * kernel.iter().product::<usize>(),
        cols: out_dims.iter().product(),
    })
}

/// Lower one (C,D,H,W) volume into a rows x cols matrix where column j holds
/// the receptive field of output position j. Out-of-range taps are zero.
fn im2col(input: &[f64], g: &Geom3, col: &mut [f64]) {
    debug_assert_eq!(col.len(), g.rows * g.cols);
    let [d_in, h_in, w_in] = g.in_dims;
    let [od, oh, ow] = g.out_dims;
    let [kd, kh, kw] = g.kernel;
    let [sd, sh, sw] = g.stride;
    let [pd, ph, pw] = g.padding;
    let mut row = 0;
    for c in 0..g.c_in {
        let chan = &input[c * d_in * h_in * w_in..(c + 1) * d_in * h_in * w_in];
        for z in 0..kd {
            for y in 0..kh {
                for x in 0..kw {
                    let dst = &mut col[row * g.cols..(row + 1) * g.cols];
                    let mut j = 0;
                    for o_d in 0..od {
                        let d = (o_d * sd + z) as isize - pd as isize;
                        for o_h in 0..oh {
                            let h = (o_h * sh + y) as isize - ph as isize;
                            let in_plane = d >= 0
                                && (d as usize) < d_in
                                && h >= 0
                                && (h as usize) < h_in;
                            let base = if in_plane {
                                (d as usize * h_in + h as usize) * w_in
                            } else {
                                0
                            };
                            for o_w in 0..ow {
                                let w = (o_w * sw + x) as isize - pw as isize;
                                dst[j] = if in_plane && w >= 0 && (w as usize) < w_in {
                                    chan[base + w as usize]
                                } else {
                                    0.0
                                };
                                j += 1;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Scatter-add the columns back onto the input grid: the adjoint of im2col.
fn col2im_add(col: &[f64], g: &Geom3, grad_in: &mut [f64]) {
    let [d_in, h_in, w_in] = g.in_dims;
    let [od, oh, ow] = g.out_dims;
    let [kd, kh, kw] = g.kernel;
    let [sd, sh, sw] = g.stride;
    let [pd, ph, pw] = g.padding;
    let mut row = 0;
    for c in 0..g.c_in {
        let chan = &mut grad_in[c * d_in * h_in * w_in..(c + 1) * d_in * h_in * w_in];
        for z in 0..kd {
            for y in 0..kh {
                for x in 0..kw {
                    let src = &col[row * g.cols..(row + 1) * g.cols];
                    let mut j = 0;
                    for o_d in 0..od {
                        let d = (o_d * sd + z) as isize - pd as isize;
                        for o_h in 0..oh {
                            let h = (o_h * sh + y) as isize - ph as isize;
                            let in_plane = d >= 0
                                && (d as usize) < d_in
                                && h >= 0
                                && (h as usize) < h_in;
                            for o_w in 0..ow {
                                let w = (o_w * sw + x) as isize - pw as isize;
                                if in_plane && w >= 0 && (w as usize) < w_in {
                                    let base = (d as usize * h_in + h as usize) * w_in;
                                    chan[base + w as usize] += src[j];
                                }
                                j += 1;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Row-major product `c = a(m,k) * b(k,n) + beta * c` with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
) {
    unsafe {
        dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn check_volume(input: &Tensor, c_in: usize) -> Result<[usize; 3]> {
    if input.rank() != 4 {
        return Err(Error::ShapeMismatch {
            expected: "rank-4 input (channels, depth, height, width)".into(),
            got: format!("rank {}", input.rank()),
        });
    }
    if input.shape()[0] != c_in {
        return Err(Error::ShapeMismatch {
            expected: format!("{c_in} input channels"),
            got: format!("{}", input.shape()[0]),
        });
    }
    Ok([input.shape()[1], input.shape()[2], input.shape()[3]])
}

fn check_weight(weight: &Tensor, spec: &ConvSpec) -> Result<()> {
    if weight.shape() != spec.weight_shape().as_slice() {
        return Err(Error::ShapeMismatch {
            expected: format!("weight {:?}", spec.weight_shape()),
            got: format!("{:?}", weight.shape()),
        });
    }
    Ok(())
}

fn check_bias(bias: &Tensor, c_out: usize) -> Result<()> {
    if bias.shape() != [c_out] {
        return Err(Error::ShapeMismatch {
            expected: format!("bias [{c_out}]"),
            got: format!("{:?}", bias.shape()),
        });
    }
    Ok(())
}

/// 3D cross-correlation of a (C_in, D, H, W) input: output extents follow
/// `(L + 2p - k) / s + 1` per axis.
pub fn conv3d_forward(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    spec: &ConvSpec,
) -> Result<Tensor> {
    spec.validate()?;
    if spec.axes() != 3 {
        return Err(Error::InvalidShape("conv3d needs a 3-axis kernel".into()));
    }
    let in_dims = check_volume(input, spec.in_channels)?;
    check_weight(weight, spec)?;
    if let Some(b) = bias {
        check_bias(b, spec.out_channels)?;
    }
    let g = geom3(
        spec.in_channels,
        spec.out_channels,
        &spec.kernel,
        &spec.stride,
        &spec.padding,
        in_dims,
    )?;
    let mut col = vec![0.0; g.rows * g.cols];
    im2col(input.data(), &g, &mut col);
    let mut out = vec![0.0; g.c_out * g.cols];
    gemm(
        g.c_out,
        g.rows,
        g.cols,
        weight.data(),
        g.rows as isize,
        1,
        &col,
        g.cols as isize,
        1,
        0.0,
        &mut out,
    );
    if let Some(b) = bias {
        for c in 0..g.c_out {
            let bv = b.data()[c];
            for v in &mut out[c * g.cols..(c + 1) * g.cols] {
                *v += bv;
            }
        }
    }
    Tensor::from_vec(
        &[g.c_out, g.out_dims[0], g.out_dims[1], g.out_dims[2]],
        out,
    )
}

/// Gradients of `conv3d_forward` with respect to input, weight, and bias.
/// The input gradient is the transposed correlation of the output gradient.
pub fn conv3d_backward(
    input: &Tensor,
    weight: &Tensor,
    spec: &ConvSpec,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    spec.validate()?;
    let in_dims = check_volume(input, spec.in_channels)?;
    check_weight(weight, spec)?;
    let g = geom3(
        spec.in_channels,
        spec.out_channels,
        &spec.kernel,
        &spec.stride,
        &spec.padding,
        in_dims,
    )?;
    let expect = [g.c_out, g.out_dims[0], g.out_dims[1], g.out_dims[2]];
    if grad_out.shape() != expect {
        return Err(Error::ShapeMismatch {
            expected: format!("{expect:?}"),
            got: format!("{:?}", grad_out.shape()),
        });
    }

    let mut grad_input = Tensor::zeros(input.shape());
    let mut grad_weight = Tensor::zeros(weight.shape());
    let mut grad_bias = Tensor::zeros(&[g.c_out]);
    conv3d_backward_into(
        input.data(),
        weight.data(),
        &g,
        grad_out.data(),
        Some(grad_input.data_mut()),
        grad_weight.data_mut(),
        Some(grad_bias.data_mut()),
    );
    Ok(ConvGrads {
        input: grad_input,
        weight: grad_weight,
        bias: grad_bias,
    })
}

/// Accumulating backward core shared by the 3D path and the per-offset
/// slices of the 4D decomposition. All gradient buffers are added to.
fn conv3d_backward_into(
    input: &[f64],
    weight: &[f64],
    g: &Geom3,
    grad_out: &[f64],
    grad_input: Option<&mut [f64]>,
    grad_weight: &mut [f64],
    grad_bias: Option<&mut [f64]>,
) {
    if let Some(gb) = grad_bias {
        for c in 0..g.c_out {
            gb[c] += grad_out[c * g.cols..(c + 1) * g.cols].iter().sum::<f64>();
        }
    }
    let mut col = vec![0.0; g.rows * g.cols];
    im2col(input, g, &mut col);
    // dW(m,rows) += G(m,cols) * col(rows,cols)^T
    gemm(
        g.c_out,
        g.cols,
        g.rows,
        grad_out,
        g.cols as isize,
        1,
        &col,
        1,
        g.cols as isize,
        1.0,
        grad_weight,
    );
    if let Some(gi) = grad_input {
        // col_grad(rows,cols) = W(m,rows)^T * G(m,cols)
        let mut col_grad = vec![0.0; g.rows * g.cols];
        gemm(
            g.rows,
            g.c_out,
            g.cols,
            weight,
            1,
            g.rows as isize,
            grad_out,
            g.cols as isize,
            1,
            0.0,
            &mut col_grad,
        );
        col2im_add(&col_grad, g, gi);
    }
}

fn check_sequence(input: &Tensor, c_in: usize) -> Result<(usize, [usize; 3])> {
    if input.rank() != 5 {
        return Err(Error::ShapeMismatch {
            expected: "rank-5 input (time, channels, depth, height, width)".into(),
            got: format!("rank {}", input.rank()),
        });
    }
    if input.shape()[1] != c_in {
        return Err(Error::ShapeMismatch {
            expected: format!("{c_in} input channels"),
            got: format!("{}", input.shape()[1]),
        });
    }
    Ok((
        input.shape()[0],
        [input.shape()[2], input.shape()[3], input.shape()[4]],
    ))
}

/// 4D cross-correlation of a (T, C_in, D, H, W) sequence over
/// (time, depth, height, width). Both strategies compute the same function.
pub fn conv4d_forward(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    spec: &ConvSpec,
    strategy: Conv4dStrategy,
) -> Result<Tensor> {
    spec.validate()?;
    if spec.axes() != 4 {
        return Err(Error::InvalidShape("conv4d needs a 4-axis kernel".into()));
    }
    let (t_in, in_dims) = check_sequence(input, spec.in_channels)?;
    check_weight(weight, spec)?;
    if let Some(b) = bias {
        check_bias(b, spec.out_channels)?;
    }
    let t_out = ConvSpec::out_extent(t_in, spec.kernel[0], spec.stride[0], spec.padding[0])?;
    let g = geom3(
        spec.in_channels,
        spec.out_channels,
        &spec.kernel[1..],
        &spec.stride[1..],
        &spec.padding[1..],
        in_dims,
    )?;
    match strategy {
        Conv4dStrategy::Direct => conv4d_direct(input, weight, bias, spec, t_out, &g),
        Conv4dStrategy::TemporalDecomposition => {
            conv4d_decomposed(input, weight, bias, spec, t_in, t_out, &g)
        }
    }
}

fn conv4d_direct(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    spec: &ConvSpec,
    t_out: usize,
    g: &Geom3,
) -> Result<Tensor> {
    let t_in = input.shape()[0];
    let [d_in, h_in, w_in] = g.in_dims;
    let [od, oh, ow] = g.out_dims;
    let kt = spec.kernel[0];
    let [kd, kh, kw] = g.kernel;
    let (st, pt) = (spec.stride[0], spec.padding[0]);
    let [sd, sh, sw] = g.stride;
    let [pd, ph, pw] = g.padding;
    let mut out = Tensor::zeros(&[t_out, g.c_out, od, oh, ow]);
    let x = input.data();
    let wgt = weight.data();
    let o = out.data_mut();
    let mut oi = 0;
    for to in 0..t_out {
        for co in 0..g.c_out {
            let b = bias.map_or(0.0, |b| b.data()[co]);
            for o_d in 0..od {
                for o_h in 0..oh {
                    for o_w in 0..ow {
                        let mut acc = b;
                        for ci in 0..g.c_in {
                            for tau in 0..kt {
                                let t = (to * st + tau) as isize - pt as isize;
                                if t < 0 || t as usize >= t_in {
                                    continue;
                                }
                                for z in 0..kd {
                                    let d = (o_d * sd + z) as isize - pd as isize;
                                    if d < 0 || d as usize >= d_in {
                                        continue;
                                    }
                                    for y in 0..kh {
                                        let h = (o_h * sh + y) as isize - ph as isize;
                                        if h < 0 || h as usize >= h_in {
                                            continue;
                                        }
                                        for xk in 0..kw {
                                            let w = (o_w * sw + xk) as isize - pw as isize;
                                            if w < 0 || w as usize >= w_in {
                                                continue;
                                            }
                                            let xi = (((t as usize * g.c_in + ci) * d_in
                                                + d as usize)
                                                * h_in
                                                + h as usize)
                                                * w_in
                                                + w as usize;
                                            let wi = ((((co * g.c_in + ci) * kt + tau) * kd + z)
                                                * kh
                                                + y)
                                                * kw
                                                + xk;
                                            acc += x[xi] * wgt[wi];
                                        }
                                    }
                                }
                            }
                        }
                        o[oi] = acc;
                        oi += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Weight slice at temporal offset `tau`, laid out as a 3D kernel
/// `[c_out, c_in, kd, kh, kw]`.
fn weight_time_slice(weight: &Tensor, spec: &ConvSpec, tau: usize) -> Vec<f64> {
    let kt = spec.kernel[0];
    let spatial: usize = spec.kernel[1..].iter().product();
    let mut slice = vec![0.0; spec.out_channels * spec.in_channels * spatial];
    let src = weight.data();
    let mut dst = 0;
    for co in 0..spec.out_channels {
        for ci in 0..spec.in_channels {
            let base = ((co * spec.in_channels + ci) * kt + tau) * spatial;
            slice[dst..dst + spatial].copy_from_slice(&src[base..base + spatial]);
            dst += spatial;
        }
    }
    slice
}

fn conv4d_decomposed(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    spec: &ConvSpec,
    t_in: usize,
    t_out: usize,
    g: &Geom3,
) -> Result<Tensor> {
    let kt = spec.kernel[0];
    let (st, pt) = (spec.stride[0], spec.padding[0]);
    let vol_in: usize = g.c_in * g.in_dims.iter().product::<usize>();
    let vol_out = g.c_out * g.cols;
    let mut out = Tensor::zeros(&[t_out, g.c_out, g.out_dims[0], g.out_dims[1], g.out_dims[2]]);
    let slices: Vec<Vec<f64>> = (0..kt).map(|tau| weight_time_slice(weight, spec, tau)).collect();
    let mut col = vec![0.0; g.rows * g.cols];
    for to in 0..t_out {
        let frame = &mut out.data_mut()[to * vol_out..(to + 1) * vol_out];
        let mut first = true;
        for (tau, w_tau) in slices.iter().enumerate() {
            let t = (to * st + tau) as isize - pt as isize;
            if t < 0 || t as usize >= t_in {
                continue;
            }
            let x_t = &input.data()[t as usize * vol_in..(t as usize + 1) * vol_in];
            im2col(x_t, g, &mut col);
            gemm(
                g.c_out,
                g.rows,
                g.cols,
                w_tau,
                g.rows as isize,
                1,
                &col,
                g.cols as isize,
                1,
                if first { 0.0 } else { 1.0 },
                frame,
            );
            first = false;
        }
        if first {
            frame.fill(0.0);
        }
        if let Some(b) = bias {
            for c in 0..g.c_out {
                let bv = b.data()[c];
                for v in &mut frame[c * g.cols..(c + 1) * g.cols] {
                    *v += bv;
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of `conv4d_forward`, computed through the temporal
/// decomposition: each (output step, kernel offset) pair contributes one 3D
/// backward application.
pub fn conv4d_backward(
    input: &Tensor,
    weight: &Tensor,
    spec: &ConvSpec,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    spec.validate()?;
    if spec.axes() != 4 {
        return Err(Error::InvalidShape("conv4d needs a 4-axis kernel".into()));
    }
    let (t_in, in_dims) = check_sequence(input, spec.in_channels)?;
    check_weight(weight, spec)?;
    let kt = spec.kernel[0];
    let (st, pt) = (spec.stride[0], spec.padding[0]);
    let t_out = ConvSpec::out_extent(t_in, kt, st, pt)?;
    let g = geom3(
        spec.in_channels,
        spec.out_channels,
        &spec.kernel[1..],
        &spec.stride[1..],
        &spec.padding[1..],
        in_dims,
    )?;
    let expect = [t_out, g.c_out, g.out_dims[0], g.out_dims[1], g.out_dims[2]];
    if grad_out.shape() != expect {
        return Err(Error::ShapeMismatch {
            expected: format!("{expect:?}"),
            got: format!("{:?}", grad_out.shape()),
        });
    }

    let vol_in: usize = g.c_in * g.in_dims.iter().product::<usize>();
    let vol_out = g.c_out * g.cols;
    let spatial_w = g.c_in * g.kernel.iter().product::<usize>() * g.c_out;
    let mut grad_input = Tensor::zeros(input.shape());
    let mut grad_weight = Tensor::zeros(weight.shape());
    let mut grad_bias = Tensor::zeros(&[g.c_out]);
    let mut slice_grads: Vec<Vec<f64>> = (0..kt).map(|_| vec![0.0; spatial_w]).collect();
    let slices: Vec<Vec<f64>> = (0..kt).map(|tau| weight_time_slice(weight, spec, tau)).collect();

    for to in 0..t_out {
        let g_out = &grad_out.data()[to * vol_out..(to + 1) * vol_out];
        for c in 0..g.c_out {
            grad_bias.data_mut()[c] += g_out[c * g.cols..(c + 1) * g.cols].iter().sum::<f64>();
        }
        for tau in 0..kt {
            let t = (to * st + tau) as isize - pt as isize;
            if t < 0 || t as usize >= t_in {
                continue;
            }
            let t = t as usize;
            let x_t = &input.data()[t * vol_in..(t + 1) * vol_in];
            let gi = &mut grad_input.data_mut()[t * vol_in..(t + 1) * vol_in];
            conv3d_backward_into(
                x_t,
                &slices[tau],
                &g,
                g_out,
                Some(gi),
                &mut slice_grads[tau],
                None,
            );
        }
    }

    // fold the per-offset weight gradients back into 4D layout
    let spatial: usize = g.kernel.iter().product();
    let gw = grad_weight.data_mut();
    for (tau, sg) in slice_grads.iter().enumerate() {
        let mut src = 0;
        for co in 0..g.c_out {
            for ci in 0..g.c_in {
                let base = ((co * g.c_in + ci) * kt + tau) * spatial;
                for k in 0..spatial {
                    gw[base + k] += sg[src + k];
                }
                src += spatial;
            }
        }
    }
    Ok(ConvGrads {
        input: grad_input,
        weight: grad_weight,
        bias: grad_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Fill;

    fn rand_tensor(shape: &[usize], seed: u64) -> Tensor {
        Tensor::new(
            shape,
            Fill::Uniform {
                seed,
                lo: -1.0,
                hi: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let spec = ConvSpec::new(1, 1, &[1, 1, 1]);
        let x = rand_tensor(&[1, 3, 4, 5], 1);
        let w = Tensor::from_vec(&[1, 1, 1, 1, 1], vec![1.0]).unwrap();
        let b = Tensor::zeros(&[1]);
        let y = conv3d_forward(&x, &w, Some(&b), &spec).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_full_window_sums() {
        let spec = ConvSpec::new(1, 1, &[3, 3, 3]);
        let x = Tensor::full(&[1, 4, 4, 4], 1.0).unwrap();
        let w = Tensor::full(&[1, 1, 3, 3, 3], 1.0).unwrap();
        let y = conv3d_forward(&x, &w, None, &spec).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2, 2]);
        assert!(y.data().iter().all(|&v| (v - 27.0).abs() < 1e-12));
    }

    #[test]
    fn channel_mismatch_rejected() {
        let spec = ConvSpec::new(2, 1, &[1, 1, 1]);
        let x = Tensor::zeros(&[1, 2, 2, 2]);
        let w = Tensor::zeros(&[1, 2, 1, 1, 1]);
        assert!(matches!(
            conv3d_forward(&x, &w, None, &spec),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn conv3d_is_linear_in_input() {
        let spec = ConvSpec::same(2, 3, &[3, 3, 3]);
        let w = rand_tensor(&spec.weight_shape(), 10);
        let x = rand_tensor(&[2, 5, 5, 5], 11);
        let y = rand_tensor(&[2, 5, 5, 5], 12);
        let (a, b) = (0.7, -1.3);
        let lhs = conv3d_forward(&x.scale(a).add(&y.scale(b)).unwrap(), &w, None, &spec).unwrap();
        let fx = conv3d_forward(&x, &w, None, &spec).unwrap();
        let fy = conv3d_forward(&y, &w, None, &spec).unwrap();
        let rhs = fx.scale(a).add(&fy.scale(b)).unwrap();
        let diff = lhs
            .data()
            .iter()
            .zip(rhs.data())
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-10, "linearity violated by {diff}");
    }

    #[test]
    fn conv4d_all_ones_center() {
        let spec = ConvSpec::new(1, 1, &[3, 3, 3, 3]);
        let x = Tensor::full(&[3, 1, 4, 4, 4], 1.0).unwrap();
        let w = Tensor::full(&[1, 1, 3, 3, 3, 3], 1.0).unwrap();
        for strat in [Conv4dStrategy::Direct, Conv4dStrategy::TemporalDecomposition] {
            let y = conv4d_forward(&x, &w, None, &spec, strat).unwrap();
            assert_eq!(y.shape(), &[1, 1, 2, 2, 2]);
            assert!(y.data().iter().all(|&v| (v - 81.0).abs() < 1e-12));
        }
    }

    #[test]
    fn conv4d_unit_time_kernel_stacks_conv3d() {
        let spec4 = ConvSpec::same(2, 3, &[1, 3, 3, 3]);
        let spec3 = ConvSpec::same(2, 3, &[3, 3, 3]);
        let x = rand_tensor(&[3, 2, 4, 4, 4], 20);
        let w4 = rand_tensor(&spec4.weight_shape(), 21);
        let b = rand_tensor(&[3], 22);
        let w3 = w4.reshape(&spec3.weight_shape()).unwrap();
        let y = conv4d_forward(&x, &w4, Some(&b), &spec4, Conv4dStrategy::Direct).unwrap();
        for t in 0..3 {
            let xt = x.index_axis(0, t).unwrap();
            let yt = conv3d_forward(&xt, &w3, Some(&b), &spec3).unwrap();
            let got = y.index_axis(0, t).unwrap();
            let diff = got
                .data()
                .iter()
                .zip(yt.data())
                .map(|(u, v)| (u - v).abs())
                .fold(0.0f64, f64::max);
            assert!(diff < 1e-12);
        }
    }

    #[test]
    fn conv4d_strategies_agree() {
        for (seed, t, c_in, c_out, dim, kt, pad_t) in [
            (1u64, 3usize, 1usize, 2usize, 4usize, 3usize, 1usize),
            (2, 5, 2, 3, 5, 3, 1),
            (3, 4, 2, 2, 4, 2, 0),
            (4, 3, 3, 1, 3, 3, 2),
        ] {
            let spec = ConvSpec {
                in_channels: c_in,
                out_channels: c_out,
                kernel: vec![kt, 3, 3, 3],
                stride: vec![1, 1, 1, 1],
                padding: vec![pad_t, 1, 1, 1],
            };
            let x = rand_tensor(&[t, c_in, dim, dim, dim], seed * 100);
            let w = rand_tensor(&spec.weight_shape(), seed * 100 + 1);
            let b = rand_tensor(&[c_out], seed * 100 + 2);
            let direct =
                conv4d_forward(&x, &w, Some(&b), &spec, Conv4dStrategy::Direct).unwrap();
            let decomp = conv4d_forward(
                &x,
                &w,
                Some(&b),
                &spec,
                Conv4dStrategy::TemporalDecomposition,
            )
            .unwrap();
            assert_eq!(direct.shape(), decomp.shape());
            let diff = direct
                .data()
                .iter()
                .zip(decomp.data())
                .map(|(u, v)| (u - v).abs())
                .fold(0.0f64, f64::max);
            assert!(diff < 1e-12, "strategies diverge by {diff}");
        }
    }

    #[test]
    fn conv4d_kernel_longer_than_padded_time_rejected() {
        let spec = ConvSpec::new(1, 1, &[5, 1, 1, 1]);
        let x = Tensor::zeros(&[3, 1, 2, 2, 2]);
        let w = Tensor::zeros(&spec.weight_shape());
        assert!(matches!(
            conv4d_forward(&x, &w, None, &spec, Conv4dStrategy::Direct),
            Err(Error::InvalidShape(_))
        ));
    }

    /// Central finite differences around one scalar slot.
    fn fd_slot(mut f: impl FnMut(f64) -> f64, x0: f64, h: f64) -> f64 {
        (f(x0 + h) - f(x0 - h)) / (2.0 * h)
    }

    #[test]
    fn conv3d_backward_matches_finite_differences() {
        let spec = ConvSpec::same(2, 2, &[3, 3, 3]).with_stride(&[1, 1, 1]);
        let x = rand_tensor(&[2, 3, 3, 3], 30);
        let w = rand_tensor(&spec.weight_shape(), 31);
        let b = rand_tensor(&[2], 32);
        let y = conv3d_forward(&x, &w, Some(&b), &spec).unwrap();
        // loss = weighted sum with fixed coefficients so the seed grad is nontrivial
        let coef = rand_tensor(y.shape(), 33);
        let grads = conv3d_backward(&x, &w, &spec, &coef).unwrap();
        let h = 1e-5;

        for (ti, slot) in [(0usize, 7usize), (0, 25), (1, 100), (2, 1)] {
            let analytic = match ti {
                0 => grads.input.data()[slot],
                1 => grads.weight.data()[slot],
                _ => grads.bias.data()[slot],
            };
            let numeric = fd_slot(
                |v| {
                    let mut xs = x.clone();
                    let mut ws = w.clone();
                    let mut bs = b.clone();
                    match ti {
                        0 => xs.data_mut()[slot] = v,
                        1 => ws.data_mut()[slot] = v,
                        _ => bs.data_mut()[slot] = v,
                    }
                    let out = conv3d_forward(&xs, &ws, Some(&bs), &spec).unwrap();
                    out.data().iter().zip(coef.data()).map(|(a, c)| a * c).sum()
                },
                match ti {
                    0 => x.data()[slot],
                    1 => w.data()[slot],
                    _ => b.data()[slot],
                },
                h,
            );
            let rel = (analytic - numeric).abs() / numeric.abs().max(1.0);
            assert!(rel < 1e-7, "slot {ti}/{slot}: {analytic} vs {numeric}");
        }
    }

    #[test]
    fn conv4d_backward_matches_finite_differences() {
        let spec = ConvSpec::same(1, 2, &[3, 3, 3, 3]);
        let x = rand_tensor(&[3, 1, 3, 3, 3], 40);
        let w = rand_tensor(&spec.weight_shape(), 41);
        let b = rand_tensor(&[2], 42);
        let coef = {
            let y = conv4d_forward(&x, &w, Some(&b), &spec, Conv4dStrategy::Direct).unwrap();
            rand_tensor(y.shape(), 43)
        };
        let grads = conv4d_backward(&x, &w, &spec, &coef).unwrap();
        let h = 1e-5;
        for (ti, slot) in [(0usize, 5usize), (1, 50), (2, 1)] {
            let analytic = match ti {
                0 => grads.input.data()[slot],
                1 => grads.weight.data()[slot],
                _ => grads.bias.data()[slot],
            };
            let numeric = fd_slot(
                |v| {
                    let mut xs = x.clone();
                    let mut ws = w.clone();
                    let mut bs = b.clone();
                    match ti {
                        0 => xs.data_mut()[slot] = v,
                        1 => ws.data_mut()[slot] = v,
                        _ => bs.data_mut()[slot] = v,
                    }
                    let out =
                        conv4d_forward(&xs, &ws, Some(&bs), &spec, Conv4dStrategy::Direct)
                            .unwrap();
                    out.data().iter().zip(coef.data()).map(|(a, c)| a * c).sum()
                },
                match ti {
                    0 => x.data()[slot],
                    1 => w.data()[slot],
                    _ => b.data()[slot],
                },
                h,
            );
            let rel = (analytic - numeric).abs() / numeric.abs().max(1.0);
            assert!(rel < 1e-7, "slot {ti}/{slot}: {analytic} vs {numeric}");
        }
    }
}
