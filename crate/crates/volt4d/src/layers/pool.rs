//! Average pooling with per-axis windows.
//!
//! The window must divide each axis exactly; there is no implicit padding,
//! so model builders pick windows that fit (a window of 1 leaves an axis
//! untouched). Each output value is the mean of its window, and the backward
//! pass spreads the incoming gradient uniformly across the window.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check_window(input: &Tensor, window: &[usize]) -> Result<Vec<usize>> {
    if window.len() != input.rank() {
        return Err(Error::InvalidShape(format!(
            "window has {} axes for a rank-{} input",
            window.len(),
            input.rank()
        )));
    }
    let mut out_shape = Vec::with_capacity(window.len());
    for (ax, (&w, &n)) in window.iter().zip(input.shape()).enumerate() {
        if w == 0 || w > n {
            return Err(Error::InvalidShape(format!(
                "window {w} does not fit axis {ax} of length {n}"
            )));
        }
        if n % w != 0 {
            return Err(Error::InvalidShape(format!(
                "window {w} does not divide axis {ax} of length {n}"
            )));
        }
        out_shape.push(n / w);
    }
    Ok(out_shape)
}

/// Iterate all (output index, input window offsets) pairs.
fn for_each_window(
    in_shape: &[usize],
    out_shape: &[usize],
    window: &[usize],
    mut visit: impl FnMut(usize, usize),
) {
    let rank = in_shape.len();
    let mut in_strides = vec![1usize; rank];
    let mut out_strides = vec![1usize; rank];
    for ax in (0..rank.saturating_sub(1)).rev() {
        in_strides[ax] = in_strides[ax + 1] * in_shape[ax + 1];
        out_strides[ax] = out_strides[ax + 1] * out_shape[ax + 1];
    }
    let out_len: usize = out_shape.iter().product();
    let win_len: usize = window.iter().product();
    let mut out_idx = vec![0usize; rank];
    for out_lin in 0..out_len {
        let mut base = 0;
        for ax in 0..rank {
            base += out_idx[ax] * window[ax] * in_strides[ax];
        }
        let mut win_idx = vec![0usize; rank];
        for _ in 0..win_len {
            let mut off = base;
            for ax in 0..rank {
                off += win_idx[ax] * in_strides[ax];
            }
            visit(out_lin, off);
            let mut carry = true;
            for ax in (0..rank).rev() {
                if carry {
                    win_idx[ax] += 1;
                    if win_idx[ax] == window[ax] {
                        win_idx[ax] = 0;
                    } else {
                        carry = false;
                    }
                }
            }
        }
        let mut carry = true;
        for ax in (0..rank).rev() {
            if carry {
                out_idx[ax] += 1;
                if out_idx[ax] == out_shape[ax] {
                    out_idx[ax] = 0;
                } else {
                    carry = false;
                }
            }
        }
    }
}

/// Windowed mean over every axis at once.
pub fn avg_pool_forward(input: &Tensor, window: &[usize]) -> Result<Tensor> {
    let out_shape = check_window(input, window)?;
    let mut out = Tensor::zeros(&out_shape);
    let inv = 1.0 / window.iter().product::<usize>() as f64;
    {
        let src = input.data();
        let dst = out.data_mut();
        for_each_window(input.shape(), &out_shape, window, |o, i| {
            dst[o] += src[i];
        });
        for v in dst.iter_mut() {
            *v *= inv;
        }
    }
    Ok(out)
}

/// Gradient with respect to the pooling input: each window element receives
/// `grad / window_volume`.
pub fn avg_pool_backward(
    in_shape: &[usize],
    window: &[usize],
    grad_out: &Tensor,
) -> Result<Tensor> {
    let probe = Tensor::zeros(in_shape);
    let out_shape = check_window(&probe, window)?;
    if grad_out.shape() != out_shape.as_slice() {
        return Err(Error::ShapeMismatch {
            expected: format!("{out_shape:?}"),
            got: format!("{:?}", grad_out.shape()),
        });
    }
    let mut grad_in = Tensor::zeros(in_shape);
    let inv = 1.0 / window.iter().product::<usize>() as f64;
    {
        let src = grad_out.data();
        let dst = grad_in.data_mut();
        for_each_window(in_shape, &out_shape, window, |o, i| {
            dst[i] += src[o] * inv;
        });
    }
    Ok(grad_in)
}
