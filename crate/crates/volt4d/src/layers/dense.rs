//! Fully connected layer: the affine map `W x + b` on rank-1 tensors.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<(usize, usize)> {
    if weight.rank() != 2 {
        return Err(Error::ShapeMismatch {
            expected: "rank-2 weight matrix".into(),
            got: format!("rank {}", weight.rank()),
        });
    }
    let (rows, cols) = (weight.shape()[0], weight.shape()[1]);
    if input.rank() != 1 || input.len() != cols {
        return Err(Error::ShapeMismatch {
            expected: format!("input vector of length {cols}"),
            got: format!("{:?}", input.shape()),
        });
    }
    if let Some(b) = bias {
        if b.shape() != [rows] {
            return Err(Error::ShapeMismatch {
                expected: format!("bias [{rows}]"),
                got: format!("{:?}", b.shape()),
            });
        }
    }
    Ok((rows, cols))
}

pub fn dense_forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (rows, cols) = check(input, weight, Some(bias))?;
    let mut out = vec![0.0; rows];
    let w = weight.data();
    let x = input.data();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o = bias.data()[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
    Tensor::from_vec(&[rows], out)
}

/// Gradients: dW is the outer product of the upstream gradient and the
/// input, db is the upstream gradient, dx is `W^T g`.
pub struct DenseGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(input: &Tensor, weight: &Tensor, grad_out: &Tensor) -> Result<DenseGrads> {
    let (rows, cols) = check(input, weight, None)?;
    if grad_out.shape() != [rows] {
        return Err(Error::ShapeMismatch {
            expected: format!("gradient [{rows}]"),
            got: format!("{:?}", grad_out.shape()),
        });
    }
    let g = grad_out.data();
    let x = input.data();
    let w = weight.data();
    let mut gw = vec![0.0; rows * cols];
    let mut gx = vec![0.0; cols];
    for r in 0..rows {
        let gr = g[r];
        for c in 0..cols {
            gw[r * cols + c] = gr * x[c];
            gx[c] += w[r * cols + c] * gr;
        }
    }
    Ok(DenseGrads {
        input: Tensor::from_vec(&[cols], gx)?,
        weight: Tensor::from_vec(&[rows, cols], gw)?,
        bias: grad_out.clone(),
    })
}
