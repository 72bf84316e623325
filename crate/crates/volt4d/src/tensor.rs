//! Dense n-dimensional `f64` tensors.
//!
//! Row-major (C-order) layout: the last axis is contiguous in memory and the
//! element at multi-index `i` lives at `data[dot(i, strides)]`. All scalars
//! are 64-bit floats; 32-bit floats appear only as an on-disk storage format.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// How to populate a freshly created tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fill {
    Const(f64),
    /// Uniform values in `[lo, hi)` from a ChaCha8 stream keyed by `seed`.
    /// The same seed always reproduces the same buffer.
    Uniform { seed: u64, lo: f64, hi: f64 },
}

/// Dense tensor: axis lengths plus a flat row-major buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn element_count(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::InvalidShape("rank must be at least 1".into()));
    }
    if let Some(&bad) = shape.iter().find(|&&n| n == 0) {
        return Err(Error::InvalidShape(format!(
            "axis length must be >= 1, got {bad} in {shape:?}"
        )));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn new(shape: &[usize], fill: Fill) -> Result<Self> {
        let n = element_count(shape)?;
        let data = match fill {
            Fill::Const(v) => vec![v; n],
            Fill::Uniform { seed, lo, hi } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| rng.random_range(lo..hi)).collect()
            }
        };
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::new(shape, Fill::Const(0.0)).expect("valid shape")
    }

    pub fn full(shape: &[usize], value: f64) -> Result<Self> {
        Tensor::new(shape, Fill::Const(value))
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n = element_count(shape)?;
        if data.len() != n {
            return Err(Error::InvalidShape(format!(
                "buffer of {} elements cannot fill shape {shape:?} ({n} elements)",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Uniform values in `[lo, hi)` drawn sequentially from an existing
    /// generator; used by parameter init where one stream seeds many tensors.
    pub fn uniform_from(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Result<Self> {
        let n = element_count(shape)?;
        let data = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Row-major strides for the current shape.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.shape[i + 1];
        }
        strides
    }

    /// Linear offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        let mut stride = 1;
        for ax in (0..self.shape.len()).rev() {
            debug_assert!(index[ax] < self.shape[ax]);
            off += index[ax] * stride;
            stride *= self.shape[ax];
        }
        off
    }

    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    /// Same buffer under a new shape with an equal element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let n = element_count(shape)?;
        if n != self.data.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} elements", self.data.len()),
                got: format!("{shape:?} ({n} elements)"),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.rank() {
            return Err(Error::InvalidAxis {
                axis,
                rank: self.rank(),
            });
        }
        Ok(())
    }

    /// Copy of the sub-tensor at position `i` along `axis`, with that axis
    /// removed (rank decreases by one).
    pub fn index_axis(&self, axis: usize, i: usize) -> Result<Tensor> {
        let sliced = self.slice_axis(axis, i, 1)?;
        let mut shape = sliced.shape.clone();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        Ok(Tensor {
            shape,
            data: sliced.data,
        })
    }

    /// Copy of `len` consecutive positions along `axis`, keeping the rank.
    pub fn slice_axis(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        self.check_axis(axis)?;
        if start + len > self.shape[axis] || len == 0 {
            return Err(Error::InvalidShape(format!(
                "slice {start}..{} exceeds axis {axis} of length {}",
                start + len,
                self.shape[axis]
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let axis_len = self.shape[axis];
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * axis_len + start) * inner;
            data.extend_from_slice(&self.data[base..base + len * inner]);
        }
        let mut shape = self.shape.clone();
        shape[axis] = len;
        Ok(Tensor { shape, data })
    }

    /// Copy with the order of positions along `axis` reversed.
    pub fn reverse_axis(&self, axis: usize) -> Result<Tensor> {
        self.check_axis(axis)?;
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let axis_len = self.shape[axis];
        let mut data = Vec::with_capacity(self.data.len());
        for o in 0..outer {
            for i in (0..axis_len).rev() {
                let base = (o * axis_len + i) * inner;
                data.extend_from_slice(&self.data[base..base + inner]);
            }
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Concatenate along `axis`. Inputs must agree in rank and in every
    /// other axis length; slicing the result recovers them exactly.
    pub fn concat(tensors: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = tensors
            .first()
            .ok_or_else(|| Error::Empty("concat of zero tensors".into()))?;
        first.check_axis(axis)?;
        for t in &tensors[1..] {
            if t.rank() != first.rank() {
                return Err(Error::ShapeMismatch {
                    expected: format!("rank {}", first.rank()),
                    got: format!("rank {}", t.rank()),
                });
            }
            for ax in 0..first.rank() {
                if ax != axis && t.shape[ax] != first.shape[ax] {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{:?} off the concat axis", first.shape),
                        got: format!("{:?}", t.shape),
                    });
                }
            }
        }
        let outer: usize = first.shape[..axis].iter().product();
        let inner: usize = first.shape[axis + 1..].iter().product();
        let total_axis: usize = tensors.iter().map(|t| t.shape[axis]).sum();
        let mut data = Vec::with_capacity(outer * total_axis * inner);
        for o in 0..outer {
            for t in tensors {
                let chunk = t.shape[axis] * inner;
                data.extend_from_slice(&t.data[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first.shape.clone();
        shape[axis] = total_axis;
        Ok(Tensor { shape, data })
    }

    /// Arithmetic mean over `axes`; the reduced axes are removed. Reducing
    /// every axis leaves a rank-1 tensor of length 1.
    pub fn reduce_mean(&self, axes: &[usize]) -> Result<Tensor> {
        let mut seen = vec![false; self.rank()];
        for &ax in axes {
            self.check_axis(ax)?;
            if seen[ax] {
                return Err(Error::InvalidAxis {
                    axis: ax,
                    rank: self.rank(),
                });
            }
            seen[ax] = true;
        }
        let out_shape: Vec<usize> = (0..self.rank())
            .filter(|ax| !seen[*ax])
            .map(|ax| self.shape[ax])
            .collect();
        let out_shape = if out_shape.is_empty() {
            vec![1]
        } else {
            out_shape
        };
        let mut out = Tensor::zeros(&out_shape);
        let strides = self.strides();
        let kept: Vec<usize> = (0..self.rank()).filter(|ax| !seen[*ax]).collect();
        let reduced: Vec<usize> = (0..self.rank()).filter(|ax| seen[*ax]).collect();
        let slab: usize = reduced.iter().map(|&ax| self.shape[ax]).product();
        let inv = 1.0 / slab as f64;

        // Walk kept indices in output order; inner odometer over reduced axes.
        let mut kept_idx = vec![0usize; kept.len()];
        for out_lin in 0..out.len() {
            let mut base = 0;
            for (pos, &ax) in kept.iter().enumerate() {
                base += kept_idx[pos] * strides[ax];
            }
            let mut sum = 0.0;
            let mut red_idx = vec![0usize; reduced.len()];
            loop {
                let mut off = base;
                for (pos, &ax) in reduced.iter().enumerate() {
                    off += red_idx[pos] * strides[ax];
                }
                sum += self.data[off];
                // advance odometer
                let mut carry = true;
                for pos in (0..reduced.len()).rev() {
                    if carry {
                        red_idx[pos] += 1;
                        if red_idx[pos] == self.shape[reduced[pos]] {
                            red_idx[pos] = 0;
                        } else {
                            carry = false;
                        }
                    }
                }
                if carry {
                    break;
                }
            }
            out.data[out_lin] = sum * inv;
            let mut carry = true;
            for pos in (0..kept.len()).rev() {
                if carry {
                    kept_idx[pos] += 1;
                    if kept_idx[pos] == self.shape[kept[pos]] {
                        kept_idx[pos] = 0;
                    } else {
                        carry = false;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Trilinear interpolation of a rank-3 volume at a continuous point given
    /// in voxel units, axis order matching the shape. Exact at voxel centers.
    pub fn trilinear_sample(&self, point: [f64; 3]) -> Result<f64> {
        if self.rank() != 3 {
            return Err(Error::ShapeMismatch {
                expected: "rank-3 volume".into(),
                got: format!("rank {}", self.rank()),
            });
        }
        let size = [self.shape[0], self.shape[1], self.shape[2]];
        for ax in 0..3 {
            if !point[ax].is_finite() || point[ax] < 0.0 || point[ax] > (size[ax] - 1) as f64 {
                return Err(Error::OutOfBounds { point, size });
            }
        }
        let mut i0 = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for ax in 0..3 {
            if size[ax] == 1 {
                continue;
            }
            let f = point[ax].floor();
            i0[ax] = (f as usize).min(size[ax] - 2);
            frac[ax] = point[ax] - i0[ax] as f64;
        }
        let stride_h = size[2];
        let stride_d = size[1] * size[2];
        let corner = |dd: usize, dh: usize, dw: usize| -> f64 {
            let d = (i0[0] + dd).min(size[0] - 1);
            let h = (i0[1] + dh).min(size[1] - 1);
            let w = (i0[2] + dw).min(size[2] - 1);
            self.data[d * stride_d + h * stride_h + w]
        };
        let (fd, fh, fw) = (frac[0], frac[1], frac[2]);
        let c00 = corner(0, 0, 0) * (1.0 - fw) + corner(0, 0, 1) * fw;
        let c01 = corner(0, 1, 0) * (1.0 - fw) + corner(0, 1, 1) * fw;
        let c10 = corner(1, 0, 0) * (1.0 - fw) + corner(1, 0, 1) * fw;
        let c11 = corner(1, 1, 0) * (1.0 - fw) + corner(1, 1, 1) * fw;
        let c0 = c00 * (1.0 - fh) + c01 * fh;
        let c1 = c10 * (1.0 - fh) + c11 * fh;
        Ok(c0 * (1.0 - fd) + c1 * fd)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.shape),
                got: format!("{:?}", other.shape),
            });
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Named roles for the axes of a feature map, in the fixed order
/// batch, time, channel, depth, height, width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AxisRole {
    Batch,
    Time,
    Channel,
    Depth,
    Height,
    Width,
}

const CANONICAL: [AxisRole; 6] = [
    AxisRole::Batch,
    AxisRole::Time,
    AxisRole::Channel,
    AxisRole::Depth,
    AxisRole::Height,
    AxisRole::Width,
];

/// A contiguous run of the canonical role order, e.g. `(C, D, H, W)` or
/// `(T, C, D, H, W)`. Distinguishes "stack on the channel axis" from
/// "stack on a temporal axis" when wiring architectures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisLayout {
    roles: Vec<AxisRole>,
}

impl AxisLayout {
    pub fn new(roles: &[AxisRole]) -> Result<Self> {
        if roles.is_empty() {
            return Err(Error::InvalidShape("layout needs at least one role".into()));
        }
        let start = CANONICAL
            .iter()
            .position(|r| *r == roles[0])
            .expect("role is canonical");
        if start + roles.len() > CANONICAL.len() || CANONICAL[start..start + roles.len()] != *roles
        {
            return Err(Error::InvalidShape(format!(
                "{roles:?} is not a contiguous run of {CANONICAL:?}"
            )));
        }
        Ok(AxisLayout {
            roles: roles.to_vec(),
        })
    }

    pub fn dhw() -> Self {
        AxisLayout::new(&[AxisRole::Depth, AxisRole::Height, AxisRole::Width]).unwrap()
    }

    pub fn cdhw() -> Self {
        AxisLayout::new(&[
            AxisRole::Channel,
            AxisRole::Depth,
            AxisRole::Height,
            AxisRole::Width,
        ])
        .unwrap()
    }

    pub fn tcdhw() -> Self {
        AxisLayout::new(&[
            AxisRole::Time,
            AxisRole::Channel,
            AxisRole::Depth,
            AxisRole::Height,
            AxisRole::Width,
        ])
        .unwrap()
    }

    pub fn rank(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[AxisRole] {
        &self.roles
    }

    pub fn index_of(&self, role: AxisRole) -> Option<usize> {
        self.roles.iter().position(|r| *r == role)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_zero_fill() {
        let t = Tensor::new(&[2, 3], Fill::Const(0.0)).unwrap();
        assert_eq!(t.shape(), &[2, 3]);
        assert_eq!(t.data(), &[0.0; 6]);
    }

    #[test]
    fn create_constant_fill() {
        let t = Tensor::new(&[4], Fill::Const(1.5)).unwrap();
        assert_eq!(t.data(), &[1.5, 1.5, 1.5, 1.5]);
    }

    #[test]
    fn seeded_fill_is_deterministic() {
        let spec = Fill::Uniform {
            seed: 7,
            lo: 0.0,
            hi: 1.0,
        };
        let a = Tensor::new(&[8], spec).unwrap();
        let b = Tensor::new(&[8], spec).unwrap();
        assert_eq!(a.data(), b.data());
        assert!(a.data().iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn zero_axis_rejected() {
        assert!(matches!(
            Tensor::new(&[2, 0, 3], Fill::Const(0.0)),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn row_major_linearization_exhaustive() {
        let t = Tensor::from_vec(&[2, 3, 4], (0..24).map(|v| v as f64).collect()).unwrap();
        let strides = t.strides();
        assert_eq!(strides, vec![12, 4, 1]);
        for d in 0..2 {
            for h in 0..3 {
                for w in 0..4 {
                    let lin = d * strides[0] + h * strides[1] + w * strides[2];
                    assert_eq!(t.at(&[d, h, w]), t.data()[lin]);
                    assert_eq!(t.at(&[d, h, w]), (d * 12 + h * 4 + w) as f64);
                }
            }
        }
    }

    #[test]
    fn concat_shapes_and_roundtrip() {
        let a = Tensor::new(
            &[1, 4, 4, 4],
            Fill::Uniform {
                seed: 1,
                lo: -1.0,
                hi: 1.0,
            },
        )
        .unwrap();
        let b = Tensor::new(
            &[1, 4, 4, 4],
            Fill::Uniform {
                seed: 2,
                lo: -1.0,
                hi: 1.0,
            },
        )
        .unwrap();
        let cat = Tensor::concat(&[&a, &b], 0).unwrap();
        assert_eq!(cat.shape(), &[2, 4, 4, 4]);
        assert_eq!(cat.slice_axis(0, 0, 1).unwrap(), a);
        assert_eq!(cat.slice_axis(0, 1, 1).unwrap(), b);

        // on an interior axis too
        let cat1 = Tensor::concat(&[&a, &b], 1).unwrap();
        assert_eq!(cat1.shape(), &[1, 8, 4, 4]);
        assert_eq!(cat1.slice_axis(1, 0, 4).unwrap(), a);
        assert_eq!(cat1.slice_axis(1, 4, 4).unwrap(), b);
    }

    #[test]
    fn concat_single_is_identity() {
        let a = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(Tensor::concat(&[&a], 1).unwrap(), a);
    }

    #[test]
    fn concat_mismatch_rejected() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 4]);
        assert!(Tensor::concat(&[&a, &b], 0).is_err());
        let c = Tensor::zeros(&[2, 3, 1]);
        assert!(Tensor::concat(&[&a, &c], 0).is_err());
    }

    #[test]
    fn reverse_axis_flips_indexing() {
        let t = Tensor::new(
            &[2, 3, 4],
            Fill::Uniform {
                seed: 21,
                lo: -1.0,
                hi: 1.0,
            },
        )
        .unwrap();
        for axis in 0..3 {
            let r = t.reverse_axis(axis).unwrap();
            assert_eq!(r.shape(), t.shape());
            for i in 0..2 {
                for j in 0..3 {
                    for k in 0..4 {
                        let mut idx = [i, j, k];
                        idx[axis] = t.shape()[axis] - 1 - idx[axis];
                        assert_eq!(r.at(&[i, j, k]), t.at(&idx));
                    }
                }
            }
            assert_eq!(r.reverse_axis(axis).unwrap(), t);
        }
        assert!(t.reverse_axis(3).is_err());
    }

    #[test]
    fn reduce_mean_constant_and_vector() {
        let c = Tensor::full(&[3, 5], 2.25).unwrap();
        let m = c.reduce_mean(&[1]).unwrap();
        assert_eq!(m.shape(), &[3]);
        assert!(m.data().iter().all(|&v| v == 2.25));

        let v = Tensor::from_vec(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = v.reduce_mean(&[0]).unwrap();
        assert_eq!(m.shape(), &[1]);
        assert!((m.data()[0] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn reduce_mean_matches_naive_rows() {
        let t = Tensor::new(
            &[3, 5],
            Fill::Uniform {
                seed: 11,
                lo: -2.0,
                hi: 2.0,
            },
        )
        .unwrap();
        let m = t.reduce_mean(&[1]).unwrap();
        for r in 0..3 {
            let mut sum = 0.0;
            for c in 0..5 {
                sum += t.at(&[r, c]);
            }
            assert!((m.data()[r] - sum / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reduce_mean_all_axes_equals_total_mean() {
        let t = Tensor::new(
            &[2, 3, 4],
            Fill::Uniform {
                seed: 3,
                lo: 0.0,
                hi: 1.0,
            },
        )
        .unwrap();
        let m = t.reduce_mean(&[0, 1, 2]).unwrap();
        assert_eq!(m.shape(), &[1]);
        assert!((m.data()[0] - t.sum() / 24.0).abs() < 1e-12);
    }

    #[test]
    fn reduce_mean_duplicate_axis_rejected() {
        let t = Tensor::zeros(&[2, 2]);
        assert!(matches!(
            t.reduce_mean(&[1, 1]),
            Err(Error::InvalidAxis { .. })
        ));
        assert!(matches!(
            t.reduce_mean(&[2]),
            Err(Error::InvalidAxis { .. })
        ));
    }

    #[test]
    fn trilinear_exact_at_nodes_and_midpoint() {
        let v = Tensor::from_vec(&[2, 1, 1], vec![2.0, 4.0]).unwrap();
        assert_eq!(v.trilinear_sample([0.0, 0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(v.trilinear_sample([1.0, 0.0, 0.0]).unwrap(), 4.0);
        assert_eq!(v.trilinear_sample([0.5, 0.0, 0.0]).unwrap(), 3.0);
    }

    #[test]
    fn trilinear_matches_corner_weight_oracle() {
        let v = Tensor::new(
            &[4, 4, 4],
            Fill::Uniform {
                seed: 5,
                lo: 0.0,
                hi: 1.0,
            },
        )
        .unwrap();
        let p = [1.3, 2.7, 0.4];
        // independent 8-corner weighted sum
        let (i, j, k) = (1usize, 2usize, 0usize);
        let (fd, fh, fw) = (0.3, 0.7, 0.4);
        let mut expect = 0.0;
        for (dd, wd) in [(0, 1.0 - fd), (1, fd)] {
            for (dh, wh) in [(0, 1.0 - fh), (1, fh)] {
                for (dw, ww) in [(0, 1.0 - fw), (1, fw)] {
                    expect += wd * wh * ww * v.at(&[i + dd, j + dh, k + dw]);
                }
            }
        }
        let got = v.trilinear_sample(p).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn trilinear_reproduces_affine_fields() {
        // f(d,h,w) = 0.5 + 2d - 3h + 0.25w is reproduced exactly.
        let mut v = Tensor::zeros(&[5, 6, 7]);
        for d in 0..5 {
            for h in 0..6 {
                for w in 0..7 {
                    v.set(
                        &[d, h, w],
                        0.5 + 2.0 * d as f64 - 3.0 * h as f64 + 0.25 * w as f64,
                    );
                }
            }
        }
        for p in [[0.1, 4.9, 3.3], [3.99, 0.0, 6.0], [2.5, 2.5, 2.5]] {
            let want = 0.5 + 2.0 * p[0] - 3.0 * p[1] + 0.25 * p[2];
            let got = v.trilinear_sample(p).unwrap();
            assert!((got - want).abs() < 1e-10, "{got} vs {want} at {p:?}");
        }
    }

    #[test]
    fn trilinear_out_of_bounds_rejected() {
        let v = Tensor::zeros(&[3, 3, 3]);
        assert!(matches!(
            v.trilinear_sample([-0.01, 0.0, 0.0]),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(matches!(
            v.trilinear_sample([0.0, 2.01, 0.0]),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn layout_accepts_contiguous_runs_only() {
        assert!(AxisLayout::new(&[AxisRole::Depth, AxisRole::Height, AxisRole::Width]).is_ok());
        assert!(AxisLayout::tcdhw().index_of(AxisRole::Time) == Some(0));
        // gap: time then depth skips channel
        assert!(AxisLayout::new(&[AxisRole::Time, AxisRole::Depth]).is_err());
        // wrong order
        assert!(AxisLayout::new(&[AxisRole::Width, AxisRole::Height]).is_err());
        // duplicate
        assert!(AxisLayout::new(&[AxisRole::Depth, AxisRole::Depth]).is_err());
    }
}
