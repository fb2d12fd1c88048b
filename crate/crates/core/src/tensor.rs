//! Dense row-major tensors and the raw (non-recording) kernels behind every
//! differentiable op in [`crate::autograd`].

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Epsilon added to the variance in [`Tensor::layer_norm`].
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Row-major contiguous n-dimensional array.
///
/// Invariant: `shape.iter().product() == data.len()`. A rank-0 tensor has an
/// empty shape and one element.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: &[usize], data: Vec<S>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim("new", shape, &[data.len()]));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, S::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, S::one())
    }

    pub fn full(shape: &[usize], v: S) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn scalar(v: S) -> Self {
        Self {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> S) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    /// Identity matrix `n × n`.
    pub fn eye(n: usize) -> Self {
        Self::from_fn(&[n, n], |i| if i / n == i % n { S::one() } else { S::zero() })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> S {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(S, S) -> S) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::dim(op, &self.shape, &other.shape));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, c: S) -> Self {
        self.map(|v| v * c)
    }

    /// In-place `self += other` (same shape).
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim("add_assign", &self.shape, &other.shape));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Broadcast add where `other`'s shape is a suffix of `self`'s shape
    /// (bias vectors, positional tables).
    pub fn add_suffix(&self, other: &Self) -> Result<Self> {
        let k = other.ndim();
        if k > self.ndim() || self.shape[self.ndim() - k..] != other.shape[..] {
            return Err(Error::dim("add_suffix", &self.shape, &other.shape));
        }
        let inner = other.numel();
        let mut out = self.clone();
        for chunk in out.data.chunks_mut(inner.max(1)) {
            for (a, &b) in chunk.iter_mut().zip(&other.data) {
                *a += b;
            }
        }
        Ok(out)
    }

    /// Sum over the leading axes down to `suffix` shape; the adjoint of
    /// [`Tensor::add_suffix`].
    pub fn sum_to_suffix(&self, suffix: &[usize]) -> Self {
        let inner: usize = suffix.iter().product();
        let mut out = vec![S::zero(); inner];
        for chunk in self.data.chunks(inner.max(1)) {
            for (a, &b) in out.iter_mut().zip(chunk) {
                *a += b;
            }
        }
        Self {
            shape: suffix.to_vec(),
            data: out,
        }
    }

    pub fn sum(&self) -> S {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> S {
        self.sum() / S::of(self.numel() as f64)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.numel() {
            return Err(Error::dim("reshape", &self.shape, shape));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    /// Materialising axis permutation: output axis `i` is input axis
    /// `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let nd = self.ndim();
        let mut seen = vec![false; nd];
        if axes.len() != nd || axes.iter().any(|&a| a >= nd || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::dim("permute", &self.shape, axes));
        }
        let in_strides = strides(&self.shape);
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let src_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let mut data = Vec::with_capacity(self.numel());
        let mut idx = vec![0usize; nd];
        let mut offset = 0usize;
        for _ in 0..self.numel() {
            data.push(self.data[offset]);
            for d in (0..nd).rev() {
                idx[d] += 1;
                offset += src_strides[d];
                if idx[d] < out_shape[d] {
                    break;
                }
                offset -= src_strides[d] * idx[d];
                idx[d] = 0;
            }
        }
        Ok(Self {
            shape: out_shape,
            data,
        })
    }

    /// Concatenate along `axis`; all other dims must agree.
    pub fn concat(parts: &[&Self], axis: usize) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        if axis >= first.ndim() {
            return Err(Error::dim("concat", &first.shape, &[axis]));
        }
        for p in parts {
            let same = p.ndim() == first.ndim()
                && p.shape
                    .iter()
                    .zip(&first.shape)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !same {
                return Err(Error::dim("concat", &first.shape, &p.shape));
            }
        }
        let outer: usize = first.shape[..axis].iter().product();
        let inner: usize = first.shape[axis + 1..].iter().product();
        let mut shape = first.shape.clone();
        shape[axis] = parts.iter().map(|p| p.shape[axis]).sum();
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for p in parts {
                let block = p.shape[axis] * inner;
                data.extend_from_slice(&p.data[o * block..(o + 1) * block]);
            }
        }
        Ok(Self { shape, data })
    }

    /// Sub-range `[start, start + len)` along `axis`.
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Self> {
        if axis >= self.ndim() || start + len > self.shape[axis] {
            return Err(Error::dim("slice", &self.shape, &[axis, start, len]));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let block = self.shape[axis] * inner;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * block + start * inner;
            data.extend_from_slice(&self.data[base..base + len * inner]);
        }
        let mut shape = self.shape.clone();
        shape[axis] = len;
        Ok(Self { shape, data })
    }

    /// Matrix product contracting the last axis of `self` with the first
    /// axis of a 2-D `rhs`: `[.., m, k] · [k, n] -> [.., m, n]`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.ndim() < 1 || rhs.ndim() != 2 || self.shape[self.ndim() - 1] != rhs.shape[0] {
            return Err(Error::dim("matmul", &self.shape, &rhs.shape));
        }
        let k = rhs.shape[0];
        let n = rhs.shape[1];
        let rows = self.numel() / k.max(1);
        let mut data = vec![S::zero(); rows * n];
        gemm(&self.data, &rhs.data, &mut data, rows, k, n);
        let mut shape = self.shape.clone();
        *shape.last_mut().unwrap() = n;
        Ok(Self { shape, data })
    }

    /// Batched matrix product over the leading axis: `[g, m, k] · [g, k, n]`,
    /// or `[g, m, k] · [g, n, k]ᵀ` when `transpose_rhs`.
    pub fn bmm(&self, rhs: &Self, transpose_rhs: bool) -> Result<Self> {
        if self.ndim() != 3 || rhs.ndim() != 3 || self.shape[0] != rhs.shape[0] {
            return Err(Error::dim("bmm", &self.shape, &rhs.shape));
        }
        let (g, m, k) = (self.shape[0], self.shape[1], self.shape[2]);
        let (rk, n) = if transpose_rhs {
            (rhs.shape[2], rhs.shape[1])
        } else {
            (rhs.shape[1], rhs.shape[2])
        };
        if rk != k {
            return Err(Error::dim("bmm", &self.shape, &rhs.shape));
        }
        let mut data = vec![S::zero(); g * m * n];
        for b in 0..g {
            let a = &self.data[b * m * k..(b + 1) * m * k];
            let r = &rhs.data[b * k * n..(b + 1) * k * n];
            let c = &mut data[b * m * n..(b + 1) * m * n];
            if transpose_rhs {
                gemm_nt(a, r, c, m, k, n);
            } else {
                gemm(a, r, c, m, k, n);
            }
        }
        Ok(Self {
            shape: vec![g, m, n],
            data,
        })
    }

    /// Swap the last two axes.
    pub fn transpose_last2(&self) -> Result<Self> {
        let nd = self.ndim();
        if nd < 2 {
            return Err(Error::dim("transpose", &self.shape, &[]));
        }
        let mut axes: Vec<usize> = (0..nd).collect();
        axes.swap(nd - 2, nd - 1);
        self.permute(&axes)
    }

    /// Numerically stable softmax along `axis` (per-slice max subtracted).
    pub fn softmax(&self, axis: usize) -> Result<Self> {
        if axis >= self.ndim() {
            return Err(Error::dim("softmax", &self.shape, &[axis]));
        }
        let (outer, len, inner) = split_axis(&self.shape, axis);
        let mut out = self.clone();
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| o * len * inner + j * inner + i;
                let mut max = S::neg_infinity();
                for j in 0..len {
                    max = max.max(self.data[at(j)]);
                }
                let mut total = S::zero();
                for j in 0..len {
                    let e = (self.data[at(j)] - max).exp();
                    out.data[at(j)] = e;
                    total += e;
                }
                for j in 0..len {
                    out.data[at(j)] /= total;
                }
            }
        }
        Ok(out)
    }

    /// Layer normalisation over the last axis with affine `gamma`, `beta`
    /// (both of the last axis' length).
    pub fn layer_norm(&self, gamma: &Self, beta: &Self) -> Result<Self> {
        Ok(self.layer_norm_parts(gamma, beta)?.0)
    }

    /// Returns `(output, normalised input, 1/std per row)`.
    pub(crate) fn layer_norm_parts(&self, gamma: &Self, beta: &Self) -> Result<(Self, Self, Vec<S>)> {
        let d = *self.shape.last().ok_or_else(|| Error::dim("layer_norm", &self.shape, &[]))?;
        if gamma.shape != [d] || beta.shape != [d] {
            return Err(Error::dim("layer_norm", &self.shape, &gamma.shape));
        }
        let eps = S::of(LAYER_NORM_EPS);
        let dn = S::of(d as f64);
        let mut out = self.clone();
        let mut xhat = self.clone();
        let mut inv = Vec::with_capacity(self.numel() / d.max(1));
        for (row, (o, h)) in self
            .data
            .chunks(d)
            .zip(out.data.chunks_mut(d).zip(xhat.data.chunks_mut(d)))
        {
            let mean = row.iter().copied().sum::<S>() / dn;
            let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<S>() / dn;
            let is = S::one() / (var + eps).sqrt();
            for j in 0..d {
                h[j] = (row[j] - mean) * is;
                o[j] = h[j] * gamma.data[j] + beta.data[j];
            }
            inv.push(is);
        }
        Ok((out, xhat, inv))
    }

    pub fn gelu(&self) -> Self {
        self.map(gelu)
    }

    pub fn sigmoid(&self) -> Self {
        self.map(sigmoid)
    }
}

/// tanh-approximated GELU: `0.5 x (1 + tanh(√(2/π)(x + 0.044715 x³)))`.
pub fn gelu<S: Scalar>(x: S) -> S {
    let c = S::of((2.0 / std::f64::consts::PI).sqrt());
    let half = S::of(0.5);
    half * x * (S::one() + (c * (x + S::of(0.044715) * x * x * x)).tanh())
}

pub fn gelu_grad<S: Scalar>(x: S) -> S {
    let c = S::of((2.0 / std::f64::consts::PI).sqrt());
    let half = S::of(0.5);
    let a = S::of(0.044715);
    let u = c * (x + a * x * x * x);
    let t = u.tanh();
    let du = c * (S::one() + S::of(3.0) * a * x * x);
    half * (S::one() + t) + half * x * (S::one() - t * t) * du
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

/// `(outer, axis_len, inner)` element counts around `axis`.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (
        shape[..axis].iter().product(),
        shape[axis],
        shape[axis + 1..].iter().product(),
    )
}

/// `c += a[m×k] · b[k×n]`
pub(crate) fn gemm<S: Scalar>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == S::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// `c += a[m×k] · b[n×k]ᵀ`
pub(crate) fn gemm_nt<S: Scalar>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = S::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            c[i * n + j] += acc;
        }
    }
}

/// `c += a[k×m]ᵀ · b[k×n]`
pub(crate) fn gemm_tn<S: Scalar>(a: &[S], b: &[S], c: &mut [S], m: usize, k: usize, n: usize) {
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = a[p * m + i];
            if av == S::zero() {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn rand(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut r = SplitMix64::new(seed);
        Tensor::from_fn(shape, |_| r.normal())
    }

    fn triple_loop(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s += a.data()[i * k + p] * b.data()[p * n + j];
                }
                out.data_mut()[i * n + j] = s;
            }
        }
        out
    }

    #[test]
    fn matmul_identity_and_scalar() {
        let b = rand(&[3, 3], 1);
        assert_eq!(Tensor::eye(3).matmul(&b).unwrap(), b);
        let a = Tensor::new(&[1, 1], vec![2.0]).unwrap();
        let c = Tensor::new(&[1, 1], vec![3.0]).unwrap();
        assert_eq!(a.matmul(&c).unwrap().data(), &[6.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let a = rand(&[4, 5], 2);
        let b = rand(&[5, 3], 3);
        let got = a.matmul(&b).unwrap();
        let want = triple_loop(&a, &b);
        for (x, y) in got.data().iter().zip(want.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_shape_error_names_both() {
        let e = rand(&[2, 3], 1).matmul(&rand(&[4, 2], 1)).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 2]"), "{msg}");
    }

    #[test]
    fn bmm_transposed_agrees() {
        let a = rand(&[2, 3, 4], 4);
        let b = rand(&[2, 5, 4], 5);
        let bt = b.transpose_last2().unwrap();
        let x = a.bmm(&b, true).unwrap();
        let y = a.bmm(&bt, false).unwrap();
        for (p, q) in x.data().iter().zip(y.data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_examples() {
        let s = Tensor::<f64>::new(&[3], vec![0.0, 0.0, 0.0]).unwrap().softmax(0).unwrap();
        for v in s.data() {
            assert!((v - 1.0f64 / 3.0).abs() < 1e-15);
        }
        let s = Tensor::new(&[2], vec![0.0, 2f64.ln()]).unwrap().softmax(0).unwrap();
        assert!((s.data()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.data()[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_shift_invariance() {
        let x = rand(&[4, 6], 9);
        let base = x.softmax(1).unwrap();
        for c in [-3.0, 0.5, 1000.0] {
            let shifted = x.map(|v| v + c).softmax(1).unwrap();
            for (a, b) in base.data().iter().zip(shifted.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_middle_axis() {
        let x = rand(&[2, 5, 3], 11);
        let s = x.softmax(1).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                let t: f64 = (0..5).map(|j| s.data()[o * 15 + j * 3 + i]).sum();
                assert!((t - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layer_norm_examples() {
        let g = Tensor::ones(&[3]);
        let b = Tensor::zeros(&[3]);
        let c = Tensor::new(&[3], vec![5.0, 5.0, 5.0]).unwrap().layer_norm(&g, &b).unwrap();
        assert_eq!(c.data(), &[0.0, 0.0, 0.0]);

        // [1,2,3]: mean 2, population variance 2/3.
        let y = Tensor::new(&[3], vec![1.0, 2.0, 3.0]).unwrap().layer_norm(&g, &b).unwrap();
        let s = 1.0 / (2.0f64 / 3.0 + LAYER_NORM_EPS).sqrt();
        let want = [-s, 0.0, s];
        for (a, w) in y.data().iter().zip(want) {
            assert!((a - w).abs() < 1e-12);
        }
        let mean = y.mean();
        let var = y.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-4, "{var}");

        let seven = Tensor::full(&[3], 7.0);
        let z = Tensor::new(&[2, 3], vec![1.0, -4.0, 2.0, 0.3, 0.2, 9.0])
            .unwrap()
            .layer_norm(&Tensor::zeros(&[3]), &seven)
            .unwrap();
        assert!(z.data().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn layer_norm_unit_variance_for_spread_rows() {
        let x = rand(&[6, 16], 13).scale(10.0);
        let y = x.layer_norm(&Tensor::ones(&[16]), &Tensor::zeros(&[16])).unwrap();
        for row in y.data().chunks(16) {
            let m = row.iter().sum::<f64>() / 16.0;
            let v = row.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 16.0;
            assert!(m.abs() < 1e-9);
            assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn activations() {
        assert_eq!(gelu(0.0f64), 0.0);
        assert_eq!(sigmoid(0.0f64), 0.5);
        for x in [-1000.0, -3.0, -0.1, 0.7, 5.0, 1000.0f64] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
            assert!(gelu(x).is_finite() && sigmoid(x).is_finite());
        }
    }

    #[test]
    fn reshape_permute_round_trip() {
        let x = rand(&[2, 3, 4], 5);
        let back = x.reshape(&[6, 4]).unwrap().reshape(&[2, 3, 4]).unwrap();
        assert_eq!(back, x);
        let m = rand(&[3, 5], 6);
        assert_eq!(m.permute(&[1, 0]).unwrap().permute(&[1, 0]).unwrap(), m);
        assert!(x.reshape(&[5, 5]).is_err());
        assert_eq!(Tensor::<f64>::ones(&[3, 3]).mean(), 1.0);
    }

    #[test]
    fn permute_moves_elements() {
        let x = Tensor::from_fn(&[2, 3], |i| i as f64);
        let t = x.permute(&[1, 0]).unwrap();
        assert_eq!(t.shape(), &[3, 2]);
        assert_eq!(t.data(), &[0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
    }

    #[test]
    fn concat_and_slice_invert() {
        let a = rand(&[2, 3, 2], 1);
        let b = rand(&[2, 1, 2], 2);
        let c = Tensor::concat(&[&a, &b], 1).unwrap();
        assert_eq!(c.shape(), &[2, 4, 2]);
        assert_eq!(c.slice(1, 0, 3).unwrap(), a);
        assert_eq!(c.slice(1, 3, 1).unwrap(), b);
    }

    #[test]
    fn suffix_broadcast() {
        let x = Tensor::zeros(&[2, 3, 2]);
        let b = Tensor::new(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = x.add_suffix(&b).unwrap();
        assert_eq!(&y.data()[6..], b.data());
        assert_eq!(y.sum_to_suffix(&[3, 2]), b.scale(2.0));
        assert!(x.add_suffix(&Tensor::zeros(&[2])).is_ok());
        assert!(x.add_suffix(&Tensor::zeros(&[3])).is_err());
    }

    proptest! {
        #[test]
        fn permute_preserves_multiset(d0 in 1usize..4, d1 in 1usize..4, d2 in 1usize..4, seed in 0u64..1000) {
            let x = rand(&[d0, d1, d2], seed);
            let p = x.permute(&[2, 0, 1]).unwrap();
            let mut a = x.data().to_vec();
            let mut b = p.data().to_vec();
            a.sort_by(|u, v| u.partial_cmp(v).unwrap());
            b.sort_by(|u, v| u.partial_cmp(v).unwrap());
            prop_assert_eq!(a, b);
            let inv = p.permute(&[1, 2, 0]).unwrap();
            prop_assert_eq!(inv, x);
        }

        #[test]
        fn softmax_rows_stochastic(vals in proptest::collection::vec(-1000.0f64..1000.0, 1..24)) {
            let n = vals.len();
            let s = Tensor::new(&[n], vals).unwrap().softmax(0).unwrap();
            prop_assert!((s.sum() - 1.0).abs() < 1e-9);
            prop_assert!(s.data().iter().all(|&v| v >= 0.0));
        }
    }
}
