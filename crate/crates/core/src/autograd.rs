//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! Every operation called on a [`Tape`] evaluates eagerly, stores its
//! output, and appends a node recording its inputs. [`Tape::backward`] walks
//! the nodes in reverse recording order, so the tape order is a valid
//! topological order by construction.
//!
//! Gradients accumulate: calling `backward` twice on the same tape adds the
//! second pass on top of the first. Use [`Tape::zero_grad`] to reset.

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::tensor::{self, gemm, gemm_nt, gemm_tn, split_axis, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<S> {
    Leaf,
    Add(Var, Var),
    AddSuffix(Var, Var),
    Mul(Var, Var),
    Scale(Var, S),
    MatMul(Var, Var),
    Bmm(Var, Var, bool),
    Softmax(Var, usize),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Tensor<S>,
        inv_std: Vec<S>,
    },
    Gelu(Var),
    Sigmoid(Var),
    Reshape(Var),
    Permute(Var, Vec<usize>),
    Concat(Vec<Var>, usize),
    Slice(Var, usize, usize),
    Mean(Var),
    Sum(Var),
    Bce(Var, Vec<S>),
}

#[derive(Debug, Clone)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    requires_grad: bool,
}

/// Recorded computation graph. Confined to one thread; build one tape per
/// forward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
    grads: Vec<Option<Tensor<S>>>,
}

/// Clamp applied to probabilities inside [`Tape::bce`].
pub const BCE_CLAMP: f64 = 1e-12;

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, requires_grad: bool) -> Var {
        debug_assert!(value.all_finite(), "non-finite value produced by {op:?}");
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Trainable input.
    pub fn leaf(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Accumulated gradient of `v`; zeros when nothing reached it.
    pub fn grad(&self, v: Var) -> Tensor<S> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(self.nodes[v.0].value.shape()),
        }
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::Add(a, b), rg))
    }

    /// `a + b` with `b` broadcast over `a`'s leading axes.
    pub fn add_suffix(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add_suffix(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::AddSuffix(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).mul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: S) -> Var {
        let v = self.value(a).scale(c);
        let rg = self.rg(&[a]);
        self.push(v, Op::Scale(a, c), rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::MatMul(a, b), rg))
    }

    /// `x · w + b` over the last axis of `x`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add_suffix(y, b)
    }

    pub fn bmm(&mut self, a: Var, b: Var, transpose_rhs: bool) -> Result<Var> {
        let v = self.value(a).bmm(self.value(b), transpose_rhs)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::Bmm(a, b, transpose_rhs), rg))
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let v = self.value(x).softmax(axis)?;
        let rg = self.rg(&[x]);
        Ok(self.push(v, Op::Softmax(x, axis), rg))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (v, xhat, inv_std) = self.value(x).layer_norm_parts(self.value(gamma), self.value(beta))?;
        let rg = self.rg(&[x, gamma, beta]);
        Ok(self.push(
            v,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.value(x).gelu();
        let rg = self.rg(&[x]);
        self.push(v, Op::Gelu(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).sigmoid();
        let rg = self.rg(&[x]);
        self.push(v, Op::Sigmoid(x), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x).reshape(shape)?;
        let rg = self.rg(&[x]);
        Ok(self.push(v, Op::Reshape(x), rg))
    }

    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let v = self.value(x).permute(axes)?;
        let rg = self.rg(&[x]);
        Ok(self.push(v, Op::Permute(x, axes.to_vec()), rg))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let v = {
            let ts: Vec<&Tensor<S>> = parts.iter().map(|&p| self.value(p)).collect();
            Tensor::concat(&ts, axis)?
        };
        let rg = self.rg(parts);
        Ok(self.push(v, Op::Concat(parts.to_vec(), axis), rg))
    }

    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let v = self.value(x).slice(axis, start, len)?;
        let rg = self.rg(&[x]);
        Ok(self.push(v, Op::Slice(x, axis, start), rg))
    }

    /// Mean over all elements, as a rank-0 tensor.
    pub fn mean(&mut self, x: Var) -> Var {
        let v = Tensor::scalar(self.value(x).mean());
        let rg = self.rg(&[x]);
        self.push(v, Op::Mean(x), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let v = Tensor::scalar(self.value(x).sum());
        let rg = self.rg(&[x]);
        self.push(v, Op::Sum(x), rg)
    }

    /// Mean binary cross-entropy of probabilities `p` against `labels`.
    /// Probabilities are clamped to `[1e-12, 1 - 1e-12]`; the gradient is
    /// zero where the clamp is active.
    pub fn bce(&mut self, p: Var, labels: &[S]) -> Result<Var> {
        let pv = self.value(p);
        if pv.numel() != labels.len() || labels.is_empty() {
            return Err(Error::dim("bce", pv.shape(), &[labels.len()]));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != S::zero() && y != S::one()) {
            return Err(Error::Contract(format!("label {bad} outside {{0, 1}}")));
        }
        let (lo, hi) = (S::of(BCE_CLAMP), S::one() - S::of(BCE_CLAMP));
        let m = S::of(labels.len() as f64);
        let mut total = S::zero();
        for (&pi, &y) in pv.data().iter().zip(labels) {
            let q = pi.max(lo).min(hi);
            total += y * q.ln() + (S::one() - y) * (S::one() - q).ln();
        }
        let rg = self.rg(&[p]);
        Ok(self.push(Tensor::scalar(-total / m), Op::Bce(p, labels.to_vec()), rg))
    }

    /// Reverse pass from a one-element `loss`, accumulating into every
    /// node's gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Tensor<S>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Tensor::ones(self.shape(loss)));
        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut adj)?;
            match &mut self.grads[i] {
                Some(acc) => acc.add_assign(&g)?,
                slot => *slot = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Tensor<S>, adj: &mut [Option<Tensor<S>>]) -> Result<()> {
        let node = &self.nodes[i];
        let val = |v: Var| &self.nodes[v.0].value;
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        let mut send = |v: Var, t: Tensor<S>| -> Result<()> {
            if !self.nodes[v.0].requires_grad {
                return Ok(());
            }
            match &mut adj[v.0] {
                Some(acc) => acc.add_assign(&t),
                slot => {
                    *slot = Some(t);
                    Ok(())
                }
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                send(*a, g.clone())?;
                send(*b, g.clone())?;
            }
            Op::AddSuffix(a, b) => {
                send(*a, g.clone())?;
                if needs(*b) {
                    send(*b, g.sum_to_suffix(val(*b).shape()))?;
                }
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    send(*a, g.mul(val(*b))?)?;
                }
                if needs(*b) {
                    send(*b, g.mul(val(*a))?)?;
                }
            }
            Op::Scale(a, c) => send(*a, g.scale(*c))?,
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (k, n) = (bv.shape()[0], bv.shape()[1]);
                let rows = av.numel() / k.max(1);
                if needs(*a) {
                    let mut da = vec![S::zero(); rows * k];
                    gemm_nt(g.data(), bv.data(), &mut da, rows, n, k);
                    send(*a, Tensor::new(av.shape(), da)?)?;
                }
                if needs(*b) {
                    let mut db = vec![S::zero(); k * n];
                    gemm_tn(av.data(), g.data(), &mut db, k, rows, n);
                    send(*b, Tensor::new(bv.shape(), db)?)?;
                }
            }
            Op::Bmm(a, b, trans) => {
                let (av, bv) = (val(*a), val(*b));
                let (bs, m, k) = (av.shape()[0], av.shape()[1], av.shape()[2]);
                let n = g.shape()[2];
                let mut da = vec![S::zero(); av.numel()];
                let mut db = vec![S::zero(); bv.numel()];
                for t in 0..bs {
                    let gb = &g.data()[t * m * n..(t + 1) * m * n];
                    let ab = &av.data()[t * m * k..(t + 1) * m * k];
                    let bb = &bv.data()[t * k * n..(t + 1) * k * n];
                    let dab = &mut da[t * m * k..(t + 1) * m * k];
                    let dbb = &mut db[t * k * n..(t + 1) * k * n];
                    if *trans {
                        // c = a·bᵀ, b is [n×k]
                        gemm(gb, bb, dab, m, n, k);
                        gemm_tn(gb, ab, dbb, n, m, k);
                    } else {
                        gemm_nt(gb, bb, dab, m, n, k);
                        gemm_tn(ab, gb, dbb, k, m, n);
                    }
                }
                if needs(*a) {
                    send(*a, Tensor::new(av.shape(), da)?)?;
                }
                if needs(*b) {
                    send(*b, Tensor::new(bv.shape(), db)?)?;
                }
            }
            Op::Softmax(x, axis) => {
                let y = &node.value;
                let (outer, len, inner) = split_axis(y.shape(), *axis);
                let mut dx = vec![S::zero(); y.numel()];
                for o in 0..outer {
                    for q in 0..inner {
                        let at = |j: usize| o * len * inner + j * inner + q;
                        let dot: S = (0..len).map(|j| g.data()[at(j)] * y.data()[at(j)]).sum();
                        for j in 0..len {
                            dx[at(j)] = y.data()[at(j)] * (g.data()[at(j)] - dot);
                        }
                    }
                }
                send(*x, Tensor::new(y.shape(), dx)?)?;
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let gam = val(*gamma);
                let d = gam.numel();
                let dn = S::of(d as f64);
                if needs(*gamma) {
                    send(*gamma, g.mul(xhat)?.sum_to_suffix(&[d]))?;
                }
                if needs(*beta) {
                    send(*beta, g.sum_to_suffix(&[d]))?;
                }
                if needs(*x) {
                    let mut dx = vec![S::zero(); g.numel()];
                    for (r, ((gr, hr), dr)) in g
                        .data()
                        .chunks(d)
                        .zip(xhat.data().chunks(d))
                        .zip(dx.chunks_mut(d))
                        .enumerate()
                    {
                        let mut s1 = S::zero();
                        let mut s2 = S::zero();
                        for j in 0..d {
                            let dh = gr[j] * gam.data()[j];
                            s1 += dh;
                            s2 += dh * hr[j];
                        }
                        let k = inv_std[r] / dn;
                        for j in 0..d {
                            let dh = gr[j] * gam.data()[j];
                            dr[j] = k * (dn * dh - s1 - hr[j] * s2);
                        }
                    }
                    send(*x, Tensor::new(g.shape(), dx)?)?;
                }
            }
            Op::Gelu(x) => {
                let xv = val(*x);
                send(*x, g.zip_map(xv, "gelu", |gi, xi| gi * tensor::gelu_grad(xi))?)?;
            }
            Op::Sigmoid(x) => {
                send(*x, g.zip_map(&node.value, "sigmoid", |gi, y| gi * y * (S::one() - y))?)?;
            }
            Op::Reshape(x) => send(*x, g.reshape(val(*x).shape())?)?,
            Op::Permute(x, axes) => {
                let mut inv = vec![0; axes.len()];
                for (i, &a) in axes.iter().enumerate() {
                    inv[a] = i;
                }
                send(*x, g.permute(&inv)?)?;
            }
            Op::Concat(parts, axis) => {
                let mut start = 0;
                for &p in parts {
                    let len = val(p).shape()[*axis];
                    if needs(p) {
                        send(p, g.slice(*axis, start, len)?)?;
                    }
                    start += len;
                }
            }
            Op::Slice(x, axis, start) => {
                let xv = val(*x);
                let (outer, full, inner) = split_axis(xv.shape(), *axis);
                let len = g.shape()[*axis];
                let mut dx = vec![S::zero(); xv.numel()];
                for o in 0..outer {
                    let src = &g.data()[o * len * inner..(o + 1) * len * inner];
                    let dst = o * full * inner + start * inner;
                    dx[dst..dst + len * inner].copy_from_slice(src);
                }
                send(*x, Tensor::new(xv.shape(), dx)?)?;
            }
            Op::Mean(x) => {
                let xv = val(*x);
                let c = g.item() / S::of(xv.numel() as f64);
                send(*x, Tensor::full(xv.shape(), c))?;
            }
            Op::Sum(x) => send(*x, Tensor::full(val(*x).shape(), g.item()))?,
            Op::Bce(p, labels) => {
                let pv = val(*p);
                let (lo, hi) = (S::of(BCE_CLAMP), S::one() - S::of(BCE_CLAMP));
                let m = S::of(labels.len() as f64);
                let gs = g.item();
                let dp = pv
                    .data()
                    .iter()
                    .zip(labels)
                    .map(|(&pi, &y)| {
                        if pi < lo || pi > hi {
                            S::zero()
                        } else {
                            -gs * (y / pi - (S::one() - y) / (S::one() - pi)) / m
                        }
                    })
                    .collect();
                send(*p, Tensor::new(pv.shape(), dp)?)?;
            }
        }
        Ok(())
    }
}

/// Location and values of the largest discrepancy found by [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradOffender {
    pub param: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_error: f64,
    pub worst: Option<GradOffender>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_error < self.tol
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} elements checked, max error {:.3e} (tol {:.1e})",
            self.checked, self.max_error, self.tol
        )?;
        if let Some(w) = &self.worst {
            write!(
                f,
                "; worst param {} elem {}: analytic {:.6e} numeric {:.6e}",
                w.param, w.index, w.analytic, w.numeric
            )?;
        }
        Ok(())
    }
}

/// Compare analytic gradients of `f` against central differences.
///
/// `f` receives a fresh tape and one leaf per entry of `params` and must
/// return a scalar loss. Each element's error is
/// `|analytic - numeric| / max(1, |analytic|)`.
pub fn grad_check<S, F>(f: F, params: &[Tensor<S>], h: S, tol: f64) -> Result<GradCheckReport>
where
    S: Scalar,
    F: Fn(&mut Tape<S>, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Tensor<S>]| -> Result<S> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.leaf(p.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        Ok(tape.value(loss).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor<S>> = vars.iter().map(|&v| tape.grad(v)).collect();

    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        checked: 0,
        max_error: 0.0,
        worst: None,
        tol,
    };
    for (pi, grad) in analytic.iter().enumerate() {
        for ei in 0..grad.numel() {
            let orig = work[pi].data()[ei];
            work[pi].data_mut()[ei] = orig + h;
            let up = eval(&work)?;
            work[pi].data_mut()[ei] = orig - h;
            let down = eval(&work)?;
            work[pi].data_mut()[ei] = orig;
            let numeric = ((up - down) / (h + h)).as_f64();
            let a = grad.data()[ei].as_f64();
            let err = (a - numeric).abs() / a.abs().max(1.0);
            report.checked += 1;
            if report.worst.as_ref().map_or(true, |w| err > w.error) {
                report.worst = Some(GradOffender {
                    param: pi,
                    index: ei,
                    analytic: a,
                    numeric,
                    error: err,
                });
            }
            report.max_error = report.max_error.max(err);
        }
    }
    Ok(report)
}
