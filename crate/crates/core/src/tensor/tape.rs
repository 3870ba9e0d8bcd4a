//! Dynamic reverse-mode tape.
//!
//! Every forward pass records onto a fresh [`Tape`]; [`Var`] is a cheap handle
//! into it. [`Tape::backward`] walks the recorded nodes in reverse creation
//! order, which is a valid topological order because a node can only reference
//! nodes created before it.

use std::cell::{Ref, RefCell};

use num_complex::Complex;

use super::{gemm_nt, gemm_tn, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral;

#[derive(Debug)]
enum Op<S> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, S),
    MatMul(usize, usize),
    Transpose(usize),
    AddRowBias(usize, usize),
    Relu(usize),
    Softmax {
        input: usize,
        outer: usize,
        axis: usize,
        inner: usize,
    },
    Sum(usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    Reshape(usize),
    DepthwiseConv {
        input: usize,
        kernels: usize,
        bias: usize,
    },
    TemporalDiff(usize),
    SymNormalize(usize),
    Rfft(usize),
    ComplexMul(usize, usize),
    Irfft(usize),
    CrossEntropy {
        logits: usize,
        labels: Vec<usize>,
        probs: Vec<S>,
    },
}

#[derive(Debug)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    needs_grad: bool,
}

/// Records operations for one forward pass.
#[derive(Debug, Default)]
pub struct Tape<S> {
    nodes: RefCell<Vec<Node<S>>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, S> {
    tape: &'t Tape<S>,
    id: usize,
}

impl<S> std::fmt::Debug for Var<'_, S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({})", self.id)
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a leaf. Gradients are tracked iff `tensor.requires_grad()`.
    pub fn leaf(&self, tensor: &Tensor<S>) -> Var<'_, S> {
        let needs_grad = tensor.requires_grad();
        let mut value = tensor.clone();
        value.zero_grad();
        self.push(value, Op::Leaf, needs_grad)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&self, tensor: Tensor<S>) -> Var<'_, S> {
        self.push(tensor.with_grad(false), Op::Leaf, false)
    }

    fn push(&self, value: Tensor<S>, op: Op<S>, needs_grad: bool) -> Var<'_, S> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn needs(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].needs_grad)
    }

    fn record(&self, value: Tensor<S>, op: Op<S>, parents: &[usize]) -> Var<'_, S> {
        let needs = self.needs(parents);
        self.push(value, op, needs)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_, S>) -> Result<Gradients<S>> {
        let nodes = self.nodes.borrow();
        if nodes[loss.id].value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                nodes[loss.id].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<S>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(vec![S::one()]);

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            propagate(&nodes, id, &g, &mut grads);
            grads[id] = Some(g);
        }

        let grads = grads
            .into_iter()
            .zip(nodes.iter())
            .map(|(g, n)| match n.op {
                Op::Leaf if n.needs_grad => {
                    Some(g.unwrap_or_else(|| vec![S::zero(); n.value.len()]))
                }
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }
}

fn acc<S: Scalar>(
    grads: &mut [Option<Vec<S>>],
    nodes: &[Node<S>],
    id: usize,
    f: impl FnOnce(&mut [S]),
) {
    if !nodes[id].needs_grad {
        return;
    }
    let slot = grads[id].get_or_insert_with(|| vec![S::zero(); nodes[id].value.len()]);
    f(slot);
}

fn propagate<S: Scalar>(nodes: &[Node<S>], id: usize, g: &[S], grads: &mut [Option<Vec<S>>]) {
    let node = &nodes[id];
    let val = |i: usize| nodes[i].value.data();
    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            acc(grads, nodes, *a, |ga| add_into(ga, g));
            acc(grads, nodes, *b, |gb| add_into(gb, g));
        }
        Op::Sub(a, b) => {
            acc(grads, nodes, *a, |ga| add_into(ga, g));
            acc(grads, nodes, *b, |gb| {
                for (o, &v) in gb.iter_mut().zip(g) {
                    *o -= v;
                }
            });
        }
        Op::Mul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            acc(grads, nodes, *a, |ga| {
                for ((o, &gv), &x) in ga.iter_mut().zip(g).zip(bv) {
                    *o += gv * x;
                }
            });
            acc(grads, nodes, *b, |gb| {
                for ((o, &gv), &x) in gb.iter_mut().zip(g).zip(av) {
                    *o += gv * x;
                }
            });
        }
        Op::Scale(a, s) => acc(grads, nodes, *a, |ga| {
            for (o, &gv) in ga.iter_mut().zip(g) {
                *o += gv * *s;
            }
        }),
        Op::MatMul(a, b) => {
            let (n, k) = nodes[*a].value.dims2().unwrap();
            let m = nodes[*b].value.shape()[1];
            let (av, bv) = (val(*a), val(*b));
            acc(grads, nodes, *a, |ga| gemm_nt(g, bv, ga, n, k, m));
            acc(grads, nodes, *b, |gb| gemm_tn(av, g, gb, n, k, m));
        }
        Op::Transpose(a) => {
            let (r, c) = nodes[*a].value.dims2().unwrap();
            acc(grads, nodes, *a, |ga| {
                for i in 0..r {
                    for j in 0..c {
                        ga[i * c + j] += g[j * r + i];
                    }
                }
            });
        }
        Op::AddRowBias(a, b) => {
            let m = nodes[*b].value.len();
            acc(grads, nodes, *a, |ga| add_into(ga, g));
            acc(grads, nodes, *b, |gb| {
                for row in g.chunks_exact(m) {
                    add_into(gb, row);
                }
            });
        }
        Op::Relu(a) => {
            let av = val(*a);
            acc(grads, nodes, *a, |ga| {
                for ((o, &gv), &x) in ga.iter_mut().zip(g).zip(av) {
                    if x > S::zero() {
                        *o += gv;
                    }
                }
            });
        }
        Op::Softmax {
            input,
            outer,
            axis,
            inner,
        } => {
            let y = node.value.data();
            let (outer, axis, inner) = (*outer, *axis, *inner);
            acc(grads, nodes, *input, |gx| {
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |a: usize| (o * axis + a) * inner + i;
                        let dot: S = (0..axis).map(|a| g[idx(a)] * y[idx(a)]).sum();
                        for a in 0..axis {
                            gx[idx(a)] += y[idx(a)] * (g[idx(a)] - dot);
                        }
                    }
                }
            });
        }
        Op::Sum(a) => acc(grads, nodes, *a, |ga| {
            for o in ga.iter_mut() {
                *o += g[0];
            }
        }),
        Op::ConcatCols(parts) => {
            let rows = node.value.shape()[0];
            let total = node.value.shape()[1];
            let mut offset = 0;
            for &p in parts {
                let w = nodes[p].value.shape()[1];
                acc(grads, nodes, p, |gp| {
                    for r in 0..rows {
                        add_into(
                            &mut gp[r * w..(r + 1) * w],
                            &g[r * total + offset..r * total + offset + w],
                        );
                    }
                });
                offset += w;
            }
        }
        Op::ConcatRows(parts) => {
            let mut offset = 0;
            for &p in parts {
                let n = nodes[p].value.len();
                acc(grads, nodes, p, |gp| add_into(gp, &g[offset..offset + n]));
                offset += n;
            }
        }
        Op::Reshape(a) => acc(grads, nodes, *a, |ga| add_into(ga, g)),
        Op::DepthwiseConv {
            input,
            kernels,
            bias,
        } => {
            let channels = nodes[*input].value.shape()[1];
            let k = nodes[*kernels].value.shape()[1];
            let out_len = node.value.shape()[0];
            let (xv, wv) = (val(*input), val(*kernels));
            acc(grads, nodes, *input, |gx| {
                for t in 0..out_len {
                    for c in 0..channels {
                        let gv = g[t * channels + c];
                        for j in 0..k {
                            gx[(t * k + j) * channels + c] += gv * wv[c * k + j];
                        }
                    }
                }
            });
            acc(grads, nodes, *kernels, |gw| {
                for t in 0..out_len {
                    for c in 0..channels {
                        let gv = g[t * channels + c];
                        for j in 0..k {
                            gw[c * k + j] += gv * xv[(t * k + j) * channels + c];
                        }
                    }
                }
            });
            acc(grads, nodes, *bias, |gb| {
                for row in g.chunks_exact(channels) {
                    add_into(gb, row);
                }
            });
        }
        Op::TemporalDiff(a) => {
            let (rows, len) = nodes[*a].value.dims2().unwrap();
            acc(grads, nodes, *a, |ga| {
                for r in 0..rows {
                    for t in 0..len.saturating_sub(1) {
                        let gv = g[r * len + t];
                        ga[r * len + t + 1] += gv;
                        ga[r * len + t] -= gv;
                    }
                }
            });
        }
        Op::SymNormalize(a) => {
            let n = nodes[*a].value.shape()[0];
            let av = val(*a);
            let deg: Vec<S> = av.chunks_exact(n).map(|r| r.iter().copied().sum()).collect();
            let r: Vec<S> = deg.iter().map(|d| d.sqrt().recip()).collect();
            let half = S::cast(0.5);
            acc(grads, nodes, *a, |ga| {
                for k in 0..n {
                    let mut through_degree = S::zero();
                    for j in 0..n {
                        through_degree += g[k * n + j] * av[k * n + j] * r[j];
                        through_degree += g[j * n + k] * av[j * n + k] * r[j];
                    }
                    let h = -half * r[k] / deg[k] * through_degree;
                    for l in 0..n {
                        ga[k * n + l] += g[k * n + l] * r[k] * r[l] + h;
                    }
                }
            });
        }
        Op::Rfft(a) => {
            let (rows, len) = nodes[*a].value.dims2().unwrap();
            let bins = len / 2 + 1;
            acc(grads, nodes, *a, |ga| {
                for r in 0..rows {
                    let upstream: Vec<Complex<S>> = (0..bins)
                        .map(|s| {
                            let base = (r * bins + s) * 2;
                            Complex::new(g[base], g[base + 1])
                        })
                        .collect();
                    let dx = spectral::rfft_adjoint(&upstream, len);
                    add_into(&mut ga[r * len..(r + 1) * len], &dx);
                }
            });
        }
        Op::ComplexMul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            acc(grads, nodes, *a, |ga| {
                for i in (0..g.len()).step_by(2) {
                    let (gr, gi, br, bi) = (g[i], g[i + 1], bv[i], bv[i + 1]);
                    ga[i] += gr * br + gi * bi;
                    ga[i + 1] += gi * br - gr * bi;
                }
            });
            acc(grads, nodes, *b, |gb| {
                for i in (0..g.len()).step_by(2) {
                    let (gr, gi, ar, ai) = (g[i], g[i + 1], av[i], av[i + 1]);
                    gb[i] += gr * ar + gi * ai;
                    gb[i + 1] += gi * ar - gr * ai;
                }
            });
        }
        Op::Irfft(a) => {
            let (rows, len) = node.value.dims2().unwrap();
            let bins = len / 2 + 1;
            acc(grads, nodes, *a, |ga| {
                for r in 0..rows {
                    let dspec = spectral::irfft_adjoint(&g[r * len..(r + 1) * len]);
                    for (s, z) in dspec.iter().enumerate() {
                        let base = (r * bins + s) * 2;
                        ga[base] += z.re;
                        ga[base + 1] += z.im;
                    }
                }
            });
        }
        Op::CrossEntropy {
            logits,
            labels,
            probs,
        } => {
            let k = nodes[*logits].value.shape()[1];
            let scale = g[0] / S::from_usize_exact(labels.len());
            acc(grads, nodes, *logits, |gl| {
                for (row, &label) in labels.iter().enumerate() {
                    for j in 0..k {
                        let onehot = if j == label { S::one() } else { S::zero() };
                        gl[row * k + j] += scale * (probs[row * k + j] - onehot);
                    }
                }
            });
        }
    }
}

fn add_into<S: Scalar>(dst: &mut [S], src: &[S]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Numerically stable softmax along `axis`, shared with untaped callers.
pub(crate) fn softmax_values<S: Scalar>(
    data: &[S],
    outer: usize,
    axis: usize,
    inner: usize,
) -> Vec<S> {
    let mut out = vec![S::zero(); data.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |a: usize| (o * axis + a) * inner + i;
            let max = (0..axis).map(|a| data[idx(a)]).fold(S::neg_infinity(), S::max);
            let mut total = S::zero();
            for a in 0..axis {
                let e = (data[idx(a)] - max).exp();
                out[idx(a)] = e;
                total += e;
            }
            for a in 0..axis {
                out[idx(a)] /= total;
            }
        }
    }
    out
}

fn same_shape<S: Scalar>(op: &'static str, a: &Tensor<S>, b: &Tensor<S>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

impl<'t, S: Scalar> Var<'t, S> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<S> {
        self.tape
    }

    /// Borrow of the recorded value. Drop it before recording new operations.
    pub fn value(&self) -> Ref<'t, Tensor<S>> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn to_tensor(&self) -> Tensor<S> {
        self.value().clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    fn binary(
        &self,
        other: &Var<'t, S>,
        name: &'static str,
        f: impl Fn(S, S) -> S,
        op: Op<S>,
    ) -> Result<Var<'t, S>> {
        let value = {
            let (a, b) = (self.value(), other.value());
            same_shape(name, &a, &b)?;
            let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::from_vec(a.shape(), data)?
        };
        Ok(self.tape.record(value, op, &[self.id, other.id]))
    }

    pub fn add(&self, other: &Var<'t, S>) -> Result<Var<'t, S>> {
        self.binary(other, "add", |a, b| a + b, Op::Add(self.id, other.id))
    }

    pub fn sub(&self, other: &Var<'t, S>) -> Result<Var<'t, S>> {
        self.binary(other, "sub", |a, b| a - b, Op::Sub(self.id, other.id))
    }

    /// Element-wise (Hadamard) product.
    pub fn mul(&self, other: &Var<'t, S>) -> Result<Var<'t, S>> {
        self.binary(other, "mul", |a, b| a * b, Op::Mul(self.id, other.id))
    }

    pub fn scale(&self, s: S) -> Var<'t, S> {
        let value = self.value().map(|v| v * s);
        self.tape.record(value, Op::Scale(self.id, s), &[self.id])
    }

    pub fn matmul(&self, other: &Var<'t, S>) -> Result<Var<'t, S>> {
        let value = super::matmul_plain(&self.value(), &other.value())?;
        Ok(self
            .tape
            .record(value, Op::MatMul(self.id, other.id), &[self.id, other.id]))
    }

    pub fn transpose(&self) -> Result<Var<'t, S>> {
        let value = self.value().transpose2()?;
        Ok(self.tape.record(value, Op::Transpose(self.id), &[self.id]))
    }

    /// Adds a length-`m` bias to every row of an `[n×m]` matrix.
    pub fn add_row_bias(&self, bias: &Var<'t, S>) -> Result<Var<'t, S>> {
        let value = {
            let (a, b) = (self.value(), bias.value());
            let (_, m) = a.dims2()?;
            if b.len() != m {
                return Err(Error::dim(
                    "add_row_bias",
                    format!("matrix {:?} with bias {:?}", a.shape(), b.shape()),
                ));
            }
            let mut data = a.data().to_vec();
            for row in data.chunks_exact_mut(m) {
                add_into(row, b.data());
            }
            Tensor::from_vec(a.shape(), data)?
        };
        Ok(self
            .tape
            .record(value, Op::AddRowBias(self.id, bias.id), &[self.id, bias.id]))
    }

    pub fn relu(&self) -> Var<'t, S> {
        let value = self.value().map(|v| if v > S::zero() { v } else { S::zero() });
        self.tape.record(value, Op::Relu(self.id), &[self.id])
    }

    /// Softmax along `axis`, stabilized by subtracting the per-slice maximum.
    pub fn softmax(&self, axis: usize) -> Result<Var<'t, S>> {
        let (value, outer, axis_len, inner) = {
            let a = self.value();
            let shape = a.shape();
            if axis >= shape.len() {
                return Err(Error::dim(
                    "softmax",
                    format!("axis {axis} out of range for shape {shape:?}"),
                ));
            }
            let outer: usize = shape[..axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            let data = softmax_values(a.data(), outer, shape[axis], inner);
            (Tensor::from_vec(shape, data)?, outer, shape[axis], inner)
        };
        let op = Op::Softmax {
            input: self.id,
            outer,
            axis: axis_len,
            inner,
        };
        Ok(self.tape.record(value, op, &[self.id]))
    }

    pub fn sum(&self) -> Var<'t, S> {
        let total = self.value().data().iter().copied().sum();
        self.tape
            .record(Tensor::scalar(total), Op::Sum(self.id), &[self.id])
    }

    pub fn mean(&self) -> Var<'t, S> {
        let n = S::from_usize_exact(self.value().len());
        self.sum().scale(S::one() / n)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t, S>> {
        let value = self.value().reshape(shape)?;
        Ok(self.tape.record(value, Op::Reshape(self.id), &[self.id]))
    }

    /// Forward difference along the last axis of a `[rows×len]` matrix; the final
    /// column is zero, equivalent to differencing after replicating the last column.
    pub fn temporal_difference(&self) -> Result<Var<'t, S>> {
        let value = {
            let a = self.value();
            let (rows, len) = a.dims2()?;
            let x = a.data();
            let mut out = vec![S::zero(); rows * len];
            for r in 0..rows {
                for t in 0..len - 1 {
                    out[r * len + t] = x[r * len + t + 1] - x[r * len + t];
                }
            }
            Tensor::from_vec(a.shape(), out)?
        };
        Ok(self.tape.record(value, Op::TemporalDiff(self.id), &[self.id]))
    }

    /// Symmetric degree normalization `D^{-1/2} A D^{-1/2}` of a square matrix
    /// whose row sums are all positive.
    pub fn sym_degree_normalize(&self) -> Result<Var<'t, S>> {
        let value = {
            let a = self.value();
            let (n, m) = a.dims2()?;
            if n != m {
                return Err(Error::dim(
                    "normalize_adjacency",
                    format!("adjacency must be square, got {:?}", a.shape()),
                ));
            }
            let r: Vec<S> = a
                .data()
                .chunks_exact(n)
                .map(|row| row.iter().copied().sum::<S>().sqrt().recip())
                .collect();
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric("degree normalization (non-positive degree)".into()));
            }
            let mut out = a.data().to_vec();
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] *= r[i] * r[j];
                }
            }
            Tensor::from_vec(a.shape(), out)?
        };
        Ok(self.tape.record(value, Op::SymNormalize(self.id), &[self.id]))
    }

    /// Per-row one-sided DFT of a `[rows×len]` matrix into `[rows×(len/2+1)×2]` (re, im).
    pub fn rfft_rows(&self) -> Result<Var<'t, S>> {
        let value = {
            let a = self.value();
            let (rows, len) = a.dims2()?;
            let bins = len / 2 + 1;
            let mut out = Vec::with_capacity(rows * bins * 2);
            for r in 0..rows {
                for z in spectral::rfft_bins(a.row(r)) {
                    out.push(z.re);
                    out.push(z.im);
                }
            }
            Tensor::from_vec(&[rows, bins, 2], out)?
        };
        Ok(self.tape.record(value, Op::Rfft(self.id), &[self.id]))
    }

    /// Inverse of [`Var::rfft_rows`]: `[rows×S×2]` back to `[rows×len]`.
    ///
    /// Imaginary parts of the DC bin (and of the Nyquist bin for even `len`)
    /// are ignored, as for any real-signal spectrum.
    pub fn irfft_rows(&self, len: usize) -> Result<Var<'t, S>> {
        let value = {
            let a = self.value();
            let shape = a.shape();
            if shape.len() != 3 || shape[2] != 2 || shape[1] != len / 2 + 1 {
                return Err(Error::dim(
                    "irfft",
                    format!("spectrum {shape:?} cannot invert to length {len}"),
                ));
            }
            let (rows, bins) = (shape[0], shape[1]);
            let mut out = Vec::with_capacity(rows * len);
            for r in 0..rows {
                let spec: Vec<Complex<S>> = (0..bins)
                    .map(|s| {
                        let base = (r * bins + s) * 2;
                        Complex::new(a.data()[base], a.data()[base + 1])
                    })
                    .collect();
                out.extend(spectral::irfft_bins(&spec, len));
            }
            Tensor::from_vec(&[rows, len], out)?
        };
        Ok(self.tape.record(value, Op::Irfft(self.id), &[self.id]))
    }

    /// Element-wise complex product of two `[..×2]` (re, im) tensors.
    pub fn complex_mul(&self, other: &Var<'t, S>) -> Result<Var<'t, S>> {
        let value = {
            let (a, b) = (self.value(), other.value());
            same_shape("complex_hadamard", &a, &b)?;
            if a.shape().last() != Some(&2) {
                return Err(Error::dim(
                    "complex_hadamard",
                    format!("trailing axis must hold (re, im), got {:?}", a.shape()),
                ));
            }
            let mut out = vec![S::zero(); a.len()];
            for i in (0..a.len()).step_by(2) {
                let (ar, ai, br, bi) = (a.data()[i], a.data()[i + 1], b.data()[i], b.data()[i + 1]);
                out[i] = ar * br - ai * bi;
                out[i + 1] = ar * bi + ai * br;
            }
            Tensor::from_vec(a.shape(), out)?
        };
        Ok(self
            .tape
            .record(value, Op::ComplexMul(self.id, other.id), &[self.id, other.id]))
    }

    /// Patch embedding: each channel of `[T×C]` is split into `floor(T/k)`
    /// non-overlapping windows and dotted with that channel's kernel row.
    pub fn depthwise_conv1d(
        &self,
        kernels: &Var<'t, S>,
        bias: &Var<'t, S>,
        stride: usize,
    ) -> Result<Var<'t, S>> {
        let value = {
            let (x, w, b) = (self.value(), kernels.value(), bias.value());
            let (t, c) = x.dims2()?;
            let (wc, k) = w.dims2()?;
            if wc != c || b.len() != c {
                return Err(Error::dim(
                    "depthwise_conv1d",
                    format!(
                        "input {:?}, kernels {:?}, bias {:?}",
                        x.shape(),
                        w.shape(),
                        b.shape()
                    ),
                ));
            }
            if stride != k {
                return Err(Error::Unsupported {
                    op: "depthwise_conv1d",
                    detail: format!("stride {stride} must equal kernel size {k}"),
                });
            }
            if t < k {
                return Err(Error::EmptyOutput {
                    op: "depthwise_conv1d",
                    detail: format!("length {t} is shorter than kernel size {k}"),
                });
            }
            let out_len = t / k;
            let (xv, wv, bv) = (x.data(), w.data(), b.data());
            let mut out = vec![S::zero(); out_len * c];
            for p in 0..out_len {
                for ch in 0..c {
                    let mut s = bv[ch];
                    for j in 0..k {
                        s += xv[(p * k + j) * c + ch] * wv[ch * k + j];
                    }
                    out[p * c + ch] = s;
                }
            }
            Tensor::from_vec(&[out_len, c], out)?
        };
        let op = Op::DepthwiseConv {
            input: self.id,
            kernels: kernels.id,
            bias: bias.id,
        };
        Ok(self
            .tape
            .record(value, op, &[self.id, kernels.id, bias.id]))
    }

    /// Mean cross-entropy of `[B×K]` logits against `labels`, via a fused log-softmax.
    pub fn cross_entropy(&self, labels: &[usize]) -> Result<Var<'t, S>> {
        let (loss, probs) = {
            let a = self.value();
            let (b, k) = a.dims2()?;
            if labels.len() != b {
                return Err(Error::dim(
                    "cross_entropy",
                    format!("{b} rows of logits for {} labels", labels.len()),
                ));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
                return Err(Error::Contract(format!(
                    "label {bad} out of range for {k} classes"
                )));
            }
            let probs = softmax_values(a.data(), b, k, 1);
            let mut total = S::zero();
            for (row, &label) in labels.iter().enumerate() {
                let logits = a.row(row);
                let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
                let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<S>().ln();
                total += lse - logits[label];
            }
            (total / S::from_usize_exact(b), probs)
        };
        let op = Op::CrossEntropy {
            logits: self.id,
            labels: labels.to_vec(),
            probs,
        };
        Ok(self.tape.record(Tensor::scalar(loss), op, &[self.id]))
    }
}

/// Horizontal concatenation of matrices with equal row counts.
pub fn concat_cols<'t, S: Scalar>(parts: &[Var<'t, S>]) -> Result<Var<'t, S>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
    let value = {
        let vals: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let rows = vals[0].dims2()?.0;
        let mut widths = Vec::with_capacity(vals.len());
        for v in &vals {
            let (r, c) = v.dims2()?;
            if r != rows {
                return Err(Error::dim(
                    "concat_cols",
                    format!("row counts {rows} vs {r}"),
                ));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for v in &vals {
                out.extend_from_slice(v.row(r));
            }
        }
        Tensor::from_vec(&[rows, total], out)?
    };
    let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
    Ok(first.tape.record(value, Op::ConcatCols(ids.clone()), &ids))
}

/// Vertical concatenation of matrices with equal column counts.
pub fn concat_rows<'t, S: Scalar>(parts: &[Var<'t, S>]) -> Result<Var<'t, S>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
    let value = {
        let vals: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let cols = vals[0].dims2()?.1;
        let mut rows = 0;
        let mut out = Vec::new();
        for v in &vals {
            let (r, c) = v.dims2()?;
            if c != cols {
                return Err(Error::dim(
                    "concat_rows",
                    format!("column counts {cols} vs {c}"),
                ));
            }
            rows += r;
            out.extend_from_slice(v.data());
        }
        Tensor::from_vec(&[rows, cols], out)?
    };
    let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
    Ok(first.tape.record(value, Op::ConcatRows(ids.clone()), &ids))
}

/// Leaf gradients from one backward pass, indexed by the leaf's [`Var`].
#[derive(Debug)]
pub struct Gradients<S> {
    grads: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of a trainable leaf; `None` for constants and interior nodes.
    pub fn wrt(&self, var: &Var<'_, S>) -> Option<&[S]> {
        self.grads.get(var.id).and_then(|g| g.as_deref())
    }

    /// Stores the gradient of `var` into `tensor.grad`.
    pub fn write_into(&self, var: &Var<'_, S>, tensor: &mut Tensor<S>) -> Result<()> {
        let g = self
            .wrt(var)
            .ok_or_else(|| Error::Contract(format!("{var:?} is not a trainable leaf")))?;
        tensor.set_grad(g.to_vec())
    }
}
