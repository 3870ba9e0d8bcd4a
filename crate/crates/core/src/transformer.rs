//! Multi-resolution graph transformer: view fusion, adjacency-biased local
//! attention, graph convolution, cross-resolution pooling, classification.

use crate::error::{Error, Result};
use crate::params::{Bound, ParamId};
use crate::scalar::Scalar;
use crate::tensor::Var;

/// Query/key projections `[T_m×g]` (+ bias `[g]`) for the node similarity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalAttentionParams {
    pub query: ParamId,
    pub query_bias: ParamId,
    pub key: ParamId,
    pub key_bias: ParamId,
    pub width: usize,
}

/// Graph-convolution weight `[T_m×T_m]` and bias `[T_m]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphConvParams {
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderLayerParams {
    pub attention: LocalAttentionParams,
    pub conv: GraphConvParams,
}

/// Per-resolution projection `[T_m×D]` (+ bias `[D]`) onto the shared pooling width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlignParams {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// `[C·D×K]` weight and `[K]` bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassifierParams {
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

/// Validated class distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassProbabilities<S> {
    probs: Vec<S>,
}

impl<S: Scalar> ClassProbabilities<S> {
    pub fn new(probs: Vec<S>) -> Result<Self> {
        let total: S = probs.iter().copied().sum();
        if probs.is_empty()
            || probs.iter().any(|p| !p.is_finite() || *p < S::zero())
            || (total - S::one()).abs() > S::cast(1e-9)
        {
            return Err(Error::Numeric(format!(
                "class probabilities must be a distribution, got {probs:?}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn as_slice(&self) -> &[S] {
        &self.probs
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    /// Index of the largest probability; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

pub fn fuse_views<'t, S: Scalar>(x_da: Var<'t, S>, x_fc: Var<'t, S>) -> Result<Var<'t, S>> {
    x_da.add(&x_fc)
}

/// Result of one local attention pass: `(α·x, α)`.
#[derive(Clone, Copy, Debug)]
pub struct LocalAttentionOutput<'t, S> {
    pub attended: Var<'t, S>,
    pub weights: Var<'t, S>,
}

/// `α_pq = softmax_q(g(x_p, x_q) · A_pq)`, `g` the scaled dot product of
/// projected node features, over all `C` nodes; output `α·x`.
pub fn local_graph_attention<'t, S: Scalar>(
    x: Var<'t, S>,
    adjacency: Var<'t, S>,
    params: &LocalAttentionParams,
    bound: &Bound<'t, '_, S>,
) -> Result<LocalAttentionOutput<'t, S>> {
    let (c, _) = x.value().dims2()?;
    if adjacency.shape() != [c, c] {
        return Err(Error::dim(
            "local_graph_attention",
            format!("{c} nodes with adjacency {:?}", adjacency.shape()),
        ));
    }
    let q = x
        .matmul(&bound.var(params.query))?
        .add_row_bias(&bound.var(params.query_bias))?;
    let k = x
        .matmul(&bound.var(params.key))?
        .add_row_bias(&bound.var(params.key_bias))?;
    let scale = S::one() / S::from_usize_exact(params.width).sqrt();
    let logits = q.matmul(&k.transpose()?)?.scale(scale).mul(&adjacency)?;
    if !logits.value().all_finite() {
        return Err(Error::Numeric("non-finite local attention logits".into()));
    }
    let weights = logits.softmax(1)?;
    Ok(LocalAttentionOutput {
        attended: weights.matmul(&x)?,
        weights,
    })
}

/// `act(Â · x · W + b)`
pub fn graph_convolution<'t, S: Scalar>(
    adjacency_norm: Var<'t, S>,
    x: Var<'t, S>,
    weight: Var<'t, S>,
    bias: Option<Var<'t, S>>,
    activation: Activation,
) -> Result<Var<'t, S>> {
    let mut out = adjacency_norm.matmul(&x)?.matmul(&weight)?;
    if let Some(b) = bias {
        out = out.add_row_bias(&b)?;
    }
    Ok(match activation {
        Activation::Relu => out.relu(),
        Activation::Identity => out,
    })
}

/// Projects each `[C×T_m]` to `[C×D]` and averages over resolutions.
pub fn cross_resolution_pool<'t, S: Scalar>(
    xs: &[Var<'t, S>],
    aligns: &[AlignParams],
    bound: &Bound<'t, '_, S>,
) -> Result<Var<'t, S>> {
    if xs.is_empty() || xs.len() != aligns.len() {
        return Err(Error::dim(
            "cross_resolution_pool",
            format!("{} inputs with {} alignment projections", xs.len(), aligns.len()),
        ));
    }
    let mut total: Option<Var<'t, S>> = None;
    for (x, a) in xs.iter().zip(aligns) {
        let projected = x
            .matmul(&bound.var(a.weight))?
            .add_row_bias(&bound.var(a.bias))?;
        total = Some(match total {
            None => projected,
            Some(t) => t.add(&projected)?,
        });
    }
    Ok(total
        .expect("non-empty")
        .scale(S::one() / S::from_usize_exact(xs.len())))
}

/// Flattens `[C×D]` and applies the classifier: logits `[1×K]`.
pub fn classifier_logits<'t, S: Scalar>(
    fused: Var<'t, S>,
    head: &ClassifierParams,
    bound: &Bound<'t, '_, S>,
) -> Result<Var<'t, S>> {
    let n = fused.value().len();
    let w = bound.var(head.weight);
    if w.shape()[0] != n {
        return Err(Error::dim(
            "classify",
            format!("flattened width {n} with head {:?}", w.shape()),
        ));
    }
    fused
        .reshape(&[1, n])?
        .matmul(&w)?
        .add_row_bias(&bound.var(head.bias))
}

pub fn classify<'t, S: Scalar>(
    fused: Var<'t, S>,
    head: &ClassifierParams,
    bound: &Bound<'t, '_, S>,
) -> Result<ClassProbabilities<S>> {
    let probs = classifier_logits(fused, head, bound)?.softmax(1)?;
    let data = probs.to_tensor().into_data();
    ClassProbabilities::new(data)
}
