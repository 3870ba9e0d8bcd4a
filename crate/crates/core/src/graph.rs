//! Multi-resolution patch embeddings and per-resolution channel graphs.
//!
//! Each resolution `m` embeds the `[T×C]` recording with its own depthwise
//! kernel of size `k_m` (stride `k_m`), giving `T_m = floor(T/k_m)` steps.
//! The transposed embedding becomes the node-feature matrix of a graph whose
//! `C` nodes are the channels and whose adjacency is learned.

use crate::error::{Error, Result};
use crate::params::{Bound, ParamId};
use crate::scalar::Scalar;
use crate::tensor::{Tensor, Var};

/// The set of embedding kernel sizes, one per resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolutionSpec {
    kernel_sizes: Vec<usize>,
}

impl ResolutionSpec {
    pub fn new(kernel_sizes: Vec<usize>) -> Result<Self> {
        if kernel_sizes.is_empty() {
            return Err(Error::Config("at least one kernel size is required".into()));
        }
        if kernel_sizes.contains(&0) {
            return Err(Error::Config("kernel sizes must be positive".into()));
        }
        let mut sorted = kernel_sizes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != kernel_sizes.len() {
            return Err(Error::Config(format!(
                "kernel sizes must be distinct, got {kernel_sizes:?}"
            )));
        }
        Ok(Self { kernel_sizes })
    }

    pub fn kernel_sizes(&self) -> &[usize] {
        &self.kernel_sizes
    }

    pub fn len(&self) -> usize {
        self.kernel_sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernel_sizes.is_empty()
    }

    /// `T_m = floor(T / k_m)` for every resolution.
    pub fn embed_lengths(&self, time_steps: usize) -> Result<Vec<usize>> {
        self.kernel_sizes
            .iter()
            .enumerate()
            .map(|(m, &k)| {
                if k > time_steps {
                    Err(Error::EmptyOutput {
                        op: "multi_scale_embed",
                        detail: format!("kernel {k} of resolution {m} exceeds length {time_steps}"),
                    })
                } else {
                    Ok(time_steps / k)
                }
            })
            .collect()
    }
}

/// Kernel `[C×k_m]` and bias `[C]` of one resolution's patch embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmbeddingParams {
    pub kernel_size: usize,
    pub kernels: ParamId,
    pub bias: ParamId,
}

/// One resolution's graph: `C` nodes carrying `T_m`-long features.
#[derive(Clone, Copy, Debug)]
pub struct ResolutionGraph<'t, S> {
    pub node_features: Var<'t, S>,
    pub adjacency_raw: Var<'t, S>,
    pub resolution: usize,
}

/// Embeds `x: [T×C]` at every resolution, returning `[T_m×C]` per resolution.
pub fn multi_scale_embed<'t, S: Scalar>(
    x: Var<'t, S>,
    embeddings: &[EmbeddingParams],
    bound: &Bound<'t, '_, S>,
) -> Result<Vec<Var<'t, S>>> {
    embeddings
        .iter()
        .enumerate()
        .map(|(m, e)| {
            x.depthwise_conv1d(&bound.var(e.kernels), &bound.var(e.bias), e.kernel_size)
                .map_err(|err| err.in_stage("multi_scale_embed", m))
        })
        .collect()
}

pub fn build_resolution_graph<'t, S: Scalar>(
    embedding: Var<'t, S>,
    adjacency_raw: Var<'t, S>,
    resolution: usize,
) -> Result<ResolutionGraph<'t, S>> {
    let (_, channels) = embedding.value().dims2()?;
    let adj_shape = adjacency_raw.shape();
    if adj_shape != [channels, channels] {
        return Err(Error::dim(
            "build_resolution_graph",
            format!("{channels} channels with adjacency {adj_shape:?}"),
        ));
    }
    Ok(ResolutionGraph {
        node_features: embedding.transpose()?,
        adjacency_raw,
        resolution,
    })
}

/// Row-wise softmax of the raw adjacency: the nonnegative edge weights `A`.
pub fn adjacency_weights<'t, S: Scalar>(adjacency_raw: Var<'t, S>) -> Result<Var<'t, S>> {
    let (r, c) = adjacency_raw.value().dims2()?;
    if r != c {
        return Err(Error::dim(
            "normalize_adjacency",
            format!("adjacency must be square, got [{r}, {c}]"),
        ));
    }
    adjacency_raw.softmax(1)
}

/// `Â = D̃^{-1/2} (A + I) D̃^{-1/2}` with `A = softmax_rows(adjacency_raw)`.
pub fn normalize_adjacency<'t, S: Scalar>(adjacency_raw: Var<'t, S>) -> Result<Var<'t, S>> {
    let weights = adjacency_weights(adjacency_raw)?;
    let n = weights.value().dims2()?.0;
    let eye = adjacency_raw.tape().constant(Tensor::eye(n));
    weights.add(&eye)?.sym_degree_normalize()
}
