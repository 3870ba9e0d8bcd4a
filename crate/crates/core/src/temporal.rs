//! The two parallel temporal encoders applied to each resolution's node
//! features: difference attention and frequency convolution.

use crate::error::{Error, Result};
use crate::params::{Bound, ParamId};
use crate::scalar::Scalar;
use crate::tensor::{concat_cols, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionHead {
    /// `[C×d]`
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
}

/// Multi-head attention over time-step tokens of width `C`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferenceAttentionParams {
    pub heads: Vec<AttentionHead>,
    pub head_dim: usize,
    /// `[H·d × C]`
    pub output: ParamId,
    /// `[C]`
    pub output_bias: ParamId,
}

/// Complex kernel `[C×S_m×2]` with `S_m = floor(T_m/2) + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrequencyKernel {
    pub weights: ParamId,
}

/// Attention output before (`dsa`) and after (`da`) the residual.
#[derive(Clone, Copy, Debug)]
pub struct DifferenceAttentionOutput<'t, S> {
    pub dsa: Var<'t, S>,
    pub da: Var<'t, S>,
}

/// First-order forward difference along time of `[C×T_m]`, after
/// replicate-padding the final step (so the last column is zero).
pub fn temporal_difference<'t, S: Scalar>(x: Var<'t, S>) -> Result<Var<'t, S>> {
    x.temporal_difference()
}

pub fn difference_attention<'t, S: Scalar>(
    x: Var<'t, S>,
    params: &DifferenceAttentionParams,
    bound: &Bound<'t, '_, S>,
) -> Result<DifferenceAttentionOutput<'t, S>> {
    let (channels, _) = x.value().dims2()?;
    let out_shape = bound.store().get(params.output).shape().to_vec();
    if out_shape != [params.heads.len() * params.head_dim, channels] {
        return Err(Error::dim(
            "difference_attention",
            format!(
                "{} heads of width {} with output projection {out_shape:?} for {channels} channels",
                params.heads.len(),
                params.head_dim
            ),
        ));
    }

    let tokens = temporal_difference(x)?.transpose()?;
    let scale = S::one() / S::from_usize_exact(params.head_dim).sqrt();
    let mut heads = Vec::with_capacity(params.heads.len());
    for head in &params.heads {
        let q = tokens.matmul(&bound.var(head.query))?;
        let k = tokens.matmul(&bound.var(head.key))?;
        let v = tokens.matmul(&bound.var(head.value))?;
        let weights = q.matmul(&k.transpose()?)?.scale(scale).softmax(1)?;
        heads.push(weights.matmul(&v)?);
    }
    let merged = concat_cols(&heads)?;
    let dsa = merged
        .matmul(&bound.var(params.output))?
        .add_row_bias(&bound.var(params.output_bias))?
        .transpose()?;
    let da = dsa.add(&x)?;
    Ok(DifferenceAttentionOutput { dsa, da })
}

/// Per channel: rfft, multiply by the kernel row, irfft back to `T_m`.
pub fn frequency_convolution<'t, S: Scalar>(
    x: Var<'t, S>,
    kernel: Var<'t, S>,
) -> Result<Var<'t, S>> {
    let (channels, len) = x.value().dims2()?;
    let expected = [channels, len / 2 + 1, 2];
    let got = kernel.shape();
    if got != expected {
        return Err(Error::dim(
            "frequency_convolution",
            format!("kernel {got:?}, expected {expected:?} for input [{channels}, {len}]"),
        ));
    }
    x.rfft_rows()?.complex_mul(&kernel)?.irfft_rows(len)
}
