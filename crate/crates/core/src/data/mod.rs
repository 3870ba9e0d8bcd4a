//! Recordings, datasets, splitting protocols and normalization.

mod io;
mod split;
mod synth;

pub(crate) use io::parse_key_values;
pub use io::{load_dataset, save_dataset, META_FILE, LABELS_FILE, VALUES_FILE};
pub use split::{largest_remainder, split, split_sample_based, split_subject_based, Split, SplitMode, SplitSpec};
pub use synth::{class_templates, synth_generate, SynthConfig};

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// One multichannel recording `[T×C]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesSample<S> {
    pub values: Tensor<S>,
    pub label: usize,
    pub subject_id: String,
    pub sample_id: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<S> {
    samples: Vec<SeriesSample<S>>,
    time_steps: usize,
    channels: usize,
    class_names: Vec<String>,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(
        samples: Vec<SeriesSample<S>>,
        time_steps: usize,
        channels: usize,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if time_steps == 0 || channels == 0 || class_names.is_empty() {
            return Err(Error::Config(format!(
                "dataset dimensions must be positive (T={time_steps}, C={channels}, K={})",
                class_names.len()
            )));
        }
        let classes = class_names.len();
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if s.values.shape() != [time_steps, channels] {
                return Err(Error::ShapeMismatch(format!(
                    "sample {:?} has shape {:?}, dataset is [{time_steps}, {channels}]",
                    s.sample_id,
                    s.values.shape()
                )));
            }
            if s.label >= classes {
                return Err(Error::LabelOutOfRange {
                    sample: s.sample_id.clone(),
                    label: s.label as i64,
                    classes,
                });
            }
            if s.subject_id.is_empty() {
                return Err(Error::Config(format!(
                    "sample {:?} has an empty subject id",
                    s.sample_id
                )));
            }
            if let Some(pos) = s.values.data().iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    sample: s.sample_id.clone(),
                    time: pos / channels,
                    channel: pos % channels,
                });
            }
            if !seen.insert(s.sample_id.as_str()) {
                return Err(Error::DuplicateSample(s.sample_id.clone()));
            }
        }
        Ok(Self {
            samples,
            time_steps,
            channels,
            class_names,
        })
    }

    /// A dataset with the same dimensions but a different sample list.
    pub fn with_samples(&self, samples: Vec<SeriesSample<S>>) -> Result<Self> {
        Self::new(samples, self.time_steps, self.channels, self.class_names.clone())
    }

    pub fn samples(&self) -> &[SeriesSample<S>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn subjects(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.samples.iter().map(|s| s.subject_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Per-channel mean and (population) standard deviation of a training split.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStats<S> {
    pub mean: Vec<S>,
    pub std: Vec<S>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl<S: Scalar> ChannelStats<S> {
    pub fn fit(train: &Dataset<S>) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Contract("standardization needs a non-empty train split".into()));
        }
        let c = train.channels();
        let count = S::from_usize_exact(train.len() * train.time_steps());
        let mut mean = vec![S::zero(); c];
        for s in train.samples() {
            for row in s.values.data().chunks_exact(c) {
                for (m, &v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
        }
        for m in &mut mean {
            *m /= count;
        }
        let mut var = vec![S::zero(); c];
        for s in train.samples() {
            for row in s.values.data().chunks_exact(c) {
                for ((acc, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                    *acc += (v - m) * (v - m);
                }
            }
        }
        let floor = S::cast(STD_FLOOR);
        let std = var.into_iter().map(|v| (v / count).sqrt().max(floor)).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, ds: &Dataset<S>) -> Result<Dataset<S>> {
        let c = ds.channels();
        if self.mean.len() != c {
            return Err(Error::dim(
                "standardize",
                format!("stats for {} channels applied to {c}", self.mean.len()),
            ));
        }
        let samples = ds
            .samples()
            .iter()
            .map(|s| {
                let mut values = s.values.clone();
                for row in values.data_mut().chunks_exact_mut(c) {
                    for ((v, &m), &sd) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                        *v = (*v - m) / sd;
                    }
                }
                SeriesSample {
                    values,
                    ..s.clone()
                }
            })
            .collect();
        ds.with_samples(samples)
    }
}

/// Fits per-channel statistics on `train` only and applies them to every split.
pub fn standardize<S: Scalar>(
    train: &Dataset<S>,
    others: &[&Dataset<S>],
) -> Result<(Dataset<S>, Vec<Dataset<S>>, ChannelStats<S>)> {
    let stats = ChannelStats::fit(train)?;
    let train_std = stats.apply(train)?;
    let rest = others
        .iter()
        .map(|d| stats.apply(d))
        .collect::<Result<Vec<_>>>()?;
    Ok((train_std, rest, stats))
}
