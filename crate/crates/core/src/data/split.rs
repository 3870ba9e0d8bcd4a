use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitMode {
    /// Shuffle individual samples.
    SampleBased,
    /// Shuffle subjects; every sample follows its subject.
    SubjectBased,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" | "sample_based" => Ok(Self::SampleBased),
            "subject" | "subject_based" => Ok(Self::SubjectBased),
            other => Err(Error::Config(format!("unknown split mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for SplitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SampleBased => "sample_based",
            Self::SubjectBased => "subject_based",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    /// (train, validation, test)
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.ratios.iter().sum();
        if self.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!(
                "ratios {:?} must be nonnegative and sum to 1",
                self.ratios
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split<S> {
    pub train: Dataset<S>,
    pub val: Dataset<S>,
    pub test: Dataset<S>,
}

/// Apportions `n` items by `ratios` with the largest-remainder method.
/// Leftover items go to the largest fractional parts, lower index first on ties.
pub fn largest_remainder(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = (e + 1e-9).floor() as usize;
    }
    let mut left = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - counts[a] as f64;
        let fb = exact[b] - counts[b] as f64;
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn check_counts(counts: &[usize; 3], ratios: &[f64; 3], unit: &str) -> Result<()> {
    for (i, name) in ["train", "validation", "test"].iter().enumerate() {
        if ratios[i] > 0.0 && counts[i] == 0 {
            return Err(Error::Split(format!(
                "{name} partition would be empty ({counts:?} {unit} for ratios {ratios:?})"
            )));
        }
    }
    Ok(())
}

fn partition<S: Scalar>(ds: &Dataset<S>, assignment: &[usize]) -> Result<Split<S>> {
    let mut parts: [Vec<_>; 3] = Default::default();
    for (s, &part) in ds.samples().iter().zip(assignment) {
        parts[part].push(s.clone());
    }
    let [train, val, test] = parts;
    Ok(Split {
        train: ds.with_samples(train)?,
        val: ds.with_samples(val)?,
        test: ds.with_samples(test)?,
    })
}

pub fn split_sample_based<S: Scalar>(ds: &Dataset<S>, spec: &SplitSpec) -> Result<Split<S>> {
    spec.validate()?;
    let counts = largest_remainder(ds.len(), &spec.ratios);
    check_counts(&counts, &spec.ratios, "samples")?;
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut assignment = vec![0; ds.len()];
    for (pos, &idx) in order.iter().enumerate() {
        assignment[idx] = if pos < counts[0] {
            0
        } else if pos < counts[0] + counts[1] {
            1
        } else {
            2
        };
    }
    partition(ds, &assignment)
}

pub fn split_subject_based<S: Scalar>(ds: &Dataset<S>, spec: &SplitSpec) -> Result<Split<S>> {
    spec.validate()?;
    let mut subjects: Vec<&str> = ds
        .samples()
        .iter()
        .map(|s| s.subject_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if subjects.len() < 3 {
        return Err(Error::Split(format!(
            "subject-based split needs at least 3 subjects, found {}",
            subjects.len()
        )));
    }
    let counts = largest_remainder(subjects.len(), &spec.ratios);
    check_counts(&counts, &spec.ratios, "subjects")?;
    subjects.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let part_of: HashMap<&str, usize> = subjects
        .iter()
        .enumerate()
        .map(|(pos, &s)| {
            let part = if pos < counts[0] {
                0
            } else if pos < counts[0] + counts[1] {
                1
            } else {
                2
            };
            (s, part)
        })
        .collect();
    let assignment: Vec<usize> = ds
        .samples()
        .iter()
        .map(|s| part_of[s.subject_id.as_str()])
        .collect();
    partition(ds, &assignment)
}

pub fn split<S: Scalar>(ds: &Dataset<S>, spec: &SplitSpec) -> Result<Split<S>> {
    match spec.mode {
        SplitMode::SampleBased => split_sample_based(ds, spec),
        SplitMode::SubjectBased => split_subject_based(ds, spec),
    }
}
