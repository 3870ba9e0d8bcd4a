//! Classification metrics: accuracy, macro precision/recall/F1 and macro
//! one-vs-rest AUROC.

use std::fmt;

use crate::error::{Error, Result};

/// `K×K` counts indexed `(true, predicted)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionCounts {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionCounts {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::dim("confusion", "confusion matrix must be square"));
        }
        Ok(Self {
            classes: k,
            counts: rows.concat(),
        })
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::dim(
                "confusion",
                format!("{} labels vs {} predictions", truth.len(), predicted.len()),
            ));
        }
        let mut c = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::Contract(format!(
                    "class index ({t}, {p}) out of range for {classes} classes"
                )));
            }
            c.counts[t * classes + p] += 1;
        }
        Ok(c)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn true_positives(&self, k: usize) -> u64 {
        self.get(k, k)
    }

    pub fn false_positives(&self, k: usize) -> u64 {
        (0..self.classes).filter(|&t| t != k).map(|t| self.get(t, k)).sum()
    }

    pub fn false_negatives(&self, k: usize) -> u64 {
        (0..self.classes).filter(|&p| p != k).map(|p| self.get(k, p)).sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks_exact(self.classes.max(1))
    }
}

pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    let total = c.total();
    if total == 0 {
        return Err(Error::Contract("accuracy of an empty evaluation".into()));
    }
    let correct: u64 = (0..c.classes()).map(|k| c.get(k, k)).sum();
    Ok(correct as f64 / total as f64)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class `(precision, recall, f1)`, with `0/0 := 0`.
pub fn per_class_scores(c: &ConfusionCounts) -> Vec<(f64, f64, f64)> {
    (0..c.classes())
        .map(|k| {
            let tp = c.true_positives(k);
            let p = ratio(tp, tp + c.false_positives(k));
            let r = ratio(tp, tp + c.false_negatives(k));
            let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            (p, r, f1)
        })
        .collect()
}

/// Macro-averaged `(precision, recall, f1)`; macro F1 is the mean of per-class F1.
pub fn precision_recall_f1(c: &ConfusionCounts) -> (f64, f64, f64) {
    let scores = per_class_scores(c);
    let k = scores.len().max(1) as f64;
    let (p, r, f) = scores
        .iter()
        .fold((0.0, 0.0, 0.0), |(a, b, d), &(p, r, f)| (a + p, b + r, d + f));
    (p / k, r / k, f / k)
}

/// Mann–Whitney AUROC of `scores` for `positive[i]` against the rest; ties
/// count one half. `None` when either class is absent.
pub fn binary_auroc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), positive.len());
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Average 1-based ranks over tie groups.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if positive[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Some((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Macro one-vs-rest AUROC over classes that have both positives and negatives.
///
/// `probabilities` is row-major `N×K`.
pub fn auroc_ovr(probabilities: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if probabilities.len() != labels.len() {
        return Err(Error::dim(
            "auroc",
            format!("{} score rows for {} labels", probabilities.len(), labels.len()),
        ));
    }
    let k = probabilities.first().map_or(0, Vec::len);
    let mut total = 0.0;
    let mut scored = 0usize;
    for class in 0..k {
        let scores: Vec<f64> = probabilities.iter().map(|row| row[class]).collect();
        let positive: Vec<bool> = labels.iter().map(|&l| l == class).collect();
        if let Some(a) = binary_auroc(&scores, &positive) {
            total += a;
            scored += 1;
        }
    }
    if scored == 0 {
        return Err(Error::UndefinedAuroc);
    }
    Ok(total / scored as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    /// `NaN` when no class has both positives and negatives.
    pub auroc_macro: f64,
    pub confusion: ConfusionCounts,
}

impl EvalReport {
    pub fn from_scores(probabilities: &[Vec<f64>], labels: &[usize], classes: usize) -> Result<Self> {
        let predicted: Vec<usize> = probabilities
            .iter()
            .map(|row| {
                let mut best = 0;
                for (i, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect();
        let confusion = ConfusionCounts::from_predictions(classes, labels, &predicted)?;
        let (precision_macro, recall_macro, f1_macro) = precision_recall_f1(&confusion);
        let auroc_macro = match auroc_ovr(probabilities, labels) {
            Ok(a) => a,
            Err(Error::UndefinedAuroc) => f64::NAN,
            Err(e) => return Err(e),
        };
        Ok(Self {
            accuracy: accuracy(&confusion)?,
            precision_macro,
            recall_macro,
            f1_macro,
            auroc_macro,
            confusion,
        })
    }
}

/// `key = value` lines in a fixed order; the confusion matrix is rows joined by `;`.
impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy = {}", self.accuracy)?;
        writeln!(f, "precision_macro = {}", self.precision_macro)?;
        writeln!(f, "recall_macro = {}", self.recall_macro)?;
        writeln!(f, "f1_macro = {}", self.f1_macro)?;
        writeln!(f, "auroc_macro = {}", self.auroc_macro)?;
        let rows: Vec<String> = self
            .confusion
            .rows()
            .map(|r| r.iter().map(u64::to_string).collect::<Vec<_>>().join(" "))
            .collect();
        writeln!(f, "confusion = {}", rows.join(";"))
    }
}
