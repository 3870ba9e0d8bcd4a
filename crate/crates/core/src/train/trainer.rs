use std::fmt;
use std::fs;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{Checkpoint, RngState};
use super::config::RunConfig;
use crate::data::{load_dataset, split, ChannelStats, Dataset};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model::MedGnnParams;
use crate::params::Bound;
use crate::scalar::Scalar;
use crate::tensor::{AdamConfig, AdamState, Tape, Tensor};
use crate::transformer::ClassProbabilities;

pub const LOG_FILE: &str = "train.log";
pub const TEST_REPORT_FILE: &str = "test_report.txt";

/// `-ln p[label]` for an already-normalized distribution.
pub fn cross_entropy<S: Scalar>(probs: &ClassProbabilities<S>, label: usize) -> Result<S> {
    let p = probs.as_slice();
    if label >= p.len() {
        return Err(Error::Contract(format!(
            "label {label} out of range for {} classes",
            p.len()
        )));
    }
    Ok(-p[label].ln())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val: EvalReport,
}

impl EpochLog {
    pub const HEADER: &'static str =
        "epoch\ttrain_loss\tval_accuracy\tval_precision\tval_recall\tval_f1\tval_auroc";
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            self.epoch,
            self.train_loss,
            self.val.accuracy,
            self.val.precision_macro,
            self.val.recall_macro,
            self.val.f1_macro,
            self.val.auroc_macro
        )
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome<S> {
    /// Parameters of the epoch with the best validation macro F1 (earliest on ties).
    pub best: Checkpoint<S>,
    pub log: Vec<EpochLog>,
}

/// Probabilities of every sample of an already standardized dataset.
fn score<S: Scalar>(model: &MedGnnParams<S>, ds: &Dataset<S>) -> Result<EvalReport> {
    let mut probs = Vec::with_capacity(ds.len());
    let mut labels = Vec::with_capacity(ds.len());
    for s in ds.samples() {
        let p = model.predict(&s.values)?;
        probs.push(p.as_slice().iter().map(|v| v.to_f64_lossless()).collect());
        labels.push(s.label);
    }
    EvalReport::from_scores(&probs, &labels, ds.classes())
}

fn check_compatible<S: Scalar>(model: &MedGnnParams<S>, ds: &Dataset<S>) -> Result<()> {
    let cfg = model.config();
    let have = (ds.time_steps(), ds.channels(), ds.classes());
    let want = (cfg.time_steps, cfg.channels, cfg.classes);
    if have != want {
        return Err(Error::Config(format!(
            "dataset (T, C, K) = {have:?} does not match the model's {want:?}"
        )));
    }
    Ok(())
}

/// Trains on `train`, selecting the checkpoint by validation macro F1.
/// Both inputs are raw; standardization is fitted on `train` here.
pub fn fit<S: Scalar>(
    config: &RunConfig,
    train: &Dataset<S>,
    val: &Dataset<S>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<FitOutcome<S>> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Split("train and validation partitions must be non-empty".into()));
    }
    let stats = ChannelStats::fit(train)?;
    let train = stats.apply(train)?;
    let val = stats.apply(val)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model_cfg = config.model_config(train.time_steps(), train.channels(), train.classes());
    let mut model = MedGnnParams::init(model_cfg, &mut rng)?;
    let mut adam = AdamState::new();
    let adam_cfg = AdamConfig::with_lr(S::cast(config.learning_rate));

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, Checkpoint<S>)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let inputs: Vec<&Tensor<S>> = chunk.iter().map(|&i| &train.samples()[i].values).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train.samples()[i].label).collect();
            let grads = {
                let tape = Tape::new();
                let bound = Bound::new(&tape, model.store());
                let loss = model.batch_loss(&bound, &inputs, &labels)?;
                let value = loss.value().data()[0].to_f64_lossless();
                if !value.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        batch: b,
                        loss: value,
                    });
                }
                loss_sum += value * chunk.len() as f64;
                bound.collect_grads(&tape.backward(loss)?)
            };
            let grad_refs: Vec<&[S]> = grads.iter().map(Vec::as_slice).collect();
            adam.step(&mut model.store_mut().tensors_mut(), &grad_refs, &adam_cfg)?;
        }

        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val: score(&model, &val)?,
        };
        on_epoch(&entry);
        let f1 = entry.val.f1_macro;
        if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
            let ckpt = Checkpoint {
                config: config.clone(),
                model: model.clone(),
                epoch,
                rng: RngState::capture(&rng),
                stats: stats.clone(),
                class_names: train.class_names().to_vec(),
            };
            best = Some((f1, ckpt));
        }
        log.push(entry);
    }

    let (_, best) = best.expect("at least one epoch");
    Ok(FitOutcome { best, log })
}

/// Metrics of a checkpoint on a raw dataset (the checkpoint's standardization is applied).
pub fn evaluate<S: Scalar>(checkpoint: &Checkpoint<S>, ds: &Dataset<S>) -> Result<EvalReport> {
    check_compatible(&checkpoint.model, ds)?;
    if ds.is_empty() {
        return Err(Error::Contract("cannot evaluate an empty dataset".into()));
    }
    score(&checkpoint.model, &checkpoint.stats.apply(ds)?)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<S> {
    pub fit: FitOutcome<S>,
    pub test: EvalReport,
}

/// Full run: load, split, fit, test once, and write the checkpoint, the
/// epoch log and the test report into `config.checkpoint_dir`.
pub fn train<S: Scalar>(config: &RunConfig, on_epoch: impl FnMut(&EpochLog)) -> Result<TrainOutcome<S>> {
    config.validate()?;
    let ds: Dataset<S> = load_dataset(&config.dataset)?;
    let parts = split(&ds, &config.split)?;
    let fit = fit(config, &parts.train, &parts.val, on_epoch)?;
    let test = evaluate(&fit.best, &parts.test)?;

    let dir = &config.checkpoint_dir;
    fit.best.save(dir)?;
    let mut log_text = format!("{}\n", EpochLog::HEADER);
    for e in &fit.log {
        log_text.push_str(&format!("{e}\n"));
    }
    let log_path = dir.join(LOG_FILE);
    fs::write(&log_path, log_text).map_err(|e| Error::io(&log_path, e))?;
    let report_path = dir.join(TEST_REPORT_FILE);
    fs::write(&report_path, format!("epoch = {}\n{test}", fit.best.epoch))
        .map_err(|e| Error::io(&report_path, e))?;
    Ok(TrainOutcome { fit, test })
}
