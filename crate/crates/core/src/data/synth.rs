//! Synthetic multichannel recordings with class-specific sinusoid signatures,
//! per-subject gains, Gaussian noise and baseline wander.
//!
//! Independent ChaCha streams drive the signatures, the subjects, the noise
//! and the wander, so changing the wander amplitude leaves every other draw
//! untouched.

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, SeriesSample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub time_steps: usize,
    pub channels: usize,
    pub classes: usize,
    /// Subject `s` belongs to class `s mod classes`.
    pub subjects: usize,
    pub samples_per_subject: usize,
    /// Amplitude of both the constant per-channel offset and the slow drift.
    pub wander_amplitude: f64,
    /// Drift period range in time steps, `(min, max)`.
    pub wander_period: (f64, f64),
    pub noise_sigma: f64,
    /// Sinusoid components per class signature.
    pub components: usize,
    /// Per-subject, per-channel gain drawn from `1 ± gain_spread`.
    pub gain_spread: f64,
}

impl SynthConfig {
    pub fn new(time_steps: usize, channels: usize, classes: usize) -> Self {
        Self {
            time_steps,
            channels,
            classes,
            subjects: 12,
            samples_per_subject: 4,
            wander_amplitude: 0.0,
            wander_period: (2.0 * time_steps as f64, 8.0 * time_steps as f64),
            noise_sigma: 0.0,
            components: 2,
            gain_spread: 0.2,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.time_steps == 0 || self.channels == 0 || self.classes == 0 {
            return Err(Error::Config(format!(
                "synthetic data needs positive T, C, K (got {}, {}, {})",
                self.time_steps, self.channels, self.classes
            )));
        }
        if self.subjects == 0 || self.samples_per_subject == 0 || self.components == 0 {
            return Err(Error::Config(
                "subjects, samples_per_subject and components must be positive".into(),
            ));
        }
        let (lo, hi) = self.wander_period;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config(format!(
                "wander period range ({lo}, {hi}) is invalid"
            )));
        }
        if self.noise_sigma < 0.0 || self.wander_amplitude < 0.0 || !(0.0..1.0).contains(&self.gain_spread) {
            return Err(Error::Config(
                "noise, wander amplitude and gain spread must be nonnegative (gain spread < 1)".into(),
            ));
        }
        if self.frequency_pool().len() < self.classes * self.components {
            return Err(Error::Config(format!(
                "T={} is too short for {} classes x {} distinct frequencies",
                self.time_steps, self.classes, self.components
            )));
        }
        Ok(())
    }

    /// Integer cycles-per-window available to the signatures: 2..=T/4.
    fn frequency_pool(&self) -> Vec<usize> {
        (2..=self.time_steps / 4).collect()
    }
}

struct Component {
    cycles: f64,
    amplitude: f64,
    phase: f64,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// The noise- and wander-free waveform of class `k`, `[T×C]` row-major.
fn signatures(cfg: &SynthConfig, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, 0);
    let mut pool = cfg.frequency_pool();
    pool.shuffle(&mut rng);
    let (t_len, c) = (cfg.time_steps, cfg.channels);
    (0..cfg.classes)
        .map(|k| {
            let freqs = &pool[k * cfg.components..(k + 1) * cfg.components];
            let per_channel: Vec<Vec<Component>> = (0..c)
                .map(|_| {
                    freqs
                        .iter()
                        .map(|&f| Component {
                            cycles: f as f64,
                            amplitude: rng.random_range(0.5..1.0),
                            phase: rng.random_range(0.0..std::f64::consts::TAU),
                        })
                        .collect()
                })
                .collect();
            let mut wave = vec![0.0; t_len * c];
            for t in 0..t_len {
                for (ch, comps) in per_channel.iter().enumerate() {
                    wave[t * c + ch] = comps
                        .iter()
                        .map(|p| {
                            let arg = std::f64::consts::TAU * p.cycles * t as f64 / t_len as f64;
                            p.amplitude * (arg + p.phase).sin()
                        })
                        .sum();
                }
            }
            wave
        })
        .collect()
}

/// Deterministic in `(cfg, seed)`. Values are rounded to `f32` so a dataset
/// survives the on-disk format bit-exactly.
pub fn synth_generate<S: Scalar>(cfg: &SynthConfig, seed: u64) -> Result<Dataset<S>> {
    cfg.validate()?;
    let templates = signatures(cfg, seed);
    let mut subject_rng = stream(seed, 1);
    let mut noise_rng = stream(seed, 2);
    let mut wander_rng = stream(seed, 3);
    let noise = Normal::new(0.0, cfg.noise_sigma.max(0.0)).expect("finite sigma");
    let (t_len, c) = (cfg.time_steps, cfg.channels);
    let a = cfg.wander_amplitude;
    let (p_lo, p_hi) = cfg.wander_period;

    let mut samples = Vec::with_capacity(cfg.subjects * cfg.samples_per_subject);
    for subject in 0..cfg.subjects {
        let label = subject % cfg.classes;
        let gains: Vec<f64> = (0..c)
            .map(|_| 1.0 + subject_rng.random_range(-1.0..=1.0) * cfg.gain_spread)
            .collect();
        for n in 0..cfg.samples_per_subject {
            // Wander draws are taken unconditionally so the stream layout never depends on `a`.
            let offsets: Vec<f64> = (0..c).map(|_| wander_rng.random_range(-1.0..=1.0)).collect();
            let periods: Vec<f64> = (0..c)
                .map(|_| if p_hi > p_lo { wander_rng.random_range(p_lo..=p_hi) } else { p_lo })
                .collect();
            let phases: Vec<f64> = (0..c)
                .map(|_| wander_rng.random_range(0.0..std::f64::consts::TAU))
                .collect();

            let mut values = Vec::with_capacity(t_len * c);
            for t in 0..t_len {
                for ch in 0..c {
                    let clean = gains[ch] * templates[label][t * c + ch];
                    let drift = (std::f64::consts::TAU * t as f64 / periods[ch] + phases[ch]).sin();
                    let wander = a * (offsets[ch] + drift);
                    let eps = noise.sample(&mut noise_rng);
                    let v = clean + wander + eps;
                    values.push(S::cast(v as f32 as f64));
                }
            }
            samples.push(SeriesSample {
                values: Tensor::from_vec(&[t_len, c], values)?,
                label,
                subject_id: format!("subject{subject:04}"),
                sample_id: format!("subject{subject:04}-{n:04}"),
            });
        }
    }
    let names = (0..cfg.classes).map(|k| format!("class{k}")).collect();
    Dataset::new(samples, t_len, c, names)
}

/// Class templates, exposed for template-matching checks.
pub fn class_templates(cfg: &SynthConfig, seed: u64) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    Ok(signatures(cfg, seed))
}
