use std::collections::HashSet;
use std::fs;

use medgnn::data::{
    class_templates, load_dataset, save_dataset, split_sample_based, split_subject_based, standardize, synth_generate,
    ChannelStats, Dataset, SeriesSample, SplitMode, SplitSpec, SynthConfig, LABELS_FILE, VALUES_FILE,
};
use medgnn::tensor::Tape;
use medgnn::temporal::temporal_difference;
use medgnn::{Error, Tensor64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_cfg() -> SynthConfig {
    let mut cfg = SynthConfig::new(32, 3, 3);
    cfg.subjects = 6;
    cfg.samples_per_subject = 3;
    cfg.noise_sigma = 0.3;
    cfg.wander_amplitude = 1.0;
    cfg
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let ds = synth_generate::<f64>(&small_cfg(), 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    let back: Dataset<f64> = load_dataset(dir.path()).unwrap();
    assert_eq!(back, ds);
    for (a, b) in ds.samples().iter().zip(back.samples()) {
        for (x, y) in a.values.data().iter().zip(b.values.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn truncated_payload_is_a_shape_mismatch() {
    let ds = synth_generate::<f64>(&small_cfg(), 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    let path = dir.path().join(VALUES_FILE);
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(load_dataset::<f64>(dir.path()), Err(Error::ShapeMismatch(_))));
}

#[test]
fn label_equal_to_class_count_is_out_of_range() {
    let ds = synth_generate::<f64>(&small_cfg(), 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    let path = dir.path().join(LABELS_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let last = lines.pop().unwrap();
    let (head, _) = last.rsplit_once(',').unwrap();
    lines.push(format!("{head},3"));
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    match load_dataset::<f64>(dir.path()) {
        Err(Error::LabelOutOfRange { label, classes, .. }) => assert_eq!((label, classes), (3, 3)),
        other => panic!("expected out-of-range label, got {other:?}"),
    }
}

#[test]
fn missing_directory_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    let err = load_dataset::<f64>(&missing).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("nowhere"));
}

#[test]
fn duplicate_sample_ids_are_rejected() {
    let s = SeriesSample {
        values: Tensor64::zeros(&[2, 1]),
        label: 0,
        subject_id: "a".into(),
        sample_id: "x".into(),
    };
    let err = Dataset::new(vec![s.clone(), s], 2, 1, vec!["c".into()]).unwrap_err();
    assert!(matches!(err, Error::DuplicateSample(_)));
}

#[test]
fn synth_is_deterministic_per_seed() {
    let cfg = small_cfg();
    let a = synth_generate::<f64>(&cfg, 9).unwrap();
    let b = synth_generate::<f64>(&cfg, 9).unwrap();
    let c = synth_generate::<f64>(&cfg, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn clean_samples_match_their_nearest_template() {
    let mut cfg = SynthConfig::new(64, 4, 3);
    cfg.subjects = 9;
    cfg.samples_per_subject = 2;
    let ds = synth_generate::<f64>(&cfg, 21).unwrap();
    let templates = class_templates(&cfg, 21).unwrap();
    // Subject gains scale each channel, so compare channel-normalized shapes.
    let normalized = |v: &[f64], ch: usize, c: usize| -> Vec<f64> {
        let col: Vec<f64> = v.iter().skip(ch).step_by(c).copied().collect();
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        col.iter().map(|x| x / norm).collect()
    };
    let c = cfg.channels;
    for s in ds.samples() {
        let dist = |tmpl: &[f64]| -> f64 {
            (0..c)
                .map(|ch| {
                    let a = normalized(s.values.data(), ch, c);
                    let b = normalized(tmpl, ch, c);
                    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
                })
                .sum()
        };
        let nearest = (0..cfg.classes)
            .min_by(|&i, &j| dist(&templates[i]).total_cmp(&dist(&templates[j])))
            .unwrap();
        assert_eq!(nearest, s.label, "{}", s.sample_id);
    }
}

/// Temporal differences of every channel of every sample, pooled.
fn pooled_differences(ds: &Dataset<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for s in ds.samples() {
        let tape = Tape::new();
        let nodes = tape.constant(s.values.transpose2().unwrap());
        let d = temporal_difference(nodes).unwrap().to_tensor();
        let t = ds.time_steps();
        for ch in 0..ds.channels() {
            // The last column is the zero from the repeated final step.
            out.extend_from_slice(&d.row(ch)[..t - 1]);
        }
    }
    out
}

fn kolmogorov_distance(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut worst) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        worst = worst.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    worst
}

#[test]
fn wander_shifts_means_but_not_difference_distribution() {
    let mut clean_cfg = SynthConfig::new(128, 4, 3);
    clean_cfg.subjects = 12;
    clean_cfg.samples_per_subject = 5;
    clean_cfg.noise_sigma = 0.5;
    let mut wander_cfg = clean_cfg.clone();
    wander_cfg.wander_amplitude = 5.0;
    let clean = synth_generate::<f64>(&clean_cfg, 33).unwrap();
    let wander = synth_generate::<f64>(&wander_cfg, 33).unwrap();

    let (t, c) = (128, 4);
    let mut mean_shift = Vec::new();
    for (x0, x5) in clean.samples().iter().zip(wander.samples()) {
        for ch in 0..c {
            let col = |s: &SeriesSample<f64>| -> Vec<f64> { (0..t).map(|i| s.values.at2(i, ch)).collect() };
            let (a, b) = (col(x0), col(x5));
            let shift: Vec<f64> = b.iter().zip(&a).map(|(p, q)| p - q).collect();
            // Offset plus drift, so bounded by twice the amplitude.
            let m = shift.iter().sum::<f64>() / t as f64;
            assert!(m.abs() <= 10.0 + 1e-4);
            mean_shift.push(m);
        }
    }
    let spread = mean_shift.iter().map(|m| m.abs()).sum::<f64>() / mean_shift.len() as f64;
    assert!(spread > 1.0, "means should move by the injected offsets, mean |shift| {spread}");

    let ks = kolmogorov_distance(pooled_differences(&clean), pooled_differences(&wander));
    assert!(ks < 0.05, "Kolmogorov distance {ks}");
}

fn labelled_dataset(subject_sizes: &[usize]) -> Dataset<f64> {
    let mut samples = Vec::new();
    for (s, &n) in subject_sizes.iter().enumerate() {
        for i in 0..n {
            samples.push(SeriesSample {
                values: Tensor64::full(&[2, 1], (s * 100 + i) as f64),
                label: s % 2,
                subject_id: format!("s{s}"),
                sample_id: format!("s{s}-{i}"),
            });
        }
    }
    Dataset::new(samples, 2, 1, vec!["a".into(), "b".into()]).unwrap()
}

fn ids(ds: &Dataset<f64>) -> Vec<String> {
    ds.samples().iter().map(|s| s.sample_id.clone()).collect()
}

fn spec(mode: SplitMode, ratios: [f64; 3], seed: u64) -> SplitSpec {
    SplitSpec { mode, ratios, seed }
}

#[test]
fn sample_split_sizes_and_partition() {
    let ds = labelled_dataset(&[10]);
    let a = split_sample_based(&ds, &spec(SplitMode::SampleBased, [0.6, 0.2, 0.2], 1)).unwrap();
    assert_eq!((a.train.len(), a.val.len(), a.test.len()), (6, 2, 2));
    let mut all: Vec<String> = [ids(&a.train), ids(&a.val), ids(&a.test)].concat();
    all.sort();
    let mut want = ids(&ds);
    want.sort();
    assert_eq!(all, want);

    let b = split_sample_based(&ds, &spec(SplitMode::SampleBased, [0.6, 0.2, 0.2], 2)).unwrap();
    assert_eq!((b.train.len(), b.val.len(), b.test.len()), (6, 2, 2));
    assert_ne!(ids(&a.train), ids(&b.train));
}

#[test]
fn sample_split_rejects_empty_partitions() {
    let ds = labelled_dataset(&[2]);
    let err = split_sample_based(&ds, &spec(SplitMode::SampleBased, [0.6, 0.2, 0.2], 0)).unwrap_err();
    assert!(matches!(err, Error::Split(_)));
}

#[test]
fn subject_split_sizes_and_grouping() {
    let ds = labelled_dataset(&[5, 1, 1, 1, 1, 1, 1, 1]);
    let parts = split_subject_based(&ds, &spec(SplitMode::SubjectBased, [0.5, 0.25, 0.25], 4)).unwrap();
    let count = |d: &Dataset<f64>| d.subjects().len();
    assert_eq!((count(&parts.train), count(&parts.val), count(&parts.test)), (4, 2, 2));
    let holding: Vec<usize> = [&parts.train, &parts.val, &parts.test]
        .iter()
        .map(|d| d.samples().iter().filter(|s| s.subject_id == "s0").count())
        .collect();
    let mut sorted = holding.clone();
    sorted.sort();
    assert_eq!(sorted, vec![0, 0, 5]);
}

#[test]
fn subject_split_needs_three_subjects() {
    let ds = labelled_dataset(&[3, 3]);
    let err = split_subject_based(&ds, &spec(SplitMode::SubjectBased, [0.6, 0.2, 0.2], 0)).unwrap_err();
    assert!(matches!(err, Error::Split(_)));
}

#[test]
fn subject_split_disjoint_on_random_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let subjects = rng.random_range(3..20);
        let sizes: Vec<usize> = (0..subjects).map(|_| rng.random_range(1..6)).collect();
        let ds = labelled_dataset(&sizes);
        let parts = split_subject_based(&ds, &spec(SplitMode::SubjectBased, [0.4, 0.3, 0.3], rng.random())).unwrap();
        let sets: Vec<HashSet<String>> = [&parts.train, &parts.val, &parts.test]
            .iter()
            .map(|d| d.subjects().into_iter().map(String::from).collect())
            .collect();
        assert!(sets[0].is_disjoint(&sets[1]));
        assert!(sets[0].is_disjoint(&sets[2]));
        assert!(sets[1].is_disjoint(&sets[2]));
        assert_eq!(parts.train.len() + parts.val.len() + parts.test.len(), ds.len());
    }
}

#[test]
fn standardization_uses_train_statistics() {
    let ds = synth_generate::<f64>(&small_cfg(), 2).unwrap();
    let parts = split_subject_based(&ds, &spec(SplitMode::SubjectBased, [0.5, 0.25, 0.25], 3)).unwrap();
    let (train, rest, stats) = standardize(&parts.train, &[&parts.test]).unwrap();
    let c = train.channels();
    let n = (train.len() * train.time_steps()) as f64;
    for ch in 0..c {
        let vals: Vec<f64> = train.samples().iter().flat_map(|s| s.values.data().iter().skip(ch).step_by(c).copied()).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-9);
        assert!((std - 1.0).abs() < 1e-6);
    }
    // Test values are transformed with the train mean and std, not refitted.
    let raw = &parts.test.samples()[0].values;
    let got = &rest[0].samples()[0].values;
    for t in 0..raw.shape()[0] {
        for ch in 0..c {
            let want = (raw.at2(t, ch) - stats.mean[ch]) / stats.std[ch];
            assert_eq!(got.at2(t, ch), want);
        }
    }
    assert_ne!(ChannelStats::fit(&parts.test).unwrap(), stats);
}
