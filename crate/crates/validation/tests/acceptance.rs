//! Acceptance checks. Each test writes one `PASS` or `FAIL` line straight to
//! stderr (bypassing the test harness capture) and then asserts.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::fs;
use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use medgnn::data::{split, synth_generate, Dataset, SeriesSample, SplitMode, SplitSpec, SynthConfig};
use medgnn::error::Result;
use medgnn::graph::{build_resolution_graph, multi_scale_embed, normalize_adjacency, EmbeddingParams};
use medgnn::metrics::{accuracy, auroc_ovr, binary_auroc, precision_recall_f1, ConfusionCounts};
use medgnn::params::{Bound, ParamStore};
use medgnn::spectral::{irfft, rfft};
use medgnn::tensor::{finite_difference_check, Tape, Var};
use medgnn::temporal::{difference_attention, frequency_convolution, AttentionHead, DifferenceAttentionParams};
use medgnn::train::{evaluate, fit, train, RunConfig, CHECKPOINT_META, CHECKPOINT_PARAMS};
use medgnn::transformer::{local_graph_attention, LocalAttentionParams};
use medgnn::{MedGnn64, ModelConfig, Tensor64};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The timed criteria take this so they never share the core with each other.
static TIMED: Mutex<()> = Mutex::new(());

fn verdict(name: &str, ok: bool, detail: &str) {
    let line = format!("{} {name}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "{name}: {detail}");
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor64 {
    let n = shape.iter().product();
    Tensor64::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn project<'t>(out: Var<'t, f64>, rng_seed: u64) -> Result<Var<'t, f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let w = out.tape().constant(rand_tensor(&mut rng, &out.shape()));
    Ok(out.mul(&w)?.sum())
}

fn da_params(store: &mut ParamStore<f64>, rng: &mut ChaCha8Rng, c: usize, heads: usize, d: usize) -> DifferenceAttentionParams {
    let heads: Vec<AttentionHead> = (0..heads)
        .map(|_| AttentionHead {
            query: store.add("q", rand_tensor(rng, &[c, d])),
            key: store.add("k", rand_tensor(rng, &[c, d])),
            value: store.add("v", rand_tensor(rng, &[c, d])),
        })
        .collect();
    let width = heads.len() * d;
    DifferenceAttentionParams {
        heads,
        head_dim: d,
        output: store.add("o", rand_tensor(rng, &[width, c])),
        output_bias: store.add("ob", rand_tensor(rng, &[c])),
    }
}

#[test]
fn gradient_suite() {
    let _guard = TIMED.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut track = |e: f64| worst = worst.max(e);
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rand_tensor(&mut rng, &[3, 5]);
        let b = rand_tensor(&mut rng, &[5, 2]);
        let bias = rand_tensor(&mut rng, &[5]);
        let (bb, bi) = (b.clone(), bias.clone());
        track(finite_difference_check(move |t, x| project(x.matmul(&t.constant(bb.clone()))?, seed), &a, 1e-6).unwrap());
        track(finite_difference_check(move |t, x| project(x.add_row_bias(&t.constant(bi.clone()))?, seed), &a, 1e-6).unwrap());
        let bump = a.map(|v| v.signum() * (0.1 + v.abs()));
        track(finite_difference_check(move |_, x| project(x.relu(), seed), &bump, 1e-6).unwrap());
        track(finite_difference_check(move |_, x| project(x.softmax(1)?, seed), &a, 1e-6).unwrap());
        track(finite_difference_check(|_, x| x.cross_entropy(&[0, 4, 2]), &a, 1e-6).unwrap());
        track(finite_difference_check(move |_, x| project(x.temporal_difference()?, seed), &a, 1e-6).unwrap());
        let sq = rand_tensor(&mut rng, &[4, 4]);
        track(finite_difference_check(move |_, x| project(normalize_adjacency(x)?, seed), &sq, 1e-6).unwrap());
        for len in [5usize, 8, 13] {
            let x = rand_tensor(&mut rng, &[2, len]);
            track(finite_difference_check(move |_, v| project(v.rfft_rows()?, seed), &x, 1e-6).unwrap());
            let spec = rand_tensor(&mut rng, &[2, len / 2 + 1, 2]);
            track(finite_difference_check(move |_, v| project(v.irfft_rows(len)?, seed), &spec, 1e-6).unwrap());
        }
        let (c, len) = (3, 8);
        let x = rand_tensor(&mut rng, &[len, c]);
        let w = rand_tensor(&mut rng, &[c, 2]);
        let cb = rand_tensor(&mut rng, &[c]);
        track(
            finite_difference_check(
                move |t, v| project(v.depthwise_conv1d(&t.constant(w.clone()), &t.constant(cb.clone()), 2)?, seed),
                &x,
                1e-6,
            )
            .unwrap(),
        );
        let mut store = ParamStore::new();
        let da = da_params(&mut store, &mut rng, c, 2, 4);
        let la = LocalAttentionParams {
            query: store.add("lq", rand_tensor(&mut rng, &[len, 4])),
            query_bias: store.add("lqb", rand_tensor(&mut rng, &[4])),
            key: store.add("lk", rand_tensor(&mut rng, &[len, 4])),
            key_bias: store.add("lkb", rand_tensor(&mut rng, &[4])),
            width: 4,
        };
        let nodes = rand_tensor(&mut rng, &[c, len]);
        let kernel = rand_tensor(&mut rng, &[c, len / 2 + 1, 2]);
        let adj = rand_tensor(&mut rng, &[c, c]);
        let s1 = store.clone();
        track(
            finite_difference_check(
                move |t, v| project(difference_attention(v, &da, &Bound::new(t, &s1))?.da, seed),
                &nodes,
                1e-6,
            )
            .unwrap(),
        );
        track(
            finite_difference_check(move |t, v| project(frequency_convolution(v, t.constant(kernel.clone()))?, seed), &nodes, 1e-6)
                .unwrap(),
        );
        track(
            finite_difference_check(
                move |t, v| {
                    let wts = medgnn::graph::adjacency_weights(t.constant(adj.clone()))?;
                    project(local_graph_attention(v, wts, &la, &Bound::new(t, &store))?.attended, seed)
                },
                &nodes,
                1e-6,
            )
            .unwrap(),
        );

        let mut cfg = ModelConfig::new(16, 2, 2);
        cfg.kernel_sizes = vec![2, 4];
        cfg.heads = 2;
        cfg.head_dim = 4;
        cfg.common_dim = 4;
        cfg.similarity_dim = 4;
        let mut model = MedGnn64::init(cfg, &mut rng).unwrap();
        model.jitter(&mut rng, 0.1);
        let inputs: Vec<Tensor64> = (0..2).map(|_| rand_tensor(&mut rng, &[16, 2])).collect();
        let refs: Vec<&Tensor64> = inputs.iter().collect();
        track(model.gradient_check(&refs, &[0, 1], 1e-6).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "gradient_suite",
        worst < 1e-4 && secs < 60.0,
        &format!("max relative error {worst:.3e} (< 1e-4), {secs:.1} s (< 60 s)"),
    );
}

fn naive_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n / 2 + 1)
        .map(|s| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| v * Complex64::from_polar(1.0, -TAU * (s * t) as f64 / n as f64))
                .sum()
        })
        .collect()
}

#[test]
fn spectral_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut round = 0.0f64;
    for n in 1..=512 {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let back = irfft(&rfft(&x).unwrap(), n).unwrap();
        round = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(round, f64::max);
    }
    let mut ident = 0.0f64;
    for len in [1usize, 6, 17, 64, 128] {
        let x = rand_tensor(&mut rng, &[4, len]);
        let bins = len / 2 + 1;
        let k = Tensor64::from_vec(&[4, bins, 2], (0..4 * bins).flat_map(|_| [1.0, 0.0]).collect()).unwrap();
        let tape = Tape::new();
        let out = frequency_convolution(tape.constant(x.clone()), tape.constant(k)).unwrap().to_tensor();
        ident = ident.max(out.max_abs_diff(&x));
    }
    let mut dft = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=256);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (g, w) in rfft(&x).unwrap().bins().iter().zip(naive_dft(&x)) {
            dft = dft.max((g - w).norm());
        }
    }
    verdict(
        "spectral_suite",
        round < 1e-10 && ident < 1e-10 && dft < 1e-10,
        &format!("round trip {round:.2e}, identity kernel {ident:.2e}, naive DFT {dft:.2e} (all < 1e-10)"),
    );
}

#[test]
fn wander_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut dsa_gap, mut da_gap) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (c, len) = (rng.random_range(1..6), rng.random_range(2..48));
        let mut store = ParamStore::new();
        let p = da_params(&mut store, &mut rng, c, 2, 4);
        let x = rand_tensor(&mut rng, &[c, len]);
        let offsets: Vec<f64> = (0..c).map(|_| rng.random_range(-20.0..20.0)).collect();
        let shifted = Tensor64::from_vec(
            &[c, len],
            (0..c).flat_map(|ch| x.row(ch).iter().map(|v| v + offsets[ch]).collect::<Vec<_>>()).collect(),
        )
        .unwrap();
        let run = |input: &Tensor64| {
            let tape = Tape::new();
            let out = difference_attention(tape.constant(input.clone()), &p, &Bound::new(&tape, &store)).unwrap();
            (out.dsa.to_tensor(), out.da.to_tensor())
        };
        let ((dsa, da), (dsa_s, da_s)) = (run(&x), run(&shifted));
        dsa_gap = dsa_gap.max(dsa.max_abs_diff(&dsa_s));
        for ch in 0..c {
            for t in 0..len {
                da_gap = da_gap.max((da_s.at2(ch, t) - da.at2(ch, t) - offsets[ch]).abs());
            }
        }
    }
    verdict(
        "wander_invariance",
        dsa_gap < 1e-9 && da_gap < 1e-9,
        &format!("DSA change {dsa_gap:.2e}, DA minus offset {da_gap:.2e} (both < 1e-9, 100 cases)"),
    );
}

#[test]
fn graph_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // Normalization against D^{-1/2}(A+I)D^{-1/2} written out per entry.
    let mut norm_gap = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let raw = rand_tensor(&mut rng, &[n, n]).map(|v| 3.0 * v);
        let tape = Tape::new();
        let got = normalize_adjacency(tape.constant(raw.clone())).unwrap().to_tensor();
        // A = softmax over each row of the raw weights, then self loops.
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let z: f64 = raw.row(i).iter().map(|v| v.exp()).sum();
                (0..n).map(|j| raw.at2(i, j).exp() / z + if i == j { 1.0 } else { 0.0 }).collect()
            })
            .collect();
        let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
        for i in 0..n {
            for j in 0..n {
                norm_gap = norm_gap.max((got.at2(i, j) - a[i][j] / (deg[i].sqrt() * deg[j].sqrt())).abs());
            }
        }
    }

    let mut row_gap = 0.0f64;
    for _ in 0..100 {
        let (c, len, g) = (rng.random_range(1..8), rng.random_range(1..20), rng.random_range(1..8));
        let mut store = ParamStore::new();
        let la = LocalAttentionParams {
            query: store.add("q", rand_tensor(&mut rng, &[len, g])),
            query_bias: store.add("qb", rand_tensor(&mut rng, &[g])),
            key: store.add("k", rand_tensor(&mut rng, &[len, g])),
            key_bias: store.add("kb", rand_tensor(&mut rng, &[g])),
            width: g,
        };
        let x = rand_tensor(&mut rng, &[c, len]).map(|v| 4.0 * v);
        let adj = rand_tensor(&mut rng, &[c, c]).map(|v| v.abs());
        let tape = Tape::new();
        let out = local_graph_attention(tape.constant(x), tape.constant(adj), &la, &Bound::new(&tape, &store)).unwrap();
        let w = out.weights.to_tensor();
        for i in 0..c {
            row_gap = row_gap.max((w.row(i).iter().sum::<f64>() - 1.0).abs());
        }
    }

    let mut equi_gap = 0.0f64;
    for _ in 0..25 {
        let (t_len, c) = (32, 4);
        let mut perm: Vec<usize> = (0..c).collect();
        perm.shuffle(&mut rng);
        let x = rand_tensor(&mut rng, &[t_len, c]);
        let kernels: Vec<(usize, Tensor64, Tensor64)> = [2usize, 4, 8]
            .iter()
            .map(|&k| (k, rand_tensor(&mut rng, &[c, k]), rand_tensor(&mut rng, &[c])))
            .collect();
        let raw = rand_tensor(&mut rng, &[c, c]).map(|v| 3.0 * v);
        let run = |permuted: bool| -> Vec<Tensor64> {
            let pick_rows = |m: &Tensor64| -> Tensor64 {
                if !permuted {
                    return m.clone();
                }
                let rows = m.shape()[0];
                let width = m.len() / rows;
                Tensor64::from_vec(m.shape(), perm.iter().flat_map(|&p| m.data()[p * width..(p + 1) * width].to_vec()).collect())
                    .unwrap()
            };
            let input = if permuted {
                Tensor64::from_vec(&[t_len, c], (0..t_len).flat_map(|t| perm.iter().map(move |&p| (t, p))).map(|(t, p)| x.at2(t, p)).collect())
                    .unwrap()
            } else {
                x.clone()
            };
            let adj = if permuted {
                let raw = &raw;
                Tensor64::from_vec(&[c, c], perm.iter().flat_map(|&i| perm.iter().map(move |&j| raw.at2(i, j))).collect()).unwrap()
            } else {
                raw.clone()
            };
            let mut store = ParamStore::new();
            let embeds: Vec<EmbeddingParams> = kernels
                .iter()
                .map(|(k, w, b)| EmbeddingParams {
                    kernel_size: *k,
                    kernels: store.add("k", pick_rows(w)),
                    bias: store.add("b", pick_rows(&b.reshape(&[c, 1]).unwrap()).reshape(&[c]).unwrap()),
                })
                .collect();
            let tape = Tape::new();
            let bound = Bound::new(&tape, &store);
            let adj_var = tape.constant(adj);
            let zs = multi_scale_embed(tape.constant(input), &embeds, &bound).unwrap();
            zs.into_iter()
                .enumerate()
                .map(|(m, z)| build_resolution_graph(z, adj_var, m).unwrap().node_features.to_tensor())
                .collect()
        };
        // Permuting the outputs of the unpermuted run must give the permuted run.
        let plain: Vec<Tensor64> = run(false);
        let permuted = run(true);
        for (a, b) in plain.iter().zip(&permuted) {
            let w = a.len() / c;
            let pa = Tensor64::from_vec(a.shape(), perm.iter().flat_map(|&p| a.data()[p * w..(p + 1) * w].to_vec()).collect()).unwrap();
            equi_gap = equi_gap.max(pa.max_abs_diff(b));
        }
    }
    verdict(
        "graph_suite",
        norm_gap < 1e-12 && row_gap < 1e-12 && equi_gap < 1e-12,
        &format!("normalization {norm_gap:.2e}, attention rows {row_gap:.2e}, permutation {equi_gap:.2e} (all < 1e-12)"),
    );
}

fn enumerated_auroc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut taus: Vec<f64> = scores.to_vec();
    taus.push(f64::INFINITY);
    taus.sort_by(|a, b| b.total_cmp(a));
    taus.dedup();
    let np = positive.iter().filter(|&&p| p).count() as f64;
    let nn = positive.len() as f64 - np;
    let pts: Vec<(f64, f64)> = taus
        .iter()
        .map(|&tau| {
            let hit = |want: bool| scores.iter().zip(positive).filter(|&(&s, &p)| p == want && s >= tau).count() as f64;
            (hit(false) / nn, hit(true) / np)
        })
        .collect();
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

#[test]
fn metric_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut hard_gap = 0.0f64;
    for _ in 0..20 {
        let k = rng.random_range(2..=6);
        let rows: Vec<Vec<u64>> = (0..k).map(|_| (0..k).map(|_| rng.random_range(0..15)).collect()).collect();
        let cm = ConfusionCounts::from_rows(&rows).unwrap();
        // Per-class formulas read straight off the matrix rows and columns.
        let total: u64 = rows.iter().flatten().sum();
        let diag: u64 = (0..k).map(|i| rows[i][i]).sum();
        let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
        for c in 0..k {
            let tp = rows[c][c] as f64;
            let col: f64 = (0..k).map(|i| rows[i][c] as f64).sum();
            let row: f64 = rows[c].iter().sum::<u64>() as f64;
            let pc = if col > 0.0 { tp / col } else { 0.0 };
            let rc = if row > 0.0 { tp / row } else { 0.0 };
            p += pc;
            r += rc;
            f += if pc + rc > 0.0 { 2.0 * pc * rc / (pc + rc) } else { 0.0 };
        }
        let kf = k as f64;
        let (p2, r2, f2) = precision_recall_f1(&cm);
        let acc = accuracy(&cm).unwrap();
        for (a, b) in [(acc, diag as f64 / total as f64), (p2, p / kf), (r2, r / kf), (f2, f / kf)] {
            hard_gap = hard_gap.max((a - b).abs());
        }
    }
    let mut auc_gap = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..50);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..10) as f64 / 10.0).collect();
        let mut positive: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        positive[0] = true;
        positive[1] = false;
        auc_gap = auc_gap.max((binary_auroc(&scores, &positive).unwrap() - enumerated_auroc(&scores, &positive)).abs());
    }
    let labels = [0usize, 1, 2, 2, 1, 0, 1];
    let perfect: Vec<Vec<f64>> = labels.iter().map(|&l| (0..3).map(|k| if k == l { 0.9 } else { 0.05 }).collect()).collect();
    let flat = vec![vec![0.2, 0.5, 0.3]; labels.len()];
    let (one, half) = (auroc_ovr(&perfect, &labels).unwrap(), auroc_ovr(&flat, &labels).unwrap());
    verdict(
        "metric_suite",
        hard_gap < 1e-12 && auc_gap < 1e-12 && one == 1.0 && half == 0.5,
        &format!("hard metrics {hard_gap:.2e}, AUROC vs enumeration {auc_gap:.2e}, perfect {one}, constant {half}"),
    );
}

/// The synthetic 3-class task shared by the learnability and ablation checks.
fn learning_task(seed: u64, wander: f64) -> Dataset<f64> {
    let mut cfg = SynthConfig::new(128, 4, 3);
    cfg.subjects = 40;
    cfg.samples_per_subject = 20;
    cfg.wander_amplitude = wander;
    cfg.noise_sigma = 0.5;
    synth_generate(&cfg, seed).unwrap()
}

fn learning_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.kernel_sizes = vec![2, 4, 8];
    cfg.epochs = 20;
    cfg.seed = seed;
    cfg.split = SplitSpec {
        mode: SplitMode::SubjectBased,
        ratios: [0.6, 0.2, 0.2],
        seed,
    };
    cfg
}

fn test_accuracy(ds: &Dataset<f64>, cfg: &RunConfig) -> f64 {
    let parts = split(ds, &cfg.split).unwrap();
    let out = fit(cfg, &parts.train, &parts.val, |_| {}).unwrap();
    evaluate(&out.best, &parts.test).unwrap().accuracy
}

#[test]
fn learnability() {
    let _guard = TIMED.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let accs: Vec<f64> = (0..5).map(|seed| test_accuracy(&learning_task(seed, 3.0), &learning_config(seed))).collect();
    let secs = start.elapsed().as_secs_f64();
    let good = accs.iter().filter(|&&a| a >= 0.9).count();
    verdict(
        "learnability",
        good >= 4 && secs < 600.0,
        &format!("{good}/5 seeds reach 0.90 test accuracy (need 4), accuracies {accs:.4?}, {secs:.0} s (< 600 s)"),
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn ablation_direction() {
    let _guard = TIMED.lock().unwrap_or_else(|e| e.into_inner());
    let (mut full, mut no_da, mut single) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..5 {
        let ds = learning_task(seed, 10.0);
        let cfg = learning_config(seed);
        full.push(test_accuracy(&ds, &cfg));
        let mut c = cfg.clone();
        c.ablation.disable_da = true;
        no_da.push(test_accuracy(&ds, &c));
        let mut c = cfg.clone();
        c.ablation.single_resolution = true;
        single.push(test_accuracy(&ds, &c));
    }
    let detail = format!(
        "median test accuracy full {:.4} vs disable_da {:.4} vs single_resolution {:.4} (full {full:.4?}, disable_da {no_da:.4?}, single_resolution {single:.4?})",
        median(full.clone()),
        median(no_da.clone()),
        median(single.clone())
    );
    let (f, d, s) = (median(full), median(no_da), median(single));
    verdict("ablation_direction", f > d && f > s, &detail);
}

fn subject_fixture(rng: &mut ChaCha8Rng) -> Dataset<f64> {
    let subjects = rng.random_range(5..30);
    let mut samples = Vec::new();
    for s in 0..subjects {
        for i in 0..rng.random_range(1..8) {
            samples.push(SeriesSample {
                values: Tensor64::zeros(&[4, 2]),
                label: s % 3,
                subject_id: format!("p{s}"),
                sample_id: format!("p{s}/{i}"),
            });
        }
    }
    Dataset::new(samples, 4, 2, vec!["a".into(), "b".into(), "c".into()]).unwrap()
}

#[test]
fn protocol_integrity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut leaks = 0;
    for _ in 0..100 {
        let ds = subject_fixture(&mut rng);
        let spec = SplitSpec { mode: SplitMode::SubjectBased, ratios: [0.6, 0.2, 0.2], seed: rng.random() };
        let parts = split(&ds, &spec).unwrap();
        let sets: Vec<HashSet<&str>> =
            [&parts.train, &parts.val, &parts.test].iter().map(|d| d.subjects().into_iter().collect()).collect();
        if !(sets[0].is_disjoint(&sets[1]) && sets[0].is_disjoint(&sets[2]) && sets[1].is_disjoint(&sets[2])) {
            leaks += 1;
        }
    }

    let mut synth = SynthConfig::new(128, 4, 3);
    synth.subjects = 12;
    synth.samples_per_subject = 6;
    synth.wander_amplitude = 3.0;
    synth.noise_sigma = 0.5;
    let data = tempfile::tempdir().unwrap();
    medgnn::data::save_dataset(&synth_generate::<f64>(&synth, 1).unwrap(), data.path()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = learning_config(1);
    cfg.epochs = 2;
    cfg.dataset = data.path().to_path_buf();
    cfg.checkpoint_dir = out.path().join("ckpt");
    let snapshot = || {
        train::<f64>(&cfg, |_| {}).unwrap();
        let files = (
            fs::read(cfg.checkpoint_dir.join(CHECKPOINT_META)).unwrap(),
            fs::read(cfg.checkpoint_dir.join(CHECKPOINT_PARAMS)).unwrap(),
        );
        fs::remove_dir_all(&cfg.checkpoint_dir).unwrap();
        files
    };
    let identical = snapshot() == snapshot();
    verdict(
        "protocol_integrity",
        leaks == 0 && identical,
        &format!("{leaks}/100 subject splits leak, repeated runs bit-identical: {identical}"),
    );
}
