use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use medgnn::data::{load_dataset, save_dataset, split, synth_generate, SynthConfig};
use medgnn::train::{evaluate, read_meta, train, Checkpoint, EpochLog, RunConfig, CHECKPOINT_META};
use medgnn::{Dataset64, Error, MedGnn64, ModelConfig, Result, Tensor64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "medgnn", version, about = "Multi-resolution graph network for medical time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, select by validation macro F1, test once, and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Write a synthetic dataset directory.
    SynthGen(SynthArgs),
    /// Finite-difference check of the full model on a tiny configuration.
    Gradcheck(GradcheckArgs),
    /// Dump the learned adjacency of every resolution as text grids.
    ExportAdj(ExportArgs),
    /// Print dataset (or checkpoint) metadata.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the per-epoch log on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Evaluate one partition of the checkpoint's split instead of the whole dataset.
    #[arg(long, value_parser = ["all", "train", "val", "test"], default_value = "all")]
    split: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    time_steps: usize,
    #[arg(long, default_value_t = 4)]
    channels: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 12)]
    subjects: usize,
    #[arg(long, default_value_t = 4)]
    samples_per_subject: usize,
    #[arg(long, default_value_t = 0.0)]
    wander: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
    /// Fail when the error reaches this value.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    path: PathBuf,
}

fn run_train(args: TrainArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env();
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k, v)?;
    }
    if let Some(d) = args.dataset {
        cfg.dataset = d;
    }
    if let Some(d) = args.checkpoint_dir {
        cfg.checkpoint_dir = d;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;

    if !args.quiet {
        println!("{}", EpochLog::HEADER);
    }
    let outcome = train::<f64>(&cfg, |e| {
        if !args.quiet {
            println!("{e}");
        }
    })?;
    println!("best_epoch = {}", outcome.fit.best.epoch);
    println!("checkpoint = {}", cfg.checkpoint_dir.display());
    print!("{}", outcome.test);
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let ckpt = Checkpoint::<f64>::load(&args.checkpoint)?;
    let ds: Dataset64 = load_dataset(&args.dataset)?;
    let target = if args.split == "all" {
        ds
    } else {
        let parts = split(&ds, &ckpt.config.split)?;
        match args.split.as_str() {
            "train" => parts.train,
            "val" => parts.val,
            _ => parts.test,
        }
    };
    print!("{}", evaluate(&ckpt, &target)?);
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let mut cfg = SynthConfig::new(args.time_steps, args.channels, args.classes);
    cfg.subjects = args.subjects;
    cfg.samples_per_subject = args.samples_per_subject;
    cfg.wander_amplitude = args.wander;
    cfg.noise_sigma = args.noise;
    let ds: Dataset64 = synth_generate(&cfg, args.seed)?;
    save_dataset(&ds, &args.out)?;
    println!("wrote {} samples to {}", ds.len(), args.out.display());
    Ok(())
}

fn run_gradcheck(args: GradcheckArgs) -> Result<()> {
    let mut cfg = ModelConfig::new(16, 2, 2);
    cfg.kernel_sizes = vec![2, 4];
    cfg.heads = 2;
    cfg.head_dim = 4;
    cfg.common_dim = 4;
    cfg.similarity_dim = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut model = MedGnn64::init(cfg, &mut rng)?;
    model.jitter(&mut rng, 0.1);
    let inputs: Vec<Tensor64> = (0..2)
        .map(|_| {
            let data = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
            Tensor64::from_vec(&[16, 2], data)
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&Tensor64> = inputs.iter().collect();
    let err = model.gradient_check(&refs, &[0, 1], args.step)?;
    println!("{err:e}");
    if !(err < args.tolerance) {
        return Err(Error::Numeric(format!(
            "gradient check error {err:e} is not below {:e}",
            args.tolerance
        )));
    }
    Ok(())
}

fn run_export(args: ExportArgs) -> Result<()> {
    let ckpt = Checkpoint::<f64>::load(&args.checkpoint)?;
    for p in ckpt.export_adjacency(&args.out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn run_inspect(path: &Path) -> Result<()> {
    if path.join(CHECKPOINT_META).is_file() {
        for (k, v) in read_meta(path)? {
            if !k.starts_with("param.") {
                println!("{k} = {v}");
            }
        }
        return Ok(());
    }
    let ds: Dataset64 = load_dataset(path)?;
    println!("time_steps = {}", ds.time_steps());
    println!("channels = {}", ds.channels());
    println!("classes = {}", ds.classes());
    println!("samples = {}", ds.len());
    println!("subjects = {}", ds.subjects().len());
    println!("class_names = {}", ds.class_names().join(","));
    let mut counts = vec![0usize; ds.classes()];
    for s in ds.samples() {
        counts[s.label] += 1;
    }
    let counts: Vec<String> = counts.iter().map(usize::to_string).collect();
    println!("class_counts = {}", counts.join(","));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::SynthGen(a) => run_synth(a),
        Command::Gradcheck(a) => run_gradcheck(a),
        Command::ExportAdj(a) => run_export(a),
        Command::Inspect(a) => run_inspect(&a.path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error kind={} message={msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
