//! Checkpoint directory: `checkpoint.meta` (text) plus `params.bin`
//! (little-endian `f64`, store order).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use crate::data::ChannelStats;
use crate::error::{Error, Result};
use crate::model::MedGnnParams;
use crate::scalar::Scalar;

pub const CHECKPOINT_META: &str = "checkpoint.meta";
pub const CHECKPOINT_PARAMS: &str = "params.bin";
const FORMAT: &str = "medgnn-checkpoint";
const VERSION: &str = "1";

/// Position of the trainer's ChaCha generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<S> {
    pub config: RunConfig,
    pub model: MedGnnParams<S>,
    /// 1-based epoch whose parameters were kept.
    pub epoch: usize,
    pub rng: RngState,
    /// Train-split standardization applied to every input.
    pub stats: ChannelStats<S>,
    pub class_names: Vec<String>,
}

fn join_f64<S: Scalar>(v: &[S]) -> String {
    v.iter().map(|x| x.to_f64_lossless().to_string()).collect::<Vec<_>>().join(",")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, o) in out.iter_mut().enumerate() {
        *o = u8::from_str_radix(s.get(2 * i..2 * i + 2)?, 16).ok()?;
    }
    Some(out)
}

impl<S: Scalar> Checkpoint<S> {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let cfg = self.model.config();
        let mut meta = String::new();
        meta.push_str(&format!("format = {FORMAT}\nversion = {VERSION}\n"));
        meta.push_str(&format!("epoch = {}\n", self.epoch));
        meta.push_str(&format!(
            "time_steps = {}\nchannels = {}\nclasses = {}\n",
            cfg.time_steps, cfg.channels, cfg.classes
        ));
        meta.push_str(&format!("class_names = {}\n", self.class_names.join(",")));
        meta.push_str(&format!("rng.seed = {}\n", hex(&self.rng.seed)));
        meta.push_str(&format!("rng.stream = {}\n", self.rng.stream));
        meta.push_str(&format!("rng.word_pos = {}\n", self.rng.word_pos));
        meta.push_str(&format!("stats.mean = {}\n", join_f64(&self.stats.mean)));
        meta.push_str(&format!("stats.std = {}\n", join_f64(&self.stats.std)));
        for line in self.config.to_text().lines() {
            meta.push_str(&format!("config.{line}\n"));
        }
        let store = self.model.store();
        meta.push_str(&format!("params = {}\n", store.len()));
        let mut payload = Vec::with_capacity(store.num_scalars() * 8);
        for (i, (name, t)) in store.iter().enumerate() {
            let shape: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            meta.push_str(&format!("param.{i} = {name} {}\n", shape.join("x")));
            for v in t.data() {
                payload.extend_from_slice(&v.to_f64_lossless().to_le_bytes());
            }
        }
        let meta_path = dir.join(CHECKPOINT_META);
        fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;
        let bin_path = dir.join(CHECKPOINT_PARAMS);
        fs::write(&bin_path, payload).map_err(|e| Error::io(&bin_path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(CHECKPOINT_META);
        let kv = crate::data::parse_key_values(&meta_path)?;
        let bad = |detail: String| Error::Metadata {
            path: meta_path.clone(),
            detail,
        };
        let field = |key: &str| -> Result<&String> {
            kv.get(key).ok_or_else(|| bad(format!("missing key {key:?}")))
        };
        let num = |key: &str| -> Result<u128> {
            field(key)?
                .parse()
                .map_err(|_| bad(format!("{key} is not a nonnegative integer")))
        };
        if field("format")? != FORMAT || field("version")? != VERSION {
            return Err(bad("not a version 1 checkpoint".into()));
        }

        let config_text: String = kv
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("config.").map(|k| format!("{k} = {v}\n")))
            .collect();
        let config = RunConfig::from_text(&config_text)?;
        let (t, c, k) = (num("time_steps")? as usize, num("channels")? as usize, num("classes")? as usize);
        let class_names: Vec<String> = field("class_names")?.split(',').map(str::to_string).collect();
        if class_names.len() != k {
            return Err(bad(format!("{} class names for {k} classes", class_names.len())));
        }

        let rng = RngState {
            seed: unhex(field("rng.seed")?).ok_or_else(|| bad("rng.seed is not 64 hex digits".into()))?,
            stream: num("rng.stream")? as u64,
            word_pos: num("rng.word_pos")?,
        };
        let floats = |key: &str| -> Result<Vec<S>> {
            field(key)?
                .split(',')
                .map(|v| v.trim().parse::<f64>().map(S::cast).map_err(|_| bad(format!("{key} has a non-numeric entry"))))
                .collect()
        };
        let stats = ChannelStats {
            mean: floats("stats.mean")?,
            std: floats("stats.std")?,
        };
        if stats.mean.len() != c || stats.std.len() != c {
            return Err(bad(format!("standardization stats do not cover {c} channels")));
        }

        let model_cfg = config.model_config(t, c, k);
        // Initial values are placeholders, overwritten below.
        let mut model = MedGnnParams::init(model_cfg, &mut ChaCha8Rng::seed_from_u64(0))?;
        let count = num("params")? as usize;
        if count != model.store().len() {
            return Err(bad(format!(
                "{count} parameters recorded, configuration builds {}",
                model.store().len()
            )));
        }
        for (i, (name, tensor)) in model.store().iter().enumerate() {
            let shape: Vec<String> = tensor.shape().iter().map(usize::to_string).collect();
            let want = format!("{name} {}", shape.join("x"));
            let got = field(&format!("param.{i}"))?;
            if *got != want {
                return Err(bad(format!("param.{i} is {got:?}, expected {want:?}")));
            }
        }

        let bin_path = dir.join(CHECKPOINT_PARAMS);
        let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
        let total = model.store().num_scalars();
        if bytes.len() != total * 8 {
            return Err(Error::ShapeMismatch(format!(
                "{} holds {} bytes, parameters need {}",
                bin_path.display(),
                bytes.len(),
                total * 8
            )));
        }
        let mut values = bytes
            .chunks_exact(8)
            .map(|b| S::cast(f64::from_le_bytes(b.try_into().expect("8 bytes"))));
        let per_tensor: Vec<Vec<S>> = model
            .store()
            .iter()
            .map(|(_, t)| values.by_ref().take(t.len()).collect())
            .collect();
        model.store_mut().load_values(per_tensor)?;

        Ok(Self {
            config,
            model,
            epoch: num("epoch")? as usize,
            rng,
            stats,
            class_names,
        })
    }

    /// Dense text grid of each post-softmax adjacency, one file per resolution.
    pub fn export_adjacency(&self, out_dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let sizes = self.model.config().active_kernel_sizes().to_vec();
        let mut written = Vec::new();
        for (m, a) in self.model.adjacency_matrices()?.iter().enumerate() {
            let (rows, cols) = a.dims2()?;
            let mut text = format!("# resolution {m} kernel {}\n", sizes[m]);
            for i in 0..rows {
                let row: Vec<String> = (0..cols).map(|j| format!("{:.6}", a.at2(i, j).to_f64_lossless())).collect();
                text.push_str(&row.join(" "));
                text.push('\n');
            }
            let path = out_dir.join(format!("adjacency_res{m}.txt"));
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Parsed key-value map, shared with `inspect`.
pub fn read_meta(dir: &Path) -> Result<BTreeMap<String, String>> {
    crate::data::parse_key_values(&dir.join(CHECKPOINT_META))
}
