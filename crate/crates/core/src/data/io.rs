//! Directory layout of a dataset on disk:
//!
//! * `meta`: `key = value` lines (`format`, `version`, `time_steps`,
//!   `channels`, `classes`, `samples`, `class_names` comma-separated).
//! * `values.bin`: little-endian `f32`, sample-major, then time, then channel.
//! * `labels.csv`: header `sample_id,subject_id,label`, one row per sample in
//!   payload order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{Dataset, SeriesSample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const META_FILE: &str = "meta";
pub const VALUES_FILE: &str = "values.bin";
pub const LABELS_FILE: &str = "labels.csv";

const FORMAT: &str = "medgnn-dataset";
const VERSION: u32 = 1;

/// Reads a `key = value` file, ignoring blank lines and `#` comments.
pub(crate) fn parse_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Metadata {
            path: path.to_path_buf(),
            detail: format!("line {} is not key = value: {line:?}", lineno + 1),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn meta_field<T: std::str::FromStr>(
    meta: &BTreeMap<String, String>,
    key: &str,
    path: &Path,
) -> Result<T> {
    let raw = meta.get(key).ok_or_else(|| Error::Metadata {
        path: path.to_path_buf(),
        detail: format!("missing key {key:?}"),
    })?;
    raw.parse().map_err(|_| Error::Metadata {
        path: path.to_path_buf(),
        detail: format!("cannot parse {key} = {raw:?}"),
    })
}

pub fn save_dataset<S: Scalar>(ds: &Dataset<S>, dir: &Path) -> Result<()> {
    if ds.class_names().iter().any(|n| n.contains(',') || n.contains('\n')) {
        return Err(Error::Config("class names may not contain commas or newlines".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let meta = format!(
        "format = {FORMAT}\nversion = {VERSION}\ntime_steps = {}\nchannels = {}\nclasses = {}\nsamples = {}\nclass_names = {}\n",
        ds.time_steps(),
        ds.channels(),
        ds.classes(),
        ds.len(),
        ds.class_names().join(",")
    );
    let meta_path = dir.join(META_FILE);
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;

    let mut payload = Vec::with_capacity(ds.len() * ds.time_steps() * ds.channels() * 4);
    for s in ds.samples() {
        for &v in s.values.data() {
            payload.extend_from_slice(&(v.to_f64_lossless() as f32).to_le_bytes());
        }
    }
    let values_path = dir.join(VALUES_FILE);
    fs::write(&values_path, payload).map_err(|e| Error::io(&values_path, e))?;

    let labels_path = dir.join(LABELS_FILE);
    let mut w = csv::Writer::from_path(&labels_path)
        .map_err(|e| Error::io(&labels_path, std::io::Error::other(e)))?;
    let csv_err = |e: csv::Error| Error::io(&labels_path, std::io::Error::other(e));
    w.write_record(["sample_id", "subject_id", "label"]).map_err(csv_err)?;
    for s in ds.samples() {
        w.write_record([s.sample_id.as_str(), s.subject_id.as_str(), &s.label.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&labels_path, e))?;
    Ok(())
}

pub fn load_dataset<S: Scalar>(dir: &Path) -> Result<Dataset<S>> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    let meta_path = dir.join(META_FILE);
    let meta = parse_key_values(&meta_path)?;
    let format: String = meta_field(&meta, "format", &meta_path)?;
    if format != FORMAT {
        return Err(Error::Metadata {
            path: meta_path,
            detail: format!("unknown format {format:?}"),
        });
    }
    let version: u32 = meta_field(&meta, "version", &meta_path)?;
    if version != VERSION {
        return Err(Error::Metadata {
            path: meta_path,
            detail: format!("unsupported version {version}"),
        });
    }
    let t: usize = meta_field(&meta, "time_steps", &meta_path)?;
    let c: usize = meta_field(&meta, "channels", &meta_path)?;
    let k: usize = meta_field(&meta, "classes", &meta_path)?;
    let n: usize = meta_field(&meta, "samples", &meta_path)?;
    let names_raw: String = meta_field(&meta, "class_names", &meta_path)?;
    let class_names: Vec<String> = names_raw.split(',').map(|s| s.trim().to_string()).collect();
    if t == 0 || c == 0 || k == 0 || class_names.len() != k {
        return Err(Error::Metadata {
            path: meta_path,
            detail: format!(
                "inconsistent dimensions: time_steps={t}, channels={c}, classes={k}, {} class names",
                class_names.len()
            ),
        });
    }

    let values_path = dir.join(VALUES_FILE);
    let bytes = fs::read(&values_path).map_err(|e| Error::io(&values_path, e))?;
    let expected = n * t * c * 4;
    if bytes.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "{} holds {} bytes, metadata promises {n} samples of [{t}, {c}] = {expected} bytes",
            values_path.display(),
            bytes.len()
        )));
    }

    let labels_path = dir.join(LABELS_FILE);
    let mut reader = csv::Reader::from_path(&labels_path)
        .map_err(|e| Error::io(&labels_path, std::io::Error::other(e)))?;
    let mut rows = Vec::with_capacity(n);
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Metadata {
            path: labels_path.clone(),
            detail: format!("row {}: {e}", i + 1),
        })?;
        if rec.len() != 3 {
            return Err(Error::Metadata {
                path: labels_path,
                detail: format!("row {} has {} fields, expected 3", i + 1, rec.len()),
            });
        }
        let label: i64 = rec[2].trim().parse().map_err(|_| Error::Metadata {
            path: labels_path.clone(),
            detail: format!("row {}: label {:?} is not an integer", i + 1, &rec[2]),
        })?;
        if label < 0 || label as usize >= k {
            return Err(Error::LabelOutOfRange {
                sample: rec[0].to_string(),
                label,
                classes: k,
            });
        }
        rows.push((rec[0].to_string(), rec[1].to_string(), label as usize));
    }
    if rows.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} lists {} samples, metadata promises {n}",
            labels_path.display(),
            rows.len()
        )));
    }

    let per_sample = t * c;
    let samples = rows
        .into_iter()
        .enumerate()
        .map(|(i, (sample_id, subject_id, label))| {
            let chunk = &bytes[i * per_sample * 4..(i + 1) * per_sample * 4];
            let data = chunk
                .chunks_exact(4)
                .map(|b| S::cast(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64))
                .collect();
            Ok(SeriesSample {
                values: Tensor::from_vec(&[t, c], data)?,
                label,
                subject_id,
                sample_id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, t, c, class_names)
}
