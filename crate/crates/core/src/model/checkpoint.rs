use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chemper::FeatureConfig;
use crate::numcore::{ParameterSet, Tensor};
use crate::train::TargetScaler;
use crate::{Error, Result};

use super::config::ModelConfig;
use super::params::{parameter_shapes, ModelParams};

pub const CHECKPOINT_FORMAT: &str = "gcn3d-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to reproduce predictions: the parameters, the feature
/// configuration they were trained against, and the target scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub features: FeatureConfig,
    pub scaler: TargetScaler,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    config: ModelConfig,
    features: FeatureConfig,
    scaler: TargetScaler,
    tensors: Vec<TensorEntry>,
    values: serde_json::Map<String, Value>,
}

/// C99 hexadecimal float, e.g. `0x1.8p+1` for 3.0. Exactly invertible.
pub fn format_hex(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let mut digits = format!("{mant:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    if digits.is_empty() {
        format!("{sign}0x{lead}p{e:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{e:+}")
    }
}

pub fn parse_hex(s: &str) -> Option<f64> {
    match s {
        "nan" => return Some(f64::NAN),
        "inf" => return Some(f64::INFINITY),
        "-inf" => return Some(f64::NEG_INFINITY),
        _ => {}
    }
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let rest = rest.strip_prefix("0x")?;
    let (m, e) = rest.split_once('p')?;
    let e: i64 = e.parse().ok()?;
    let (lead, frac) = match m.split_once('.') {
        Some((l, f)) => (l, f),
        None => (m, ""),
    };
    if frac.len() > 13 || !frac.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    let lead: u64 = match lead {
        "0" => 0,
        "1" => 1,
        _ => return None,
    };
    let mant = if frac.is_empty() {
        0
    } else {
        u64::from_str_radix(frac, 16).ok()? << (4 * (13 - frac.len()))
    };
    let bits = match (lead, mant) {
        (0, 0) if e == 0 => 0,
        (0, _) if e == -1022 => mant,
        (1, _) if (-1022..=1023).contains(&e) => (((e + 1023) as u64) << 52) | mant,
        _ => return None,
    };
    let x = f64::from_bits(bits);
    Some(if neg { -x } else { x })
}

fn nest(shape: &[usize], data: &[f64]) -> Value {
    match shape {
        [] => Value::String(format_hex(data[0])),
        [n] => Value::Array(data[..*n].iter().map(|&v| Value::String(format_hex(v))).collect()),
        [n, rest @ ..] => {
            let stride: usize = rest.iter().product();
            Value::Array(
                (0..*n)
                    .map(|k| nest(rest, &data[k * stride..(k + 1) * stride]))
                    .collect(),
            )
        }
    }
}

fn flatten(name: &str, shape: &[usize], v: &Value, out: &mut Vec<f64>) -> Result<()> {
    let bad = |why: String| Error::Checkpoint(format!("tensor `{name}`: {why}"));
    match shape {
        [] => {
            let s = v.as_str().ok_or_else(|| bad("expected a hex-float string".into()))?;
            out.push(parse_hex(s).ok_or_else(|| bad(format!("malformed hex float `{s}`")))?);
        }
        [n, rest @ ..] => {
            let arr = v.as_array().ok_or_else(|| bad("expected a nested array".into()))?;
            if arr.len() != *n {
                return Err(bad(format!(
                    "values have length {} where the manifest says {n}",
                    arr.len()
                )));
            }
            for item in arr {
                flatten(name, rest, item, out)?;
            }
        }
    }
    Ok(())
}

impl Checkpoint {
    pub fn to_json(&self) -> Value {
        let mut values = serde_json::Map::new();
        let mut tensors = Vec::new();
        for p in self.params.parameters() {
            values.insert(p.name.clone(), nest(p.value.shape(), p.value.data()));
            tensors.push(TensorEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            });
        }
        let doc = Document {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.params.config().clone(),
            features: self.features.clone(),
            scaler: self.scaler,
            tensors,
            values,
        };
        serde_json::to_value(doc).expect("checkpoint serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: Document = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Checkpoint(format!("unreadable checkpoint at {}: {}", e.path(), e.inner())))?;
        if doc.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("not a checkpoint (format `{}`)", doc.format)));
        }
        if doc.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                doc.version
            )));
        }
        doc.config
            .validate()
            .map_err(|e| Error::Checkpoint(format!("invalid model config: {e}")))?;
        doc.features
            .validate()
            .map_err(|e| Error::Checkpoint(format!("invalid feature config: {e}")))?;
        let expected = parameter_shapes(&doc.config);
        if doc.tensors.len() != expected.len() {
            return Err(Error::Checkpoint(format!(
                "manifest lists {} tensors, the configuration needs {}",
                doc.tensors.len(),
                expected.len()
            )));
        }
        let mut tensors = Vec::with_capacity(expected.len());
        for (entry, (name, shape)) in doc.tensors.iter().zip(&expected) {
            if &entry.name != name {
                return Err(Error::Checkpoint(format!(
                    "manifest lists `{}` where `{name}` was expected",
                    entry.name
                )));
            }
            if &entry.shape != shape {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has manifest shape {:?}, the configuration requires {shape:?}",
                    entry.shape
                )));
            }
            let v = doc
                .values
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("tensor `{name}` has no values")))?;
            let mut data = Vec::with_capacity(shape.iter().product());
            flatten(name, shape, v, &mut data)?;
            tensors.push((name.clone(), Tensor::new(shape.clone(), data)?));
        }
        if doc.values.len() != expected.len() {
            return Err(Error::Checkpoint(
                "values contain tensors not listed in the manifest".into(),
            ));
        }
        let params = ModelParams::from_tensors(&doc.config, tensors)?;
        Ok(Self {
            params,
            features: doc.features,
            scaler: doc.scaler,
        })
    }
}

pub fn write_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(&checkpoint.to_json()).expect("checkpoint serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_json_str(&text)
}

/// Saves parameters alone, with the default feature configuration and an
/// identity scaler.
pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let ck = Checkpoint {
        params: params.clone(),
        features: FeatureConfig::default(),
        scaler: TargetScaler::identity(params.config().task),
    };
    write_checkpoint(&ck, path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    read_checkpoint(path).map(|c| c.params)
}
