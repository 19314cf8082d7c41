//! Flat JSON run configuration: one object whose keys are the field names of
//! the model, training and feature configurations.

use std::path::Path;

use anyhow::{Context, Result};
use gcn3d::chemper::FeatureConfig;
use gcn3d::model::ModelConfig;
use gcn3d::train::TrainConfig;
use gcn3d::Error;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub features: FeatureConfig,
    /// Whether `batch_size` came from the file (otherwise it is picked from
    /// the dataset size).
    #[serde(skip)]
    pub batch_size_set: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            features: FeatureConfig::default(),
            batch_size_set: false,
        }
    }
}

fn keys<T: Serialize>(v: &T) -> Vec<String> {
    match serde_json::to_value(v).expect("config serializes") {
        Value::Object(m) => m.keys().cloned().collect(),
        _ => unreachable!("configs are structs"),
    }
}

fn section<T: serde::de::DeserializeOwned>(map: Map<String, Value>, what: &str) -> Result<T> {
    serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(format!("{what}: {e}")).into())
}

impl RunConfig {
    pub fn from_value(value: Value) -> Result<Self> {
        let Value::Object(all) = value else {
            return Err(Error::Config("config file must hold a JSON object".into()).into());
        };
        let defaults = Self::default();
        let (mk, tk, fk) = (keys(&defaults.model), keys(&defaults.train), keys(&defaults.features));
        let (mut m, mut t, mut f) = (Map::new(), Map::new(), Map::new());
        let batch_size_set = all.contains_key("batch_size");
        for (k, v) in all {
            let target = if mk.contains(&k) {
                &mut m
            } else if tk.contains(&k) {
                &mut t
            } else if fk.contains(&k) {
                &mut f
            } else {
                return Err(Error::Config(format!("unknown config key `{k}`")).into());
            };
            target.insert(k, v);
        }
        Ok(Self {
            model: section(m, "model settings")?,
            train: section(t, "training settings")?,
            features: section(f, "feature settings")?,
            batch_size_set,
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_value(value).with_context(|| format!("in config {}", path.display()))
    }

    /// The flat view written into run manifests.
    pub fn flat(&self) -> Value {
        let mut out = Map::new();
        for v in [
            serde_json::to_value(&self.model),
            serde_json::to_value(&self.train),
            serde_json::to_value(&self.features),
        ] {
            if let Ok(Value::Object(m)) = v {
                out.extend(m);
            }
        }
        Value::Object(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.features.validate()?;
        Ok(())
    }
}

/// Batch size when the configuration leaves it open: 8 for datasets up to
/// this many records, 16 above.
pub const SMALL_DATASET: usize = 1500;

pub fn default_batch_size(records: usize) -> usize {
    if records <= SMALL_DATASET {
        8
    } else {
        16
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn splits_flat_keys() {
        let c = RunConfig::from_value(
            json!({"hidden": 16, "max_epochs": 3, "explicit_hydrogens": true, "task": "classification"}),
        )
        .unwrap();
        assert_eq!(c.model.hidden, 16);
        assert_eq!(c.train.max_epochs, 3);
        assert!(c.features.explicit_hydrogens);
        assert!(!c.batch_size_set);
        assert!(RunConfig::from_value(json!({"hiden": 16})).is_err());
        assert!(RunConfig::from_value(json!({"hidden": "wide"})).is_err());
        assert_eq!(RunConfig::from_value(c.flat()).unwrap().model, c.model);
    }
}
