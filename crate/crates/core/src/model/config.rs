use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chemper::FEATURE_WIDTH;
use crate::molio::Task;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Max,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(Self::Sum),
            "max" => Ok(Self::Max),
            other => Err(Error::Config(format!(
                "unknown aggregation `{other}` (expected sum or max)"
            ))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sum => "sum",
            Self::Max => "max",
        })
    }
}

/// Activation of the vector branch of the fully connected head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorActivation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Width of the per-atom input features.
    pub input_width: usize,
    /// Scalar and vector channel count of every convolution output.
    pub hidden: usize,
    pub conv_layers: usize,
    pub aggregation: Aggregation,
    pub task: Task,
    /// Width of every dense layer in the head.
    pub fc_width: usize,
    /// Dense layers per head branch.
    pub fc_layers: usize,
    pub vector_activation: VectorActivation,
    /// Identity vector activations and zero vector-form biases; the readout
    /// ignores the vector branch. Makes scalar outputs exactly
    /// rotation-invariant and vector outputs rotation-equivariant.
    pub diagnostic: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_width: FEATURE_WIDTH,
            hidden: 128,
            conv_layers: 2,
            aggregation: Aggregation::Sum,
            task: Task::Regression,
            fc_width: 128,
            fc_layers: 2,
            vector_activation: VectorActivation::Relu,
            diagnostic: false,
        }
    }
}

impl ModelConfig {
    pub fn new(task: Task, aggregation: Aggregation) -> Self {
        Self {
            task,
            aggregation,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_width", self.input_width),
            ("hidden", self.hidden),
            ("fc_width", self.fc_width),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.conv_layers == 0 {
            return Err(Error::Config("conv_layers must be at least 1".into()));
        }
        if self.fc_layers == 0 {
            return Err(Error::Config("fc_layers must be at least 1".into()));
        }
        Ok(())
    }

    /// Width of the concatenated readout input: scalar branch then the
    /// flattened `[fc_width × 3]` vector branch.
    pub fn readout_width(&self) -> usize {
        4 * self.fc_width
    }
}
