use serde::{Deserialize, Serialize};

use crate::molio::Task;
use crate::{Error, Result};

/// Standardizes regression targets with training-set statistics; identity
/// for classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetScaler {
    pub task: Task,
    pub mean: f64,
    pub stddev: f64,
}

impl TargetScaler {
    pub fn identity(task: Task) -> Self {
        Self {
            task,
            mean: 0.0,
            stddev: 1.0,
        }
    }

    /// Mean and sample standard deviation of `targets`. A constant target
    /// set gets stddev 1 so the scaler stays invertible.
    pub fn fit(targets: &[f64], task: Task) -> Result<Self> {
        if task == Task::Classification {
            return Ok(Self::identity(task));
        }
        if targets.is_empty() {
            return Err(Error::Dataset("cannot fit a target scaler on an empty set".into()));
        }
        if let Some(bad) = targets.iter().find(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!("non-finite target {bad}")));
        }
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let var = if targets.len() > 1 {
            targets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let stddev = if var > 0.0 { var.sqrt() } else { 1.0 };
        Ok(Self { task, mean, stddev })
    }

    pub fn apply(&self, y: f64) -> f64 {
        (y - self.mean) / self.stddev
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.stddev + self.mean
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.stddev > 0.0 && self.stddev.is_finite() && self.mean.is_finite();
        let identity = self.task == Task::Regression || (self.mean == 0.0 && self.stddev == 1.0);
        if ok && identity {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid target scaler {self:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizes() {
        let s = TargetScaler::fit(&[1.0, 2.0, 3.0], Task::Regression).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.stddev, 1.0);
        assert_eq!(s.apply(3.0), 1.0);
        let c = TargetScaler::fit(&[0.0, 1.0], Task::Classification).unwrap();
        assert_eq!(c, TargetScaler::identity(Task::Classification));
        assert_eq!(TargetScaler::fit(&[5.0, 5.0], Task::Regression).unwrap().stddev, 1.0);
    }
}
