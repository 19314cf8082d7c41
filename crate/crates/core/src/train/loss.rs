use crate::molio::Task;
use crate::{Error, Result};

/// Loss and its derivative with respect to the raw model output.
///
/// Regression: squared error against a standardized target. Classification:
/// binary cross-entropy of `sigmoid(raw)`, evaluated from the logit so large
/// magnitudes neither overflow nor lose precision.
pub fn loss(raw: f64, target: f64, task: Task) -> Result<(f64, f64)> {
    if !raw.is_finite() {
        return Err(Error::Numeric(format!("non-finite prediction {raw}")));
    }
    match task {
        Task::Regression => {
            let d = raw - target;
            Ok((d * d, 2.0 * d))
        }
        Task::Classification => {
            if target != 0.0 && target != 1.0 {
                return Err(Error::Dataset(format!(
                    "classification target must be 0 or 1, got {target}"
                )));
            }
            let value = raw.max(0.0) - raw * target + (-raw.abs()).exp().ln_1p();
            Ok((value, crate::numcore::sigmoid_scalar(raw) - target))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points() {
        assert_eq!(loss(0.3, 0.3, Task::Regression).unwrap(), (0.0, 0.0));
        let (v, _) = loss(0.0, 1.0, Task::Classification).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(loss(f64::NAN, 0.0, Task::Regression).is_err());
        assert!(loss(1.0, 0.5, Task::Classification).is_err());
        // extreme logits stay finite
        let (v, g) = loss(800.0, 0.0, Task::Classification).unwrap();
        assert_eq!((v, g), (800.0, 1.0));
    }
}
