use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::ParameterSet;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub eps: f64,
    /// Maximum accepted relative error.
    pub tol: f64,
    /// Lower bound on the relative-error denominator, so entries whose true
    /// gradient is zero are judged by absolute error instead.
    pub floor: f64,
    /// Check at most this many entries per parameter, sampled with `seed`.
    pub max_entries: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            tol: 1e-5,
            floor: 1e-4,
            max_entries: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParameterReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Flat index of the worst entry.
    pub worst_entry: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub parameters: Vec<ParameterReport>,
    pub max_rel_error: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&ParameterReport> {
        self.parameters
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

/// Relative error with an absolute floor on the denominator.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compare the gradients stored in `set` against central differences of `loss`.
///
/// The caller fills every `Parameter::grad` with the analytic gradient of
/// `loss` at the current values before calling. Values are restored exactly.
pub fn gradient_check<P, F>(set: &mut P, mut loss: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    P: ParameterSet,
    F: FnMut(&P) -> Result<f64>,
{
    if !(opts.eps > 0.0) {
        return Err(Error::Numeric(format!("step must be positive, got {}", opts.eps)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let count = set.parameters().len();
    let mut reports = Vec::with_capacity(count);

    for k in 0..count {
        let (name, len) = {
            let p = &set.parameters()[k];
            (p.name.clone(), p.value.len())
        };
        let entries: Vec<usize> = match opts.max_entries {
            Some(m) if m < len => {
                let mut e = sample(&mut rng, len, m).into_vec();
                e.sort_unstable();
                e
            }
            _ => (0..len).collect(),
        };

        let mut report = ParameterReport {
            name,
            checked: entries.len(),
            max_rel_error: 0.0,
            worst_entry: 0,
            analytic: 0.0,
            numeric: 0.0,
            passed: true,
        };
        for e in entries {
            let original = set.parameters()[k].value.data()[e];
            let analytic = set.parameters()[k].grad.data()[e];

            set.parameters_mut()[k].value.data_mut()[e] = original + opts.eps;
            let plus = loss(set);
            set.parameters_mut()[k].value.data_mut()[e] = original - opts.eps;
            let minus = loss(set);
            set.parameters_mut()[k].value.data_mut()[e] = original;
            let (plus, minus) = (plus?, minus?);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "loss is not finite while perturbing {}[{e}]",
                    report.name
                )));
            }

            let numeric = (plus - minus) / (2.0 * opts.eps);
            let err = relative_error(analytic, numeric, opts.floor);
            if err > report.max_rel_error || report.checked == 1 {
                report.max_rel_error = err;
                report.worst_entry = e;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
        report.passed = report.max_rel_error <= opts.tol;
        reports.push(report);
    }

    let max_rel_error = reports.iter().fold(0.0_f64, |m, r| m.max(r.max_rel_error));
    Ok(GradCheckReport {
        passed: reports.iter().all(|r| r.passed),
        max_rel_error,
        parameters: reports,
    })
}
