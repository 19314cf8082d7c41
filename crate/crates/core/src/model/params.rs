use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numcore::{Parameter, ParameterSet, Tensor};
use crate::{Error, Result};

use super::config::ModelConfig;

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Slots of one convolution layer, in parameter order.
pub(crate) const LAYER_SLOTS: [&str; 12] = [
    "W_ss", "b_ss", "W_vs", "B_vs", "W_vv", "B_vv", "W_sv", "b_sv", "W_s", "b_s", "W_v", "B_v",
];

pub(crate) mod slot {
    pub const W_SS: usize = 0;
    pub const B_SS: usize = 1;
    pub const W_VS: usize = 2;
    pub const B_VS: usize = 3;
    pub const W_VV: usize = 4;
    pub const B_VV: usize = 5;
    pub const W_SV: usize = 6;
    pub const B_SV: usize = 7;
    pub const W_S: usize = 8;
    pub const B_S: usize = 9;
    pub const W_V: usize = 10;
    pub const B_V: usize = 11;
}

/// Names and shapes of every parameter, in the canonical order used by
/// optimizers and checkpoints.
pub fn parameter_shapes(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let h = config.hidden;
    let mut out = Vec::new();
    for l in 0..config.conv_layers {
        let f = if l == 0 { config.input_width } else { h };
        for name in LAYER_SLOTS {
            let shape = match name {
                "W_s" | "W_v" => vec![h, 2 * h],
                n if n.starts_with('W') => vec![h, 2 * f],
                n if n.starts_with('B') => vec![h, 3],
                _ => vec![h],
            };
            out.push((format!("conv{l}.{name}"), shape));
        }
    }
    let fc = config.fc_width;
    for (branch, bias) in [("fc_scalar", "b"), ("fc_vector", "B")] {
        for k in 0..config.fc_layers {
            let fan_in = if k == 0 { h } else { fc };
            out.push((format!("{branch}{k}.W"), vec![fc, fan_in]));
            out.push((
                format!("{branch}{k}.{bias}"),
                if bias == "B" { vec![fc, 3] } else { vec![fc] },
            ));
        }
    }
    out.push(("out.W".into(), vec![1, config.readout_width()]));
    out.push(("out.b".into(), vec![1]));
    out
}

/// All trainable tensors of a model plus the configuration that shaped them.
#[derive(Debug, Clone)]
pub struct ModelParams {
    config: ModelConfig,
    params: Vec<Parameter>,
    generation: u64,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

impl ModelParams {
    /// All-zero parameters.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = parameter_shapes(config)
            .into_iter()
            .map(|(name, shape)| Parameter::new(name, Tensor::zeros(&shape)))
            .collect();
        Ok(Self {
            config: config.clone(),
            params,
            generation: next_generation(),
        })
    }

    /// Wraps loaded tensors, checking names and shapes against `config`.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let expected = parameter_shapes(config);
        if expected.len() != tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors for this configuration, found {}",
                expected.len(),
                tensors.len()
            )));
        }
        let mut params = Vec::with_capacity(tensors.len());
        for ((name, shape), (got_name, t)) in expected.into_iter().zip(tensors) {
            if name != got_name {
                return Err(Error::Checkpoint(format!(
                    "expected tensor `{name}`, found `{got_name}`"
                )));
            }
            if t.shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has shape {:?}, configuration requires {shape:?}",
                    t.shape()
                )));
            }
            params.push(Parameter::new(name, t));
        }
        let out = Self {
            config: config.clone(),
            params,
            generation: next_generation(),
        };
        if config.diagnostic {
            for (name, range) in out.frozen_ranges() {
                if out.params[name].value.data()[range].iter().any(|&v| v != 0.0) {
                    return Err(Error::Checkpoint(format!(
                        "diagnostic model has nonzero entries in frozen tensor `{}`",
                        out.params[name].name
                    )));
                }
            }
        }
        Ok(out)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Changes whenever parameters may have been mutated; forward caches
    /// remember it so stale caches are caught.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub(crate) fn n_tensors(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn layer_index(&self, layer: usize, slot: usize) -> usize {
        layer * LAYER_SLOTS.len() + slot
    }

    pub(crate) fn fc_index(&self, vector: bool, k: usize, bias: bool) -> usize {
        let base = self.config.conv_layers * LAYER_SLOTS.len() + if vector { 2 * self.config.fc_layers } else { 0 };
        base + 2 * k + usize::from(bias)
    }

    pub(crate) fn out_index(&self, bias: bool) -> usize {
        self.params.len() - 2 + usize::from(bias)
    }

    pub(crate) fn value(&self, index: usize) -> &[f64] {
        self.params[index].value.data()
    }

    pub(crate) fn layer_value(&self, layer: usize, slot: usize) -> &[f64] {
        self.value(self.layer_index(layer, slot))
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        self.generation = next_generation();
        self.params.iter_mut().find(|p| p.name == name)
    }

    /// Entries diagnostic mode pins to zero: vector-form biases of the
    /// convolutions and of the head, and the readout weights on the vector
    /// branch. `(parameter index, entry range)`.
    pub fn frozen_ranges(&self) -> Vec<(usize, std::ops::Range<usize>)> {
        if !self.config.diagnostic {
            return Vec::new();
        }
        let mut out = Vec::new();
        for l in 0..self.config.conv_layers {
            for s in [slot::B_VS, slot::B_VV, slot::B_V] {
                let k = self.layer_index(l, s);
                out.push((k, 0..self.params[k].value.len()));
            }
        }
        for k in 0..self.config.fc_layers {
            let i = self.fc_index(true, k, true);
            out.push((i, 0..self.params[i].value.len()));
        }
        let fc = self.config.fc_width;
        out.push((self.out_index(false), fc..4 * fc));
        out
    }
}

impl ParameterSet for ModelParams {
    fn parameters(&self) -> Vec<&Parameter> {
        self.params.iter().collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.generation = next_generation();
        self.params.iter_mut().collect()
    }
}

/// Glorot-uniform weights, zero biases, drawn in parameter order from a
/// ChaCha8 stream seeded with `seed`.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in params.params.iter_mut() {
        let shape = p.value.shape().to_vec();
        let short = p.name.rsplit('.').next().unwrap_or_default();
        if short.starts_with('W') {
            let (fan_out, fan_in) = (shape[0], shape[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in p.value.data_mut() {
                *v = rng.gen_range(-limit..limit);
            }
        }
    }
    for (k, range) in params.frozen_ranges() {
        params.params[k].value.data_mut()[range].fill(0.0);
    }
    Ok(params)
}

/// Gradient buffers laid out like [`ModelParams::parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub(crate) buffers: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            buffers: params.params.iter().map(|p| vec![0.0; p.value.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.buffers.iter_mut().zip(&other.buffers) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.buffers.iter_mut().flatten().for_each(|v| *v *= factor);
    }

    pub fn fill_zero(&mut self) {
        self.buffers.iter_mut().flatten().for_each(|v| *v = 0.0);
    }

    /// Visits every entry in parameter order.
    pub fn map_entries(&mut self, f: impl FnMut(&mut f64)) {
        self.buffers.iter_mut().flatten().for_each(f);
    }

    pub fn buffers(&self) -> &[Vec<f64>] {
        &self.buffers
    }

    pub fn max_abs(&self) -> f64 {
        self.buffers.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Adds into each parameter's `grad`.
    pub fn accumulate_into(&self, params: &mut ModelParams) -> Result<()> {
        for (p, g) in params.params.iter_mut().zip(&self.buffers) {
            for (a, b) in p.grad.data_mut().iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_config() {
        let cfg = ModelConfig::default();
        let shapes = parameter_shapes(&cfg);
        assert_eq!(shapes.len(), 2 * 12 + 2 * 2 * 2 + 2);
        assert_eq!(shapes[0], ("conv0.W_ss".to_string(), vec![128, 120]));
        assert_eq!(shapes[3], ("conv0.B_vs".to_string(), vec![128, 3]));
        assert_eq!(shapes[12], ("conv1.W_ss".to_string(), vec![128, 256]));
        assert_eq!(shapes[20], ("conv1.W_s".to_string(), vec![128, 256]));
        assert_eq!(shapes.last().unwrap().1, vec![1]);
        assert_eq!(shapes[shapes.len() - 2].1, vec![1, 512]);
    }

    #[test]
    fn init_is_seeded_and_biases_zero() {
        let cfg = ModelConfig::default();
        let a = init_params(&cfg, 7).unwrap();
        let b = init_params(&cfg, 7).unwrap();
        let c = init_params(&cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for p in a.parameters() {
            let short = p.name.rsplit('.').next().unwrap();
            if !short.starts_with('W') {
                assert!(p.value.data().iter().all(|&v| v == 0.0), "{}", p.name);
            }
        }
    }

    #[test]
    fn glorot_spread() {
        let cfg = ModelConfig::default();
        let p = init_params(&cfg, 1).unwrap();
        let w = p.get("conv1.W_s").unwrap().value.data();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let want = (6.0f64 / 384.0).sqrt() / 3f64.sqrt();
        assert!((sd / want - 1.0).abs() < 0.1, "{sd} vs {want}");
    }

    #[test]
    fn generation_changes_on_mutation() {
        let mut p = init_params(&ModelConfig::default(), 0).unwrap();
        let g = p.generation();
        p.parameters_mut();
        assert_ne!(g, p.generation());
    }

    #[test]
    fn diagnostic_init_zeroes_frozen_entries() {
        let cfg = ModelConfig {
            diagnostic: true,
            ..ModelConfig::default()
        };
        let p = init_params(&cfg, 3).unwrap();
        let w = p.get("out.W").unwrap().value.data();
        assert!(w[..128].iter().any(|&v| v != 0.0));
        assert!(w[128..].iter().all(|&v| v == 0.0));
    }
}
