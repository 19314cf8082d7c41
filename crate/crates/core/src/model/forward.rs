use crate::chemper::GraphTensors;
use crate::molio::Task;
use crate::numcore::gemm::{gemm_nn, gemm_nt, gemm_tn, Mat, MatMut};
use crate::numcore::{sigmoid_scalar, Tensor};
use crate::{Error, Result};

use super::config::{Aggregation, VectorActivation};
use super::layers::{
    conv_fwd, interconvert_fwd, layer_bwd, ConvCache, Feat, LayerGrads, NodeState, Pairs, PairwiseIntermediates,
};
use super::params::{Gradients, ModelParams, LAYER_SLOTS};

/// Model output for one molecule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Readout before any squash: a logit for classification, a value in
    /// standardized target units for regression.
    pub raw: f64,
    /// Probability for classification, equal to `raw` for regression.
    pub output: f64,
}

impl Prediction {
    fn new(raw: f64, task: Task) -> Self {
        let output = match task {
            Task::Regression => raw,
            Task::Classification => sigmoid_scalar(raw),
        };
        Self { raw, output }
    }
}

/// Winning atom per channel under max aggregation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub scalar: Vec<usize>,
    pub vector: Vec<usize>,
}

/// Molecule-level features.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregated {
    /// `[H]`
    pub s_mol: Tensor,
    /// `[H, 3]`
    pub v_mol: Tensor,
    /// Present for max aggregation.
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Feat,
    z: PairwiseIntermediates,
    conv: ConvCache,
}

#[derive(Debug, Clone)]
struct DenseCache {
    /// post-activation outputs of each dense layer
    outs: Vec<Vec<f64>>,
}

/// Everything a forward pass computed that backward and the analysis tools
/// need.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    layers: Vec<LayerCache>,
    /// `[H]`
    s_mol: Vec<f64>,
    /// `[3][H]`
    v_mol: Vec<f64>,
    provenance: Option<Provenance>,
    fc_scalar: DenseCache,
    /// `[3][fc]` per layer
    fc_vector: DenseCache,
    prediction: Prediction,
}

impl ForwardCache {
    pub fn prediction(&self) -> Prediction {
        self.prediction
    }

    /// Per-atom features after the last convolution.
    pub fn final_state(&self) -> NodeState {
        let last = self.layers.last().expect("at least one layer");
        last.conv.out.to_state(self.layers.len())
    }

    /// Input state of convolution `layer`.
    pub fn layer_input(&self, layer: usize) -> Option<NodeState> {
        self.layers.get(layer).map(|l| l.input.to_state(layer))
    }

    pub fn intermediates(&self, layer: usize) -> Option<&PairwiseIntermediates> {
        self.layers.get(layer).map(|l| &l.z)
    }

    pub fn aggregated(&self) -> Aggregated {
        aggregated_tensors(&self.s_mol, &self.v_mol, self.provenance.clone())
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }
}

fn aggregated_tensors(s_mol: &[f64], v_mol: &[f64], provenance: Option<Provenance>) -> Aggregated {
    let h = s_mol.len();
    let mut v = vec![0.0; h * 3];
    for c in 0..3 {
        for k in 0..h {
            v[k * 3 + c] = v_mol[c * h + k];
        }
    }
    Aggregated {
        s_mol: Tensor::from_parts(vec![h], s_mol.to_vec()),
        v_mol: Tensor::from_parts(vec![h, 3], v),
        provenance,
    }
}

fn aggregate_feat(feat: &Feat, strategy: Aggregation) -> (Vec<f64>, Vec<f64>, Option<Provenance>) {
    let (n, h) = (feat.n, feat.f);
    let mut s = vec![0.0; h];
    let mut v = vec![0.0; 3 * h];
    match strategy {
        Aggregation::Sum => {
            for i in 0..n {
                for k in 0..h {
                    s[k] += feat.s[i * h + k];
                }
                for c in 0..3 {
                    for k in 0..h {
                        v[c * h + k] += feat.v[(i * 3 + c) * h + k];
                    }
                }
            }
            (s, v, None)
        }
        Aggregation::Max => {
            let mut ws = vec![0usize; h];
            let mut wv = vec![0usize; h];
            for k in 0..h {
                let mut best = feat.s[k];
                let mut best_norm = (0..3).map(|c| feat.v[c * h + k].powi(2)).sum::<f64>();
                for i in 1..n {
                    let x = feat.s[i * h + k];
                    if x > best {
                        best = x;
                        ws[k] = i;
                    }
                    let norm = (0..3).map(|c| feat.v[(i * 3 + c) * h + k].powi(2)).sum::<f64>();
                    if norm > best_norm {
                        best_norm = norm;
                        wv[k] = i;
                    }
                }
                s[k] = best;
                for c in 0..3 {
                    v[c * h + k] = feat.v[(wv[k] * 3 + c) * h + k];
                }
            }
            (s, v, Some(Provenance { scalar: ws, vector: wv }))
        }
    }
}

/// Reduces per-atom features to molecule features. Max aggregation picks,
/// per channel, the atom with the largest scalar and (separately) the atom
/// whose vector has the largest Euclidean norm; ties go to the lowest index.
pub fn aggregate(state: &NodeState, strategy: Aggregation) -> Result<Aggregated> {
    let feat = state.to_feat()?;
    if feat.n == 0 {
        return Err(Error::EmptyMolecule("state".into()));
    }
    let (s, v, p) = aggregate_feat(&feat, strategy);
    Ok(aggregated_tensors(&s, &v, p))
}

fn dense_act(x: f64, act: Option<VectorActivation>) -> f64 {
    match act {
        None => x,
        Some(VectorActivation::Relu) => x.max(0.0),
        Some(VectorActivation::Tanh) => x.tanh(),
    }
}

fn dense_act_grad(y: f64, act: Option<VectorActivation>) -> f64 {
    match act {
        None => 1.0,
        Some(VectorActivation::Relu) => f64::from(u8::from(y > 0.0)),
        Some(VectorActivation::Tanh) => 1.0 - y * y,
    }
}

/// The two head branches and readout. Returns caches and the raw output.
fn head_fwd(s_mol: &[f64], v_mol: &[f64], params: &ModelParams) -> (DenseCache, DenseCache, f64) {
    let cfg = params.config();
    let (fc, diag) = (cfg.fc_width, cfg.diagnostic);
    let vec_act = if diag { None } else { Some(cfg.vector_activation) };

    let mut scalar = DenseCache { outs: Vec::new() };
    let mut x = s_mol.to_vec();
    for k in 0..cfg.fc_layers {
        let w = params.value(params.fc_index(false, k, false));
        let b = params.value(params.fc_index(false, k, true));
        let mut y = vec![0.0; fc];
        gemm_nt(
            Mat::dense(&x, 1, x.len()),
            Mat::dense(w, fc, x.len()),
            MatMut::dense(&mut y, 1, fc),
            false,
        );
        for (v, bv) in y.iter_mut().zip(b) {
            *v = (*v + bv).max(0.0);
        }
        scalar.outs.push(y.clone());
        x = y;
    }

    let mut vector = DenseCache { outs: Vec::new() };
    let mut xv = v_mol.to_vec();
    for k in 0..cfg.fc_layers {
        let w = params.value(params.fc_index(true, k, false));
        let b = params.value(params.fc_index(true, k, true));
        let fin = xv.len() / 3;
        let mut y = vec![0.0; 3 * fc];
        gemm_nt(
            Mat::dense(&xv, 3, fin),
            Mat::dense(w, fc, fin),
            MatMut::dense(&mut y, 3, fc),
            false,
        );
        for c in 0..3 {
            for o in 0..fc {
                let bias = if diag { 0.0 } else { b[o * 3 + c] };
                y[c * fc + o] = dense_act(y[c * fc + o] + bias, vec_act);
            }
        }
        vector.outs.push(y.clone());
        xv = y;
    }

    let w_out = params.value(params.out_index(false));
    let b_out = params.value(params.out_index(true))[0];
    let mut raw = b_out;
    for (o, v) in x.iter().enumerate() {
        raw += w_out[o] * v;
    }
    if !diag {
        for o in 0..fc {
            for c in 0..3 {
                raw += w_out[fc + o * 3 + c] * xv[c * fc + o];
            }
        }
    }
    (scalar, vector, raw)
}

/// Fully connected head on molecule features `s_mol [H]`, `v_mol [H, 3]`.
pub fn fc_head(s_mol: &Tensor, v_mol: &Tensor, params: &ModelParams) -> Result<Prediction> {
    let h = params.config().hidden;
    if s_mol.shape() != [h] || v_mol.shape() != [h, 3] {
        return Err(Error::dim(format!(
            "head expects [{h}] and [{h}, 3], got {:?} and {:?}",
            s_mol.shape(),
            v_mol.shape()
        )));
    }
    let mut v = vec![0.0; 3 * h];
    for k in 0..h {
        for c in 0..3 {
            v[c * h + k] = v_mol.data()[k * 3 + c];
        }
    }
    let (_, _, raw) = head_fwd(s_mol.data(), &v, params);
    Ok(Prediction::new(raw, params.config().task))
}

/// Full forward pass: convolutions, aggregation, head.
pub fn forward(graph: &GraphTensors, params: &ModelParams) -> Result<(Prediction, ForwardCache)> {
    let cfg = params.config();
    let n = graph.n_atoms();
    if n == 0 {
        return Err(Error::EmptyMolecule("graph".into()));
    }
    if graph.x.shape() != [n, cfg.input_width] {
        return Err(Error::dim(format!(
            "atom features {:?} do not match configured width {}",
            graph.x.shape(),
            cfg.input_width
        )));
    }
    let pairs = Pairs::from_graph(graph);
    let mut input = Feat {
        n,
        f: cfg.input_width,
        s: graph.x.data().to_vec(),
        v: vec![0.0; n * 3 * cfg.input_width],
        v_zero: true,
    };
    let mut layers = Vec::with_capacity(cfg.conv_layers);
    for l in 0..cfg.conv_layers {
        let z = interconvert_fwd(&input, &pairs, params, l);
        let conv = conv_fwd(&z, params, l);
        let next = conv.out.clone();
        layers.push(LayerCache { input, z, conv });
        input = next;
    }
    let (s_mol, v_mol, provenance) = aggregate_feat(&input, cfg.aggregation);
    let (fc_scalar, fc_vector, raw) = head_fwd(&s_mol, &v_mol, params);
    if !raw.is_finite() {
        return Err(Error::Numeric(format!("non-finite model output {raw}")));
    }
    let prediction = Prediction::new(raw, cfg.task);
    Ok((
        prediction,
        ForwardCache {
            generation: params.generation(),
            layers,
            s_mol,
            v_mol,
            provenance,
            fc_scalar,
            fc_vector,
            prediction,
        },
    ))
}

pub fn predict(graph: &GraphTensors, params: &ModelParams) -> Result<Prediction> {
    forward(graph, params).map(|(p, _)| p)
}

/// Adds `d_raw · ∂raw/∂θ` into `grads`, where `d_raw` is the loss gradient
/// with respect to [`Prediction::raw`].
pub fn backward_into(params: &ModelParams, cache: &ForwardCache, d_raw: f64, grads: &mut Gradients) -> Result<()> {
    if cache.generation != params.generation() {
        return Err(Error::Internal(
            "forward cache is stale: parameters changed since the forward pass".into(),
        ));
    }
    if grads.buffers.len() != params.n_tensors() {
        return Err(Error::Internal(
            "gradient buffers do not match the parameter layout".into(),
        ));
    }
    let cfg = params.config();
    let (h, fc, diag) = (cfg.hidden, cfg.fc_width, cfg.diagnostic);
    let vec_act = if diag { None } else { Some(cfg.vector_activation) };

    // readout
    let w_out = params.value(params.out_index(false));
    let s_last = cache.fc_scalar.outs.last().expect("fc layers");
    let v_last = cache.fc_vector.outs.last().expect("fc layers");
    {
        let gw = &mut grads.buffers[params.out_index(false)];
        for o in 0..fc {
            gw[o] += d_raw * s_last[o];
        }
        if !diag {
            for o in 0..fc {
                for c in 0..3 {
                    gw[fc + o * 3 + c] += d_raw * v_last[c * fc + o];
                }
            }
        }
    }
    grads.buffers[params.out_index(true)][0] += d_raw;
    let mut dx: Vec<f64> = (0..fc).map(|o| d_raw * w_out[o]).collect();
    let mut dxv = vec![0.0; 3 * fc];
    if !diag {
        for o in 0..fc {
            for c in 0..3 {
                dxv[c * fc + o] = d_raw * w_out[fc + o * 3 + c];
            }
        }
    }

    // scalar branch
    for k in (0..cfg.fc_layers).rev() {
        let y = &cache.fc_scalar.outs[k];
        let x: &[f64] = if k == 0 {
            &cache.s_mol
        } else {
            &cache.fc_scalar.outs[k - 1]
        };
        let dpre: Vec<f64> = dx
            .iter()
            .zip(y)
            .map(|(d, &yv)| if yv > 0.0 { *d } else { 0.0 })
            .collect();
        let (wi, bi) = (params.fc_index(false, k, false), params.fc_index(false, k, true));
        gemm_tn(
            Mat::dense(&dpre, 1, fc),
            Mat::dense(x, 1, x.len()),
            MatMut::dense(&mut grads.buffers[wi], fc, x.len()),
            true,
        );
        for (g, d) in grads.buffers[bi].iter_mut().zip(&dpre) {
            *g += d;
        }
        let mut dnext = vec![0.0; x.len()];
        gemm_nn(
            Mat::dense(&dpre, 1, fc),
            Mat::dense(params.value(wi), fc, x.len()),
            MatMut::dense(&mut dnext, 1, x.len()),
            false,
        );
        dx = dnext;
    }

    // vector branch
    for k in (0..cfg.fc_layers).rev() {
        let y = &cache.fc_vector.outs[k];
        let x: &[f64] = if k == 0 {
            &cache.v_mol
        } else {
            &cache.fc_vector.outs[k - 1]
        };
        let fin = x.len() / 3;
        let dpre: Vec<f64> = dxv
            .iter()
            .zip(y)
            .map(|(d, &yv)| d * dense_act_grad(yv, vec_act))
            .collect();
        let (wi, bi) = (params.fc_index(true, k, false), params.fc_index(true, k, true));
        gemm_tn(
            Mat::dense(&dpre, 3, fc),
            Mat::dense(x, 3, fin),
            MatMut::dense(&mut grads.buffers[wi], fc, fin),
            true,
        );
        if !diag {
            for c in 0..3 {
                for o in 0..fc {
                    grads.buffers[bi][o * 3 + c] += dpre[c * fc + o];
                }
            }
        }
        let mut dnext = vec![0.0; x.len()];
        gemm_nn(
            Mat::dense(&dpre, 3, fc),
            Mat::dense(params.value(wi), fc, fin),
            MatMut::dense(&mut dnext, 3, fin),
            false,
        );
        dxv = dnext;
    }

    // aggregation
    let last = &cache.layers.last().expect("layers").conv.out;
    let n = last.n;
    let mut ds = vec![0.0; n * h];
    let mut dv = vec![0.0; n * 3 * h];
    match &cache.provenance {
        None => {
            for i in 0..n {
                ds[i * h..(i + 1) * h].copy_from_slice(&dx);
                for c in 0..3 {
                    dv[(i * 3 + c) * h..(i * 3 + c + 1) * h].copy_from_slice(&dxv[c * h..(c + 1) * h]);
                }
            }
        }
        Some(p) => {
            for k in 0..h {
                ds[p.scalar[k] * h + k] = dx[k];
                for c in 0..3 {
                    dv[(p.vector[k] * 3 + c) * h + k] = dxv[c * h + k];
                }
            }
        }
    }

    // convolutions
    for l in (0..cache.layers.len()).rev() {
        let lc = &cache.layers[l];
        let base = l * LAYER_SLOTS.len();
        let mut lg = LayerGrads {
            bufs: &mut grads.buffers[base..base + LAYER_SLOTS.len()],
        };
        let next = layer_bwd(params, l, &lc.input, &lc.z, &lc.conv, &ds, &dv, &mut lg, l > 0);
        if let Some((s, v)) = next {
            ds = s;
            dv = v;
        }
    }
    Ok(())
}

/// Parameter gradients of `d_raw · raw` as fresh buffers.
pub fn backward(params: &ModelParams, cache: &ForwardCache, d_raw: f64) -> Result<Gradients> {
    let mut g = Gradients::zeros_like(params);
    backward_into(params, cache, d_raw, &mut g)?;
    Ok(g)
}
