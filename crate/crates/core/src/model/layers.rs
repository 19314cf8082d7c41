//! Interconversion and convolution for one layer.
//!
//! Vector features are stored internally axis-major, `[N][3][F]`, so each
//! spatial component is a contiguous `N×F` block for the dense kernels; the
//! public [`NodeState`] and [`PairwiseIntermediates`] accessors use the
//! `[N][F][3]` convention.
//!
//! Two algebraic rewrites keep the per-pair work small without changing
//! the function:
//! - `W(x_i ∥ x_j) = W_L x_i + W_R x_j`, so the weight halves are applied once
//!   per atom and combined per pair;
//! - `Σ_j A_ij (W z_ij + b) = W (Σ_j A_ij z_ij) + (Σ_j A_ij) b`, so the
//!   convolution weights are applied once per atom.

use crate::chemper::GraphTensors;
use crate::numcore::gemm::{gemm_nn, gemm_nt, gemm_tn, Mat, MatMut};
use crate::numcore::Tensor;
use crate::{Error, Result};

use super::params::{slot, ModelParams};

/// Per-atom scalar and vector features entering or leaving a layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    /// `[N, F]`
    pub s: Tensor,
    /// `[N, F, 3]`
    pub v: Tensor,
    pub layer: usize,
}

impl NodeState {
    /// Layer-0 state: the atom features and zero vectors.
    pub fn initial(x: &Tensor) -> Result<Self> {
        match x.shape() {
            &[n, f] => Ok(Self {
                s: x.clone(),
                v: Tensor::zeros(&[n, f, 3]),
                layer: 0,
            }),
            s => Err(Error::dim(format!("atom features must be [N, F], got {s:?}"))),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.s.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.s.shape()[1]
    }

    pub(crate) fn to_feat(&self) -> Result<Feat> {
        let (n, f) = (self.n_atoms(), self.width());
        if self.v.shape() != [n, f, 3] {
            return Err(Error::dim(format!(
                "vector features {:?} do not match scalar features {:?}",
                self.v.shape(),
                self.s.shape()
            )));
        }
        let mut v = vec![0.0; n * 3 * f];
        let src = self.v.data();
        for i in 0..n {
            for k in 0..f {
                for c in 0..3 {
                    v[(i * 3 + c) * f + k] = src[(i * f + k) * 3 + c];
                }
            }
        }
        let v_zero = v.iter().all(|&x| x == 0.0);
        Ok(Feat {
            n,
            f,
            s: self.s.data().to_vec(),
            v,
            v_zero,
        })
    }
}

/// Internal feature block: `s` is `[N][F]`, `v` is `[N][3][F]`.
#[derive(Debug, Clone)]
pub(crate) struct Feat {
    pub n: usize,
    pub f: usize,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub v_zero: bool,
}

impl Feat {
    pub fn to_state(&self, layer: usize) -> NodeState {
        let (n, f) = (self.n, self.f);
        let mut v = vec![0.0; n * f * 3];
        for i in 0..n {
            for c in 0..3 {
                for k in 0..f {
                    v[(i * f + k) * 3 + c] = self.v[(i * 3 + c) * f + k];
                }
            }
        }
        NodeState {
            s: Tensor::from_parts(vec![n, f], self.s.clone()),
            v: Tensor::from_parts(vec![n, f, 3], v),
            layer,
        }
    }
}

/// Ordered pairs `(i, j)` with `j ∈ {i} ∪ N(i)`, grouped by center `i` and
/// ascending in `j`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Pairs {
    pub ij: Vec<(usize, usize)>,
    pub start: Vec<usize>,
    pub a: Vec<f64>,
    pub r: Vec<[f64; 3]>,
    /// `Σ_j A_ij` over the closed neighborhood of `i`.
    pub a_row: Vec<f64>,
}

impl Pairs {
    pub fn from_graph(g: &GraphTensors) -> Self {
        let n = g.n_atoms();
        let a_norm = g.a_norm.data();
        let mut ij = Vec::new();
        let mut start = Vec::with_capacity(n + 1);
        let mut a = Vec::new();
        let mut r = Vec::new();
        let mut a_row = Vec::with_capacity(n);
        for i in 0..n {
            start.push(ij.len());
            let mut closed = g.neighbors[i].clone();
            closed.push(i);
            closed.sort_unstable();
            let mut sum = 0.0;
            for j in closed {
                ij.push((i, j));
                a.push(a_norm[i * n + j]);
                r.push(g.rel(i, j));
                sum += a_norm[i * n + j];
            }
            a_row.push(sum);
        }
        start.push(ij.len());
        Self { ij, start, a, r, a_row }
    }

    pub fn len(&self) -> usize {
        self.ij.len()
    }

    pub fn n_atoms(&self) -> usize {
        self.start.len() - 1
    }
}

/// Pairwise intermediate features, stored for the masked pairs only.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseIntermediates {
    pub(crate) pairs: Pairs,
    pub(crate) h: usize,
    /// `[P][H]`
    pub(crate) z_ss: Vec<f64>,
    /// `[P][H]`
    pub(crate) z_vs: Vec<f64>,
    /// `[P][3][H]`
    pub(crate) z_vv: Vec<f64>,
    /// `[P][3][H]`
    pub(crate) z_sv: Vec<f64>,
}

impl PairwiseIntermediates {
    /// Masked pairs in storage order.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs.ij
    }

    /// Storage index of pair `(i, j)`, if it is inside the mask.
    pub fn index(&self, i: usize, j: usize) -> Option<usize> {
        let range = self.pairs.start[i]..self.pairs.start[i + 1];
        range.into_iter().find(|&p| self.pairs.ij[p].1 == j)
    }

    pub fn width(&self) -> usize {
        self.h
    }

    pub fn z_ss(&self, p: usize, f: usize) -> f64 {
        self.z_ss[p * self.h + f]
    }

    pub fn z_vs(&self, p: usize, f: usize) -> f64 {
        self.z_vs[p * self.h + f]
    }

    pub fn z_vv(&self, p: usize, f: usize, c: usize) -> f64 {
        self.z_vv[(p * 3 + c) * self.h + f]
    }

    pub fn z_sv(&self, p: usize, f: usize, c: usize) -> f64 {
        self.z_sv[(p * 3 + c) * self.h + f]
    }
}

/// Output of the convolution for one layer plus what backward needs.
#[derive(Debug, Clone)]
pub(crate) struct ConvCache {
    /// `[N][2H]`: `Σ_j A_ij (z_ss ∥ z_vs)`
    pub ms: Vec<f64>,
    /// `[N][3][2H]`: `Σ_j A_ij (Z_vv ∥ Z_sv)`
    pub mv: Vec<f64>,
    pub out: Feat,
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Per-atom projection `X · W_halfᵀ` for the left (`right = false`) or right
/// half of a `[H × 2F]` weight. `rows` is `N` for scalars, `3N` for vectors.
fn project(x: &[f64], rows: usize, f: usize, w: &[f64], h: usize, right: bool) -> Vec<f64> {
    let mut out = vec![0.0; rows * h];
    let wv = if right { &w[f..] } else { w };
    gemm_nt(
        Mat::dense(x, rows, f),
        Mat::new(wv, h, f, 2 * f),
        MatMut::dense(&mut out, rows, h),
        false,
    );
    out
}

pub(crate) fn interconvert_fwd(
    input: &Feat,
    pairs: &Pairs,
    params: &ModelParams,
    layer: usize,
) -> PairwiseIntermediates {
    let cfg = params.config();
    let diag = cfg.diagnostic;
    let (n, f, h) = (input.n, input.f, cfg.hidden);
    let w = |s| params.layer_value(layer, s);

    let ls = project(&input.s, n, f, w(slot::W_SS), h, false);
    let rs = project(&input.s, n, f, w(slot::W_SS), h, true);
    let lsv = project(&input.s, n, f, w(slot::W_SV), h, false);
    let rsv = project(&input.s, n, f, w(slot::W_SV), h, true);
    let (lvs, rvs, lvv, rvv) = if input.v_zero {
        (Vec::new(), Vec::new(), Vec::new(), Vec::new())
    } else {
        (
            project(&input.v, 3 * n, f, w(slot::W_VS), h, false),
            project(&input.v, 3 * n, f, w(slot::W_VS), h, true),
            project(&input.v, 3 * n, f, w(slot::W_VV), h, false),
            project(&input.v, 3 * n, f, w(slot::W_VV), h, true),
        )
    };
    let (b_ss, b_vs, b_vv, b_sv) = (w(slot::B_SS), w(slot::B_VS), w(slot::B_VV), w(slot::B_SV));

    let np = pairs.len();
    let mut z_ss = vec![0.0; np * h];
    let mut z_vs = vec![0.0; np * h];
    let mut z_vv = vec![0.0; np * 3 * h];
    let mut z_sv = vec![0.0; np * 3 * h];
    let vector_act = |x: f64| if diag { x } else { x.tanh() };

    for (p, &(i, j)) in pairs.ij.iter().enumerate() {
        let r = pairs.r[p];
        for k in 0..h {
            z_ss[p * h + k] = relu(ls[i * h + k] + rs[j * h + k] + b_ss[k]);
        }
        for k in 0..h {
            let mut dot = 0.0;
            for c in 0..3 {
                let mut u = if diag { 0.0 } else { b_vs[k * 3 + c] };
                if !input.v_zero {
                    u += lvs[(i * 3 + c) * h + k] + rvs[(j * 3 + c) * h + k];
                }
                dot += u * r[c];
            }
            z_vs[p * h + k] = relu(dot);
        }
        for c in 0..3 {
            for k in 0..h {
                let mut u = if diag { 0.0 } else { b_vv[k * 3 + c] };
                if !input.v_zero {
                    u += lvv[(i * 3 + c) * h + k] + rvv[(j * 3 + c) * h + k];
                }
                z_vv[(p * 3 + c) * h + k] = vector_act(u);
            }
        }
        for k in 0..h {
            let g = lsv[i * h + k] + rsv[j * h + k] + b_sv[k];
            for c in 0..3 {
                z_sv[(p * 3 + c) * h + k] = vector_act(g * r[c]);
            }
        }
    }

    PairwiseIntermediates {
        pairs: pairs.clone(),
        h,
        z_ss,
        z_vs,
        z_vv,
        z_sv,
    }
}

pub(crate) fn conv_fwd(z: &PairwiseIntermediates, params: &ModelParams, layer: usize) -> ConvCache {
    let cfg = params.config();
    let diag = cfg.diagnostic;
    let pairs = &z.pairs;
    let (n, h) = (pairs.n_atoms(), z.h);
    let h2 = 2 * h;

    let mut ms = vec![0.0; n * h2];
    let mut mv = vec![0.0; n * 3 * h2];
    for i in 0..n {
        for p in pairs.start[i]..pairs.start[i + 1] {
            let a = pairs.a[p];
            let row = &mut ms[i * h2..(i + 1) * h2];
            for k in 0..h {
                row[k] += a * z.z_ss[p * h + k];
                row[h + k] += a * z.z_vs[p * h + k];
            }
            for c in 0..3 {
                let row = &mut mv[(i * 3 + c) * h2..(i * 3 + c + 1) * h2];
                for k in 0..h {
                    row[k] += a * z.z_vv[(p * 3 + c) * h + k];
                    row[h + k] += a * z.z_sv[(p * 3 + c) * h + k];
                }
            }
        }
    }

    let w_s = params.layer_value(layer, slot::W_S);
    let w_v = params.layer_value(layer, slot::W_V);
    let (b_s, b_v) = (
        params.layer_value(layer, slot::B_S),
        params.layer_value(layer, slot::B_V),
    );
    let mut s = vec![0.0; n * h];
    gemm_nt(
        Mat::dense(&ms, n, h2),
        Mat::dense(w_s, h, h2),
        MatMut::dense(&mut s, n, h),
        false,
    );
    let mut v = vec![0.0; n * 3 * h];
    gemm_nt(
        Mat::dense(&mv, 3 * n, h2),
        Mat::dense(w_v, h, h2),
        MatMut::dense(&mut v, 3 * n, h),
        false,
    );
    for i in 0..n {
        let deg = pairs.a_row[i];
        for k in 0..h {
            s[i * h + k] = relu(s[i * h + k] + deg * b_s[k]);
        }
        for c in 0..3 {
            for k in 0..h {
                let x = &mut v[(i * 3 + c) * h + k];
                if !diag {
                    *x = (*x + deg * b_v[k * 3 + c]).tanh();
                }
            }
        }
    }
    let v_zero = v.iter().all(|&x| x == 0.0);
    ConvCache {
        ms,
        mv,
        out: Feat { n, f: h, s, v, v_zero },
    }
}

/// Gradient buffers for the twelve tensors of one layer.
pub(crate) struct LayerGrads<'g> {
    pub bufs: &'g mut [Vec<f64>],
}

/// Backward through convolution and interconversion of one layer.
///
/// `ds`, `dv` are gradients of the layer output (`[N][H]`, `[N][3][H]`).
/// Returns input gradients when `want_input`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn layer_bwd(
    params: &ModelParams,
    layer: usize,
    input: &Feat,
    z: &PairwiseIntermediates,
    conv: &ConvCache,
    ds: &[f64],
    dv: &[f64],
    grads: &mut LayerGrads,
    want_input: bool,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let cfg = params.config();
    let diag = cfg.diagnostic;
    let pairs = &z.pairs;
    let (n, f, h) = (input.n, input.f, z.h);
    let h2 = 2 * h;
    let w = |s| params.layer_value(layer, s);

    // convolution: pre-activations
    let mut dps = vec![0.0; n * h];
    for (k, d) in dps.iter_mut().enumerate() {
        if conv.out.s[k] > 0.0 {
            *d = ds[k];
        }
    }
    let mut dpv = vec![0.0; n * 3 * h];
    for (k, d) in dpv.iter_mut().enumerate() {
        let y = conv.out.v[k];
        *d = if diag { dv[k] } else { dv[k] * (1.0 - y * y) };
    }
    gemm_tn(
        Mat::dense(&dps, n, h),
        Mat::dense(&conv.ms, n, h2),
        MatMut::dense(&mut grads.bufs[slot::W_S], h, h2),
        true,
    );
    gemm_tn(
        Mat::dense(&dpv, 3 * n, h),
        Mat::dense(&conv.mv, 3 * n, h2),
        MatMut::dense(&mut grads.bufs[slot::W_V], h, h2),
        true,
    );
    for i in 0..n {
        let deg = pairs.a_row[i];
        for k in 0..h {
            grads.bufs[slot::B_S][k] += deg * dps[i * h + k];
        }
        if !diag {
            for c in 0..3 {
                for k in 0..h {
                    grads.bufs[slot::B_V][k * 3 + c] += deg * dpv[(i * 3 + c) * h + k];
                }
            }
        }
    }
    let mut dms = vec![0.0; n * h2];
    gemm_nn(
        Mat::dense(&dps, n, h),
        Mat::dense(w(slot::W_S), h, h2),
        MatMut::dense(&mut dms, n, h2),
        false,
    );
    let mut dmv = vec![0.0; n * 3 * h2];
    gemm_nn(
        Mat::dense(&dpv, 3 * n, h),
        Mat::dense(w(slot::W_V), h, h2),
        MatMut::dense(&mut dmv, 3 * n, h2),
        false,
    );

    // interconversion: gradients of the per-atom projections
    let mut d_ls = vec![0.0; n * h];
    let mut d_rs = vec![0.0; n * h];
    let mut d_lsv = vec![0.0; n * h];
    let mut d_rsv = vec![0.0; n * h];
    let mut d_lvs = vec![0.0; n * 3 * h];
    let mut d_rvs = vec![0.0; n * 3 * h];
    let mut d_lvv = vec![0.0; n * 3 * h];
    let mut d_rvv = vec![0.0; n * 3 * h];
    let mut du = vec![0.0; 3 * h];

    for (p, &(i, j)) in pairs.ij.iter().enumerate() {
        let a = pairs.a[p];
        let r = pairs.r[p];
        // z_ss
        for k in 0..h {
            if z.z_ss[p * h + k] > 0.0 {
                let d = a * dms[i * h2 + k];
                d_ls[i * h + k] += d;
                d_rs[j * h + k] += d;
                grads.bufs[slot::B_SS][k] += d;
            }
        }
        // z_vs = relu(Σ_c u_c r_c)
        for k in 0..h {
            let d = if z.z_vs[p * h + k] > 0.0 {
                a * dms[i * h2 + h + k]
            } else {
                0.0
            };
            for c in 0..3 {
                du[c * h + k] = d * r[c];
            }
        }
        for c in 0..3 {
            for k in 0..h {
                let d = du[c * h + k];
                d_lvs[(i * 3 + c) * h + k] += d;
                d_rvs[(j * 3 + c) * h + k] += d;
                if !diag {
                    grads.bufs[slot::B_VS][k * 3 + c] += d;
                }
            }
        }
        // Z_vv
        for c in 0..3 {
            for k in 0..h {
                let y = z.z_vv[(p * 3 + c) * h + k];
                let mut d = a * dmv[(i * 3 + c) * h2 + k];
                if !diag {
                    d *= 1.0 - y * y;
                }
                d_lvv[(i * 3 + c) * h + k] += d;
                d_rvv[(j * 3 + c) * h + k] += d;
                if !diag {
                    grads.bufs[slot::B_VV][k * 3 + c] += d;
                }
            }
        }
        // Z_sv = act(g r_c)
        for k in 0..h {
            let mut dg = 0.0;
            for c in 0..3 {
                let y = z.z_sv[(p * 3 + c) * h + k];
                let mut d = a * dmv[(i * 3 + c) * h2 + h + k];
                if !diag {
                    d *= 1.0 - y * y;
                }
                dg += d * r[c];
            }
            d_lsv[i * h + k] += dg;
            d_rsv[j * h + k] += dg;
            grads.bufs[slot::B_SV][k] += dg;
        }
    }

    // weight gradients: dW_half += dPᵀ · X
    let weight_grad = |buf: &mut Vec<f64>, d: &[f64], x: &[f64], rows: usize, right: bool| {
        let off = if right { f } else { 0 };
        gemm_tn(
            Mat::dense(d, rows, h),
            Mat::dense(x, rows, f),
            MatMut::new(&mut buf[off..], h, f, 2 * f),
            true,
        );
    };
    weight_grad(&mut grads.bufs[slot::W_SS], &d_ls, &input.s, n, false);
    weight_grad(&mut grads.bufs[slot::W_SS], &d_rs, &input.s, n, true);
    weight_grad(&mut grads.bufs[slot::W_SV], &d_lsv, &input.s, n, false);
    weight_grad(&mut grads.bufs[slot::W_SV], &d_rsv, &input.s, n, true);
    if !input.v_zero {
        weight_grad(&mut grads.bufs[slot::W_VS], &d_lvs, &input.v, 3 * n, false);
        weight_grad(&mut grads.bufs[slot::W_VS], &d_rvs, &input.v, 3 * n, true);
        weight_grad(&mut grads.bufs[slot::W_VV], &d_lvv, &input.v, 3 * n, false);
        weight_grad(&mut grads.bufs[slot::W_VV], &d_rvv, &input.v, 3 * n, true);
    }

    if !want_input {
        return None;
    }
    // input gradients: dX += dP · W_half
    let input_grad = |out: &mut Vec<f64>, d: &[f64], wt: &[f64], rows: usize, right: bool| {
        let wv = if right { &wt[f..] } else { wt };
        gemm_nn(
            Mat::dense(d, rows, h),
            Mat::new(wv, h, f, 2 * f),
            MatMut::dense(out, rows, f),
            true,
        );
    };
    let mut d_s = vec![0.0; n * f];
    input_grad(&mut d_s, &d_ls, w(slot::W_SS), n, false);
    input_grad(&mut d_s, &d_rs, w(slot::W_SS), n, true);
    input_grad(&mut d_s, &d_lsv, w(slot::W_SV), n, false);
    input_grad(&mut d_s, &d_rsv, w(slot::W_SV), n, true);
    let mut d_v = vec![0.0; n * 3 * f];
    input_grad(&mut d_v, &d_lvs, w(slot::W_VS), 3 * n, false);
    input_grad(&mut d_v, &d_rvs, w(slot::W_VS), 3 * n, true);
    input_grad(&mut d_v, &d_lvv, w(slot::W_VV), 3 * n, false);
    input_grad(&mut d_v, &d_rvv, w(slot::W_VV), 3 * n, true);
    Some((d_s, d_v))
}

fn check_layer_input(state: &NodeState, params: &ModelParams, layer: usize) -> Result<()> {
    let cfg = params.config();
    if layer >= cfg.conv_layers {
        return Err(Error::dim(format!(
            "layer {layer} does not exist ({} configured)",
            cfg.conv_layers
        )));
    }
    let want = if layer == 0 { cfg.input_width } else { cfg.hidden };
    if state.width() != want {
        return Err(Error::dim(format!(
            "layer {layer} expects width {want}, state has {}",
            state.width()
        )));
    }
    Ok(())
}

/// Pairwise interconversion for one layer over the closed neighborhoods of
/// `graph`.
pub fn interconvert(
    state: &NodeState,
    graph: &GraphTensors,
    params: &ModelParams,
    layer: usize,
) -> Result<PairwiseIntermediates> {
    check_layer_input(state, params, layer)?;
    if state.n_atoms() != graph.n_atoms() {
        return Err(Error::dim(format!(
            "state has {} atoms, graph has {}",
            state.n_atoms(),
            graph.n_atoms()
        )));
    }
    let feat = state.to_feat()?;
    Ok(interconvert_fwd(&feat, &Pairs::from_graph(graph), params, layer))
}

/// Neighborhood aggregation of one layer's intermediates with weights from
/// `a_norm`.
pub fn conv_update(
    z: &PairwiseIntermediates,
    a_norm: &Tensor,
    params: &ModelParams,
    layer: usize,
) -> Result<NodeState> {
    let n = z.pairs.n_atoms();
    if a_norm.shape() != [n, n] {
        return Err(Error::dim(format!(
            "adjacency {:?} does not match {n} atoms",
            a_norm.shape()
        )));
    }
    let ad = a_norm.data();
    for i in 0..n {
        for j in 0..n {
            let masked = z.index(i, j).is_some();
            if masked != (ad[i * n + j] != 0.0) {
                return Err(Error::Internal(format!(
                    "pair mask and adjacency disagree at ({i}, {j})"
                )));
            }
            if let Some(p) = z.index(i, j) {
                if z.pairs.a[p] != ad[i * n + j] {
                    return Err(Error::Internal(format!(
                        "pair weight at ({i}, {j}) differs from adjacency"
                    )));
                }
            }
        }
    }
    if layer >= params.config().conv_layers || z.h != params.config().hidden {
        return Err(Error::dim(format!("intermediates do not match layer {layer}")));
    }
    Ok(conv_fwd(z, params, layer).out.to_state(layer + 1))
}
