//! Fixtures and independent reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use gcn3d::chemper::{build_graph_tensors, FeatureConfig, GraphTensors};
use gcn3d::model::{ModelConfig, ModelParams, NodeState};
use gcn3d::molio::{load_dataset, read_sdf, DatasetRecord, LoadOptions, Molecule, Task};
use gcn3d::numcore::{ParameterSet, Tensor};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn fixtures() -> Vec<Molecule> {
    read_sdf(data("fixture16.sdf"))
        .unwrap()
        .into_iter()
        .map(|r| r.molecule)
        .collect()
}

pub fn fixture_records() -> Vec<DatasetRecord> {
    load_dataset(
        data("fixture16.sdf"),
        data("fixture16.csv"),
        &LoadOptions::new(Task::Regression),
    )
    .unwrap()
}

pub fn graph(m: &Molecule) -> GraphTensors {
    build_graph_tensors(m, &FeatureConfig::default()).unwrap()
}

/// Heavy-atom count of a molecule.
pub fn heavy(m: &Molecule) -> usize {
    m.atoms.iter().filter(|a| !a.element.is_hydrogen()).count()
}

/// Overwrites every parameter entry (biases included) with uniform noise
/// of the given scale, keeping diagnostic-frozen entries at zero.
pub fn randomize(params: &mut ModelParams, scale: f64, seed: u64) {
    let frozen = params.frozen_ranges();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (k, p) in params.parameters_mut().into_iter().enumerate() {
        for (e, v) in p.value.data_mut().iter_mut().enumerate() {
            let pinned = frozen.iter().any(|(i, r)| *i == k && r.contains(&e));
            *v = if pinned { 0.0 } else { rng.gen_range(-scale..scale) };
        }
    }
}

pub fn random_state(n: usize, f: usize, layer: usize, seed: u64) -> NodeState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    NodeState {
        s: Tensor::new(vec![n, f], draw(n * f)).unwrap(),
        v: Tensor::new(vec![n, f, 3], draw(n * f * 3)).unwrap(),
        layer,
    }
}

pub fn small_config(task: Task, agg: gcn3d::model::Aggregation) -> ModelConfig {
    ModelConfig {
        hidden: 5,
        fc_width: 4,
        ..ModelConfig::new(task, agg)
    }
}

/// One layer computed the slow way, straight from the definitions: every
/// ordered pair inside the closed neighborhood, concatenated inputs, full
/// weight rows, bias added per pair before the adjacency weighting.
pub struct NaiveLayer {
    /// `[(i, j)] -> [H]`
    pub z_ss: Vec<((usize, usize), Vec<f64>)>,
    pub z_vs: Vec<((usize, usize), Vec<f64>)>,
    /// `[(i, j)] -> [H][3]`
    pub z_vv: Vec<((usize, usize), Vec<[f64; 3]>)>,
    pub z_sv: Vec<((usize, usize), Vec<[f64; 3]>)>,
    /// `[N][H]`
    pub s: Vec<Vec<f64>>,
    /// `[N][H][3]`
    pub v: Vec<Vec<[f64; 3]>>,
}

pub fn naive_layer(state: &NodeState, g: &GraphTensors, params: &ModelParams, layer: usize) -> NaiveLayer {
    let cfg = params.config();
    let diag = cfg.diagnostic;
    let (n, f, h) = (state.n_atoms(), state.width(), cfg.hidden);
    let p = |name: &str| params.get(&format!("conv{layer}.{name}")).unwrap().value.clone();
    let (w_ss, b_ss, w_vs, b_vs) = (p("W_ss"), p("b_ss"), p("W_vs"), p("B_vs"));
    let (w_vv, b_vv, w_sv, b_sv) = (p("W_vv"), p("B_vv"), p("W_sv"), p("b_sv"));
    let (w_s, b_s, w_v, b_v) = (p("W_s"), p("b_s"), p("W_v"), p("B_v"));
    let vec_bias = |t: &Tensor, o: usize, c: usize| if diag { 0.0 } else { t.get(&[o, c]) };
    let act_v = |x: f64| if diag { x } else { x.tanh() };
    let relu = |x: f64| if x > 0.0 { x } else { 0.0 };
    let a = g.a_norm.data();

    let s_cat = |i: usize, j: usize| -> Vec<f64> {
        (0..2 * f)
            .map(|k| {
                if k < f {
                    state.s.get(&[i, k])
                } else {
                    state.s.get(&[j, k - f])
                }
            })
            .collect()
    };
    let v_cat = |i: usize, j: usize, c: usize| -> Vec<f64> {
        (0..2 * f)
            .map(|k| {
                if k < f {
                    state.v.get(&[i, k, c])
                } else {
                    state.v.get(&[j, k - f, c])
                }
            })
            .collect()
    };
    let row = |w: &Tensor, o: usize, x: &[f64]| -> f64 { (0..x.len()).map(|k| w.get(&[o, k]) * x[k]).sum() };

    let mut out = NaiveLayer {
        z_ss: vec![],
        z_vs: vec![],
        z_vv: vec![],
        z_sv: vec![],
        s: vec![vec![0.0; h]; n],
        v: vec![vec![[0.0; 3]; h]; n],
    };
    for i in 0..n {
        let mut acc_s = vec![0.0; h];
        let mut acc_v = vec![[0.0; 3]; h];
        for j in 0..n {
            if a[i * n + j] == 0.0 {
                continue;
            }
            let r = g.rel(i, j);
            let sc = s_cat(i, j);
            let vc: Vec<Vec<f64>> = (0..3).map(|c| v_cat(i, j, c)).collect();
            let zss: Vec<f64> = (0..h).map(|o| relu(row(&w_ss, o, &sc) + b_ss.get(&[o]))).collect();
            let zvs: Vec<f64> = (0..h)
                .map(|o| {
                    relu(
                        (0..3)
                            .map(|c| (row(&w_vs, o, &vc[c]) + vec_bias(&b_vs, o, c)) * r[c])
                            .sum(),
                    )
                })
                .collect();
            let zvv: Vec<[f64; 3]> = (0..h)
                .map(|o| {
                    let mut x = [0.0; 3];
                    for c in 0..3 {
                        x[c] = act_v(row(&w_vv, o, &vc[c]) + vec_bias(&b_vv, o, c));
                    }
                    x
                })
                .collect();
            let zsv: Vec<[f64; 3]> = (0..h)
                .map(|o| {
                    let t = row(&w_sv, o, &sc) + b_sv.get(&[o]);
                    [act_v(t * r[0]), act_v(t * r[1]), act_v(t * r[2])]
                })
                .collect();
            let aij = a[i * n + j];
            let cat_s: Vec<f64> = zss.iter().chain(&zvs).copied().collect();
            for o in 0..h {
                acc_s[o] += aij * (row(&w_s, o, &cat_s) + b_s.get(&[o]));
            }
            for c in 0..3 {
                let cat_v: Vec<f64> = zvv.iter().map(|x| x[c]).chain(zsv.iter().map(|x| x[c])).collect();
                for o in 0..h {
                    acc_v[o][c] += aij * (row(&w_v, o, &cat_v) + vec_bias(&b_v, o, c));
                }
            }
            out.z_ss.push(((i, j), zss));
            out.z_vs.push(((i, j), zvs));
            out.z_vv.push(((i, j), zvv));
            out.z_sv.push(((i, j), zsv));
        }
        for o in 0..h {
            out.s[i][o] = relu(acc_s[o]);
            for c in 0..3 {
                out.v[i][o][c] = act_v(acc_v[o][c]);
            }
        }
    }
    out
}

impl NaiveLayer {
    pub fn state(&self, layer: usize) -> NodeState {
        let (n, h) = (self.s.len(), self.s[0].len());
        NodeState {
            s: Tensor::new(vec![n, h], self.s.concat()).unwrap(),
            v: Tensor::new(vec![n, h, 3], self.v.iter().flatten().flatten().copied().collect()).unwrap(),
            layer,
        }
    }
}

/// AUC-ROC by counting every positive/negative pair, ties worth one half.
pub fn pair_count_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1.0 && labels[j] == 0.0 {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Dense D^-1/2 (A + I) D^-1/2 straight from the bond list.
pub fn dense_a_norm(m: &Molecule) -> DMatrix<f64> {
    let heavy: Vec<usize> = (0..m.atoms.len())
        .filter(|&a| !m.atoms[a].element.is_hydrogen())
        .collect();
    let n = heavy.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    for b in &m.bonds {
        if let (Some(i), Some(j)) = (
            heavy.iter().position(|&x| x == b.i),
            heavy.iter().position(|&x| x == b.j),
        ) {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
    }
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (d[i].sqrt() * d[j].sqrt()))
}
