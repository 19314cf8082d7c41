mod common;

use common::*;
use gcn3d::analyze::*;
use gcn3d::chemper::FeatureConfig;
use gcn3d::model::{forward, init_params, Aggregation, ModelConfig, NodeState, Provenance};
use gcn3d::molio::{Atom, Element, Molecule, Task};
use gcn3d::numcore::Tensor;
use gcn3d::train::{metrics, predict_samples, prepare_samples, TargetScaler};
use gcn3d::Error;

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[test]
fn rotation_is_an_isometry() {
    for (k, m) in fixtures().iter().enumerate() {
        let same = rotate_molecule(m, &IDENTITY);
        for (a, b) in m.atoms.iter().zip(&same.atoms) {
            assert_eq!(a.position.map(f64::to_bits), b.position.map(f64::to_bits));
        }
        let r = rotate_molecule(m, &random_rotation(k as u64));
        for i in 0..m.atoms.len() {
            for j in 0..m.atoms.len() {
                let d0 = dist(m.atoms[i].position, m.atoms[j].position);
                assert!((d0 - dist(r.atoms[i].position, r.atoms[j].position)).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn sweep_grid_and_zero_row() {
    let records = fixture_records();
    let features = FeatureConfig::default();
    let params = init_params(&ModelConfig::default(), 3).unwrap();
    let targets: Vec<f64> = records.iter().map(|r| r.target).collect();
    let scaler = TargetScaler::fit(&targets, Task::Regression).unwrap();
    let before = params.clone();
    let model = SweepModel {
        params: &params,
        scaler: &scaler,
        features: &features,
        records: &records,
    };
    let rows = rotation_sweep(&[model], &RotationSpec::stepwise(1)).unwrap();
    assert_eq!(rows.len(), 25);
    for (a, axis) in ["x", "y", "z"].iter().enumerate() {
        for k in 0..8 {
            let r = &rows[a * 8 + k];
            assert_eq!((r.axis.as_str(), r.degrees), (*axis, Some(45.0 * k as f64)));
            assert_eq!(r.metric, "RMSE");
            assert_eq!(r.stderr, None);
        }
    }
    assert_eq!(rows[24].axis, "random");
    let samples = prepare_samples(&records, &features).unwrap();
    let plain = metrics(
        &predict_samples(&params, &scaler, &samples).unwrap(),
        &targets,
        Task::Regression,
    )
    .unwrap();
    for a in 0..3 {
        assert_eq!(rows[a * 8].value.to_bits(), plain.primary().1.to_bits());
    }
    assert!(params == before);
    assert!(rows.iter().all(|r| r.value.is_finite()));

    // two models give a standard error
    let model = SweepModel {
        params: &params,
        scaler: &scaler,
        features: &features,
        records: &records,
    };
    let other = init_params(&ModelConfig::default(), 4).unwrap();
    let model2 = SweepModel {
        params: &other,
        ..model.clone()
    };
    let rows = rotation_sweep(&[model, model2], &RotationSpec::stepwise(1)).unwrap();
    assert!(rows.iter().all(|r| r.stderr.is_some()));

    let bad = RotationSpec {
        step_degrees: 7.0,
        ..RotationSpec::stepwise(0)
    };
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
}

#[test]
fn fine_sweep_series() {
    let m = fixture("freesolv_0012");
    let features = FeatureConfig::default();
    let scaler = TargetScaler::identity(Task::Regression);
    let params = init_params(&ModelConfig::default(), 0).unwrap();
    let series = fine_sweep(&params, &scaler, &features, &m, &RotationSpec::fine(Axis::Z)).unwrap();
    assert_eq!(series.len(), 72);
    assert_eq!(series[71].0, 355.0);
    let plain = forward(&graph(&m), &params).unwrap().0.raw;
    assert_eq!(series[0].1.to_bits(), plain.to_bits());

    let diag = ModelConfig {
        diagnostic: true,
        ..ModelConfig::default()
    };
    let mut dp = init_params(&diag, 1).unwrap();
    randomize(&mut dp, 0.2, 2);
    let s = fine_sweep(&dp, &scaler, &features, &m, &RotationSpec::fine(Axis::Z)).unwrap();
    assert!(s.iter().all(|&(_, p)| (p - s[0].1).abs() <= 1e-8));
}

fn fixture(id: &str) -> Molecule {
    fixtures().into_iter().find(|m| m.id == id).unwrap()
}

#[test]
fn maps_sum_to_one_and_count_channels() {
    for agg in [Aggregation::Sum, Aggregation::Max] {
        let params = init_params(&ModelConfig::new(Task::Regression, agg), 5).unwrap();
        for m in fixtures() {
            let g = graph(&m);
            let (_, cache) = forward(&g, &params).unwrap();
            let map = contribution_map(&m.id, &g.atom_index, &cache, agg).unwrap();
            for w in [&map.scalar, &map.vector] {
                assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                assert!(w.iter().all(|&x| x >= 0.0));
                if agg == Aggregation::Max {
                    assert!(w.iter().all(|&x| (x * 128.0).fract() == 0.0));
                }
            }
            let other = if agg == Aggregation::Sum {
                Aggregation::Max
            } else {
                Aggregation::Sum
            };
            assert!(matches!(
                contribution_map(&m.id, &g.atom_index, &cache, other),
                Err(Error::Config(_))
            ));
        }
    }
}

#[test]
fn single_atom_takes_everything() {
    let m = Molecule::new("methane", vec![Atom::new(Element::C, [0.3, 0.1, 0.0])], vec![]).unwrap();
    let g = graph(&m);
    for agg in [Aggregation::Sum, Aggregation::Max] {
        let cfg = ModelConfig::new(Task::Regression, agg);
        let mut params = init_params(&cfg, 0).unwrap();
        // an isolated atom has r = 0, so vector features come from biases only
        randomize(&mut params, 0.3, 1);
        let (_, cache) = forward(&g, &params).unwrap();
        let map = contribution_map("methane", &g.atom_index, &cache, agg).unwrap();
        assert_eq!((map.scalar.as_slice(), map.vector.as_slice()), (&[1.0][..], &[1.0][..]));
    }
}

#[test]
fn two_atom_hand_values() {
    // s rows: |.|₁ = 3 and 1; vector norms per channel: 5+0 and 1+2
    let state = NodeState {
        s: Tensor::new(vec![2, 2], vec![1.0, -2.0, 0.0, 1.0]).unwrap(),
        v: Tensor::new(
            vec![2, 2, 3],
            vec![3.0, 4.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0],
        )
        .unwrap(),
        layer: 2,
    };
    let sum = contribution_from_state("pair", &[0, 1], &state, None, Aggregation::Sum).unwrap();
    assert_eq!(sum.scalar, [0.75, 0.25]);
    assert_eq!(sum.vector, [5.0 / 8.0, 3.0 / 8.0]);
    let winners = Provenance {
        scalar: vec![0, 1],
        vector: vec![0, 0],
    };
    let max = contribution_from_state("pair", &[0, 1], &state, Some(&winners), Aggregation::Max).unwrap();
    assert_eq!(max.scalar, [0.5, 0.5]);
    assert_eq!(max.vector, [1.0, 0.0]);

    let zero = NodeState {
        s: Tensor::zeros(&[2, 2]),
        v: Tensor::zeros(&[2, 2, 3]),
        layer: 2,
    };
    assert!(matches!(
        contribution_from_state("zero", &[0, 1], &zero, None, Aggregation::Sum),
        Err(Error::DegenerateMap(_))
    ));
}
