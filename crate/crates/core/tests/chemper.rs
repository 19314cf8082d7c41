mod common;

use common::{dense_a_norm, fixtures};
use gcn3d::chemper::{
    build_graph_tensors, chirality_tags, featurize, Chirality, FeatureConfig, FEATURE_BLOCKS, FEATURE_WIDTH,
};
use gcn3d::molio::Molecule;
use proptest::prelude::*;

fn fixture(id: &str) -> Molecule {
    fixtures().into_iter().find(|m| m.id == id).unwrap()
}

#[test]
fn a_norm_matches_dense_oracle_and_spectrum() {
    for m in fixtures() {
        let g = build_graph_tensors(&m, &FeatureConfig::default()).unwrap();
        let n = g.n_atoms();
        let oracle = dense_a_norm(&m);
        for i in 0..n {
            for j in 0..n {
                let v = g.a_norm.data()[i * n + j];
                assert!((v - oracle[(i, j)]).abs() <= 1e-12, "{} ({i},{j})", m.id);
                assert_eq!(v, g.a_norm.data()[j * n + i]);
            }
        }
        let eig = oracle.symmetric_eigen().eigenvalues;
        assert!(
            eig.iter().all(|&e| (-1.0 - 1e-12..=1.0 + 1e-12).contains(&e)),
            "{}: {eig}",
            m.id
        );
    }
}

#[test]
fn relative_positions_are_antisymmetric() {
    for m in fixtures() {
        let g = build_graph_tensors(&m, &FeatureConfig::default()).unwrap();
        for i in 0..g.n_atoms() {
            assert_eq!(g.rel(i, i), [0.0; 3]);
            for j in 0..g.n_atoms() {
                let (a, b) = (g.rel(i, j), g.rel(j, i));
                assert_eq!(a, [-b[0], -b[1], -b[2]]);
            }
        }
    }
}

#[test]
fn secondary_alcohol_label_matches_reference() {
    // atom 2 of butan-2-ol is labelled S by a full CIP implementation
    let m = fixture("freesolv_0009");
    let tags = chirality_tags(&m);
    assert_eq!(tags[2], Chirality::S);
    assert_eq!(tags.iter().filter(|&&t| t != Chirality::Nonchiral).count(), 1);
    let mirrored = m.map_positions(|p| [-p[0], p[1], p[2]]);
    assert_eq!(chirality_tags(&mirrored)[2], Chirality::R);
}

#[test]
fn permutation_permutes_features() {
    let cfg = FeatureConfig::default();
    for m in fixtures() {
        let n = m.atoms.len();
        let order: Vec<usize> = (0..n).rev().collect();
        let p = m.permuted(&order);
        let x = featurize(&m, &cfg).unwrap();
        let xp = featurize(&p, &cfg).unwrap();
        let heavy: Vec<usize> = (0..n).filter(|&a| !m.atoms[a].element.is_hydrogen()).collect();
        let heavy_p: Vec<usize> = (0..n).filter(|&a| !p.atoms[a].element.is_hydrogen()).collect();
        for (k, &old) in heavy.iter().enumerate() {
            let new_atom = order.iter().position(|&o| o == old).unwrap();
            let kp = heavy_p.iter().position(|&a| a == new_atom).unwrap();
            assert_eq!(
                &x.data()[k * FEATURE_WIDTH..(k + 1) * FEATURE_WIDTH],
                &xp.data()[kp * FEATURE_WIDTH..(kp + 1) * FEATURE_WIDTH],
                "{} atom {old}",
                m.id
            );
        }
    }
}

#[test]
fn one_hot_blocks_are_exclusive() {
    let strict = [
        "atom_type",
        "degree",
        "hydrogens",
        "implicit_valence",
        "hybridization",
        "formal_charge",
        "chirality",
    ];
    for explicit_hydrogens in [false, true] {
        let cfg = FeatureConfig {
            explicit_hydrogens,
            ..FeatureConfig::default()
        };
        for m in fixtures() {
            let x = featurize(&m, &cfg).unwrap();
            for row in x.data().chunks(FEATURE_WIDTH) {
                let mut off = 0;
                for (name, width) in FEATURE_BLOCKS {
                    let block = &row[off..off + width];
                    assert!(block.iter().all(|&v| v == 0.0 || v == 1.0));
                    let s: f64 = block.iter().sum();
                    if strict.contains(&name) {
                        assert_eq!(s, 1.0, "{} block {name}", m.id);
                    }
                    off += width;
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn translation_leaves_relative_positions(tx in -100.0..100.0f64, ty in -100.0..100.0f64, tz in -100.0..100.0f64) {
        let cfg = FeatureConfig::default();
        let m = fixture("freesolv_0012");
        let g = build_graph_tensors(&m, &cfg).unwrap();
        let moved = build_graph_tensors(&m.map_positions(|p| [p[0] + tx, p[1] + ty, p[2] + tz]), &cfg).unwrap();
        prop_assert!(g.r.max_abs_diff(&moved.r) <= 1e-9);
        prop_assert_eq!(g.x, moved.x);
        prop_assert_eq!(g.a_norm, moved.a_norm);
    }
}
