//! R/S labels from 3D geometry.
//!
//! Substituent priority is approximated by atomic number, ties broken by the
//! class rank from iterative neighborhood refinement (a Morgan-style
//! invariant). This agrees with full CIP rules on simple centers but can
//! differ where CIP needs deeper exploration or duplicated atoms.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::molio::{Element, Molecule};

use super::aromaticity::aromaticity_of;
use super::hybridization::{hybridization_with, Hybridization};
use super::topology::Topology;

pub const DEGENERATE_VOLUME: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chirality {
    R,
    S,
    Nonchiral,
}

impl Chirality {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Dense class ranks: equal ranks mean equivalent atoms under neighborhood
/// refinement. The initial rank is the atomic number; each round appends the
/// neighbor ranks sorted descending (multiple bonds repeat the neighbor, an
/// implicit H counts as rank 0), so comparing ranks mimics a sphere-by-sphere
/// CIP comparison.
pub(crate) fn refined_ranks(topo: &Topology) -> Vec<u32> {
    let n = topo.len();
    let initial: Vec<u8> = (0..n).map(|a| topo.element(a).atomic_number()).collect();
    let mut ranks = dense_rank(&initial);
    let mut classes = count_classes(&ranks);
    for _ in 0..n {
        let keys: Vec<(u32, Vec<u32>)> = (0..n)
            .map(|a| {
                let mut nb: Vec<u32> = Vec::new();
                for &(b, k) in &topo.neighbors[a] {
                    let copies = if topo.mol.bonds[k].aromatic {
                        1
                    } else {
                        topo.bond_order(k)
                    };
                    nb.extend(std::iter::repeat(ranks[b]).take(usize::from(copies)));
                }
                nb.extend(std::iter::repeat(0).take(topo.hydrogens[a].implicit as usize));
                nb.sort_unstable_by(|x, y| y.cmp(x));
                (ranks[a], nb)
            })
            .collect();
        let next = dense_rank(&keys);
        let c = count_classes(&next);
        ranks = next;
        if c == classes {
            break;
        }
        classes = c;
    }
    ranks
}

fn dense_rank<K: Ord + Clone>(keys: &[K]) -> Vec<u32> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present") as u32)
        .collect()
}

fn count_classes(ranks: &[u32]) -> usize {
    ranks.iter().copied().max().map_or(0, |m| m as usize + 1)
}

fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

pub(crate) fn chirality_with(topo: &Topology, hybrid: &[Hybridization]) -> Vec<Chirality> {
    let ranks = refined_ranks(topo);
    let mol = topo.mol;
    (0..topo.len())
        .map(|a| {
            if topo.element(a) != Element::C || hybrid[a] != Hybridization::Sp3 {
                return Chirality::Nonchiral;
            }
            let implicit = topo.hydrogens[a].implicit as usize;
            if topo.neighbors[a].len() + implicit != 4 || implicit > 1 {
                return Chirality::Nonchiral;
            }
            // (atomic number, rank, neighbor); an implicit H has no position
            // and sorts last, so it is never among the top three.
            let mut subs: Vec<(u8, i64, Option<usize>)> = topo.neighbors[a]
                .iter()
                .map(|&(b, _)| (topo.element(b).atomic_number(), i64::from(ranks[b]), Some(b)))
                .collect();
            if implicit == 1 {
                subs.push((1, -1, None));
            }
            subs.sort_by(|x, y| (y.0, y.1).cmp(&(x.0, x.1)));
            if subs.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
                return Chirality::Nonchiral;
            }
            let center = mol.atoms[a].position;
            let v = |k: usize| {
                let p = mol.atoms[subs[k].2.expect("top three are explicit")].position;
                [p[0] - center[0], p[1] - center[1], p[2] - center[2]]
            };
            let d = det3(v(0), v(1), v(2));
            if d.abs() < DEGENERATE_VOLUME {
                warn!("{}: atom {a} chirality volume {d:e} is degenerate", mol.id);
                Chirality::Nonchiral
            } else if d < 0.0 {
                Chirality::R
            } else {
                Chirality::S
            }
        })
        .collect()
}

/// R/S for sp³ carbons with four distinct substituents, nonchiral otherwise.
pub fn chirality_tags(molecule: &Molecule) -> Vec<Chirality> {
    let topo = Topology::new(molecule);
    let aromatic = aromaticity_of(molecule);
    chirality_with(&topo, &hybridization_with(&topo, &aromatic))
}
