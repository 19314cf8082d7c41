use serde::{Deserialize, Serialize};

use crate::molio::Molecule;

use super::topology::Topology;

pub const MIN_RING: usize = 3;
pub const MAX_RING: usize = 8;

/// Bit `s - 3` is set when the atom lies on a simple cycle of length `s`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RingSizes(u8);

impl RingSizes {
    pub fn contains(self, size: usize) -> bool {
        (MIN_RING..=MAX_RING).contains(&size) && self.0 & (1 << (size - MIN_RING)) != 0
    }

    pub fn insert(&mut self, size: usize) {
        if (MIN_RING..=MAX_RING).contains(&size) {
            self.0 |= 1 << (size - MIN_RING);
        }
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn sizes(self) -> impl Iterator<Item = usize> {
        (MIN_RING..=MAX_RING).filter(move |&s| self.contains(s))
    }
}

/// Every simple cycle of 3..=8 heavy atoms, each reported once.
///
/// Cycles start at their smallest atom and are read in the direction whose
/// second atom is smaller than the last.
pub fn find_rings(molecule: &Molecule) -> Vec<Vec<usize>> {
    let topo = Topology::new(molecule);
    enumerate_cycles(&topo)
}

pub(crate) fn enumerate_cycles(topo: &Topology) -> Vec<Vec<usize>> {
    let n = topo.len();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|a| {
            if topo.is_heavy(a) {
                topo.heavy_neighbors(a).map(|(b, _)| b).collect()
            } else {
                Vec::new()
            }
        })
        .collect();

    let mut cycles = Vec::new();
    let mut path = Vec::with_capacity(MAX_RING);
    let mut on_path = vec![false; n];
    for start in 0..n {
        if adj[start].len() < 2 {
            continue;
        }
        path.push(start);
        on_path[start] = true;
        extend(start, &adj, &mut path, &mut on_path, &mut cycles);
        on_path[start] = false;
        path.pop();
    }
    cycles
}

fn extend(start: usize, adj: &[Vec<usize>], path: &mut Vec<usize>, on_path: &mut [bool], out: &mut Vec<Vec<usize>>) {
    let last = *path.last().expect("path is never empty");
    for &next in &adj[last] {
        if next == start && path.len() >= MIN_RING && path[1] < path[path.len() - 1] {
            out.push(path.clone());
            continue;
        }
        if next <= start || on_path[next] || path.len() == MAX_RING {
            continue;
        }
        path.push(next);
        on_path[next] = true;
        extend(start, adj, path, on_path, out);
        on_path[next] = false;
        path.pop();
    }
}

pub(crate) fn ring_sizes_from(n: usize, cycles: &[Vec<usize>]) -> Vec<RingSizes> {
    let mut sizes = vec![RingSizes::default(); n];
    for cycle in cycles {
        for &a in cycle {
            sizes[a].insert(cycle.len());
        }
    }
    sizes
}

/// Ring-size memberships per atom.
pub fn perceive_rings(molecule: &Molecule) -> Vec<RingSizes> {
    ring_sizes_from(molecule.atoms.len(), &find_rings(molecule))
}
