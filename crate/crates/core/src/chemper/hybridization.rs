use log::warn;
use serde::{Deserialize, Serialize};

use crate::molio::Molecule;

use super::aromaticity::aromaticity_of;
use super::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hybridization {
    Sp,
    Sp2,
    Sp3,
    Sp3d,
    Sp3d2,
}

impl Hybridization {
    pub const ALL: [Hybridization; 5] = [Self::Sp, Self::Sp2, Self::Sp3, Self::Sp3d, Self::Sp3d2];

    pub fn index(self) -> usize {
        self as usize
    }

    fn from_steric(n: u32) -> Option<Self> {
        Some(match n {
            2 => Self::Sp,
            3 => Self::Sp2,
            4 => Self::Sp3,
            5 => Self::Sp3d,
            6 => Self::Sp3d2,
            _ => return None,
        })
    }
}

pub(crate) fn hybridization_with(topo: &Topology, aromatic: &[bool]) -> Vec<Hybridization> {
    (0..topo.len())
        .map(|a| {
            if aromatic[a] {
                return Hybridization::Sp2;
            }
            let doubles = topo.count_order(a, 2);
            if topo.count_order(a, 3) > 0
                || (doubles == 2 && topo.heavy_degree[a] == 2 && topo.hydrogens[a].attached == 0)
            {
                return Hybridization::Sp;
            }
            let steric = topo.heavy_degree[a] as u32 + topo.hydrogens[a].attached + topo.lone_pairs(a).unwrap_or(0);
            Hybridization::from_steric(steric).unwrap_or_else(|| {
                if topo.is_heavy(a) {
                    warn!(
                        "{}: atom {a} steric number {steric} outside 2..6, using sp3",
                        topo.mol.id
                    );
                }
                Hybridization::Sp3
            })
        })
        .collect()
}

/// Hybridization from steric number (heavy degree + attached H + lone pairs).
/// Aromatic atoms are sp², triple-bonded and cumulated centers sp.
pub fn perceive_hybridization(molecule: &Molecule) -> Vec<Hybridization> {
    let topo = Topology::new(molecule);
    hybridization_with(&topo, &aromaticity_of(molecule))
}
