use log::warn;

use crate::molio::{Element, Molecule};

use super::elements::{allowed_valences, valence_electrons};

/// Hydrogen bookkeeping for one atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HydrogenCount {
    /// Explicit hydrogen neighbors plus implicit hydrogens.
    pub attached: u32,
    /// Hydrogens implied by the valence table but absent from the file.
    pub implicit: u32,
}

/// Connectivity facts shared by the perception passes, indexed like the
/// molecule's atoms.
pub(crate) struct Topology<'m> {
    pub mol: &'m Molecule,
    /// `(neighbor, bond index)`, ascending by neighbor.
    pub neighbors: Vec<Vec<(usize, usize)>>,
    pub heavy_degree: Vec<usize>,
    pub hydrogens: Vec<HydrogenCount>,
    pub bond_sum: Vec<u32>,
    pub aromatic_bond: Vec<bool>,
}

impl<'m> Topology<'m> {
    pub fn new(mol: &'m Molecule) -> Self {
        let neighbors = mol.neighbors();
        let n = mol.atoms.len();
        let mut heavy_degree = vec![0; n];
        let mut explicit_h = vec![0u32; n];
        let mut aromatic_bond = vec![false; n];
        let mut sum = vec![0.0f64; n];
        for (a, list) in neighbors.iter().enumerate() {
            for &(b, k) in list {
                if mol.atoms[b].element.is_hydrogen() {
                    explicit_h[a] += 1;
                } else {
                    heavy_degree[a] += 1;
                }
                let bond = &mol.bonds[k];
                sum[a] += bond.valence_order();
                aromatic_bond[a] |= bond.aromatic;
            }
        }
        let bond_sum: Vec<u32> = sum.iter().map(|s| s.floor() as u32).collect();

        let hydrogens = (0..n)
            .map(|a| {
                let atom = &mol.atoms[a];
                let implicit = match allowed_valences(atom.element, atom.charge) {
                    None => 0,
                    Some(vals) if aromatic_bond[a] => u32::from(vals[0]).saturating_sub(bond_sum[a]),
                    Some(vals) => vals
                        .iter()
                        .map(|&v| u32::from(v))
                        .find(|&v| v >= bond_sum[a])
                        .map_or(0, |v| v - bond_sum[a]),
                };
                HydrogenCount {
                    attached: explicit_h[a] + implicit,
                    implicit,
                }
            })
            .collect();

        Self {
            mol,
            neighbors,
            heavy_degree,
            hydrogens,
            bond_sum,
            aromatic_bond,
        }
    }

    pub fn len(&self) -> usize {
        self.mol.atoms.len()
    }

    pub fn element(&self, a: usize) -> Element {
        self.mol.atoms[a].element
    }

    pub fn is_heavy(&self, a: usize) -> bool {
        !self.element(a).is_hydrogen()
    }

    pub fn heavy_neighbors(&self, a: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors[a]
            .iter()
            .copied()
            .filter(move |&(b, _)| self.is_heavy(b))
    }

    pub fn bond_order(&self, k: usize) -> u8 {
        self.mol.bonds[k].order
    }

    /// Number of non-aromatic bonds of the given order.
    pub fn count_order(&self, a: usize, order: u8) -> usize {
        self.neighbors[a]
            .iter()
            .filter(|&&(_, k)| !self.mol.bonds[k].aromatic && self.bond_order(k) == order)
            .count()
    }

    pub fn has_double_to(&self, a: usize, element: Element) -> bool {
        self.neighbors[a]
            .iter()
            .any(|&(b, k)| self.bond_order(k) == 2 && !self.mol.bonds[k].aromatic && self.element(b) == element)
    }

    /// Non-bonding electron pairs from the valence electron count.
    pub fn lone_pairs(&self, a: usize) -> Option<u32> {
        let atom = &self.mol.atoms[a];
        let ve = i32::from(valence_electrons(atom.element.atomic_number())?);
        let bonding = (self.bond_sum[a] + self.hydrogens[a].implicit) as i32;
        Some((ve - i32::from(atom.charge) - bonding).max(0) as u32 / 2)
    }
}

/// Attached and implicit hydrogens per atom.
///
/// Implicit hydrogens fill the smallest allowed valence at or above the bond
/// order sum (aromatic bonds count 1.5, summed then floored). Atoms with
/// aromatic bonds use only their smallest valence.
pub fn hydrogen_counts(molecule: &Molecule) -> Vec<HydrogenCount> {
    Topology::new(molecule).hydrogens
}

pub(crate) fn clamp_with_warning(value: u32, max: u32, what: &str, id: &str, atom: usize) -> u32 {
    if value > max {
        warn!("{id}: atom {atom} {what} {value} clamped to {max}");
        max
    } else {
        value
    }
}
