use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::Element;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    #[serde(rename = "xyz")]
    pub position: [f64; 3],
    /// SDF stereo parity, 1 or 2, when the file marks one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity: Option<u8>,
}

impl Atom {
    pub fn new(element: Element, position: [f64; 3]) -> Self {
        Self {
            element,
            charge: 0,
            position,
            parity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: u8,
    #[serde(default)]
    pub aromatic: bool,
}

impl Bond {
    pub fn new(i: usize, j: usize, order: u8) -> Self {
        Self {
            i,
            j,
            order,
            aromatic: false,
        }
    }

    pub fn other(&self, atom: usize) -> Option<usize> {
        if self.i == atom {
            Some(self.j)
        } else if self.j == atom {
            Some(self.i)
        } else {
            None
        }
    }

    /// Bond order used for valence bookkeeping; aromatic bonds count 1.5.
    pub fn valence_order(&self) -> f64 {
        if self.aromatic {
            1.5
        } else {
            f64::from(self.order)
        }
    }
}

/// A parsed molecular structure with 3D coordinates in Å.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Molecule {
    pub id: String,
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
}

pub const CHARGE_RANGE: std::ops::RangeInclusive<i8> = -3..=3;

impl Molecule {
    pub fn new(id: impl Into<String>, atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, String> {
        let m = Self {
            id: id.into(),
            atoms,
            bonds,
        };
        m.validate()?;
        Ok(m)
    }

    /// Check the structural invariants; the message names the offending item.
    pub fn validate(&self) -> Result<(), String> {
        for (k, atom) in self.atoms.iter().enumerate() {
            if !atom.position.iter().all(|c| c.is_finite()) {
                return Err(format!("atoms[{k}]: non-finite coordinate"));
            }
            if !CHARGE_RANGE.contains(&atom.charge) {
                return Err(format!("atoms[{k}]: formal charge {} outside -3..+3", atom.charge));
            }
            if let Some(p) = atom.parity {
                if p != 1 && p != 2 {
                    return Err(format!("atoms[{k}]: parity must be 1 or 2, got {p}"));
                }
            }
        }
        let n = self.atoms.len();
        let mut seen = HashSet::new();
        for (k, b) in self.bonds.iter().enumerate() {
            if b.i >= n || b.j >= n {
                return Err(format!("bonds[{k}]: endpoint out of range for {n} atoms"));
            }
            if b.i == b.j {
                return Err(format!("bonds[{k}]: self bond on atom {}", b.i));
            }
            if !(1..=3).contains(&b.order) {
                return Err(format!("bonds[{k}]: order {} not in 1..3", b.order));
            }
            if !seen.insert((b.i.min(b.j), b.i.max(b.j))) {
                return Err(format!("bonds[{k}]: duplicate bond {}-{}", b.i, b.j));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Adjacency lists as `(neighbor, bond index)`, neighbors ascending.
    pub fn neighbors(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (k, b) in self.bonds.iter().enumerate() {
            adj[b.i].push((b.j, k));
            adj[b.j].push((b.i, k));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// The same molecule with atoms relabeled: new atom `k` is old atom `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Molecule {
        assert_eq!(order.len(), self.atoms.len());
        let mut inverse = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
        }
        Molecule {
            id: self.id.clone(),
            atoms: order.iter().map(|&old| self.atoms[old].clone()).collect(),
            bonds: self
                .bonds
                .iter()
                .map(|b| Bond {
                    i: inverse[b.i],
                    j: inverse[b.j],
                    ..b.clone()
                })
                .collect(),
        }
    }

    pub fn map_positions(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Molecule {
        let mut out = self.clone();
        for atom in &mut out.atoms {
            atom.position = f(atom.position);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ethane() -> Molecule {
        Molecule::new(
            "ethane",
            vec![
                Atom::new(Element::C, [0.0, 0.0, 0.0]),
                Atom::new(Element::C, [1.54, 0.0, 0.0]),
            ],
            vec![Bond::new(0, 1, 1)],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_bonds() {
        let atoms = ethane().atoms;
        assert!(Molecule::new("x", atoms.clone(), vec![Bond::new(0, 0, 1)]).is_err());
        assert!(Molecule::new("x", atoms.clone(), vec![Bond::new(0, 2, 1)]).is_err());
        assert!(Molecule::new("x", atoms.clone(), vec![Bond::new(0, 1, 1), Bond::new(1, 0, 2)]).is_err());
        assert!(Molecule::new("x", atoms, vec![Bond::new(0, 1, 4)]).is_err());
    }

    #[test]
    fn rejects_non_finite_coordinates() {
        let atoms = vec![Atom::new(Element::C, [f64::NAN, 0.0, 0.0])];
        assert!(Molecule::new("x", atoms, vec![]).is_err());
    }

    #[test]
    fn permutation_relabels_bonds() {
        let m = ethane();
        let p = m.permuted(&[1, 0]);
        assert_eq!(p.atoms[0].position, [1.54, 0.0, 0.0]);
        assert_eq!((p.bonds[0].i, p.bonds[0].j), (1, 0));
        assert!(p.validate().is_ok());
    }
}
