//! Hückel aromaticity over simple rings.
//!
//! π-electron contribution of a ring atom (C, N, O, S with at most three
//! heavy neighbors):
//!
//! | situation                                              | electrons |
//! |--------------------------------------------------------|-----------|
//! | double bond to another ring atom                       | 1         |
//! | carbon with an exocyclic double bond                   | 0         |
//! | N with three connections, neutral (pyrrole type)       | 2         |
//! | N⁻ with two connections                                | 2         |
//! | neutral O or S with two connections                    | 2         |
//! | C⁻ without double bonds                                | 2         |
//! | C⁺ without double bonds                                | 0         |
//! | anything else (saturated centers, triple bonds)        | not π     |
//!
//! A ring is aromatic when every member contributes and the total is 4n+2.
//! Atoms on bonds typed aromatic in the input file are aromatic regardless.

use crate::molio::{Element, Molecule};

use super::rings::enumerate_cycles;
use super::topology::Topology;

fn pi_electrons(topo: &Topology, a: usize, in_any_ring: &[bool]) -> Option<u32> {
    let e = topo.element(a);
    if ![Element::C, Element::N, Element::O, Element::S].contains(&e) || topo.heavy_degree[a] > 3 {
        return None;
    }
    if topo.count_order(a, 3) > 0 {
        return None;
    }
    let doubles: Vec<usize> = topo.neighbors[a]
        .iter()
        .filter(|&&(_, k)| topo.bond_order(k) == 2 && !topo.mol.bonds[k].aromatic)
        .map(|&(b, _)| b)
        .collect();
    let charge = topo.mol.atoms[a].charge;
    let connections = topo.heavy_degree[a] as u32 + topo.hydrogens[a].attached;
    match doubles.as_slice() {
        [b] if in_any_ring[*b] => Some(1),
        [_] if e == Element::C => Some(0),
        [_] => None,
        [] => match (e, charge) {
            (Element::N, 0) if connections == 3 => Some(2),
            (Element::N, -1) if connections == 2 => Some(2),
            (Element::O | Element::S, 0) if connections == 2 => Some(2),
            (Element::C, -1) => Some(2),
            (Element::C, 1) => Some(0),
            _ => None,
        },
        _ => None,
    }
}

pub(crate) fn aromatic_flags(topo: &Topology, cycles: &[Vec<usize>]) -> Vec<bool> {
    let n = topo.len();
    let mut in_any_ring = vec![false; n];
    for c in cycles {
        for &a in c {
            in_any_ring[a] = true;
        }
    }
    let mut aromatic = topo.aromatic_bond.clone();
    for cycle in cycles {
        let total: Option<u32> = cycle.iter().map(|&a| pi_electrons(topo, a, &in_any_ring)).sum();
        if let Some(t) = total {
            if t >= 2 && (t - 2) % 4 == 0 {
                for &a in cycle {
                    aromatic[a] = true;
                }
            }
        }
    }
    aromatic
}

/// Aromatic flag per atom. `rings` are cycles as returned by
/// [`find_rings`](super::find_rings).
pub fn perceive_aromaticity(molecule: &Molecule, rings: &[Vec<usize>]) -> Vec<bool> {
    aromatic_flags(&Topology::new(molecule), rings)
}

pub(crate) fn aromaticity_of(molecule: &Molecule) -> Vec<bool> {
    let topo = Topology::new(molecule);
    let cycles = enumerate_cycles(&topo);
    aromatic_flags(&topo, &cycles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemper::find_rings;
    use crate::molio::{Atom, Bond};

    fn ring(symbols: &[&str], orders: &[u8]) -> Molecule {
        let n = symbols.len();
        let atoms = symbols
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let t = k as f64 * std::f64::consts::TAU / n as f64;
                Atom::new(Element::from_symbol(s).unwrap(), [1.4 * t.cos(), 1.4 * t.sin(), 0.0])
            })
            .collect();
        let bonds = (0..n).map(|k| Bond::new(k, (k + 1) % n, orders[k])).collect();
        Molecule::new("ring", atoms, bonds).unwrap()
    }

    fn aromatic(m: &Molecule) -> Vec<bool> {
        perceive_aromaticity(m, &find_rings(m))
    }

    #[test]
    fn benzene_is_aromatic() {
        let m = ring(&["C"; 6], &[2, 1, 2, 1, 2, 1]);
        assert_eq!(aromatic(&m), vec![true; 6]);
    }

    #[test]
    fn cyclohexane_is_not() {
        let m = ring(&["C"; 6], &[1; 6]);
        assert_eq!(aromatic(&m), vec![false; 6]);
    }

    #[test]
    fn pyridine_furan_pyrrole() {
        let pyridine = ring(&["N", "C", "C", "C", "C", "C"], &[2, 1, 2, 1, 2, 1]);
        assert_eq!(aromatic(&pyridine), vec![true; 6]);
        let furan = ring(&["O", "C", "C", "C", "C"], &[1, 2, 1, 2, 1]);
        assert_eq!(aromatic(&furan), vec![true; 5]);
        let pyrrole = ring(&["N", "C", "C", "C", "C"], &[1, 2, 1, 2, 1]);
        assert_eq!(aromatic(&pyrrole), vec![true; 5]);
    }

    #[test]
    fn non_huckel_rings() {
        let cot = ring(&["C"; 8], &[2, 1, 2, 1, 2, 1, 2, 1]);
        assert_eq!(aromatic(&cot), vec![false; 8]);
        let cyclopentadiene = ring(&["C"; 5], &[2, 1, 2, 1, 1]);
        assert_eq!(aromatic(&cyclopentadiene), vec![false; 5]);
    }

    #[test]
    fn file_aromatic_flag_wins() {
        let mut m = ring(&["C"; 6], &[1; 6]);
        for b in &mut m.bonds {
            b.aromatic = true;
        }
        assert_eq!(aromatic(&m), vec![true; 6]);
    }

    #[test]
    fn naphthalene_either_kekule_form() {
        // ring A: 0,1,2,3,4(4a),9(8a); ring B: 4,5,6,7,8,9
        let atoms = (0..10)
            .map(|k| Atom::new(Element::C, [k as f64, 0.0, 0.0]))
            .collect::<Vec<_>>();
        let kekule = [
            (0, 1, 2),
            (1, 2, 1),
            (2, 3, 2),
            (3, 4, 1),
            (4, 9, 2),
            (9, 0, 1),
            (4, 5, 1),
            (5, 6, 2),
            (6, 7, 1),
            (7, 8, 2),
            (8, 9, 1),
        ];
        let other = [
            (0, 1, 1),
            (1, 2, 2),
            (2, 3, 1),
            (3, 4, 2),
            (4, 9, 1),
            (9, 0, 2),
            (4, 5, 1),
            (5, 6, 2),
            (6, 7, 1),
            (7, 8, 2),
            (8, 9, 1),
        ];
        for table in [kekule, other] {
            let bonds = table.iter().map(|&(i, j, o)| Bond::new(i, j, o)).collect();
            let m = Molecule::new("naph", atoms.clone(), bonds).unwrap();
            assert_eq!(aromatic(&m), vec![true; 10]);
        }
    }
}
