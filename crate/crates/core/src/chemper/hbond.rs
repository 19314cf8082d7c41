//! Donor / acceptor / acid / base flags from a small substructure table.
//!
//! - donor: N, O or S carrying at least one hydrogen
//! - acceptor: N or O with a lone pair, except aromatic N with three
//!   connections (pyrrole type)
//! - acidic: hydroxyl O (or O⁻) on a carbonyl C, sulfonyl/sulfinyl S or
//!   phosphoryl P; N-H of sulfonamides; N-H of imides
//! - basic: neutral sp³ amine N not bound to an acyl C, a sulfonyl S or an
//!   aromatic atom; N⁺ carrying hydrogen; the imine N of amidines and
//!   guanidines

use serde::{Deserialize, Serialize};

use crate::molio::{Element, Molecule};

use super::aromaticity::aromaticity_of;
use super::hybridization::{hybridization_with, Hybridization};
use super::topology::Topology;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteFlags {
    pub donor: bool,
    pub acceptor: bool,
    pub acidic: bool,
    pub basic: bool,
}

fn is_acyl_center(topo: &Topology, c: usize) -> bool {
    let e = topo.element(c);
    (e == Element::C && (topo.has_double_to(c, Element::O) || topo.has_double_to(c, Element::S)))
        || ((e == Element::S || e == Element::P) && topo.has_double_to(c, Element::O))
}

pub(crate) fn site_flags_with(topo: &Topology, aromatic: &[bool], hybrid: &[Hybridization]) -> Vec<SiteFlags> {
    (0..topo.len())
        .map(|a| {
            let e = topo.element(a);
            let charge = topo.mol.atoms[a].charge;
            let h = topo.hydrogens[a].attached;
            let connections = topo.heavy_degree[a] as u32 + h;
            let heavy: Vec<usize> = topo.heavy_neighbors(a).map(|(b, _)| b).collect();
            let single_heavy = topo
                .heavy_neighbors(a)
                .all(|(_, k)| topo.bond_order(k) == 1 && !topo.mol.bonds[k].aromatic);

            let donor = matches!(e, Element::N | Element::O | Element::S) && h > 0;
            let pyrrole_n = e == Element::N && aromatic[a] && connections == 3;
            let acceptor = matches!(e, Element::N | Element::O) && topo.lone_pairs(a).unwrap_or(0) > 0 && !pyrrole_n;

            let acidic = match e {
                Element::O if single_heavy && heavy.len() == 1 && (h > 0 || charge < 0) => {
                    is_acyl_center(topo, heavy[0])
                }
                Element::N if h > 0 && single_heavy => {
                    let sulfonyl = heavy
                        .iter()
                        .any(|&b| topo.element(b) == Element::S && topo.has_double_to(b, Element::O));
                    let acyl = heavy
                        .iter()
                        .filter(|&&b| topo.element(b) == Element::C && is_acyl_center(topo, b))
                        .count();
                    sulfonyl || acyl >= 2
                }
                _ => false,
            };

            let basic = e == Element::N && {
                let amine = charge == 0
                    && single_heavy
                    && !aromatic[a]
                    && hybrid[a] == Hybridization::Sp3
                    && heavy.iter().all(|&b| !is_acyl_center(topo, b) && !aromatic[b]);
                let ammonium = charge == 1 && h > 0 && single_heavy;
                let amidine = charge == 0
                    && !aromatic[a]
                    && topo.neighbors[a].iter().any(|&(c, k)| {
                        topo.bond_order(k) == 2
                            && !topo.mol.bonds[k].aromatic
                            && topo.element(c) == Element::C
                            && !aromatic[c]
                            && topo.neighbors[c]
                                .iter()
                                .any(|&(n2, k2)| n2 != a && topo.element(n2) == Element::N && topo.bond_order(k2) == 1)
                    });
                amine || ammonium || amidine
            };

            SiteFlags {
                donor,
                acceptor,
                acidic,
                basic,
            }
        })
        .collect()
}

pub fn assign_donor_acceptor_acid_base(molecule: &Molecule) -> Vec<SiteFlags> {
    let topo = Topology::new(molecule);
    let aromatic = aromaticity_of(molecule);
    let hybrid = hybridization_with(&topo, &aromatic);
    site_flags_with(&topo, &aromatic, &hybrid)
}
