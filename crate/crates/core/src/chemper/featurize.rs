use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::molio::{Element, Molecule};
use crate::numcore::Tensor;
use crate::{Error, Result};

use super::aromaticity::aromatic_flags;
use super::chirality::{chirality_with, Chirality};
use super::hbond::site_flags_with;
use super::hybridization::{hybridization_with, Hybridization};
use super::rings::{enumerate_cycles, ring_sizes_from, RingSizes};
use super::topology::{clamp_with_warning, Topology};

pub const FEATURE_WIDTH: usize = 60;
pub const VOCABULARY_SIZE: usize = 14;

/// Block names and widths in row order.
pub const FEATURE_BLOCKS: [(&str, usize); 11] = [
    ("atom_type", 15),
    ("degree", 7),
    ("hydrogens", 5),
    ("implicit_valence", 7),
    ("hybridization", 5),
    ("formal_charge", 7),
    ("ring_size", 6),
    ("aromatic", 1),
    ("chirality", 3),
    ("acid_base", 2),
    ("hydrogen_bonding", 2),
];

/// Start offset of a named block.
pub fn block_offset(name: &str) -> Option<usize> {
    let mut off = 0;
    for (n, w) in FEATURE_BLOCKS {
        if n == name {
            return Some(off);
        }
        off += w;
    }
    None
}

const DEFAULT_VOCABULARY: [&str; VOCABULARY_SIZE] = [
    "H", "C", "N", "O", "F", "P", "S", "Cl", "Br", "I", "B", "Si", "Se", "As",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Fourteen element symbols; everything else lands in the 15th slot.
    pub elements: Vec<Element>,
    /// Keep hydrogens as graph nodes instead of folding them into counts.
    pub explicit_hydrogens: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            elements: DEFAULT_VOCABULARY
                .iter()
                .map(|s| Element::from_symbol(s).expect("known symbol"))
                .collect(),
            explicit_hydrogens: false,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.elements.len() != VOCABULARY_SIZE {
            return Err(Error::Config(format!(
                "element vocabulary needs {VOCABULARY_SIZE} symbols, got {}",
                self.elements.len()
            )));
        }
        let mut seen = HashSet::new();
        for e in &self.elements {
            if !seen.insert(*e) {
                return Err(Error::Config(format!(
                    "element {} listed twice in vocabulary",
                    e.symbol()
                )));
            }
        }
        Ok(())
    }

    pub fn type_slot(&self, e: Element) -> usize {
        self.elements.iter().position(|&v| v == e).unwrap_or(VOCABULARY_SIZE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceivedAtom {
    pub element: Element,
    pub degree: u32,
    pub hydrogens: u32,
    pub implicit_valence: u32,
    pub hybridization: Hybridization,
    pub ring_sizes: RingSizes,
    pub aromatic: bool,
    pub chirality: Chirality,
    pub charge: i8,
    pub acidic: bool,
    pub basic: bool,
    pub donor: bool,
    pub acceptor: bool,
}

/// Graph node order: original atom indices kept by the configuration.
pub fn graph_atoms(molecule: &Molecule, config: &FeatureConfig) -> Vec<usize> {
    (0..molecule.atoms.len())
        .filter(|&a| config.explicit_hydrogens || !molecule.atoms[a].element.is_hydrogen())
        .collect()
}

/// Perception for every graph node, in [`graph_atoms`] order. Counts are
/// clamped to their one-hot ranges with a warning.
pub fn perceive(molecule: &Molecule, config: &FeatureConfig) -> Vec<PerceivedAtom> {
    let topo = Topology::new(molecule);
    let cycles = enumerate_cycles(&topo);
    let rings = ring_sizes_from(topo.len(), &cycles);
    let aromatic = aromatic_flags(&topo, &cycles);
    let hybrid = hybridization_with(&topo, &aromatic);
    let sites = site_flags_with(&topo, &aromatic, &hybrid);
    let chiral = chirality_with(&topo, &hybrid);
    let id = molecule.id.as_str();

    graph_atoms(molecule, config)
        .into_iter()
        .map(|a| {
            let h = topo.hydrogens[a];
            let implicit_valence = if config.explicit_hydrogens {
                h.implicit
            } else {
                h.attached
            };
            PerceivedAtom {
                element: topo.element(a),
                degree: clamp_with_warning(topo.heavy_degree[a] as u32, 6, "degree", id, a),
                hydrogens: clamp_with_warning(h.attached, 4, "hydrogen count", id, a),
                implicit_valence: clamp_with_warning(implicit_valence, 6, "implicit valence", id, a),
                hybridization: hybrid[a],
                ring_sizes: rings[a],
                aromatic: aromatic[a],
                chirality: chiral[a],
                charge: molecule.atoms[a].charge,
                acidic: sites[a].acidic,
                basic: sites[a].basic,
                donor: sites[a].donor,
                acceptor: sites[a].acceptor,
            }
        })
        .collect()
}

pub fn encode_atom(atom: &PerceivedAtom, config: &FeatureConfig, row: &mut [f64]) {
    debug_assert_eq!(row.len(), FEATURE_WIDTH);
    row.fill(0.0);
    let one_hot = [
        config.type_slot(atom.element),
        15 + atom.degree as usize,
        22 + atom.hydrogens as usize,
        27 + atom.implicit_valence as usize,
        34 + atom.hybridization.index(),
        39 + (i32::from(atom.charge) + 3).clamp(0, 6) as usize,
        53 + atom.chirality.index(),
    ];
    for k in one_hot {
        row[k] = 1.0;
    }
    for s in atom.ring_sizes.sizes() {
        row[46 + s - 3] = 1.0;
    }
    let flags = [
        (52, atom.aromatic),
        (56, atom.acidic),
        (57, atom.basic),
        (58, atom.donor),
        (59, atom.acceptor),
    ];
    for (k, on) in flags {
        row[k] = f64::from(u8::from(on));
    }
}

/// Atom feature matrix, one row per graph node.
pub fn featurize(molecule: &Molecule, config: &FeatureConfig) -> Result<Tensor> {
    config.validate()?;
    let atoms = perceive(molecule, config);
    let mut data = vec![0.0; atoms.len() * FEATURE_WIDTH];
    for (atom, row) in atoms.iter().zip(data.chunks_exact_mut(FEATURE_WIDTH)) {
        encode_atom(atom, config, row);
    }
    Tensor::new(vec![atoms.len(), FEATURE_WIDTH], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molio::{Atom, Bond};

    fn hot(row: &[f64], block: &str) -> Vec<usize> {
        let off = block_offset(block).unwrap();
        let w = FEATURE_BLOCKS.iter().find(|b| b.0 == block).unwrap().1;
        (0..w).filter(|&k| row[off + k] == 1.0).collect()
    }

    #[test]
    fn blocks_total_sixty() {
        assert_eq!(FEATURE_BLOCKS.iter().map(|b| b.1).sum::<usize>(), FEATURE_WIDTH);
        let offsets: Vec<usize> = FEATURE_BLOCKS.iter().map(|b| block_offset(b.0).unwrap()).collect();
        assert_eq!(offsets, [0, 15, 22, 27, 34, 39, 46, 52, 53, 56, 58]);
    }

    #[test]
    fn methane_row() {
        let m = Molecule::new("ch4", vec![Atom::new(Element::C, [0.0; 3])], vec![]).unwrap();
        let x = featurize(&m, &FeatureConfig::default()).unwrap();
        let row = x.data();
        assert_eq!(hot(row, "atom_type"), [1]);
        assert_eq!(hot(row, "degree"), [0]);
        assert_eq!(hot(row, "hydrogens"), [4]);
        assert_eq!(hot(row, "implicit_valence"), [4]);
        assert_eq!(hot(row, "hybridization"), [Hybridization::Sp3.index()]);
        assert_eq!(hot(row, "formal_charge"), [3]);
        assert!(hot(row, "ring_size").is_empty());
        assert!(hot(row, "aromatic").is_empty());
        assert_eq!(hot(row, "chirality"), [2]);
        assert!(hot(row, "acid_base").is_empty() && hot(row, "hydrogen_bonding").is_empty());
        assert_eq!(row.iter().sum::<f64>(), 7.0);
    }

    #[test]
    fn benzene_row() {
        let atoms = (0..6).map(|k| {
            let t = k as f64 * std::f64::consts::TAU / 6.0;
            Atom::new(Element::C, [1.39 * t.cos(), 1.39 * t.sin(), 0.0])
        });
        let bonds = (0..6)
            .map(|k| Bond::new(k, (k + 1) % 6, if k % 2 == 0 { 2 } else { 1 }))
            .collect();
        let m = Molecule::new("benzene", atoms.collect(), bonds).unwrap();
        let x = featurize(&m, &FeatureConfig::default()).unwrap();
        for row in x.data().chunks(FEATURE_WIDTH) {
            assert_eq!(hot(row, "degree"), [2]);
            assert_eq!(hot(row, "hydrogens"), [1]);
            assert_eq!(hot(row, "aromatic"), [0]);
            assert_eq!(hot(row, "ring_size"), [3]);
            assert_eq!(hot(row, "hybridization"), [Hybridization::Sp2.index()]);
        }
    }

    #[test]
    fn unknown_element_hits_catch_all() {
        let m = Molecule::new(
            "fe",
            vec![Atom::new(Element::from_symbol("Fe").unwrap(), [0.0; 3])],
            vec![],
        )
        .unwrap();
        let x = featurize(&m, &FeatureConfig::default()).unwrap();
        assert_eq!(hot(x.data(), "atom_type"), [14]);
    }

    #[test]
    fn vocabulary_validation() {
        let mut c = FeatureConfig::default();
        c.elements[2] = Element::C;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.elements.pop();
        assert!(c.validate().is_err());
        assert!(FeatureConfig::default().validate().is_ok());
    }

    #[test]
    fn explicit_hydrogen_mode_keeps_nodes() {
        let atoms = vec![
            Atom::new(Element::O, [0.0; 3]),
            Atom::new(Element::H, [0.96, 0.0, 0.0]),
            Atom::new(Element::H, [-0.24, 0.93, 0.0]),
        ];
        let m = Molecule::new("water", atoms, vec![Bond::new(0, 1, 1), Bond::new(0, 2, 1)]).unwrap();
        let heavy = perceive(&m, &FeatureConfig::default());
        assert_eq!(heavy.len(), 1);
        assert_eq!((heavy[0].hydrogens, heavy[0].implicit_valence), (2, 2));
        let cfg = FeatureConfig {
            explicit_hydrogens: true,
            ..FeatureConfig::default()
        };
        let all = perceive(&m, &cfg);
        assert_eq!(all.len(), 3);
        assert_eq!((all[0].hydrogens, all[0].implicit_valence), (2, 0));
    }
}
