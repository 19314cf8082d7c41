//! Chemical perception and construction of the model input matrices.

mod aromaticity;
mod chirality;
mod elements;
mod featurize;
mod graph;
mod hbond;
mod hybridization;
mod rings;
mod topology;

pub use aromaticity::perceive_aromaticity;
pub use chirality::{chirality_tags, Chirality, DEGENERATE_VOLUME};
pub use elements::{allowed_valences, valence_electrons};
pub use featurize::{
    block_offset, encode_atom, featurize, graph_atoms, perceive, FeatureConfig, PerceivedAtom, FEATURE_BLOCKS,
    FEATURE_WIDTH, VOCABULARY_SIZE,
};
pub use graph::{build_graph_tensors, GraphTensors};
pub use hbond::{assign_donor_acceptor_acid_base, SiteFlags};
pub use hybridization::{perceive_hybridization, Hybridization};
pub use rings::{find_rings, perceive_rings, RingSizes, MAX_RING, MIN_RING};
pub use topology::{hydrogen_counts, HydrogenCount};
