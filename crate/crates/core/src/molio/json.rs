//! JSON molecule documents:
//! `{"id", "atoms": [{"element", "charge", "xyz": [x, y, z], "parity"?}], "bonds": [{"i", "j", "order", "aromatic"}]}`
//! with 0-based bond endpoints.

use crate::error::{Error, Result};

use super::Molecule;

pub fn parse_molecule_json(bytes: &[u8]) -> Result<Molecule> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let molecule: Molecule = serde_path_to_error::deserialize(de).map_err(|e| Error::Document {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    molecule.validate().map_err(|message| {
        let path = message.split(':').next().unwrap_or(".").to_string();
        Error::Document { path, message }
    })?;
    Ok(molecule)
}

/// Canonical form: two-space indentation, trailing newline.
pub fn write_molecule_json(molecule: &Molecule) -> String {
    let mut s = serde_json::to_string_pretty(molecule).expect("molecule serialization is infallible");
    s.push('\n');
    s
}
