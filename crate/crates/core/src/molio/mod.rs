//! Structure files and dataset tables.

mod dataset;
mod element;
mod json;
mod molecule;
mod sdf;

pub use dataset::{load_dataset, write_prediction_rows, write_predictions, DatasetRecord, LabelMap, LoadOptions, Task};
pub use element::Element;
pub use json::{parse_molecule_json, write_molecule_json};
pub use molecule::{Atom, Bond, Molecule, CHARGE_RANGE};
pub use sdf::{parse_sdf, parse_sdf_records, read_sdf, SdfRecord};
