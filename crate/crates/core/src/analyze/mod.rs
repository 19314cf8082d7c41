//! Rotation experiments and per-atom contribution maps.

mod contrib;
mod rotation;
mod sweep;

pub use contrib::{contribution_from_state, contribution_map, write_maps_json, ContributionMap};
pub use rotation::{
    apply, determinant, mat_mul, orthogonality_error, random_angles, random_rotation, rotate_molecule, rotation_matrix,
    transpose, Axis, EulerAngles, Mat3, IDENTITY,
};
pub use sweep::{
    evaluate_rotated, fine_sweep, predict_one, random_row, rotation_sweep, stepwise_rows, write_fine_csv,
    write_sweep_csv, RotationMode, RotationSpec, SweepModel, SweepRow,
};
