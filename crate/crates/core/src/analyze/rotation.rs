use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::molio::Molecule;
use crate::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::Config(format!("unknown axis `{other}` (expected x, y or z)"))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// `(cos, sin)` of an angle in degrees, exact at multiples of 90°.
fn cos_sin(degrees: f64) -> (f64, f64) {
    let r = degrees.rem_euclid(360.0);
    match r {
        x if x == 0.0 => (1.0, 0.0),
        x if x == 90.0 => (0.0, 1.0),
        x if x == 180.0 => (-1.0, 0.0),
        x if x == 270.0 => (0.0, -1.0),
        x => {
            let t = x.to_radians();
            (t.cos(), t.sin())
        }
    }
}

/// Right-handed (counter-clockwise looking down the axis) rotation.
pub fn rotation_matrix(axis: Axis, degrees: f64) -> Mat3 {
    let (c, s) = cos_sin(degrees);
    match axis {
        Axis::X => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        Axis::Y => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        Axis::Z => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
    }
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn determinant(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// `‖QᵀQ − I‖∞`, entrywise.
pub fn orthogonality_error(q: &Mat3) -> f64 {
    let p = mat_mul(&transpose(q), q);
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((p[i][j] - IDENTITY[i][j]).abs());
        }
    }
    worst
}

pub fn apply(q: &Mat3, p: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| q[i][0] * p[0] + q[i][1] * p[1] + q[i][2] * p[2])
}

/// Coordinates mapped `x → Qx` about the frame origin.
pub fn rotate_molecule(molecule: &Molecule, q: &Mat3) -> Molecule {
    molecule.map_positions(|p| apply(q, p))
}

/// Per-axis angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EulerAngles {
    /// `R_z(z) · R_y(y) · R_x(x)`: rotate about x first, then y, then z.
    pub fn matrix(&self) -> Mat3 {
        let zy = mat_mul(&rotation_matrix(Axis::Z, self.z), &rotation_matrix(Axis::Y, self.y));
        mat_mul(&zy, &rotation_matrix(Axis::X, self.x))
    }
}

/// Three independent uniform angles on `[0°, 360°)`. Composing per-axis
/// uniform angles is not uniform over rotations; it mirrors the per-axis
/// protocol instead.
pub fn random_angles(seed: u64) -> EulerAngles {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EulerAngles {
        x: rng.gen_range(0.0..360.0),
        y: rng.gen_range(0.0..360.0),
        z: rng.gen_range(0.0..360.0),
    }
}

pub fn random_rotation(seed: u64) -> Mat3 {
    random_angles(seed).matrix()
}
