//! Per-element electron and valence tables for main-group chemistry.

use crate::molio::Element;

/// Valence-shell electron count for main-group elements.
pub fn valence_electrons(z: u8) -> Option<u8> {
    let group = match z {
        1 | 3 | 11 | 19 | 37 | 55 | 87 => 1,
        2 => 2,
        4 | 12 | 20 | 38 | 56 | 88 => 2,
        5 | 13 | 31 | 49 | 81 => 3,
        6 | 14 | 32 | 50 | 82 => 4,
        7 | 15 | 33 | 51 | 83 => 5,
        8 | 16 | 34 | 52 | 84 => 6,
        9 | 17 | 35 | 53 | 85 => 7,
        10 | 18 | 36 | 54 | 86 => 8,
        _ => return None,
    };
    Some(group)
}

/// Allowed neutral valences, smallest first.
fn neutral_valences(z: u8) -> Option<&'static [u8]> {
    Some(match z {
        1 => &[1],
        2 | 10 | 18 | 36 | 54 | 86 => &[0],
        3 | 11 | 19 | 37 | 55 | 87 => &[1],
        4 | 12 | 20 | 38 | 56 | 88 => &[2],
        5 | 13 | 31 | 49 | 81 => &[3],
        6 | 14 | 32 | 50 | 82 => &[4],
        7 => &[3],
        15 | 33 | 51 | 83 => &[3, 5],
        8 => &[2],
        16 | 34 | 52 | 84 => &[2, 4, 6],
        9 => &[1],
        17 | 35 | 53 | 85 => &[1, 3, 5, 7],
        _ => return None,
    })
}

/// Valences of a charged atom, taken from its isoelectronic neighbor
/// (N⁺ behaves like C, O⁻ like F, C⁻ like N).
pub fn allowed_valences(element: Element, charge: i8) -> Option<&'static [u8]> {
    let z = i16::from(element.atomic_number()) - i16::from(charge);
    if !(1..=118).contains(&z) {
        return None;
    }
    neutral_valences(z as u8)
}
