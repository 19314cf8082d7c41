//! MDL SDF reader for V2000 connection tables.
//!
//! Records are separated by `$$$$`. Atom block charges come from `M  CHG`
//! lines when present, otherwise from the legacy charge column. Bond type 4
//! is kept as order 1 with the aromatic flag set.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Atom, Bond, Element, Molecule};

/// One SDF record: the structure plus its `> <name>` data items.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfRecord {
    pub molecule: Molecule,
    pub fields: BTreeMap<String, String>,
}

pub fn parse_sdf(bytes: &[u8]) -> Result<Vec<Molecule>> {
    Ok(parse_sdf_records(bytes)?.into_iter().map(|r| r.molecule).collect())
}

pub fn read_sdf(path: impl AsRef<Path>) -> Result<Vec<SdfRecord>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_sdf_records(&bytes)
}

pub fn parse_sdf_records(bytes: &[u8]) -> Result<Vec<SdfRecord>> {
    let text = String::from_utf8_lossy(bytes);
    let lines: Vec<&str> = text.lines().collect();
    let mut records = Vec::new();
    let mut pos = 0;
    while pos < lines.len() {
        if lines[pos..].iter().all(|l| l.trim().is_empty()) {
            break;
        }
        let mut parser = RecordParser {
            lines: &lines,
            record: records.len(),
        };
        let (record, next) = parser.parse(pos)?;
        records.push(record);
        pos = next;
    }
    Ok(records)
}

struct RecordParser<'a> {
    lines: &'a [&'a str],
    record: usize,
}

fn column<'s>(line: &'s str, start: usize, end: usize) -> Option<&'s str> {
    let end = end.min(line.len());
    if start >= end {
        return None;
    }
    line.get(start..end).map(str::trim)
}

fn legacy_charge(code: i32) -> i8 {
    match code {
        1 => 3,
        2 => 2,
        3 => 1,
        5 => -1,
        6 => -2,
        7 => -3,
        _ => 0,
    }
}

impl RecordParser<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            record: self.record,
            line: line + 1,
            message: message.into(),
        }
    }

    fn line(&self, k: usize, what: &str) -> Result<&str> {
        self.lines
            .get(k)
            .copied()
            .ok_or_else(|| self.err(k, format!("unexpected end of input, expected {what}")))
    }

    fn parse(&mut self, start: usize) -> Result<(SdfRecord, usize)> {
        let title = self.line(start, "title line")?.trim().to_string();
        self.line(start + 1, "program line")?;
        self.line(start + 2, "comment line")?;
        let counts_at = start + 3;
        let counts = self.line(counts_at, "counts line")?;
        if counts.contains("V3000") {
            return Err(self.err(counts_at, "V3000 connection tables are not supported"));
        }
        let (n_atoms, n_bonds) = self.parse_counts(counts_at, counts)?;

        let atom_start = counts_at + 1;
        let needed = atom_start + n_atoms + n_bonds;
        if needed > self.lines.len() {
            return Err(self.err(
                self.lines.len(),
                format!("counts line declares {n_atoms} atoms and {n_bonds} bonds but the input ends early"),
            ));
        }

        let mut atoms = Vec::with_capacity(n_atoms);
        for k in atom_start..atom_start + n_atoms {
            atoms.push(self.parse_atom(k)?);
        }
        let mut bonds = Vec::with_capacity(n_bonds);
        let mut seen = HashSet::new();
        for k in atom_start + n_atoms..needed {
            let bond = self.parse_bond(k, n_atoms)?;
            if !seen.insert((bond.i.min(bond.j), bond.i.max(bond.j))) {
                return Err(self.err(k, format!("duplicate bond {}-{}", bond.i + 1, bond.j + 1)));
            }
            bonds.push(bond);
        }

        let mut k = needed;
        let mut chg: Option<Vec<(usize, i32)>> = None;
        // properties block
        while k < self.lines.len() {
            let line = self.lines[k];
            if line.starts_with("M  END") {
                k += 1;
                break;
            }
            if line.starts_with("$$$$") || line.starts_with('>') {
                break;
            }
            if line.starts_with("M  CHG") {
                let entries = self.parse_charge_line(k, line, n_atoms)?;
                chg.get_or_insert_with(Vec::new).extend(entries);
            }
            k += 1;
        }
        if let Some(entries) = chg {
            for atom in &mut atoms {
                atom.0.charge = 0;
            }
            for (idx, q) in entries {
                atoms[idx].0.charge = q as i8;
            }
        }

        // data items
        let mut fields = BTreeMap::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        while k < self.lines.len() {
            let line = self.lines[k];
            k += 1;
            if line.starts_with("$$$$") {
                break;
            }
            if line.starts_with('>') {
                if let Some((name, value)) = current.take() {
                    fields.insert(name, value.join("\n"));
                }
                let name = match (line.find('<'), line.rfind('>')) {
                    (Some(a), Some(b)) if b > a => line[a + 1..b].to_string(),
                    _ => line[1..].trim().to_string(),
                };
                current = Some((name, Vec::new()));
            } else if line.trim().is_empty() {
                if let Some((name, value)) = current.take() {
                    fields.insert(name, value.join("\n"));
                }
            } else if let Some((_, value)) = current.as_mut() {
                value.push(line.trim_end());
            }
        }
        if let Some((name, value)) = current.take() {
            fields.insert(name, value.join("\n"));
        }

        let atoms: Vec<Atom> = atoms
            .into_iter()
            .enumerate()
            .map(|(idx, (atom, line))| {
                if (-3..=3).contains(&atom.charge) {
                    Ok(atom)
                } else {
                    Err(self.err(line, format!("atom {} charge {} outside -3..+3", idx + 1, atom.charge)))
                }
            })
            .collect::<Result<_>>()?;
        let molecule = Molecule {
            id: title,
            atoms,
            bonds,
        };
        molecule.validate().map_err(|m| self.err(start, m))?;
        Ok((SdfRecord { molecule, fields }, k))
    }

    fn parse_counts(&self, k: usize, line: &str) -> Result<(usize, usize)> {
        let fixed = (
            column(line, 0, 3).and_then(|s| s.parse::<usize>().ok()),
            column(line, 3, 6).and_then(|s| s.parse::<usize>().ok()),
        );
        if let (Some(a), Some(b)) = fixed {
            return Ok((a, b));
        }
        let mut tokens = line.split_whitespace();
        match (
            tokens.next().and_then(|s| s.parse().ok()),
            tokens.next().and_then(|s| s.parse().ok()),
        ) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(self.err(k, format!("malformed counts line `{line}`"))),
        }
    }

    fn parse_atom(&self, k: usize) -> Result<(Atom, usize)> {
        let line = self.lines[k];
        let parse_f = |s: Option<&str>| s.and_then(|s| s.parse::<f64>().ok());
        let fixed = (
            parse_f(column(line, 0, 10)),
            parse_f(column(line, 10, 20)),
            parse_f(column(line, 20, 30)),
            column(line, 31, 34).filter(|s| !s.is_empty()),
        );
        let (x, y, z, symbol, charge_code, parity) = match fixed {
            (Some(x), Some(y), Some(z), Some(sym)) => {
                let int_at = |a, b| column(line, a, b).and_then(|s| s.parse::<i32>().ok()).unwrap_or(0);
                (x, y, z, sym.to_string(), int_at(36, 39), int_at(39, 42))
            }
            _ => {
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() < 4 {
                    return Err(self.err(k, format!("malformed atom line `{line}`")));
                }
                let coord = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|_| self.err(k, format!("bad coordinate `{s}`")))
                };
                let int_tok = |i: usize| t.get(i).and_then(|s| s.parse::<i32>().ok()).unwrap_or(0);
                (
                    coord(t[0])?,
                    coord(t[1])?,
                    coord(t[2])?,
                    t[3].to_string(),
                    int_tok(5),
                    int_tok(6),
                )
            }
        };
        if ![x, y, z].iter().all(|c| c.is_finite()) {
            return Err(self.err(k, "non-finite coordinate"));
        }
        let element =
            Element::from_symbol(&symbol).ok_or_else(|| self.err(k, format!("unknown element symbol `{symbol}`")))?;
        let parity = match parity {
            1 | 2 => Some(parity as u8),
            _ => None,
        };
        Ok((
            Atom {
                element,
                charge: legacy_charge(charge_code),
                position: [x, y, z],
                parity,
            },
            k,
        ))
    }

    fn parse_bond(&self, k: usize, n_atoms: usize) -> Result<Bond> {
        let line = self.lines[k];
        let int_col = |a, b| column(line, a, b).and_then(|s| s.parse::<i64>().ok());
        let (i, j, kind) = match (int_col(0, 3), int_col(3, 6), int_col(6, 9)) {
            (Some(i), Some(j), Some(t)) => (i, j, t),
            _ => {
                let t: Vec<i64> = line
                    .split_whitespace()
                    .take(3)
                    .map(|s| s.parse::<i64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| self.err(k, format!("malformed bond line `{line}`")))?;
                if t.len() < 3 {
                    return Err(self.err(k, format!("malformed bond line `{line}`")));
                }
                (t[0], t[1], t[2])
            }
        };
        let in_range = |v: i64| v >= 1 && (v as u64) <= n_atoms as u64;
        if !in_range(i) || !in_range(j) {
            return Err(self.err(k, format!("bond {i}-{j} references an atom outside 1..{n_atoms}")));
        }
        if i == j {
            return Err(self.err(k, format!("bond from atom {i} to itself")));
        }
        let (order, aromatic) = match kind {
            1..=3 => (kind as u8, false),
            4 => (1, true),
            other => return Err(self.err(k, format!("unsupported bond type {other}"))),
        };
        Ok(Bond {
            i: (i - 1) as usize,
            j: (j - 1) as usize,
            order,
            aromatic,
        })
    }

    fn parse_charge_line(&self, k: usize, line: &str, n_atoms: usize) -> Result<Vec<(usize, i32)>> {
        let tokens: Vec<&str> = line.split_whitespace().skip(2).collect();
        let nums: Vec<i64> = tokens
            .iter()
            .map(|s| s.parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.err(k, format!("malformed charge line `{line}`")))?;
        let (count, rest) = nums.split_first().ok_or_else(|| self.err(k, "empty charge line"))?;
        if *count < 0 || rest.len() != 2 * (*count as usize) {
            return Err(self.err(
                k,
                format!("charge line declares {count} entries, found {}", rest.len() / 2),
            ));
        }
        rest.chunks_exact(2)
            .map(|pair| {
                let (idx, q) = (pair[0], pair[1]);
                if idx < 1 || idx as u64 > n_atoms as u64 {
                    return Err(self.err(k, format!("charge on atom {idx} outside 1..{n_atoms}")));
                }
                if !(-3..=3).contains(&q) {
                    return Err(self.err(k, format!("formal charge {q} outside -3..+3")));
                }
                Ok(((idx - 1) as usize, q as i32))
            })
            .collect()
    }
}
