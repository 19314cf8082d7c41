use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{read_sdf, Molecule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub molecule: Molecule,
    pub target: f64,
    pub split: Option<String>,
}

impl DatasetRecord {
    pub fn id(&self) -> &str {
        &self.molecule.id
    }
}

/// Maps textual labels onto binary classes, e.g. `CA=1,CM=1,CI=0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabelMap(BTreeMap<String, f64>);

impl LabelMap {
    /// Confirmed active and confirmed moderately active merge into the
    /// positive class; confirmed inactive is negative.
    pub fn hiv() -> Self {
        "CA=1,CM=1,CI=0".parse().expect("static label map")
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.0.get(label.trim()).copied()
    }
}

impl FromStr for LabelMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for entry in s.split(',').map(str::trim).filter(|e| !e.is_empty()) {
            let (label, value) = entry
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("label map entry `{entry}` is not LABEL=0|1")))?;
            let value = match value.trim() {
                "0" => 0.0,
                "1" => 1.0,
                v => return Err(Error::Config(format!("label `{label}` maps to `{v}`, expected 0 or 1"))),
            };
            map.insert(label.trim().to_string(), value);
        }
        Ok(LabelMap(map))
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub id_column: String,
    pub target_column: String,
    pub task: Task,
    /// SDF data item holding the record id; the title line is used when absent.
    pub id_field: Option<String>,
    pub label_map: Option<LabelMap>,
    pub split_column: Option<String>,
}

impl LoadOptions {
    pub fn new(task: Task) -> Self {
        Self {
            id_column: "id".into(),
            target_column: "target".into(),
            task,
            id_field: None,
            label_map: None,
            split_column: None,
        }
    }
}

fn offender_list(kind: &str, items: &[String]) -> Option<String> {
    if items.is_empty() {
        return None;
    }
    const SHOW: usize = 20;
    let mut shown = items.iter().take(SHOW).cloned().collect::<Vec<_>>().join(", ");
    if items.len() > SHOW {
        shown.push_str(&format!(", ... ({} total)", items.len()));
    }
    Some(format!("{kind}: {shown}"))
}

/// Join SDF structures with a target table. Output follows CSV row order.
pub fn load_dataset(
    sdf: impl AsRef<Path>,
    targets: impl AsRef<Path>,
    opts: &LoadOptions,
) -> Result<Vec<DatasetRecord>> {
    let records = read_sdf(sdf)?;
    let targets = targets.as_ref();
    let file = std::fs::File::open(targets).map_err(|e| Error::io(targets, e))?;
    join_records(
        records.into_iter().map(|r| {
            let id = opts
                .id_field
                .as_ref()
                .and_then(|f| r.fields.get(f))
                .map(|s| s.trim().to_string())
                .unwrap_or_else(|| r.molecule.id.clone());
            let mut molecule = r.molecule;
            molecule.id = id;
            molecule
        }),
        file,
        opts,
    )
}

pub(crate) fn join_records(
    molecules: impl IntoIterator<Item = Molecule>,
    table: impl std::io::Read,
    opts: &LoadOptions,
) -> Result<Vec<DatasetRecord>> {
    let mut by_id: HashMap<String, Option<Molecule>> = HashMap::new();
    let mut duplicate_structures = Vec::new();
    for m in molecules {
        if by_id.contains_key(&m.id) {
            duplicate_structures.push(m.id.clone());
        } else {
            by_id.insert(m.id.clone(), Some(m));
        }
    }

    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(table);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Dataset(format!("target table has no column `{name}`")))
    };
    let id_col = find(&opts.id_column)?;
    let target_col = find(&opts.target_column)?;
    let split_col = opts.split_column.as_deref().map(find).transpose()?;

    let mut out = Vec::new();
    let (mut unmatched, mut duplicate_rows, mut bad_targets) = (Vec::new(), Vec::new(), Vec::new());
    for row in reader.records() {
        let row = row?;
        let id = row.get(id_col).unwrap_or("").trim().to_string();
        let raw = row.get(target_col).unwrap_or("").trim();
        let target = match &opts.label_map {
            Some(map) => map.get(raw),
            None => raw.parse::<f64>().ok().filter(|v| v.is_finite()),
        };
        let target = match (target, opts.task) {
            (Some(t), Task::Classification) if t != 0.0 && t != 1.0 => None,
            (t, _) => t,
        };
        let Some(target) = target else {
            bad_targets.push(format!("{id} ({raw:?})"));
            continue;
        };
        match by_id.get_mut(&id) {
            None => unmatched.push(id),
            Some(slot) => match slot.take() {
                None => duplicate_rows.push(id),
                Some(molecule) => out.push(DatasetRecord {
                    molecule,
                    target,
                    split: split_col.and_then(|c| row.get(c)).map(|s| s.trim().to_string()),
                }),
            },
        }
    }

    let problems: Vec<String> = [
        offender_list("ids without a structure", &unmatched),
        offender_list("ids repeated in the target table", &duplicate_rows),
        offender_list("ids repeated in the structure file", &duplicate_structures),
        offender_list(
            match opts.task {
                Task::Regression => "non-numeric targets",
                Task::Classification => "targets not in {0, 1}",
            },
            &bad_targets,
        ),
    ]
    .into_iter()
    .flatten()
    .collect();
    if !problems.is_empty() {
        return Err(Error::Dataset(problems.join("; ")));
    }
    Ok(out)
}

/// Write `id,target,prediction` rows, six decimals. Refuses non-finite values.
pub fn write_predictions(records: &[DatasetRecord], predictions: &[f64], path: impl AsRef<Path>) -> Result<()> {
    if records.len() != predictions.len() {
        return Err(Error::dim(format!(
            "{} records but {} predictions",
            records.len(),
            predictions.len()
        )));
    }
    let rows: Vec<(&str, f64, f64)> = records
        .iter()
        .zip(predictions)
        .map(|(r, &p)| (r.id(), r.target, p))
        .collect();
    write_prediction_rows(&rows, path)
}

pub fn write_prediction_rows(rows: &[(&str, f64, f64)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some((id, _, _)) = rows.iter().find(|(_, t, p)| !t.is_finite() || !p.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite value for `{id}`, refusing to write {}",
            path.display()
        )));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "target", "prediction"])?;
    for (id, t, p) in rows {
        w.write_record([id.to_string(), format!("{t:.6}"), format!("{p:.6}")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
