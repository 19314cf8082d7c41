use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{Aggregation, ForwardCache, NodeState, Provenance};
use crate::{Error, Result};

/// Normalized share of every atom in the molecular feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionMap {
    pub id: String,
    pub strategy: Aggregation,
    /// Graph-node order.
    pub atom_index: Vec<usize>,
    pub scalar: Vec<f64>,
    pub vector: Vec<f64>,
}

fn normalize(id: &str, form: &str, raw: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateMap(format!("{id}: {form} features are all zero")));
    }
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Sum strategy: an atom's scalar weight is its share of the total ℓ1 norm
/// of the final scalar features, its vector weight its share of the summed
/// per-channel Euclidean norms. Max strategy: the fraction of channels the
/// atom won during aggregation.
pub fn contribution_map(
    id: &str,
    atom_index: &[usize],
    cache: &ForwardCache,
    strategy: Aggregation,
) -> Result<ContributionMap> {
    contribution_from_state(id, atom_index, &cache.final_state(), cache.provenance(), strategy)
}

/// [`contribution_map`] on explicit final features and max-aggregation winners.
pub fn contribution_from_state(
    id: &str,
    atom_index: &[usize],
    state: &NodeState,
    provenance: Option<&Provenance>,
    strategy: Aggregation,
) -> Result<ContributionMap> {
    let (n, h) = (state.n_atoms(), state.width());
    if atom_index.len() != n {
        return Err(Error::dim(format!(
            "{} atom indices for {n} graph nodes",
            atom_index.len()
        )));
    }
    let s = state.s.data();
    let v = state.v.data();
    let l1: Vec<f64> = (0..n)
        .map(|i| s[i * h..(i + 1) * h].iter().map(|x| x.abs()).sum())
        .collect();
    let norms: Vec<f64> = (0..n)
        .map(|i| {
            (0..h)
                .map(|f| {
                    let k = (i * h + f) * 3;
                    (v[k] * v[k] + v[k + 1] * v[k + 1] + v[k + 2] * v[k + 2]).sqrt()
                })
                .sum()
        })
        .collect();
    let (scalar, vector) = match (strategy, provenance) {
        (Aggregation::Sum, None) => (normalize(id, "scalar", l1)?, normalize(id, "vector", norms)?),
        (Aggregation::Max, Some(p)) if p.scalar.len() == h && p.vector.len() == h => {
            normalize(id, "scalar", l1)?;
            normalize(id, "vector", norms)?;
            let share = |winners: &[usize]| {
                let mut c = vec![0usize; n];
                winners.iter().for_each(|&w| c[w] += 1);
                c.into_iter().map(|k| k as f64 / h as f64).collect::<Vec<_>>()
            };
            (share(&p.scalar), share(&p.vector))
        }
        _ => {
            return Err(Error::Config(format!(
                "{id}: features were not aggregated with {strategy} (or winners do not match the channels)"
            )))
        }
    };
    Ok(ContributionMap {
        id: id.to_string(),
        strategy,
        atom_index: atom_index.to_vec(),
        scalar,
        vector,
    })
}

pub fn write_maps_json(maps: &[ContributionMap], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(maps)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
