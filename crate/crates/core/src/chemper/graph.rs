use crate::molio::Molecule;
use crate::numcore::Tensor;
use crate::{Error, Result};

use super::featurize::{featurize, graph_atoms, FeatureConfig};

/// Model inputs for one molecule.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTensors {
    /// `[N, 60]` atom features.
    pub x: Tensor,
    /// `[N, N]` symmetrically normalized adjacency with self loops.
    pub a_norm: Tensor,
    /// `[N, N, 3]`, `r[i][j] = pos(j) - pos(i)` in Å.
    pub r: Tensor,
    /// Graph neighbors of each node, ascending, self excluded.
    pub neighbors: Vec<Vec<usize>>,
    /// Original atom index of each graph node.
    pub atom_index: Vec<usize>,
}

impl GraphTensors {
    pub fn n_atoms(&self) -> usize {
        self.atom_index.len()
    }

    /// `r[i][j]` as a 3-vector.
    pub fn rel(&self, i: usize, j: usize) -> [f64; 3] {
        let n = self.n_atoms();
        let k = (i * n + j) * 3;
        let d = self.r.data();
        [d[k], d[k + 1], d[k + 2]]
    }
}

pub fn build_graph_tensors(molecule: &Molecule, config: &FeatureConfig) -> Result<GraphTensors> {
    let atom_index = graph_atoms(molecule, config);
    let n = atom_index.len();
    if n == 0 {
        return Err(Error::EmptyMolecule(molecule.id.clone()));
    }
    let x = featurize(molecule, config)?;

    let mut node_of = vec![usize::MAX; molecule.atoms.len()];
    for (k, &a) in atom_index.iter().enumerate() {
        node_of[a] = k;
    }
    let mut neighbors = vec![Vec::new(); n];
    for b in &molecule.bonds {
        let (u, v) = (node_of[b.i], node_of[b.j]);
        if u != usize::MAX && v != usize::MAX {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
    }
    for list in &mut neighbors {
        list.sort_unstable();
    }

    let inv_sqrt: Vec<f64> = neighbors.iter().map(|l| 1.0 / ((1 + l.len()) as f64).sqrt()).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = inv_sqrt[i] * inv_sqrt[i];
        for &j in &neighbors[i] {
            a[i * n + j] = inv_sqrt[i] * inv_sqrt[j];
        }
    }

    let mut r = vec![0.0; n * n * 3];
    for i in 0..n {
        let pi = molecule.atoms[atom_index[i]].position;
        for j in 0..n {
            let pj = molecule.atoms[atom_index[j]].position;
            let k = (i * n + j) * 3;
            for c in 0..3 {
                r[k + c] = pj[c] - pi[c];
            }
        }
    }

    Ok(GraphTensors {
        x,
        a_norm: Tensor::new(vec![n, n], a)?,
        r: Tensor::new(vec![n, n, 3], r)?,
        neighbors,
        atom_index,
    })
}
