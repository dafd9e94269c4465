//! Scar eigenstates of the Hamiltonian and the γ = 0 pair modes seeding a sweep.

use std::collections::HashSet;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::liouv::{BlockDecomposition, HamiltonianEigen};
use crate::linalg::{r, I};
use crate::models::dicke_scar_states;

/// Scar tower as Hamiltonian eigenstates, ordered by energy.
#[derive(Clone, Debug)]
pub struct ScarStates {
    pub energies: Vec<f64>,
    /// Columns over the computational basis.
    pub vectors: Array2<C64>,
    /// Position of each tower state in the eigen list.
    pub eigen_index: Vec<usize>,
    /// Squared overlap with the reference used for identification.
    pub overlaps: Vec<f64>,
}

impl ScarStates {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    fn from_indices(eigen: &HamiltonianEigen, mut picked: Vec<(usize, f64)>) -> Self {
        picked.sort_by(|a, b| eigen.energies[a.0].total_cmp(&eigen.energies[b.0]));
        let idx: Vec<usize> = picked.iter().map(|p| p.0).collect();
        let mut vectors = Array2::zeros((eigen.vectors.nrows(), idx.len()));
        for (c, &k) in idx.iter().enumerate() {
            vectors.column_mut(c).assign(&eigen.vectors.column(k));
        }
        ScarStates { energies: idx.iter().map(|&k| eigen.energies[k]).collect(), vectors, eigen_index: idx, overlaps: picked.iter().map(|p| p.1).collect() }
    }
}

fn overlaps_with(eigen: &HamiltonianEigen, v: &Array1<C64>) -> Vec<f64> {
    eigen.vectors.columns().into_iter().map(|c| c.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr()).collect()
}

/// Eigenstates of maximal overlap with the `N + 1` Dicke states of the ladder.
///
/// Degenerate clusters are first rotated so that exact scars come out
/// unmixed with thermal states of the same energy.
pub fn scl_scar_states(dec: &BlockDecomposition, eigen: &mut HamiltonianEigen, n_rungs: usize) -> Result<ScarStates> {
    let tower = dicke_scar_states(n_rungs)?.vectors_in(&dec.basis)?;
    let mut picked = Vec::new();
    let mut seen = HashSet::new();
    for n in 0..=n_rungs {
        let d = tower.column(n).to_owned();
        eigen.align_to(&dec.unitary, &d, 1e-9);
        let ov = overlaps_with(eigen, &d);
        let (k, w) = ov.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty spectrum");
        if !seen.insert(k) {
            return Err(Error::InvalidArgument(format!("Dicke states {n} shares its best eigenstate with another tower state")));
        }
        picked.push((k, w));
    }
    Ok(ScarStates::from_indices(eigen, picked))
}

/// The `count` eigenstates of largest overlap with `reference`, the
/// usual identification of the PXP tower from the Néel state.
pub fn pxp_scar_states(dec: &BlockDecomposition, eigen: &mut HamiltonianEigen, reference: &Array1<C64>, count: usize) -> Result<ScarStates> {
    if count == 0 || count > eigen.len() {
        return Err(Error::InvalidArgument(format!("cannot pick {count} scar states from {}", eigen.len())));
    }
    eigen.align_to(&dec.unitary, reference, 1e-9);
    let ov = overlaps_with(eigen, reference);
    let mut order: Vec<usize> = (0..ov.len()).collect();
    order.sort_by(|&a, &b| ov[b].total_cmp(&ov[a]));
    Ok(ScarStates::from_indices(eigen, order[..count].iter().map(|&k| (k, ov[k])).collect()))
}

/// The `count` eigenstates with the largest weight on the span of the
/// orthonormal columns `refs`, after splitting degenerate clusters along it.
pub fn subspace_states(dec: &BlockDecomposition, eigen: &mut HamiltonianEigen, refs: &Array2<C64>, count: usize) -> Result<ScarStates> {
    if count == 0 || count > eigen.len() {
        return Err(Error::InvalidArgument(format!("cannot pick {count} states from {}", eigen.len())));
    }
    eigen.align_to_subspace(&dec.unitary, refs, 1e-9);
    let w = eigen.subspace_weights(refs);
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
    Ok(ScarStates::from_indices(eigen, order[..count].iter().map(|&k| (k, w[k])).collect()))
}

/// γ = 0 eigenmodes `|E_a⟩⟨E_b|` of one block, built from the Hamiltonian.
#[derive(Clone, Debug)]
pub struct Seeds {
    /// Orthonormal pair vectors in block coordinates, one per column.
    pub vectors: Array2<C64>,
    pub eigenvalues: Vec<C64>,
    pub pairs: Vec<(usize, usize)>,
    /// `(l, s)` for scar pairs.
    pub layers: Vec<Option<(i32, usize)>>,
}

impl Seeds {
    pub fn new(dec: &BlockDecomposition, block: usize, eigen: &HamiltonianEigen, scars: &ScarStates) -> Result<Self> {
        let members = &dec.members[block];
        let sector_pairs: HashSet<(usize, usize)> = members.iter().map(|&(a, b)| (dec.owner[a], dec.owner[b])).collect();
        let tower: Vec<Option<usize>> = {
            let mut t = vec![None; eigen.len()];
            for (n, &k) in scars.eigen_index.iter().enumerate() {
                t[k] = Some(n);
            }
            t
        };
        let n = eigen.len();
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if sector_pairs.contains(&(eigen.sector[a], eigen.sector[b])) {
                    pairs.push((a, b));
                }
            }
        }
        if pairs.len() != members.len() {
            return Err(Error::Dimension { expected: members.len(), got: pairs.len() });
        }
        let mut vectors = Array2::zeros((members.len(), pairs.len()));
        for (c, &(a, b)) in pairs.iter().enumerate() {
            for (row, &(i, j)) in members.iter().enumerate() {
                vectors[[row, c]] = eigen.adapted[[i, a]] * eigen.adapted[[j, b]].conj();
            }
        }
        let eigenvalues = pairs.iter().map(|&(a, b)| -I * r(eigen.energies[a] - eigen.energies[b])).collect();
        let layers = pairs
            .iter()
            .map(|&(a, b)| match (tower[a], tower[b]) {
                (Some(x), Some(y)) => Some((x as i32 - y as i32, x.min(y))),
                _ => None,
            })
            .collect();
        Ok(Seeds { vectors, eigenvalues, pairs, layers })
    }

    pub fn n_scar(&self) -> usize {
        self.layers.iter().filter(|l| l.is_some()).count()
    }

    /// Scar pair vectors and their layer labels.
    pub fn scar_pairs(&self) -> (Array2<C64>, Vec<(i32, usize)>) {
        let idx: Vec<usize> = (0..self.layers.len()).filter(|&k| self.layers[k].is_some()).collect();
        let mut v = Array2::zeros((self.vectors.nrows(), idx.len()));
        for (c, &k) in idx.iter().enumerate() {
            v.column_mut(c).assign(&self.vectors.column(k));
        }
        (v, idx.iter().map(|&k| self.layers[k].expect("scar")).collect())
    }
}
