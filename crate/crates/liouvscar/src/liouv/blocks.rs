//! Block structure of the generator in a symmetry-adapted doubled basis.
//!
//! With a unitary `T` of adapted columns, `ρ = T C T†` and the generator
//! acts on `C` as `-i(H̃C - CH̃) + γ Σ_j (Z̃_j C Z̃_j - C)` where `H̃ = T†HT`
//! and `Z̃_j = T†σᶻ_jT`. Pairs `(a, b)` of adapted columns are grouped by
//! their joint quantum numbers: ket and bra magnetization separately and
//! `k_ket - k_bra` for every permutation symmetry.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::jump_diagonals;
use crate::error::{Error, Result};
use crate::linalg::{adjoint, r, I, ZERO};
use crate::spinlat::sectors::adapted_unitary;
use crate::spinlat::{Charge, SectorLabel, SpinBasis, SymmetryKind, SymmetrySector};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DoubledLabel {
    pub ket_up: Option<u32>,
    pub bra_up: Option<u32>,
    /// `k = k_ket - k_bra mod order` per symmetry.
    pub charges: Vec<Charge>,
}

impl DoubledLabel {
    pub fn charge(&self, kind: SymmetryKind) -> Option<Charge> {
        self.charges.iter().copied().find(|c| c.kind == kind)
    }

    /// Human-readable tag such as `m4,4|p+|x-` used in output files.
    pub fn tag(&self) -> String {
        let mut parts = Vec::new();
        if let (Some(a), Some(b)) = (self.ket_up, self.bra_up) {
            parts.push(format!("m{a},{b}"));
        }
        for c in &self.charges {
            let p = match c.kind {
                SymmetryKind::Translation => format!("q{}/{}", c.k, c.order),
                SymmetryKind::Inversion => format!("p{}", if c.k == 0 { '+' } else { '-' }),
                SymmetryKind::SpinFlip => format!("x{}", if c.k == 0 { '+' } else { '-' }),
                SymmetryKind::LegSwap => format!("s{}", if c.k == 0 { '+' } else { '-' }),
                SymmetryKind::Magnetization => continue,
            };
            parts.push(p);
        }
        if parts.is_empty() {
            "all".into()
        } else {
            parts.join("|")
        }
    }
}

/// One block of the generator, `𝓛_block(γ) = A + γ B`.
#[derive(Clone, Debug)]
pub struct LiouvBlock {
    pub label: DoubledLabel,
    /// Adapted-column pairs `(ket, bra)` spanning the block.
    pub pairs: Vec<(usize, usize)>,
    pub a: Array2<C64>,
    pub b: Array2<C64>,
    /// Traceless shift per unit γ of the parent space.
    pub shift_per_gamma: f64,
}

impl LiouvBlock {
    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn matrix(&self, gamma: f64) -> Array2<C64> {
        &self.a + &self.b.mapv(|v| v * gamma)
    }

    /// Generator plus the traceless shift `γ s`.
    pub fn shifted(&self, gamma: f64) -> Array2<C64> {
        let mut m = self.matrix(gamma);
        let s = r(gamma * self.shift_per_gamma);
        for i in 0..m.nrows() {
            m[[i, i]] += s;
        }
        m
    }

    /// Row picking out `Tr ρ` from block coordinates.
    pub fn trace_row(&self) -> Array1<C64> {
        self.pairs.iter().map(|&(a, b)| if a == b { r(1.0) } else { ZERO }).collect()
    }
}

#[derive(Clone, Debug)]
pub struct BlockDecomposition {
    pub basis: Arc<SpinBasis>,
    pub sectors: Vec<SymmetrySector>,
    /// Adapted columns over the basis.
    pub unitary: Array2<C64>,
    /// Sector index of every adapted column.
    pub owner: Vec<usize>,
    pub h_tilde: Array2<C64>,
    pub z_tilde: Vec<Array2<C64>>,
    pub labels: Vec<DoubledLabel>,
    pub members: Vec<Vec<(usize, usize)>>,
    pub shift_per_gamma: f64,
}

fn joint(ket: &SectorLabel, bra: &SectorLabel) -> DoubledLabel {
    let charges = ket
        .charges
        .iter()
        .zip(&bra.charges)
        .map(|(a, b)| Charge { kind: a.kind, k: (a.k + a.order - b.k) % a.order, order: a.order })
        .collect();
    DoubledLabel { ket_up: ket.up_count, bra_up: bra.up_count, charges }
}

/// One sector covering the whole basis with the identity transform.
pub fn trivial_sector(basis: &SpinBasis) -> SymmetrySector {
    SymmetrySector {
        label: SectorLabel { up_count: basis.up_count, charges: Vec::new() },
        transform: Array2::eye(basis.dim()).mapv(r),
    }
}

impl BlockDecomposition {
    pub fn new(h: &crate::spinlat::OperatorMatrix, jump_sites: &[usize], sectors: Vec<SymmetrySector>) -> Result<Self> {
        let basis = h.basis.clone();
        let (unitary, owner) = adapted_unitary(&sectors);
        if unitary.nrows() != basis.dim() || unitary.ncols() != basis.dim() {
            return Err(Error::Dimension { expected: basis.dim(), got: unitary.ncols() });
        }
        let td = adjoint(&unitary);
        let h_tilde = td.dot(&h.to_dense()).dot(&unitary);
        let z = jump_diagonals(&basis, jump_sites)?;
        let z_tilde: Vec<Array2<C64>> = z
            .iter()
            .map(|zj| {
                let scaled = Array2::from_shape_fn(unitary.raw_dim(), |(i, c)| unitary[[i, c]] * zj[i]);
                td.dot(&scaled)
            })
            .collect();

        let mut groups: BTreeMap<DoubledLabel, Vec<(usize, usize)>> = BTreeMap::new();
        let n = owner.len();
        for a in 0..n {
            for b in 0..n {
                let lab = joint(&sectors[owner[a]].label, &sectors[owner[b]].label);
                groups.entry(lab).or_default().push((a, b));
            }
        }
        let (labels, members): (Vec<_>, Vec<_>) = groups.into_iter().unzip();
        let shift_per_gamma = super::traceless_shift_value(&basis, 1.0, jump_sites)?;
        Ok(Self { basis, sectors, unitary, owner, h_tilde, z_tilde, labels, members, shift_per_gamma })
    }

    pub fn n_blocks(&self) -> usize {
        self.labels.len()
    }

    pub fn find(&self, pred: impl Fn(&DoubledLabel) -> bool) -> Vec<usize> {
        (0..self.n_blocks()).filter(|&i| pred(&self.labels[i])).collect()
    }

    fn a_element(&self, (a, b): (usize, usize), (a2, b2): (usize, usize)) -> C64 {
        let mut v = ZERO;
        if b == b2 {
            v += self.h_tilde[[a, a2]];
        }
        if a == a2 {
            v -= self.h_tilde[[b2, b]];
        }
        -I * v
    }

    fn b_element(&self, (a, b): (usize, usize), (a2, b2): (usize, usize)) -> C64 {
        let mut v: C64 = self.z_tilde.iter().map(|z| z[[a, a2]] * z[[b2, b]]).sum();
        if a == a2 && b == b2 {
            v -= r(self.z_tilde.len() as f64);
        }
        v
    }

    pub fn block(&self, idx: usize) -> LiouvBlock {
        let pairs = self.members[idx].clone();
        let m = pairs.len();
        let rows: Vec<(Vec<C64>, Vec<C64>)> = pairs
            .par_iter()
            .map(|&p| {
                let a_row = pairs.iter().map(|&q| self.a_element(p, q)).collect();
                let b_row = pairs.iter().map(|&q| self.b_element(p, q)).collect();
                (a_row, b_row)
            })
            .collect();
        let mut a = Array2::zeros((m, m));
        let mut b = Array2::zeros((m, m));
        for (i, (ar, br)) in rows.into_iter().enumerate() {
            a.row_mut(i).assign(&Array1::from(ar));
            b.row_mut(i).assign(&Array1::from(br));
        }
        LiouvBlock { label: self.labels[idx].clone(), pairs, a, b, shift_per_gamma: self.shift_per_gamma }
    }

    /// Largest generator element (at unit γ) coupling sampled columns of
    /// each block to any pair outside it.
    pub fn leakage(&self, samples_per_block: usize) -> (f64, usize, usize) {
        let n = self.owner.len();
        let mut block_of = vec![0usize; n * n];
        for (k, mem) in self.members.iter().enumerate() {
            for &(a, b) in mem {
                block_of[a * n + b] = k;
            }
        }
        let mut worst = (0.0, 0, 0);
        for (k, mem) in self.members.iter().enumerate() {
            let step = (mem.len() / samples_per_block.max(1)).max(1);
            for &col in mem.iter().step_by(step).take(samples_per_block) {
                for a in 0..n {
                    for b in 0..n {
                        if block_of[a * n + b] == k {
                            continue;
                        }
                        let v = (self.a_element((a, b), col) + self.b_element((a, b), col)).norm();
                        if v > worst.0 {
                            worst = (v, a * n + b, col.0 * n + col.1);
                        }
                    }
                }
            }
        }
        worst
    }

    pub fn check_leakage(&self, samples_per_block: usize, tol: f64) -> Result<f64> {
        let (value, row, col) = self.leakage(samples_per_block);
        if value > tol {
            Err(Error::Leakage { value, row, col })
        } else {
            Ok(value)
        }
    }

    /// Block coordinates `C_ab = (T† ρ T)_ab` of an operator given in the
    /// computational basis.
    pub fn embed(&self, idx: usize, rho: &Array2<C64>) -> Array1<C64> {
        let c = adjoint(&self.unitary).dot(rho).dot(&self.unitary);
        self.members[idx].iter().map(|&(a, b)| c[[a, b]]).collect()
    }

    /// Block coordinates of `|ket⟩⟨bra|`.
    pub fn embed_outer(&self, idx: usize, ket: &[C64], bra: &[C64]) -> Array1<C64> {
        let td = adjoint(&self.unitary);
        let k = td.dot(&Array1::from(ket.to_vec()));
        let q = td.dot(&Array1::from(bra.to_vec()));
        self.members[idx].iter().map(|&(a, b)| k[a] * q[b].conj()).collect()
    }

    /// Computational-basis operator from block coordinates.
    pub fn reconstruct(&self, idx: usize, v: &[C64]) -> Array2<C64> {
        let n = self.owner.len();
        let mut c = Array2::zeros((n, n));
        for (&(a, b), &x) in self.members[idx].iter().zip(v) {
            c[[a, b]] = x;
        }
        self.unitary.dot(&c).dot(&adjoint(&self.unitary))
    }

    /// Hamiltonian eigenpairs resolved per sector.
    pub fn hamiltonian_eigen(&self) -> Result<HamiltonianEigen> {
        let d = self.owner.len();
        let mut energies = Vec::with_capacity(d);
        let mut adapted = Array2::zeros((d, d));
        let mut sector = Vec::with_capacity(d);
        for k in 0..self.sectors.len() {
            let cols: Vec<usize> = (0..d).filter(|&c| self.owner[c] == k).collect();
            let sub = self.h_tilde.select(Axis(0), &cols).select(Axis(1), &cols);
            let (e, v) = crate::linalg::eigh(&sub)?;
            for (i, &ei) in e.iter().enumerate() {
                let idx = energies.len();
                energies.push(ei);
                sector.push(k);
                for (row, &c) in cols.iter().enumerate() {
                    adapted[[c, idx]] = v[[row, i]];
                }
            }
        }
        let vectors = self.unitary.dot(&adapted);
        Ok(HamiltonianEigen { energies, vectors, adapted, sector })
    }
}

/// Hamiltonian eigenstates, sector by sector.
#[derive(Clone, Debug)]
pub struct HamiltonianEigen {
    pub energies: Vec<f64>,
    /// Columns over the computational basis.
    pub vectors: Array2<C64>,
    /// Columns over the adapted basis.
    pub adapted: Array2<C64>,
    pub sector: Vec<usize>,
}

impl HamiltonianEigen {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Rotate every degenerate cluster that overlaps `reference` so that a
    /// single state carries the whole projection. Returns the number of
    /// clusters touched.
    pub fn align_to(&mut self, unitary: &Array2<C64>, reference: &Array1<C64>, tol: f64) -> usize {
        let refs = reference.clone().insert_axis(Axis(1));
        self.align_to_subspace(unitary, &refs, tol)
    }

    /// Rotate every degenerate cluster onto the principal directions of its
    /// projection on the span of `refs` (columns over the computational
    /// basis), strongest first.
    pub fn align_to_subspace(&mut self, unitary: &Array2<C64>, refs: &Array2<C64>, tol: f64) -> usize {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.sector[a].cmp(&self.sector[b]).then(self.energies[a].total_cmp(&self.energies[b])));
        let refa = adjoint(unitary).dot(refs);
        let mut touched = 0;
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && self.sector[order[end]] == self.sector[order[start]] && (self.energies[order[end]] - self.energies[order[start]]).abs() < tol {
                end += 1;
            }
            if end - start > 1 {
                let cl: Vec<usize> = order[start..end].to_vec();
                let c = self.adapted.select(Axis(1), &cl);
                let m = adjoint(&c).dot(&refa);
                let gram = m.dot(&adjoint(&m));
                if gram.diag().iter().map(|v| v.re).sum::<f64>() > 1e-16 {
                    if let Ok((w, v)) = crate::linalg::eigh(&gram) {
                        let mut idx: Vec<usize> = (0..w.len()).collect();
                        idx.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
                        let fresh = c.dot(&v.select(Axis(1), &idx));
                        for (col, &k) in cl.iter().enumerate() {
                            self.adapted.column_mut(k).assign(&fresh.column(col));
                            self.vectors.column_mut(k).assign(&unitary.dot(&fresh.column(col)));
                        }
                        touched += 1;
                    }
                }
            }
            start = end;
        }
        touched
    }

    /// Squared norm of each eigenvector's projection on the span of the
    /// orthonormal columns `refs`.
    pub fn subspace_weights(&self, refs: &Array2<C64>) -> Vec<f64> {
        let m = adjoint(refs).dot(&self.vectors);
        m.columns().into_iter().map(|c| c.iter().map(|v| v.norm_sqr()).sum()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouv::build_liouvillean;
    use crate::linalg::max_abs;
    use crate::models::ModelSpec;
    use crate::spinlat::{build_sectors, Symmetry};

    #[test]
    fn blocks_reproduce_full_generator() {
        let m = ModelSpec::scl(4, 0.66, 0.1);
        let b = m.basis(None).unwrap();
        let h = m.hamiltonian(&b).unwrap();
        let sectors = build_sectors(&b, &[Symmetry::magnetization()]).unwrap();
        let dec = BlockDecomposition::new(&h, &m.jump_sites(), sectors).unwrap();
        assert!(dec.check_leakage(4, 1e-12).is_ok());
        let full = build_liouvillean(&h, 0.37, &m.jump_sites()).unwrap().to_dense();
        let d = b.dim();
        // magnetization columns are basis vectors in a permuted order
        let src: Vec<usize> = (0..d).map(|c| (0..d).find(|&i| dec.unitary[[i, c]].norm() > 0.5).unwrap()).collect();
        for k in 0..dec.n_blocks() {
            let blk = dec.block(k);
            let mat = blk.matrix(0.37);
            for (i, &(a, bb)) in blk.pairs.iter().enumerate() {
                for (j, &(a2, b2)) in blk.pairs.iter().enumerate() {
                    let want = full[[src[a] * d + src[bb], src[a2] * d + src[b2]]];
                    assert!((mat[[i, j]] - want).norm() < 1e-13);
                }
            }
        }
        let total: usize = (0..dec.n_blocks()).map(|k| dec.members[k].len()).sum();
        assert_eq!(total, d * d);
        let half = dec.find(|l| l.ket_up == Some(2) && l.bra_up == Some(2));
        assert_eq!(dec.members[half[0]].len(), 36);
    }

    #[test]
    fn momentum_blocks_cover_rydberg_space() {
        let m = ModelSpec::pxp(10);
        let b = m.basis(None).unwrap();
        let h = m.hamiltonian(&b).unwrap();
        let sectors = build_sectors(&b, &[Symmetry::translation(10, 1)]).unwrap();
        let dec = BlockDecomposition::new(&h, &m.jump_sites(), sectors).unwrap();
        assert_eq!(dec.n_blocks(), 10);
        let total: usize = dec.members.iter().map(|x| x.len()).sum();
        assert_eq!(total, 123 * 123);
        assert!(dec.check_leakage(2, 1e-12).is_ok());
    }

    #[test]
    fn embed_reconstruct_round_trip() {
        let m = ModelSpec::scl(4, 0.66, 0.1);
        let b = m.basis(Some(2)).unwrap();
        let h = m.hamiltonian(&b).unwrap();
        let sectors = build_sectors(&b, &[crate::models::scl::inversion(2), Symmetry::spin_flip(4)]).unwrap();
        let dec = BlockDecomposition::new(&h, &m.jump_sites(), sectors).unwrap();
        let d = b.dim();
        let rho = Array2::from_shape_fn((d, d), |(i, j)| C64::new((i * 3 + j) as f64, (i as f64) - (j as f64)));
        let mut back = Array2::zeros((d, d));
        for k in 0..dec.n_blocks() {
            back = back + dec.reconstruct(k, dec.embed(k, &rho).as_slice().unwrap());
        }
        assert!(max_abs(&(back - rho)) < 1e-12);
    }
}
