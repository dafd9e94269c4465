use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::basis::SpinBasis;
use super::operator::OperatorMatrix;
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymmetryKind {
    Translation,
    Inversion,
    SpinFlip,
    LegSwap,
    Magnetization,
}

/// A site permutation, optionally combined with a global spin flip.
/// Magnetization carries no permutation and only splits the basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Symmetry {
    pub kind: SymmetryKind,
    /// Site `j` is sent to `perm[j]`.
    pub perm: Vec<usize>,
    pub flip: bool,
}

impl Symmetry {
    pub fn translation(n_sites: usize, step: usize) -> Self {
        Self { kind: SymmetryKind::Translation, perm: (0..n_sites).map(|j| (j + step) % n_sites).collect(), flip: false }
    }

    pub fn inversion(n_sites: usize) -> Self {
        Self { kind: SymmetryKind::Inversion, perm: (0..n_sites).map(|j| n_sites - 1 - j).collect(), flip: false }
    }

    pub fn spin_flip(n_sites: usize) -> Self {
        Self { kind: SymmetryKind::SpinFlip, perm: (0..n_sites).collect(), flip: true }
    }

    pub fn magnetization() -> Self {
        Self { kind: SymmetryKind::Magnetization, perm: Vec::new(), flip: false }
    }

    pub fn from_site_map(kind: SymmetryKind, perm: Vec<usize>, flip: bool) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::InvalidArgument(format!("{kind:?}: site map is not a permutation")));
            }
            seen[p] = true;
        }
        Ok(Self { kind, perm, flip })
    }

    pub fn apply(&self, s: u64) -> u64 {
        let mut t = 0u64;
        for (j, &p) in self.perm.iter().enumerate() {
            t |= (s >> j & 1) << p;
        }
        if self.flip {
            t ^= (1u64 << self.perm.len()) - 1;
        }
        t
    }

    pub fn order(&self) -> usize {
        let n = self.perm.len();
        let mut k = 1;
        let mut cur: Vec<usize> = self.perm.clone();
        loop {
            let identity = cur.iter().enumerate().all(|(j, &p)| j == p);
            if identity && (!self.flip || k % 2 == 0) {
                return k;
            }
            cur = (0..n).map(|j| self.perm[cur[j]]).collect();
            k += 1;
        }
    }

    /// Permutation matrix on `basis`; fails when an image leaves the basis.
    pub fn matrix(&self, basis: &Arc<SpinBasis>) -> Result<OperatorMatrix> {
        let mut trip = Vec::with_capacity(basis.dim());
        for (i, &s) in basis.states().iter().enumerate() {
            let t = self.apply(s);
            let j = basis.index(t).ok_or_else(|| Error::NotClosed(format!("{:?} maps {s:#b} to {t:#b}", self.kind)))?;
            trip.push((j, i, ONE));
        }
        let d = basis.dim();
        Ok(OperatorMatrix::new(basis.clone(), CsrMatrix::from_triplets(d, d, trip)))
    }
}

/// Quantum number of one abelian generator: eigenvalue exp(2πi k / order).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Charge {
    pub kind: SymmetryKind,
    pub k: usize,
    pub order: usize,
}

impl Charge {
    pub fn eigenvalue(&self) -> C64 {
        C64::from_polar(1.0, 2.0 * PI * self.k as f64 / self.order as f64)
    }

    /// ±1 for order-two symmetries.
    pub fn parity(&self) -> i32 {
        if self.k == 0 {
            1
        } else {
            -1
        }
    }

    /// Momentum 2πk/order in [0, 2π).
    pub fn momentum(&self) -> f64 {
        2.0 * PI * self.k as f64 / self.order as f64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SectorLabel {
    pub up_count: Option<u32>,
    pub charges: Vec<Charge>,
}

impl SectorLabel {
    pub fn charge(&self, kind: SymmetryKind) -> Option<Charge> {
        self.charges.iter().copied().find(|c| c.kind == kind)
    }
}

/// Symmetry-adapted orthonormal basis for one sector, as columns over the
/// parent basis.
#[derive(Clone, Debug)]
pub struct SymmetrySector {
    pub label: SectorLabel,
    pub transform: Array2<C64>,
}

impl SymmetrySector {
    pub fn dim(&self) -> usize {
        self.transform.ncols()
    }

    pub fn projector(&self) -> Array2<C64> {
        self.transform.dot(&crate::linalg::adjoint(&self.transform))
    }
}

/// Adapted bases for an abelian group generated by commuting `symmetries`.
///
/// Each orbit of basis states contributes at most one vector per character,
/// obtained by projecting the orbit representative.
pub fn build_sectors(basis: &SpinBasis, symmetries: &[Symmetry]) -> Result<Vec<SymmetrySector>> {
    let split_m = symmetries.iter().any(|s| s.kind == SymmetryKind::Magnetization);
    let gens: Vec<&Symmetry> = symmetries.iter().filter(|s| s.kind != SymmetryKind::Magnetization).collect();
    for g in &gens {
        if g.perm.len() != basis.n_sites {
            return Err(Error::Dimension { expected: basis.n_sites, got: g.perm.len() });
        }
    }
    let orders: Vec<usize> = gens.iter().map(|g| g.order()).collect();

    let mut partitions: BTreeMap<Option<u32>, Vec<usize>> = BTreeMap::new();
    for (i, &s) in basis.states().iter().enumerate() {
        let key = if split_m { Some(s.count_ones()) } else { basis.up_count };
        partitions.entry(key).or_default().push(i);
    }

    let elements = group_elements(&orders);
    let characters = elements.clone();
    let dim = basis.dim();
    let mut sectors = Vec::new();

    for (&up_count, members) in &partitions {
        for g in &gens {
            for &i in members {
                let s = basis.state(i);
                let t = g.apply(s);
                let ok = basis.contains(t) && (!split_m || t.count_ones() == s.count_ones());
                if !ok {
                    return Err(Error::NotClosed(format!("{:?} maps {s:#b} outside its sector", g.kind)));
                }
            }
        }
        let mut visited = vec![false; dim];
        let mut orbits: Vec<Vec<(usize, Vec<usize>)>> = Vec::new();
        for &i in members {
            if visited[i] {
                continue;
            }
            let rep = basis.state(i);
            let mut orbit = Vec::with_capacity(elements.len());
            for n in &elements {
                let mut s = rep;
                for (g, &p) in gens.iter().zip(n) {
                    for _ in 0..p {
                        s = g.apply(s);
                    }
                }
                let j = basis.index(s).expect("closure checked above");
                visited[j] = true;
                orbit.push((j, n.clone()));
            }
            orbits.push(orbit);
        }

        for kvec in &characters {
            let mut columns: Vec<Vec<(usize, C64)>> = Vec::new();
            for orbit in &orbits {
                let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
                for (j, n) in orbit {
                    let mut phase = 0.0;
                    for ((&k, &o), &p) in kvec.iter().zip(&orders).zip(n) {
                        phase -= 2.0 * PI * (k * p) as f64 / o as f64;
                    }
                    *acc.entry(*j).or_insert(ZERO) += C64::from_polar(1.0, phase);
                }
                let nrm = acc.values().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                if nrm > 1e-8 * (elements.len() as f64).sqrt() {
                    columns.push(acc.into_iter().map(|(j, v)| (j, v / nrm)).collect());
                }
            }
            if columns.is_empty() {
                continue;
            }
            let mut t = Array2::zeros((dim, columns.len()));
            for (c, col) in columns.iter().enumerate() {
                for &(j, v) in col {
                    t[[j, c]] = v;
                }
            }
            let charges = gens
                .iter()
                .zip(kvec)
                .zip(&orders)
                .map(|((g, &k), &order)| Charge { kind: g.kind, k, order })
                .collect();
            sectors.push(SymmetrySector { label: SectorLabel { up_count, charges }, transform: t });
        }
    }
    Ok(sectors)
}

fn group_elements(orders: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &o in orders {
        let mut next = Vec::with_capacity(out.len() * o);
        for prefix in &out {
            for k in 0..o {
                let mut v = prefix.clone();
                v.push(k);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Concatenate sector bases into one unitary, returning the sector index of
/// every column.
pub fn adapted_unitary(sectors: &[SymmetrySector]) -> (Array2<C64>, Vec<usize>) {
    let dim = sectors.first().map_or(0, |s| s.transform.nrows());
    let total: usize = sectors.iter().map(|s| s.dim()).sum();
    let mut t = Array2::zeros((dim, total));
    let mut owner = Vec::with_capacity(total);
    let mut c = 0;
    for (k, s) in sectors.iter().enumerate() {
        for col in s.transform.columns() {
            t.column_mut(c).assign(&col);
            owner.push(k);
            c += 1;
        }
    }
    (t, owner)
}

/// Fails with the largest commutator element when `op` breaks `sym`.
pub fn check_commutes(op: &OperatorMatrix, sym: &Symmetry, tol: f64) -> Result<f64> {
    if sym.kind == SymmetryKind::Magnetization {
        let mut worst: (f64, usize, usize) = (0.0, 0, 0);
        for r in 0..op.dim() {
            for (c, v) in op.matrix.row(r) {
                if op.basis.state(r).count_ones() != op.basis.state(c).count_ones() && v.norm() > worst.0 {
                    worst = (v.norm(), r, c);
                }
            }
        }
        return if worst.0 > tol { Err(Error::NonCommuting { value: worst.0, row: worst.1, col: worst.2 }) } else { Ok(worst.0) };
    }
    let u = sym.matrix(&op.basis)?;
    let (value, row, col) = op.commutator_max(&u);
    if value > tol {
        Err(Error::NonCommuting { value, row, col })
    } else {
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinlat::basis::{Boundary, Constraint};

    fn dims(sectors: &[SymmetrySector]) -> Vec<usize> {
        sectors.iter().map(|s| s.dim()).collect()
    }

    #[test]
    fn two_site_translation() {
        let b = SpinBasis::full(2).unwrap();
        let s = build_sectors(&b, &[Symmetry::translation(2, 1)]).unwrap();
        assert_eq!(dims(&s), vec![3, 1]);
        assert_eq!(s[1].label.charges[0].momentum(), PI);
    }

    #[test]
    fn inversion_on_four_sites() {
        let b = SpinBasis::full(4).unwrap();
        let s = build_sectors(&b, &[Symmetry::inversion(4)]).unwrap();
        assert_eq!(dims(&s), vec![10, 6]);
    }

    #[test]
    fn magnetization_sector_sizes() {
        let b = SpinBasis::full(4).unwrap();
        let s = build_sectors(&b, &[Symmetry::magnetization()]).unwrap();
        let two = s.iter().find(|x| x.label.up_count == Some(2)).unwrap();
        assert_eq!(two.dim(), 6);
    }

    #[test]
    fn spin_flip_needs_half_filling() {
        let b = SpinBasis::full(4).unwrap();
        assert!(build_sectors(&b, &[Symmetry::magnetization(), Symmetry::spin_flip(4)]).is_err());
        let h = SpinBasis::new(4, Constraint::None, Boundary::Open, Some(2)).unwrap();
        let s = build_sectors(&h, &[Symmetry::magnetization(), Symmetry::spin_flip(4)]).unwrap();
        assert_eq!(dims(&s).iter().sum::<usize>(), 6);
    }

    #[test]
    fn orders() {
        assert_eq!(Symmetry::translation(10, 1).order(), 10);
        assert_eq!(Symmetry::translation(8, 2).order(), 4);
        assert_eq!(Symmetry::inversion(5).order(), 2);
        assert_eq!(Symmetry::spin_flip(3).order(), 2);
    }

    #[test]
    fn rydberg_momentum_sectors_are_unitary() {
        let b = SpinBasis::new(10, Constraint::RydbergBlockade, Boundary::Periodic, None).unwrap();
        let s = build_sectors(&b, &[Symmetry::translation(10, 1)]).unwrap();
        let (t, _) = adapted_unitary(&s);
        assert_eq!(t.ncols(), 123);
        let g = crate::linalg::adjoint(&t).dot(&t) - Array2::<C64>::eye(123);
        assert!(crate::linalg::max_abs(&g) < 1e-12);
    }
}
