use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::basis::SpinBasis;
use crate::error::{Error, Result};
use crate::linalg::{r, CsrMatrix, ONE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalKind {
    Sz,
    SPlus,
    SMinus,
    Sx,
    /// Projector onto the down state, (1 - σᶻ)/2.
    P,
}

/// Sparse operator acting on a [`SpinBasis`].
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub basis: Arc<SpinBasis>,
    pub matrix: CsrMatrix,
    pub hermitian: bool,
}

impl OperatorMatrix {
    pub fn new(basis: Arc<SpinBasis>, matrix: CsrMatrix) -> Self {
        assert_eq!(matrix.nrows, basis.dim());
        assert_eq!(matrix.ncols, basis.dim());
        Self { basis, matrix, hermitian: false }
    }

    /// Mark as Hermitian after checking to `tol`.
    pub fn into_hermitian(mut self, tol: f64) -> Result<Self> {
        let (dev, row, col) = self.matrix.max_abs_diff(&self.matrix.adjoint());
        if dev > tol {
            return Err(Error::InvalidModel(format!("operator not Hermitian: deviation {dev:.3e} at ({row}, {col})")));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn to_dense(&self) -> Array2<C64> {
        self.matrix.to_dense()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.matrix.max_abs_diff(&self.matrix.adjoint()).0 <= tol
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.basis.clone(), self.matrix.add(&other.matrix))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.basis.clone(), self.matrix.scale(s))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self::new(self.basis.clone(), self.matrix.matmul(&other.matrix))
    }

    /// Largest entry of `[self, other]`, with position.
    pub fn commutator_max(&self, other: &Self) -> (f64, usize, usize) {
        let ab = self.matrix.matmul(&other.matrix);
        let ba = other.matrix.matmul(&self.matrix);
        ab.max_abs_diff(&ba)
    }

    pub fn anticommutator_max(&self, other: &Self) -> f64 {
        let ab = self.matrix.matmul(&other.matrix);
        let ba = other.matrix.matmul(&self.matrix);
        ab.add(&ba).max_abs()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.matrix.get(i, i)).collect()
    }
}

/// Single-site operator. Images outside a constrained basis are dropped.
pub fn local_operator(basis: &Arc<SpinBasis>, site: usize, kind: LocalKind) -> Result<OperatorMatrix> {
    if site >= basis.n_sites {
        return Err(Error::SiteOutOfRange { site, n_sites: basis.n_sites });
    }
    let mut trip = Vec::new();
    for (i, &s) in basis.states().iter().enumerate() {
        let up = s >> site & 1 == 1;
        let flipped = s ^ (1 << site);
        match kind {
            LocalKind::Sz => trip.push((i, i, r(if up { 1.0 } else { -1.0 }))),
            LocalKind::P => {
                if !up {
                    trip.push((i, i, ONE));
                }
            }
            LocalKind::SPlus | LocalKind::SMinus | LocalKind::Sx => {
                let acts = match kind {
                    LocalKind::SPlus => !up,
                    LocalKind::SMinus => up,
                    _ => true,
                };
                if acts {
                    if let Some(j) = basis.index(flipped) {
                        trip.push((j, i, ONE));
                    }
                }
            }
        }
    }
    let dim = basis.dim();
    Ok(OperatorMatrix::new(basis.clone(), CsrMatrix::from_triplets(dim, dim, trip)))
}

/// Term-by-term Hamiltonian assembly on bit patterns.
pub struct OperatorBuilder {
    basis: Arc<SpinBasis>,
    trip: Vec<(usize, usize, C64)>,
}

impl OperatorBuilder {
    pub fn new(basis: &Arc<SpinBasis>) -> Self {
        Self { basis: basis.clone(), trip: Vec::new() }
    }

    /// `amp (σ⁺_a σ⁻_b + σ⁺_b σ⁻_a)` dressed by a diagonal weight evaluated
    /// on the initial state.
    pub fn hop_weighted(&mut self, a: usize, b: usize, amp: f64, weight: impl Fn(u64) -> f64) -> &mut Self {
        if amp == 0.0 {
            return self;
        }
        for (i, &s) in self.basis.states().iter().enumerate() {
            let ua = s >> a & 1;
            let ub = s >> b & 1;
            if ua != ub {
                let t = s ^ (1 << a) ^ (1 << b);
                if let Some(j) = self.basis.index(t) {
                    let w = weight(s);
                    if w != 0.0 {
                        self.trip.push((j, i, r(amp * w)));
                    }
                }
            }
        }
        self
    }

    pub fn hop(&mut self, a: usize, b: usize, amp: f64) -> &mut Self {
        self.hop_weighted(a, b, amp, |_| 1.0)
    }

    /// `amp σˣ_site` dressed by a diagonal weight of the initial state.
    pub fn flip_weighted(&mut self, site: usize, amp: f64, weight: impl Fn(u64) -> f64) -> &mut Self {
        for (i, &s) in self.basis.states().iter().enumerate() {
            if let Some(j) = self.basis.index(s ^ (1 << site)) {
                let w = weight(s);
                if w != 0.0 {
                    self.trip.push((j, i, r(amp * w)));
                }
            }
        }
        self
    }

    pub fn diag(&mut self, f: impl Fn(u64) -> f64) -> &mut Self {
        for (i, &s) in self.basis.states().iter().enumerate() {
            let v = f(s);
            if v != 0.0 {
                self.trip.push((i, i, r(v)));
            }
        }
        self
    }

    pub fn raw(&mut self, row: usize, col: usize, v: C64) -> &mut Self {
        self.trip.push((row, col, v));
        self
    }

    pub fn build(&self) -> OperatorMatrix {
        let d = self.basis.dim();
        OperatorMatrix::new(self.basis.clone(), CsrMatrix::from_triplets(d, d, self.trip.clone()))
    }
}

pub fn sz_of(s: u64, site: usize) -> f64 {
    if s >> site & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}
