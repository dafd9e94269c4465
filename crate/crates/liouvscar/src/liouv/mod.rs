//! Vectorized Lindblad generators for local pure dephasing.
//!
//! `|n⟩⟨m|` maps to doubled index `n·D + m`, so `A ρ B` becomes
//! `(A ⊗ Bᵀ) vec(ρ)`.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{r, CsrMatrix, I, ZERO};
use crate::spinlat::{OperatorMatrix, SpinBasis};

pub mod blocks;

pub use blocks::{BlockDecomposition, DoubledLabel, HamiltonianEigen, LiouvBlock};

pub fn vectorize(op: &Array2<C64>) -> Result<Array1<C64>> {
    if op.nrows() != op.ncols() {
        return Err(Error::Dimension { expected: op.nrows(), got: op.ncols() });
    }
    Ok(op.iter().copied().collect())
}

pub fn devectorize(v: &[C64], d: usize) -> Result<Array2<C64>> {
    if v.len() != d * d {
        return Err(Error::Dimension { expected: d * d, got: v.len() });
    }
    Ok(Array2::from_shape_vec((d, d), v.to_vec()).expect("length checked"))
}

/// `𝓛 = -i(H⊗I - I⊗Hᵀ) + γ(Σ_j σᶻ_j⊗σᶻ_j - n_jump I⊗I)` on the full doubled space.
#[derive(Clone, Debug)]
pub struct Superoperator {
    pub dim: usize,
    pub gamma: f64,
    pub n_jump: usize,
    pub matrix: CsrMatrix,
    /// Constant real shift already added to the diagonal.
    pub shift: f64,
}

/// Superoperator whose spectrum has zero mean real part.
#[derive(Clone, Debug)]
pub struct TracelessSuperoperator {
    pub sup: Superoperator,
    pub shift: f64,
}

/// σᶻ eigenvalues of every jump site for every basis state.
pub fn jump_diagonals(basis: &SpinBasis, jump_sites: &[usize]) -> Result<Vec<Vec<f64>>> {
    jump_sites
        .iter()
        .map(|&j| {
            if j >= basis.n_sites {
                Err(Error::SiteOutOfRange { site: j, n_sites: basis.n_sites })
            } else {
                Ok((0..basis.dim()).map(|i| basis.sz(i, j)).collect())
            }
        })
        .collect()
}

/// `W_ab = Σ_j z_j(a) z_j(b) - n_jump`, the dephasing kernel in matrix form.
pub fn dephasing_kernel(basis: &SpinBasis, jump_sites: &[usize]) -> Result<Array2<f64>> {
    let z = jump_diagonals(basis, jump_sites)?;
    let d = basis.dim();
    Ok(Array2::from_shape_fn((d, d), |(a, b)| z.iter().map(|zj| zj[a] * zj[b]).sum::<f64>() - jump_sites.len() as f64))
}

pub fn build_liouvillean(h: &OperatorMatrix, gamma: f64, jump_sites: &[usize]) -> Result<Superoperator> {
    if gamma < 0.0 {
        return Err(Error::InvalidArgument(format!("negative dephasing rate {gamma}")));
    }
    let d = h.dim();
    let dim = d * d;
    let w = dephasing_kernel(&h.basis, jump_sites)?;
    let mut trip = Vec::with_capacity(2 * h.matrix.nnz() * d + dim);
    for (k, m, v) in h.matrix.triplets() {
        for n in 0..d {
            // H ρ: row (k, n) gathers ρ_(m, n)
            trip.push((k * d + n, m * d + n, -I * v));
            // ρ H: row (n, m) gathers ρ_(n, k) H_(k, m)
            trip.push((n * d + m, n * d + k, I * v));
        }
    }
    if gamma != 0.0 {
        for a in 0..d {
            for b in 0..d {
                trip.push((a * d + b, a * d + b, r(gamma * w[[a, b]])));
            }
        }
    }
    Ok(Superoperator { dim, gamma, n_jump: jump_sites.len(), matrix: CsrMatrix::from_triplets(dim, dim, trip), shift: 0.0 })
}

/// `γ(n_jump - Σ_j (Tr σᶻ_j)² / D²)`: the constant that zeroes the mean
/// real part of the spectrum.
pub fn traceless_shift_value(basis: &SpinBasis, gamma: f64, jump_sites: &[usize]) -> Result<f64> {
    let z = jump_diagonals(basis, jump_sites)?;
    let d = basis.dim() as f64;
    let s: f64 = z.iter().map(|zj| zj.iter().sum::<f64>().powi(2)).sum();
    Ok(gamma * (jump_sites.len() as f64 - s / (d * d)))
}

impl Superoperator {
    pub fn traceless(&self) -> TracelessSuperoperator {
        let shift = -self.matrix.trace().re / self.dim as f64;
        let mut sup = self.clone();
        sup.matrix = self.matrix.add(&CsrMatrix::from_diagonal(&vec![r(shift); self.dim]));
        sup.shift = self.shift + shift;
        TracelessSuperoperator { sup, shift }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.matrix.matvec(v)
    }

    /// Largest entry of `⟨⟨I| (𝓛 - shift)`; zero for trace preservation.
    pub fn trace_residual(&self) -> f64 {
        let d = (self.dim as f64).sqrt().round() as usize;
        let mut id = vec![ZERO; self.dim];
        for n in 0..d {
            id[n * d + n] = r(1.0);
        }
        let row = self.matrix.vecmat(&id);
        row.iter().zip(&id).map(|(v, e)| (v - e * self.shift).norm()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Array2<C64> {
        self.matrix.to_dense()
    }
}
