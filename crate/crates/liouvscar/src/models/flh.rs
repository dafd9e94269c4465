//! Frustrated spin-1/2 Heisenberg ladder. Site `(j, α)` is `2j + α`.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::linalg::{adjoint, r, ZERO};
use crate::spinlat::operator::sz_of;
use crate::spinlat::{Boundary, OperatorBuilder, OperatorMatrix, SpinBasis};

fn site(j: usize, leg: usize) -> usize {
    2 * j + leg
}

fn bond(b: &mut OperatorBuilder, x: usize, y: usize, amp: f64) {
    b.hop(x, y, amp);
    b.diag(move |s| amp * sz_of(s, x) * sz_of(s, y));
}

pub fn build(basis: &Arc<SpinBasis>, j: f64, eta: f64, boundary: Boundary) -> Result<OperatorMatrix> {
    let n = basis.n_sites / 2;
    let mut b = OperatorBuilder::new(basis);
    let bonds: Vec<(usize, usize)> = match boundary {
        Boundary::Open => (0..n - 1).map(|r| (r, r + 1)).collect(),
        Boundary::Periodic => (0..n).map(|r| (r, (r + 1) % n)).collect(),
    };
    for &(p, q) in &bonds {
        for a in 0..2 {
            bond(&mut b, site(p, a), site(q, a), j * (1.0 - eta));
            bond(&mut b, site(p, a), site(q, 1 - a), j * (1.0 + eta));
        }
    }
    for p in 0..n {
        bond(&mut b, site(p, 0), site(p, 1), 0.5 * j);
    }
    Ok(b.build())
}

/// Unitary from the computational basis to per-rung singlet/triplet states.
/// A rung pattern `00` labels t₋, `11` t₊, `01` t₀ and `10` the singlet.
pub fn rung_unitary(basis: &SpinBasis) -> Array2<C64> {
    let n = basis.n_sites / 2;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let u = |comp: u64, new: u64| -> f64 {
        match (new, comp) {
            (0, 0) | (3, 3) => 1.0,
            (1, 1) | (1, 2) | (2, 1) => h,
            (2, 2) => -h,
            _ => 0.0,
        }
    };
    let d = basis.dim();
    let mut t = Array2::from_elem((d, d), ZERO);
    for (i, &comp) in basis.states().iter().enumerate() {
        for (k, &new) in basis.states().iter().enumerate() {
            let mut amp = 1.0;
            for rung in 0..n {
                amp *= u(comp >> (2 * rung) & 3, new >> (2 * rung) & 3);
                if amp == 0.0 {
                    break;
                }
            }
            t[[i, k]] = r(amp);
        }
    }
    t
}

/// Connected components of the graph with an edge wherever `|a_ij| > tol`.
pub fn components(a: &Array2<C64>, tol: f64) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut label = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut stack = vec![start];
        let mut comp = Vec::new();
        label[start] = id;
        while let Some(i) = stack.pop() {
            comp.push(i);
            for j in 0..n {
                if label[j] == usize::MAX && (a[[i, j]].norm() > tol || a[[j, i]].norm() > tol) {
                    label[j] = id;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Krylov fragments of `h` resolved in the rung singlet/triplet basis.
/// Returns the rotation and the components over its columns.
pub fn fragments(h: &OperatorMatrix, tol: f64) -> (Array2<C64>, Vec<Vec<usize>>) {
    let u = rung_unitary(&h.basis);
    let rotated = adjoint(&u).dot(&h.to_dense()).dot(&u);
    let comps = components(&rotated, tol);
    (u, comps)
}

/// Orthonormal basis, over the computational basis, of all fragments of
/// dimension at most `max_dim`.
pub fn local_fragment_basis(h: &OperatorMatrix, max_dim: usize) -> Array2<C64> {
    let (u, comps) = fragments(h, 1e-12);
    let cols: Vec<usize> = comps.into_iter().filter(|c| c.len() <= max_dim).flatten().collect();
    u.select(ndarray::Axis(1), &cols)
}
