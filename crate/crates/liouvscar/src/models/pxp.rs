//! Rydberg-blockaded chain: PXP and its deformed variant.

use std::sync::Arc;

use crate::error::Result;
use crate::spinlat::{Boundary, OperatorBuilder, OperatorMatrix, SpinBasis};
use crate::spinlat::operator::sz_of;

/// Deformation strengths `J_d` for `d = 2..=L/2`.
pub fn dpxp_couplings(l: usize, base: f64, phi: f64) -> Vec<(usize, f64)> {
    (2..=l / 2).map(|d| (d, base * (phi.powi(d as i32 - 1) + phi.powi(1 - d as i32)).powi(-2))).collect()
}

fn neighbour(j: usize, offset: isize, l: usize, boundary: Boundary) -> Option<usize> {
    let t = j as isize + offset;
    match boundary {
        Boundary::Periodic => Some(t.rem_euclid(l as isize) as usize),
        Boundary::Open => (0..l as isize).contains(&t).then_some(t as usize),
    }
}

fn down(s: u64, site: Option<usize>) -> f64 {
    match site {
        Some(k) if s >> k & 1 == 1 => 0.0,
        _ => 1.0,
    }
}

/// `Ω Σ P σˣ P` plus `Σ_d J_d P σˣ P (σᶻ_{j-d} + σᶻ_{j+d})`.
pub fn build(basis: &Arc<SpinBasis>, omega: f64, deform: &[(usize, f64)]) -> Result<OperatorMatrix> {
    let l = basis.n_sites;
    let bc = basis.boundary;
    let mut b = OperatorBuilder::new(basis);
    for j in 0..l {
        let left = neighbour(j, -1, l, bc);
        let right = neighbour(j, 1, l, bc);
        b.flip_weighted(j, omega, |s| down(s, left) * down(s, right));
        for &(d, jd) in deform {
            let a = neighbour(j, -(d as isize), l, bc);
            let c = neighbour(j, d as isize, l, bc);
            b.flip_weighted(j, jd, |s| {
                let z = a.map_or(0.0, |k| sz_of(s, k)) + c.map_or(0.0, |k| sz_of(s, k));
                down(s, left) * down(s, right) * z
            });
        }
    }
    Ok(b.build())
}

/// `|1010…⟩` with site 0 excited.
pub fn z2_state(l: usize) -> u64 {
    (0..l).step_by(2).fold(0u64, |s, j| s | 1 << j)
}
