//! Spin-1/2 ladder with staggered leg hopping, rung hopping and cross
//! hopping. Site `(j, α)` is `2j + α`.

use std::sync::Arc;

use crate::error::Result;
use crate::spinlat::{OperatorBuilder, OperatorMatrix, SpinBasis, Symmetry};

pub fn site(j: usize, leg: usize) -> usize {
    2 * j + leg
}

pub fn build(basis: &Arc<SpinBasis>, j: f64, j_h: f64, j_x: &[f64]) -> Result<OperatorMatrix> {
    let n = basis.n_sites / 2;
    let mut b = OperatorBuilder::new(basis);
    for r in 0..n.saturating_sub(1) {
        for a in 0..2 {
            let sign = if (r + a) % 2 == 0 { 1.0 } else { -1.0 };
            b.hop(site(r, a), site(r + 1, a), sign * j_h);
            b.hop(site(r, a), site(r + 1, 1 - a), j_x[r]);
        }
    }
    for r in 0..n {
        b.hop(site(r, 1), site(r, 0), j);
    }
    Ok(b.build())
}

/// Reflection of the ladder. The staggered leg hopping picks up `(-1)^N`
/// under `j -> N-1-j`, which a leg swap compensates for odd `N`.
pub fn inversion(n_rungs: usize) -> Symmetry {
    Symmetry::inversion_ladder(n_rungs, n_rungs % 2 == 1)
}

/// Bit pattern of the product of `d = 0` dimers (leg 0 up, leg 1 down).
pub fn pi_state(n_rungs: usize) -> u64 {
    (0..n_rungs).fold(0u64, |s, j| s | 1 << site(j, 0))
}
