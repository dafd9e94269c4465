//! Spin form of the tilted Fermi-Hubbard chain in the resonant regime.
//! Site `(j, σ)` is `2j + σ` with `σ = 0` for ↑ and `1` for ↓.

use std::sync::Arc;

use crate::error::Result;
use crate::spinlat::{OperatorBuilder, OperatorMatrix, SpinBasis};

pub fn site(j: usize, spin: usize) -> usize {
    2 * j + spin
}

fn occupied(s: u64, k: usize) -> f64 {
    (s >> k & 1) as f64
}

/// `J Σ_j [σ⁺_{j↑}σ⁻_{j+1↑} P_{j↓}(1 - P_{j+1↓}) + h.c.] - (↑ ↔ ↓)`
/// with `P = (1 + σᶻ)/2`.
pub fn build(basis: &Arc<SpinBasis>, l: usize, j: f64) -> Result<OperatorMatrix> {
    let mut b = OperatorBuilder::new(basis);
    for r in 0..l.saturating_sub(1) {
        for (spin, sign) in [(0usize, 1.0), (1usize, -1.0)] {
            let other = 1 - spin;
            let (p, q) = (site(r, other), site(r + 1, other));
            b.hop_weighted(site(r, spin), site(r + 1, spin), sign * j, move |s| occupied(s, p) * (1.0 - occupied(s, q)));
        }
    }
    Ok(b.build())
}
