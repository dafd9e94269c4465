//! Dicke tower of the ladder: collective states of `N` rung dimers.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::scl;
use crate::error::{Error, Result};
use crate::linalg::r;
use crate::spinlat::{Boundary, Constraint, SpinBasis};

/// Dimer value 0 is (leg 0 up, leg 1 down); 1 is the reverse.
pub fn dimer_pattern(n_rungs: usize, config: usize) -> u64 {
    (0..n_rungs).fold(0u64, |s, j| {
        let leg = config >> j & 1;
        s | 1 << scl::site(j, leg)
    })
}

#[derive(Clone, Debug)]
pub struct ScarSubspace {
    pub n_rungs: usize,
    /// Bit pattern of every hypercube vertex, indexed by dimer configuration.
    pub hypercube: Vec<u64>,
    /// Column `n` holds `|E_n⟩` over the hypercube vertices.
    pub coefficients: Array2<f64>,
    /// `E_n = (2n - N) J` with `J = 1`.
    pub energies: Vec<f64>,
    /// Sign applied to the `d = 1` component of each rung's `|±⟩`.
    pub rung_signs: Vec<f64>,
}

impl ScarSubspace {
    pub fn dim(&self) -> usize {
        self.n_rungs + 1
    }

    /// Columns `|E_n⟩` expressed in `basis`.
    pub fn vectors_in(&self, basis: &SpinBasis) -> Result<Array2<C64>> {
        let mut out = Array2::zeros((basis.dim(), self.dim()));
        for (cfg, &pattern) in self.hypercube.iter().enumerate() {
            let Some(i) = basis.index(pattern) else {
                return Err(Error::InvalidArgument(format!("dimer state {pattern:#b} not in basis")));
            };
            for n in 0..self.dim() {
                out[[i, n]] = r(self.coefficients[[cfg, n]]);
            }
        }
        Ok(out)
    }

    /// Dicke vectors in hypercube coordinates as complex columns.
    pub fn hypercube_vectors(&self) -> Array2<C64> {
        self.coefficients.mapv(r)
    }
}

/// Collective-spin states with `n` rungs in `|+⟩` and `N - n` in `|-⟩`,
/// `|±⟩ = (|d=0⟩ ± s_j |d=1⟩)/√2`.
fn tower(n_rungs: usize, signs: &[f64]) -> Array2<f64> {
    let size = 1usize << n_rungs;
    let mut c = Array2::zeros((size, n_rungs + 1));
    for plus in 0..size {
        let n = (plus as u32).count_ones() as usize;
        for cfg in 0..size {
            let mut amp = 1.0;
            for (j, sj) in signs.iter().enumerate() {
                if cfg >> j & 1 == 1 {
                    amp *= if plus >> j & 1 == 1 { *sj } else { -*sj };
                }
            }
            c[[cfg, n]] += amp;
        }
    }
    for mut col in c.columns_mut() {
        let nrm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        col.mapv_inplace(|v| v / nrm);
    }
    c
}

/// Build the tower and fix the rung dressing by requiring every vector to
/// be an eigenvector of the `J_x = 0` ladder with energy `(2n - N)J`.
pub fn dicke_scar_states(n_rungs: usize) -> Result<ScarSubspace> {
    if n_rungs == 0 {
        return Err(Error::InvalidArgument("Dicke tower needs at least one rung".into()));
    }
    let hypercube: Vec<u64> = (0..1usize << n_rungs).map(|c| dimer_pattern(n_rungs, c)).collect();
    let basis = Arc::new(SpinBasis::new(2 * n_rungs, Constraint::None, Boundary::Open, Some(n_rungs as u32))?);
    let h = scl::build(&basis, 1.0, 0.83, &vec![0.0; n_rungs - 1])?.to_dense();
    let energies: Vec<f64> = (0..=n_rungs).map(|n| 2.0 * n as f64 - n_rungs as f64).collect();

    let candidates: Vec<Vec<f64>> = vec![
        vec![1.0; n_rungs],
        (0..n_rungs).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect(),
        vec![-1.0; n_rungs],
        (0..n_rungs).map(|j| if j % 2 == 0 { -1.0 } else { 1.0 }).collect(),
    ];
    let mut worst_seen = f64::INFINITY;
    for signs in candidates {
        let coefficients = tower(n_rungs, &signs);
        let sub = ScarSubspace { n_rungs, hypercube: hypercube.clone(), coefficients, energies: energies.clone(), rung_signs: signs };
        let v = sub.vectors_in(&basis)?;
        let hv = h.dot(&v);
        let mut worst: f64 = 0.0;
        for n in 0..=n_rungs {
            for i in 0..basis.dim() {
                worst = worst.max((hv[[i, n]] - v[[i, n]] * energies[n]).norm());
            }
        }
        if worst < 1e-10 {
            return Ok(sub);
        }
        worst_seen = worst_seen.min(worst);
    }
    Err(Error::Embedding(worst_seen))
}
