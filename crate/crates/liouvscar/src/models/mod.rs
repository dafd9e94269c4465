//! Hamiltonians of the scar models and the exact Dicke scar subspace.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinlat::{Boundary, Constraint, OperatorMatrix, SpinBasis, Symmetry, SymmetryKind};

pub mod dicke;
pub mod flh;
pub mod pxp;
pub mod scl;
pub mod tfh;

pub use dicke::{dicke_scar_states, ScarSubspace};

pub const GOLDEN: f64 = 1.618_033_988_749_895;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "SCL")]
    Scl,
    #[serde(rename = "PXP")]
    Pxp,
    #[serde(rename = "DPXP")]
    Dpxp,
    #[serde(rename = "TFH")]
    Tfh,
    #[serde(rename = "FLH")]
    Flh,
}

/// Inter-leg cross couplings of the spin ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CrossCoupling {
    Uniform(f64),
    List(Vec<f64>),
    /// Uniform draws on `[lo, hi]` from the model seed.
    Random { lo: f64, hi: f64 },
}

fn one() -> f64 {
    1.0
}

fn dpxp_base() -> f64 {
    0.051
}

fn golden() -> f64 {
    GOLDEN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum Couplings {
    #[serde(rename = "SCL")]
    Scl {
        #[serde(default = "one")]
        j: f64,
        j_h: f64,
        j_x: CrossCoupling,
    },
    #[serde(rename = "PXP")]
    Pxp {
        #[serde(default = "one")]
        omega: f64,
    },
    #[serde(rename = "DPXP")]
    Dpxp {
        #[serde(default = "one")]
        omega: f64,
        #[serde(default = "dpxp_base")]
        base: f64,
        #[serde(default = "golden")]
        phi: f64,
    },
    #[serde(rename = "TFH")]
    Tfh {
        #[serde(default = "one")]
        j: f64,
    },
    #[serde(rename = "FLH")]
    Flh {
        #[serde(default = "one")]
        j: f64,
        eta: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(default)]
    pub boundary: Option<Boundary>,
    pub couplings: Couplings,
    #[serde(default)]
    pub rng_seed: Option<u64>,
}

impl ModelSpec {
    pub fn scl(l: usize, j_h: f64, j_x: f64) -> Self {
        Self { l, boundary: None, couplings: Couplings::Scl { j: 1.0, j_h, j_x: CrossCoupling::Uniform(j_x) }, rng_seed: None }
    }

    pub fn pxp(l: usize) -> Self {
        Self { l, boundary: None, couplings: Couplings::Pxp { omega: 1.0 }, rng_seed: None }
    }

    pub fn dpxp(l: usize) -> Self {
        Self { l, boundary: None, couplings: Couplings::Dpxp { omega: 1.0, base: dpxp_base(), phi: GOLDEN }, rng_seed: None }
    }

    pub fn tfh(l: usize, j: f64) -> Self {
        Self { l, boundary: None, couplings: Couplings::Tfh { j }, rng_seed: None }
    }

    pub fn flh(l: usize, eta: f64) -> Self {
        Self { l, boundary: None, couplings: Couplings::Flh { j: 1.0, eta }, rng_seed: None }
    }

    pub fn family(&self) -> Family {
        match self.couplings {
            Couplings::Scl { .. } => Family::Scl,
            Couplings::Pxp { .. } => Family::Pxp,
            Couplings::Dpxp { .. } => Family::Dpxp,
            Couplings::Tfh { .. } => Family::Tfh,
            Couplings::Flh { .. } => Family::Flh,
        }
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary.unwrap_or(match self.family() {
            Family::Pxp | Family::Dpxp => Boundary::Periodic,
            _ => Boundary::Open,
        })
    }

    /// Number of spin-1/2 sites in the computational basis.
    pub fn n_sites(&self) -> usize {
        match self.family() {
            Family::Tfh => 2 * self.l,
            _ => self.l,
        }
    }

    pub fn constraint(&self) -> Constraint {
        match self.family() {
            Family::Pxp | Family::Dpxp => Constraint::RydbergBlockade,
            _ => Constraint::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.l;
        match &self.couplings {
            Couplings::Scl { j_x, .. } => {
                if l < 2 || l % 2 != 0 {
                    return Err(Error::InvalidModel(format!("SCL needs an even site count, got L={l}")));
                }
                if let CrossCoupling::List(v) = j_x {
                    if v.len() != l / 2 - 1 {
                        return Err(Error::InvalidModel(format!("J_x list has {} entries, expected {}", v.len(), l / 2 - 1)));
                    }
                }
                if self.boundary() != Boundary::Open {
                    return Err(Error::InvalidModel("SCL is defined with open boundary".into()));
                }
            }
            Couplings::Dpxp { .. } => {
                if self.boundary() != Boundary::Periodic {
                    return Err(Error::InvalidModel("DPXP needs periodic boundary".into()));
                }
                if l < 4 {
                    return Err(Error::InvalidModel(format!("DPXP needs L >= 4, got {l}")));
                }
            }
            Couplings::Pxp { .. } => {
                if l < 3 {
                    return Err(Error::InvalidModel(format!("PXP needs L >= 3, got {l}")));
                }
            }
            Couplings::Tfh { .. } => {
                if l < 2 {
                    return Err(Error::InvalidModel(format!("TFH needs L >= 2, got {l}")));
                }
            }
            Couplings::Flh { eta, .. } => {
                if l < 4 || l % 2 != 0 {
                    return Err(Error::InvalidModel(format!("FLH needs an even site count >= 4, got L={l}")));
                }
                if !(0.0..1.0).contains(eta) {
                    return Err(Error::InvalidModel(format!("FLH needs eta in [0, 1), got {eta}")));
                }
            }
        }
        Ok(())
    }

    /// Cross couplings `J_{x,j}` for `j = 0..N-2`.
    pub fn jx_values(&self) -> Result<Vec<f64>> {
        let Couplings::Scl { j_x, .. } = &self.couplings else {
            return Err(Error::InvalidModel("J_x requested for a non-SCL model".into()));
        };
        let n = self.l / 2;
        let bonds = n.saturating_sub(1);
        Ok(match j_x {
            CrossCoupling::Uniform(v) => vec![*v; bonds],
            CrossCoupling::List(v) => {
                if v.len() != bonds {
                    return Err(Error::InvalidModel(format!("J_x list has {} entries, expected {bonds}", v.len())));
                }
                v.clone()
            }
            CrossCoupling::Random { lo, hi } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed.unwrap_or(0));
                (0..bonds).map(|_| rng.gen_range(*lo..=*hi)).collect()
            }
        })
    }

    pub fn basis(&self, up_count: Option<u32>) -> Result<Arc<SpinBasis>> {
        self.validate()?;
        Ok(Arc::new(SpinBasis::new(self.n_sites(), self.constraint(), self.boundary(), up_count)?))
    }

    /// Half filling for the ladder models, where the scar towers live.
    pub fn half_filling(&self) -> Option<u32> {
        match self.family() {
            Family::Scl | Family::Flh => Some((self.l / 2) as u32),
            Family::Tfh => Some(self.l as u32),
            _ => None,
        }
    }

    pub fn hamiltonian(&self, basis: &Arc<SpinBasis>) -> Result<OperatorMatrix> {
        self.validate()?;
        if basis.n_sites != self.n_sites() {
            return Err(Error::Dimension { expected: self.n_sites(), got: basis.n_sites });
        }
        let h = match &self.couplings {
            Couplings::Scl { j, j_h, .. } => scl::build(basis, *j, *j_h, &self.jx_values()?),
            Couplings::Pxp { omega } => pxp::build(basis, *omega, &[]),
            Couplings::Dpxp { omega, base, phi } => pxp::build(basis, *omega, &pxp::dpxp_couplings(self.l, *base, *phi)),
            Couplings::Tfh { j } => tfh::build(basis, self.l, *j),
            Couplings::Flh { j, eta } => flh::build(basis, *j, *eta, self.boundary()),
        }?;
        h.into_hermitian(1e-12)
    }

    /// Every site carries a σᶻ jump operator.
    pub fn jump_sites(&self) -> Vec<usize> {
        (0..self.n_sites()).collect()
    }

    /// Spatial symmetries of the model that commute with every σᶻ⊗σᶻ sum.
    pub fn spatial_symmetries(&self) -> Vec<Symmetry> {
        let n = self.n_sites();
        match self.family() {
            Family::Scl => vec![scl::inversion(self.l / 2)],
            Family::Pxp | Family::Dpxp => vec![Symmetry::translation(n, 1)],
            Family::Flh => vec![
                Symmetry::inversion_ladder(self.l / 2, false),
                Symmetry::from_site_map(SymmetryKind::LegSwap, (0..n).map(|s| s ^ 1).collect(), false).expect("valid map"),
            ],
            Family::Tfh => vec![],
        }
    }
}

impl Symmetry {
    /// Ladder reflection `(j, α) -> (N-1-j, α)`, optionally swapping legs.
    pub fn inversion_ladder(n_rungs: usize, swap_legs: bool) -> Symmetry {
        let perm = (0..2 * n_rungs)
            .map(|s| {
                let (j, a) = (s / 2, s % 2);
                let a2 = if swap_legs { 1 - a } else { a };
                2 * (n_rungs - 1 - j) + a2
            })
            .collect();
        Symmetry { kind: SymmetryKind::Inversion, perm, flip: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_cross_couplings_are_seeded() {
        let mut a = ModelSpec::scl(10, 0.66, 0.0);
        a.couplings = Couplings::Scl { j: 1.0, j_h: 0.66, j_x: CrossCoupling::Random { lo: 0.0, hi: 0.2 } };
        a.rng_seed = Some(7);
        let x = a.jx_values().unwrap();
        assert_eq!(x, a.jx_values().unwrap());
        assert_eq!(x.len(), 4);
        assert!(x.iter().all(|v| (0.0..=0.2).contains(v)));
        let mut b = a.clone();
        b.rng_seed = Some(8);
        assert_ne!(x, b.jx_values().unwrap());
    }

    #[test]
    fn validation_errors() {
        assert!(ModelSpec::scl(5, 0.66, 0.1).validate().is_err());
        let mut m = ModelSpec::scl(6, 0.66, 0.1);
        m.couplings = Couplings::Scl { j: 1.0, j_h: 0.66, j_x: CrossCoupling::List(vec![0.1]) };
        assert!(m.validate().is_err());
        let mut d = ModelSpec::dpxp(8);
        d.boundary = Some(Boundary::Open);
        assert!(d.validate().is_err());
        assert!(ModelSpec::flh(8, 1.0).validate().is_err());
    }
}
