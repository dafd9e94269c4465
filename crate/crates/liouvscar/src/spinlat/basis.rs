use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest site count enumerated by brute force.
pub const MAX_SITES: usize = 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    None,
    RydbergBlockade,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Computational basis of `n_sites` spin-1/2 sites.
///
/// Bit `j` of a state is site `j`; a set bit is an up spin (σᶻ = +1).
/// States are stored in strictly descending integer order so that, for a
/// single site, the up state comes first.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinBasis {
    pub n_sites: usize,
    pub constraint: Constraint,
    pub boundary: Boundary,
    /// Number of up spins, when the basis is restricted to one sector.
    pub up_count: Option<u32>,
    states: Vec<u64>,
}

impl SpinBasis {
    pub fn new(n_sites: usize, constraint: Constraint, boundary: Boundary, up_count: Option<u32>) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidArgument("basis needs at least one site".into()));
        }
        if n_sites > MAX_SITES {
            let needed = (1u64 << n_sites) * 8;
            return Err(Error::Budget { what: format!("{n_sites}-site enumeration"), needed, budget: (1u64 << MAX_SITES) * 8 });
        }
        let mut states: Vec<u64> = (0..1u64 << n_sites)
            .rev()
            .filter(|&s| up_count.is_none_or(|m| s.count_ones() == m))
            .filter(|&s| admissible(s, n_sites, constraint, boundary))
            .collect();
        states.shrink_to_fit();
        if states.is_empty() {
            return Err(Error::EmptyBasis);
        }
        Ok(Self { n_sites, constraint, boundary, up_count, states })
    }

    pub fn full(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, Constraint::None, Boundary::Open, None)
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, i: usize) -> u64 {
        self.states[i]
    }

    pub fn index(&self, s: u64) -> Option<usize> {
        self.states.binary_search_by(|probe| s.cmp(probe)).ok()
    }

    pub fn contains(&self, s: u64) -> bool {
        self.index(s).is_some()
    }

    /// σᶻ eigenvalue of `site` in basis state `i`.
    pub fn sz(&self, i: usize, site: usize) -> f64 {
        if self.states[i] >> site & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn same_space(&self, other: &SpinBasis) -> bool {
        self.n_sites == other.n_sites && self.states == other.states
    }
}

pub fn admissible(s: u64, n_sites: usize, constraint: Constraint, boundary: Boundary) -> bool {
    match constraint {
        Constraint::None => true,
        Constraint::RydbergBlockade => {
            if s & (s >> 1) != 0 {
                return false;
            }
            if boundary == Boundary::Periodic && n_sites > 1 && (s & 1 == 1) && (s >> (n_sites - 1) & 1 == 1) {
                return false;
            }
            true
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_site_lists_up_first() {
        let b = SpinBasis::full(1).unwrap();
        assert_eq!(b.states(), &[1, 0]);
        assert_eq!(b.sz(0, 0), 1.0);
    }

    #[test]
    fn lookup_round_trips() {
        let b = SpinBasis::new(6, Constraint::None, Boundary::Open, Some(3)).unwrap();
        assert_eq!(b.dim(), 20);
        for (i, &s) in b.states().iter().enumerate() {
            assert_eq!(b.index(s), Some(i));
        }
        assert_eq!(b.index(0b111111), None);
    }

    #[test]
    fn empty_sector_is_an_error() {
        let e = SpinBasis::new(4, Constraint::RydbergBlockade, Boundary::Periodic, Some(3));
        assert!(matches!(e, Err(Error::EmptyBasis)));
    }
}
