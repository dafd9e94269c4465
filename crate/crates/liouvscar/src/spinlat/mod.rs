//! Spin-1/2 bases, local operators and symmetry sectors.

pub mod basis;
pub mod operator;
pub mod sectors;

pub use basis::{Boundary, Constraint, SpinBasis};
pub use operator::{local_operator, LocalKind, OperatorBuilder, OperatorMatrix};
pub use sectors::{build_sectors, check_commutes, Charge, SectorLabel, Symmetry, SymmetryKind, SymmetrySector};
