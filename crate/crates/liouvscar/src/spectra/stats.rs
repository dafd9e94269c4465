//! Level spacings, reference overlaps and the antilinear pairing check.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::SpectrumRecord;
use crate::error::{Error, Result};
use crate::linalg::{eigvals, multiset_distance, r, CsrMatrix};
use crate::liouv::Superoperator;
use crate::spinlat::{SpinBasis, Symmetry};

/// Mean gap between consecutive distinct values; gaps below `degeneracy`
/// count as exact degeneracies and are dropped.
pub fn mean_spacing(values: &[f64], degeneracy: f64) -> Result<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).filter(|&g| g >= degeneracy).collect();
    if gaps.is_empty() {
        return Err(Error::InvalidArgument("class has no nondegenerate spacing".into()));
    }
    Ok(gaps.iter().sum::<f64>() / gaps.len() as f64)
}

/// Least-squares slope of `ln δ` against `ln D`.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!("scaling fit needs three sizes, got {}", points.len())));
    }
    if points.iter().any(|&(d, s)| d <= 0.0 || s <= 0.0) {
        return Err(Error::InvalidArgument("scaling fit needs positive data".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TMinusReport {
    pub parity_factor: i32,
    /// `max |𝒯₋ 𝓛' 𝒯₋⁻¹ + 𝓛'|` on the traceless generator.
    pub residual: f64,
    /// Multiset distance between `{λ'}` and `{-λ'*}`, when solved.
    pub pairing: Option<f64>,
}

/// Residual of `𝒯₋ = √(±1) [(∏σˣ) ⊗ I] 𝒦` anticommuting with the traceless
/// generator. The scalar prefactor has unit modulus and drops out of the
/// conjugation, so `parity_factor` is only recorded. The pairing check runs
/// a dense eigensolve when the doubled dimension is at most `dense_limit`.
pub fn check_t_minus(sup: &Superoperator, basis: &Arc<SpinBasis>, parity_factor: i32, dense_limit: usize) -> Result<TMinusReport> {
    if parity_factor.abs() != 1 {
        return Err(Error::InvalidArgument(format!("parity factor must be ±1, got {parity_factor}")));
    }
    let d = basis.dim();
    if d * d != sup.dim {
        return Err(Error::Dimension { expected: sup.dim, got: d * d });
    }
    let flip = Symmetry::spin_flip(basis.n_sites).matrix(basis)?;
    let mut perm = vec![0usize; d];
    for (row, col, _) in flip.matrix.triplets() {
        perm[col] = row;
    }
    let tl = sup.traceless().sup.matrix;
    let map = |i: usize| perm[i / d] * d + i % d;
    let conj: Vec<(usize, usize, C64)> = tl.triplets().into_iter().map(|(i, j, v)| (map(i), map(j), v.conj())).collect();
    let mirrored = CsrMatrix::from_triplets(sup.dim, sup.dim, conj);
    let residual = mirrored.add(&tl).max_abs();
    let pairing = if sup.dim <= dense_limit {
        let ev = eigvals(&tl.to_dense())?.to_vec();
        let mirror: Vec<C64> = ev.iter().map(|l| -l.conj()).collect();
        Some(multiset_distance(&ev, &mirror))
    } else {
        None
    };
    Ok(TMinusReport { parity_factor, residual, pairing })
}

/// Multiset distance between a spectrum and its image under `λ ↦ -λ*`.
pub fn pairing_distance(shifted: &[C64]) -> f64 {
    let mirror: Vec<C64> = shifted.iter().map(|l| -l.conj()).collect();
    multiset_distance(shifted, &mirror)
}

/// `|⟨⟨ref|R_k⟩⟩|²` per mode for every named reference in block coordinates.
pub fn reference_overlaps(record: &mut SpectrumRecord, refs: &[(String, Array1<C64>)]) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out = BTreeMap::new();
    for (name, v) in refs {
        if v.len() != record.right.nrows() {
            return Err(Error::Dimension { expected: record.right.nrows(), got: v.len() });
        }
        if v.iter().map(|x| x.norm_sqr()).sum::<f64>() < 1e-24 {
            return Err(Error::InvalidArgument(format!("reference {name} has no weight in this block")));
        }
        let ov: Vec<f64> = record.right.columns().into_iter().map(|c| c.iter().zip(v.iter()).map(|(a, b)| b.conj() * a).sum::<C64>().norm_sqr()).collect();
        out.insert(name.clone(), ov);
    }
    record.overlaps.extend(out.clone());
    Ok(out)
}

/// Layers `l` with `N - |l|` even that contain an `s = 1` mode.
pub fn zeta_layers(n_rungs: usize) -> Vec<i32> {
    let n = n_rungs as i32;
    (-n..=n).filter(|l| (n - l.abs()) % 2 == 0 && n - l.abs() >= 1).collect()
}

/// `ζ = Σ_l (N-1)^{-1/2} |E_{ket}⟩⟨E_{bra}|` over the `(l, 1)` zeroth-order
/// modes of [`zeta_layers`]; `tower` holds `|E_n⟩` as columns.
pub fn zeta_operator(tower: &Array2<C64>) -> Result<Array2<C64>> {
    let n_rungs = tower.ncols().checked_sub(1).ok_or_else(|| Error::InvalidArgument("empty tower".into()))?;
    let layers = zeta_layers(n_rungs);
    if layers.is_empty() {
        return Err(Error::InvalidArgument("no layer carries an s = 1 mode".into()));
    }
    let norm = r(1.0 / (layers.len() as f64).sqrt());
    let d = tower.nrows();
    let mut z = Array2::zeros((d, d));
    for l in layers {
        let (ket, bra) = if l >= 0 { (1 + l as usize, 1) } else { (1, 1 + l.unsigned_abs() as usize) };
        for i in 0..d {
            for j in 0..d {
                z[[i, j]] += norm * tower[[i, ket]] * tower[[j, bra]].conj();
            }
        }
    }
    Ok(z)
}
