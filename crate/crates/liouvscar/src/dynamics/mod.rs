//! Lindblad time evolution, revival observables and damped-cosine fits.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{adjoint, eig, eigh, r, CsrMatrix, I};
use crate::liouv::{dephasing_kernel, jump_diagonals, BlockDecomposition};
use crate::spinlat::OperatorMatrix;

mod fit;
mod rk;

pub use fit::{fit_damped_cosine, FitResult};
pub use rk::{dp45, Dp45Options};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Integrator,
    Spectral,
}

/// Density matrices on a time grid, in the computational basis.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub t_grid: Vec<f64>,
    pub states: Vec<Array2<C64>>,
    pub initial: String,
}

impl Trajectory {
    pub fn trace_drift(&self) -> f64 {
        let t0 = trace(&self.states[0]);
        self.states.iter().map(|s| (trace(s) - t0).norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity(&self) -> f64 {
        self.states.iter().map(|s| crate::linalg::max_abs(&(s - &adjoint(s)))).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part over all times.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut m = f64::INFINITY;
        for s in &self.states {
            let herm = (s + &adjoint(s)).mapv(|v| v * 0.5);
            let (e, _) = eigh(&herm)?;
            m = m.min(e.iter().copied().fold(f64::INFINITY, f64::min));
        }
        Ok(m)
    }
}

fn trace(a: &Array2<C64>) -> C64 {
    a.diag().sum()
}

/// `ρ ↦ -i[H, ρ] + γ W∘ρ`, the dephasing generator in matrix form.
#[derive(Clone, Debug)]
pub struct LindbladRhs {
    pub h: CsrMatrix,
    pub kernel: Array2<f64>,
    pub gamma: f64,
}

impl LindbladRhs {
    pub fn new(h: &OperatorMatrix, jump_sites: &[usize], gamma: f64) -> Result<Self> {
        if gamma < 0.0 {
            return Err(Error::InvalidArgument(format!("negative dephasing rate {gamma}")));
        }
        Ok(Self { h: h.matrix.clone(), kernel: dephasing_kernel(&h.basis, jump_sites)?, gamma })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows
    }

    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let d = self.dim();
        let mut out = Array2::zeros((d, d));
        for (i, k, v) in self.h.triplets() {
            // H ρ row i and ρ H column k
            let row = rho.row(k).mapv(|x| -I * v * x);
            let mut o = out.row_mut(i);
            o += &row;
            let col = rho.column(i).mapv(|x| I * v * x);
            let mut o = out.column_mut(k);
            o += &col;
        }
        if self.gamma != 0.0 {
            out.zip_mut_with(&(rho * &self.kernel.mapv(|w| r(self.gamma * w))), |a, b| *a += b);
        }
        out
    }
}

/// Adaptive Dormand-Prince integration, sampled on `t_grid`.
pub fn evolve(rhs: &LindbladRhs, rho0: &Array2<C64>, t_grid: &[f64], opts: Dp45Options, tag: &str) -> Result<Trajectory> {
    let d = rhs.dim();
    if rho0.dim() != (d, d) {
        return Err(Error::Dimension { expected: d, got: rho0.nrows() });
    }
    check_grid(t_grid)?;
    let y0 = Array1::from_iter(rho0.iter().copied());
    let f = |y: &Array1<C64>| -> Array1<C64> {
        let m = y.view().into_shape_with_order((d, d)).expect("square state");
        Array1::from_iter(rhs.apply(&m.to_owned()).into_iter())
    };
    let ys = dp45(f, y0, t_grid, opts)?;
    let states = ys.into_iter().map(|y| y.into_shape_with_order((d, d)).expect("square state")).collect();
    Ok(Trajectory { t_grid: t_grid.to_vec(), states, initial: tag.to_string() })
}

fn check_grid(t: &[f64]) -> Result<()> {
    if t.is_empty() || t[0] != 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("time grid must start at 0 and increase".into()));
    }
    Ok(())
}

/// Expansion in biorthogonal eigenmodes, block by block:
/// `ρ(t) = Σ_k ⟨L_k|ρ₀⟩ e^{λ_k t} |R_k⟩`.
pub fn evolve_spectral(dec: &BlockDecomposition, gamma: f64, rho0: &Array2<C64>, t_grid: &[f64], tag: &str) -> Result<Trajectory> {
    check_grid(t_grid)?;
    let d = dec.basis.dim();
    let mut states = vec![Array2::<C64>::zeros((d, d)); t_grid.len()];
    for k in 0..dec.n_blocks() {
        let v0 = dec.embed(k, rho0);
        if v0.iter().map(|x| x.norm_sqr()).sum::<f64>() < 1e-28 {
            continue;
        }
        let e = eig(&dec.block(k).matrix(gamma))?;
        let g = e.left.dot(&e.right);
        let bio = g.indexed_iter().map(|((i, j), v)| (v - if i == j { r(1.0) } else { r(0.0) }).norm()).fold(0.0, f64::max);
        if bio > 1e-6 {
            return Err(Error::Eigensolver(format!("biorthogonality residual {bio:.2e} too large for spectral evolution")));
        }
        let c = e.left.dot(&v0);
        for (ti, &t) in t_grid.iter().enumerate() {
            let w: Array1<C64> = c.iter().zip(e.values.iter()).map(|(ck, lk)| ck * (lk * t).exp()).collect();
            let v = e.right.dot(&w);
            states[ti] = &states[ti] + &dec.reconstruct(k, v.as_slice().expect("contiguous"));
        }
    }
    Ok(Trajectory { t_grid: t_grid.to_vec(), states, initial: tag.to_string() })
}

/// Pure-state density matrix `|ψ⟩⟨ψ|`.
pub fn pure_state(psi: &Array1<C64>) -> Array2<C64> {
    let n = psi.len();
    Array2::from_shape_fn((n, n), |(a, b)| psi[a] * psi[b].conj())
}

/// `|basis state⟩⟨basis state|` for a bit pattern.
pub fn product_state(basis: &crate::spinlat::SpinBasis, pattern: u64) -> Result<Array2<C64>> {
    let i = basis.index(pattern).ok_or_else(|| Error::InvalidArgument(format!("state {pattern:#b} not in basis")))?;
    let mut rho = Array2::zeros((basis.dim(), basis.dim()));
    rho[[i, i]] = r(1.0);
    Ok(rho)
}

/// `F(t) = |⟨⟨ρ₀|ρ(t)⟩⟩|` with `ρ₀` taken as the trajectory's first state.
pub fn fidelity_series(traj: &Trajectory) -> Vec<f64> {
    let rho0 = &traj.states[0];
    let norm = rho0.iter().map(|v| v.norm_sqr()).sum::<f64>();
    traj.states.iter().map(|s| rho0.iter().zip(s.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().norm() / norm).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Revival {
    /// `(t₁, F₁, ln(F₁)/L)`.
    Found { time: f64, fidelity: f64, density: f64 },
    NoRevival,
}

/// First local maximum after the first local minimum.
pub fn first_revival(t: &[f64], f: &[f64], l_sites: usize) -> Revival {
    let n = f.len();
    let Some(min) = (1..n.saturating_sub(1)).find(|&i| f[i] < f[i - 1] && f[i] <= f[i + 1]) else {
        return Revival::NoRevival;
    };
    match (min + 1..n.saturating_sub(1)).find(|&i| f[i] > f[i - 1] && f[i] >= f[i + 1]) {
        Some(i) => Revival::Found { time: t[i], fidelity: f[i], density: f[i].ln() / l_sites as f64 },
        None => Revival::NoRevival,
    }
}

/// `⟨⟨ρ|σᶻ_j⊗σᶻ_j|ρ⟩⟩ = Σ_ab z_j(a) z_j(b) |ρ_ab|²` for every jump site.
pub fn doubled_sz(rho: &Array2<C64>, z: &[Vec<f64>]) -> Vec<f64> {
    z.iter().map(|zj| rho.indexed_iter().map(|((a, b), v)| zj[a] * zj[b] * v.norm_sqr()).sum()).collect()
}

/// `I(t) = (1/L) Σ_j ⟨⟨σᶻ_j⊗σᶻ_j⟩⟩₀ ⟨⟨σᶻ_j⊗σᶻ_j⟩⟩_t`.
pub fn imbalance_series(traj: &Trajectory, basis: &crate::spinlat::SpinBasis, sites: &[usize]) -> Result<Vec<f64>> {
    let z = jump_diagonals(basis, sites)?;
    let z0 = doubled_sz(&traj.states[0], &z);
    let l = sites.len() as f64;
    Ok(traj.states.iter().map(|s| doubled_sz(s, &z).iter().zip(&z0).map(|(a, b)| a * b).sum::<f64>() / l).collect())
}

/// `(1/L) Σ_j ⟨σᶻ_j⟩₀ ⟨σᶻ_j⟩_t`, linear in `ρ(t)`.
pub fn linear_imbalance_series(traj: &Trajectory, basis: &crate::spinlat::SpinBasis, sites: &[usize]) -> Result<Vec<f64>> {
    let z = jump_diagonals(basis, sites)?;
    let expect = |rho: &Array2<C64>| -> Vec<f64> { z.iter().map(|zj| rho.diag().iter().zip(zj).map(|(p, v)| p.re * v).sum()).collect() };
    let z0 = expect(&traj.states[0]);
    let l = sites.len() as f64;
    Ok(traj.states.iter().map(|s| expect(s).iter().zip(&z0).map(|(a, b)| a * b).sum::<f64>() / l).collect())
}

/// Spectrum of `𝓛_nh = -i(H_nh⊗I - I⊗H_nh*)` with `H_nh = H - iγ Σ_j σᶻ_j`.
#[derive(Clone, Debug)]
pub struct NonHermitian {
    /// Eigenvalues `ε_n` of `H_nh`.
    pub epsilon: Vec<C64>,
    /// Right eigenvectors of `H_nh` as unit columns.
    pub vectors: Array2<C64>,
}

impl NonHermitian {
    /// `λ_nm = -i(ε_n - ε_m*)`.
    pub fn pair(&self, n: usize, m: usize) -> C64 {
        -I * (self.epsilon[n] - self.epsilon[m].conj())
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        let d = self.epsilon.len();
        (0..d * d).map(|k| self.pair(k / d, k % d)).collect()
    }

    /// Shift zeroing the mean real part, `-2 mean(Im ε)`.
    pub fn traceless_shift(&self) -> f64 {
        -2.0 * self.epsilon.iter().map(|e| e.im).sum::<f64>() / self.epsilon.len() as f64
    }

    /// Index of the eigenvector with the largest overlap with `psi`.
    pub fn closest(&self, psi: &Array1<C64>) -> usize {
        let ov: Vec<f64> = self.vectors.columns().into_iter().map(|c| c.iter().zip(psi.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().norm()).collect();
        (0..ov.len()).max_by(|&a, &b| ov[a].total_cmp(&ov[b])).unwrap_or(0)
    }
}

pub fn nonhermitian_comparison(h: &OperatorMatrix, jump_sites: &[usize], gamma: f64) -> Result<NonHermitian> {
    let z = jump_diagonals(&h.basis, jump_sites)?;
    let mut m = h.to_dense();
    for a in 0..m.nrows() {
        let tot: f64 = z.iter().map(|zj| zj[a]).sum();
        m[[a, a]] -= I * gamma * tot;
    }
    let e = eig(&m)?;
    Ok(NonHermitian { epsilon: e.values.to_vec(), vectors: e.right })
}
