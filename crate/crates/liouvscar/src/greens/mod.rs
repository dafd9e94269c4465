//! Self-energy of the scar hypercube and first-order layer spectra.
//!
//! The scar subspace of the ladder is the hypercube of `2^N` dimer
//! configurations. Coupling to the thermal bulk enters through a diagonal
//! `Γ`, and the self-energy solves `Σ(E) = Γ†[(E + iη) - S₀ - Σ(E)]⁻¹Γ`.
//! Projected on the Dicke tower, `Σ` shifts each layer of the scar
//! Liouvillean; together with the dephasing couplings `d_(l,s)` this gives
//! the small layer matrices whose eigenvalues predict where scar pairs
//! leave the imaginary axis.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{adjoint, eigh, eigvals, inv, r, I};
use crate::models::{dicke::dimer_pattern, dicke_scar_states, scl};
use crate::spinlat::{Boundary, Constraint, SpinBasis};

/// Dimer configurations `c` (bit `j` is the dimer of rung `j`).
pub fn hypercube(n_rungs: usize) -> Result<Vec<usize>> {
    if n_rungs == 0 || n_rungs > 16 {
        return Err(Error::InvalidArgument(format!("hypercube needs 1..=16 rungs, got {n_rungs}")));
    }
    Ok((0..1usize << n_rungs).collect())
}

/// `Γ_p = √(Σ_j J_x,j [d_j = d_{j+1}])` for every hypercube vertex.
pub fn gamma_scl(n_rungs: usize, jx: &[f64]) -> Result<Array1<f64>> {
    if jx.len() + 1 != n_rungs {
        return Err(Error::Dimension { expected: n_rungs - 1, got: jx.len() });
    }
    if jx.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("cross couplings must be non-negative".into()));
    }
    Ok(hypercube(n_rungs)?
        .into_iter()
        .map(|c| jx.iter().enumerate().filter(|(j, _)| (c >> j & 1) == (c >> (j + 1) & 1)).map(|(_, v)| v).sum::<f64>().sqrt())
        .collect())
}

/// `Γ = √(J ∏_j P_{j,j+1})` with `P_{j,j+1}` vanishing on neighbouring up
/// spins. The blockade is otherwise ignored, so this is qualitative only.
pub fn gamma_pxp(n_sites: usize, j: f64) -> Result<Array1<f64>> {
    if j < 0.0 {
        return Err(Error::InvalidArgument("coupling must be non-negative".into()));
    }
    Ok(hypercube(n_sites)?.into_iter().map(|c| if c & (c >> 1) == 0 { j.sqrt() } else { 0.0 }).collect())
}

/// Scar Hamiltonian on the hypercube: the ladder's rung terms projected
/// on the dimer configurations, a free paramagnet `J Σ_j ±τˣ_j`.
pub fn hypercube_s0_scl(n_rungs: usize, j: f64) -> Result<Array2<C64>> {
    let basis = Arc::new(SpinBasis::new(2 * n_rungs, Constraint::None, Boundary::Open, Some(n_rungs as u32))?);
    let h = scl::build(&basis, j, 0.0, &vec![0.0; n_rungs - 1])?;
    let cube = hypercube(n_rungs)?;
    let idx: Vec<usize> = cube.iter().map(|&c| basis.index(dimer_pattern(n_rungs, c)).expect("dimer state at half filling")).collect();
    Ok(Array2::from_shape_fn((cube.len(), cube.len()), |(a, b)| h.matrix.get(idx[a], idx[b])))
}

/// `Ω Σ_j σˣ_j` on unconstrained configurations.
pub fn hypercube_s0_pxp(n_sites: usize, omega: f64) -> Result<Array2<C64>> {
    let cube = hypercube(n_sites)?;
    let mut s = Array2::zeros((cube.len(), cube.len()));
    for &c in &cube {
        for j in 0..n_sites {
            s[[c ^ (1 << j), c]] += r(omega);
        }
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DysonInit {
    Zero,
    /// `Γ†Γ / E`, the first Born term.
    Born,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DysonOptions {
    pub eta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub mixing: f64,
    /// Extrapolate `η → 0` with one extra solve at `η/2`.
    pub richardson: bool,
    pub init: DysonInit,
}

impl Default for DysonOptions {
    fn default() -> Self {
        Self { eta: 1e-6, tol: 1e-10, max_iter: 500, mixing: 0.5, richardson: true, init: DysonInit::Zero }
    }
}

#[derive(Clone, Debug)]
pub struct DysonSolution {
    pub sigma: Array2<C64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dyson_fixed_point(s0: &Array2<C64>, gamma: &Array1<f64>, z: C64, opts: &DysonOptions) -> Result<DysonSolution> {
    let n = s0.nrows();
    let g = Array2::from_diag(&gamma.mapv(r));
    let mut sigma = match opts.init {
        DysonInit::Zero => Array2::zeros((n, n)),
        DysonInit::Born => {
            if z.norm() < 1e-14 {
                Array2::zeros((n, n))
            } else {
                adjoint(&g).dot(&g).mapv(|v| v / z)
            }
        }
    };
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let mut a = s0.mapv(|v| -v) - &sigma;
        for k in 0..n {
            a[[k, k]] += z;
        }
        let next = adjoint(&g).dot(&inv(&a)?).dot(&g);
        residual = (&next - &sigma).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !residual.is_finite() {
            return Err(Error::SingularResolvent);
        }
        sigma = sigma.mapv(|v| v * (1.0 - opts.mixing)) + next.mapv(|v| v * opts.mixing);
        if residual < opts.tol {
            return Ok(DysonSolution { sigma, iterations: it, residual });
        }
    }
    Err(Error::DysonNoConvergence { iterations: opts.max_iter, residual })
}

/// Self-consistent retarded self-energy at real energy `energy`.
pub fn solve_dyson(s0: &Array2<C64>, gamma: &Array1<f64>, energy: f64, opts: &DysonOptions) -> Result<DysonSolution> {
    if opts.eta <= 0.0 {
        return Err(Error::InvalidArgument("retarded broadening must be positive".into()));
    }
    if !(opts.mixing > 0.0 && opts.mixing <= 1.0) {
        return Err(Error::InvalidArgument(format!("mixing {} outside (0, 1]", opts.mixing)));
    }
    if s0.nrows() != gamma.len() || s0.ncols() != gamma.len() {
        return Err(Error::Dimension { expected: gamma.len(), got: s0.nrows() });
    }
    let full = dyson_fixed_point(s0, gamma, C64::new(energy, opts.eta), opts)?;
    if !opts.richardson {
        return Ok(full);
    }
    let half = dyson_fixed_point(s0, gamma, C64::new(energy, 0.5 * opts.eta), opts)?;
    let sigma = half.sigma.mapv(|v| 2.0 * v) - &full.sigma;
    Ok(DysonSolution { sigma, iterations: full.iterations + half.iterations, residual: full.residual.max(half.residual) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelfEnergy {
    /// On-shell points `E_s = (2s - N) J`.
    pub energies: Vec<f64>,
    /// `⟨E_s|Σ(E_s)|E_s⟩`.
    pub sigma_diag: Vec<C64>,
    /// Largest `|⟨E_s|Σ|E_s'⟩| / |⟨E_s|Σ|E_s⟩|` over `s' ≠ s`.
    pub offdiag_ratio: f64,
    pub eta: f64,
    pub iterations: Vec<usize>,
}

impl SelfEnergy {
    pub fn real_parts(&self) -> Vec<f64> {
        self.sigma_diag.iter().map(|s| s.re).collect()
    }

    /// `max_s |Re σ_s + Re σ_{N-s}|`.
    pub fn antisymmetry(&self) -> f64 {
        let n = self.sigma_diag.len();
        (0..n).map(|s| (self.sigma_diag[s].re + self.sigma_diag[n - 1 - s].re).abs()).fold(0.0, f64::max)
    }

    /// Shifts read off exact scar energies, `σ_s = Ẽ_s - (2s - N) J`.
    pub fn from_scar_energies(energies: &[f64], j: f64) -> Self {
        let n = energies.len().saturating_sub(1) as f64;
        let on_shell: Vec<f64> = (0..energies.len()).map(|s| (2.0 * s as f64 - n) * j).collect();
        let sigma_diag = energies.iter().zip(&on_shell).map(|(e, e0)| r(e - e0)).collect();
        SelfEnergy { energies: on_shell, sigma_diag, offdiag_ratio: 0.0, eta: 0.0, iterations: Vec::new() }
    }

    pub fn given(values: &[f64], j: f64) -> Self {
        let n = values.len().saturating_sub(1) as f64;
        let energies = (0..values.len()).map(|s| (2.0 * s as f64 - n) * j).collect();
        SelfEnergy { energies, sigma_diag: values.iter().map(|&v| r(v)).collect(), offdiag_ratio: 0.0, eta: 0.0, iterations: Vec::new() }
    }
}

/// Diagonal (and largest relative off-diagonal) of `Σ` in the tower basis.
pub fn dicke_project(sigma: &Array2<C64>, tower: &Array2<C64>, s: usize) -> Result<(C64, f64)> {
    if tower.nrows() != sigma.nrows() || s >= tower.ncols() {
        return Err(Error::Dimension { expected: sigma.nrows(), got: tower.nrows() });
    }
    let p = adjoint(tower).dot(sigma).dot(tower);
    let diag = p[[s, s]];
    let off = (0..tower.ncols()).filter(|&t| t != s).map(|t| p[[s, t]].norm()).fold(0.0, f64::max);
    let ratio = if diag.norm() > 0.0 { off / diag.norm() } else { 0.0 };
    Ok((diag, ratio))
}

/// Dyson self-energy of the ladder's hypercube, projected on the tower.
pub fn self_energy_scl(n_rungs: usize, j: f64, jx: &[f64], opts: &DysonOptions) -> Result<SelfEnergy> {
    let s0 = hypercube_s0_scl(n_rungs, j)?;
    let g = gamma_scl(n_rungs, jx)?;
    let tower = dicke_scar_states(n_rungs)?.hypercube_vectors();
    let mut energies = Vec::new();
    let mut sigma_diag = Vec::new();
    let mut iterations = Vec::new();
    let mut offdiag_ratio: f64 = 0.0;
    for s in 0..=n_rungs {
        let e = (2.0 * s as f64 - n_rungs as f64) * j;
        let sol = solve_dyson(&s0, &g, e, opts)?;
        let (d, ratio) = dicke_project(&sol.sigma, &tower, s)?;
        if ratio > 0.5 {
            log::warn!("self-energy off-diagonal ratio {ratio:.2} at s = {s}");
        }
        offdiag_ratio = offdiag_ratio.max(ratio);
        energies.push(e);
        sigma_diag.push(d);
        iterations.push(sol.iterations);
    }
    Ok(SelfEnergy { energies, sigma_diag, offdiag_ratio, eta: opts.eta, iterations })
}

/// Largest spectral norm of `Σ(E_s)` over the on-shell energies.
pub fn sigma_norm_scl(n_rungs: usize, j: f64, jx: &[f64], opts: &DysonOptions) -> Result<f64> {
    let s0 = hypercube_s0_scl(n_rungs, j)?;
    let g = gamma_scl(n_rungs, jx)?;
    let mut best: f64 = 0.0;
    for s in 0..=n_rungs {
        let e = (2.0 * s as f64 - n_rungs as f64) * j;
        let sig = solve_dyson(&s0, &g, e, opts)?.sigma;
        let (ev, _) = eigh(&adjoint(&sig).dot(&sig))?;
        best = best.max(ev.iter().copied().fold(0.0, f64::max).max(0.0).sqrt());
    }
    Ok(best)
}

/// `d_(l,s) = (1/N) √((s+1)(N-s)(|l|+s+1)(N-|l|-s))`.
pub fn d_coefficient(n: usize, l: i32, s: usize) -> Result<f64> {
    let la = l.unsigned_abs() as usize;
    if la >= n || s + la + 1 > n {
        return Err(Error::InvalidArgument(format!("no coupling d_({l},{s}) for N = {n}")));
    }
    let (nf, sf, lf) = (n as f64, s as f64, la as f64);
    Ok(((sf + 1.0) * (nf - sf) * (lf + sf + 1.0) * (nf - lf - sf)).sqrt() / nf)
}

/// `Σ_(l,s) = σ_s - σ_{s+l}` for `l ≥ 0`, and `-(σ_s - σ_{s+|l|})` for
/// `l < 0`, so that the mode with ket `s + l` (or `s`) shifts by `iΣ_(l,s)`.
pub fn layer_shift(sigma: &[f64], l: i32, s: usize) -> f64 {
    let la = l.unsigned_abs() as usize;
    let v = sigma[s] - sigma[s + la];
    if l >= 0 {
        v
    } else {
        -v
    }
}

#[derive(Clone, Debug)]
pub struct LayerMatrix {
    pub l: i32,
    pub n_rungs: usize,
    pub gamma_eff: f64,
    pub matrix: Array2<C64>,
}

/// `ℰ_l + γ_eff 𝒟'_l` with `γ_eff = 2γ`, on the `N - |l| + 1` modes of layer `l`.
pub fn build_layer_matrix(n_rungs: usize, l: i32, gamma: f64, sigma: &[f64]) -> Result<LayerMatrix> {
    if sigma.len() != n_rungs + 1 {
        return Err(Error::Dimension { expected: n_rungs + 1, got: sigma.len() });
    }
    let la = l.unsigned_abs() as usize;
    if la > n_rungs {
        return Err(Error::InvalidArgument(format!("layer {l} outside N = {n_rungs}")));
    }
    let m = n_rungs - la + 1;
    let gamma_eff = 2.0 * gamma;
    let mut mat = Array2::zeros((m, m));
    for s in 0..m {
        mat[[s, s]] = I * layer_shift(sigma, l, s);
        if s + 1 < m {
            let d = r(gamma_eff * d_coefficient(n_rungs, l, s)?);
            mat[[s, s + 1]] = d;
            mat[[s + 1, s]] = d;
        }
    }
    Ok(LayerMatrix { l, n_rungs, gamma_eff, matrix: mat })
}

/// First-order corrections `λ^(1)` sorted by imaginary then real part.
pub fn first_order_spectrum(layer: &LayerMatrix) -> Result<Vec<C64>> {
    let mut v = eigvals(&layer.matrix)?.to_vec();
    v.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    Ok(v)
}

/// Zeroth-order eigenvalue of layer `l` with `J = 1` in this convention:
/// `-i(E_ket - E_bra) = -2il`.
pub fn zeroth_order(l: i32, j: f64) -> C64 {
    -I * r(2.0 * l as f64 * j)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictedBreak {
    pub l: i32,
    /// Rate where one more pair of layer eigenvalues leaves the imaginary
    /// axis; zero when broken at infinitesimal γ.
    pub gamma: f64,
    pub immediate: bool,
}

fn broken_count(n_rungs: usize, l: i32, gamma: f64, sigma: &[f64]) -> Result<usize> {
    let layer = build_layer_matrix(n_rungs, l, gamma, sigma)?;
    let scale = crate::linalg::max_abs(&layer.matrix).max(1e-300);
    Ok(first_order_spectrum(&layer)?.iter().filter(|v| v.re.abs() > 1e-9 * scale).count())
}

/// Scan `γ ∈ [γ_min, γ_max]` on a log grid and bisect every increase in
/// the number of eigenvalues off the imaginary axis, for layers `l ≥ 0`
/// (negative layers mirror them).
pub fn predict_breaking_points(n_rungs: usize, sigma: &[f64], gamma_min: f64, gamma_max: f64) -> Result<Vec<PredictedBreak>> {
    if !(gamma_min > 0.0 && gamma_max > gamma_min) {
        return Err(Error::InvalidArgument("prediction window must satisfy 0 < γ_min < γ_max".into()));
    }
    let steps = 400;
    let grid: Vec<f64> = (0..=steps).map(|i| gamma_min * (gamma_max / gamma_min).powf(i as f64 / steps as f64)).collect();
    let mut out = Vec::new();
    for l in 0..=n_rungs as i32 {
        let mut prev = broken_count(n_rungs, l, grid[0], sigma)?;
        for _ in 0..prev / 2 {
            out.push(PredictedBreak { l, gamma: 0.0, immediate: true });
        }
        for w in grid.windows(2) {
            let c = broken_count(n_rungs, l, w[1], sigma)?;
            if c > prev {
                let (mut lo, mut hi) = (w[0], w[1]);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if broken_count(n_rungs, l, mid, sigma)? > prev {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                for _ in 0..(c - prev).div_ceil(2) {
                    out.push(PredictedBreak { l, gamma: hi, immediate: false });
                }
            }
            prev = c;
        }
    }
    out.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    Ok(out)
}

/// `γ̄* ~ ‖ℰ‖ / ‖𝒟'‖` with `‖𝒟'‖ = L` and `‖ℰ‖ = 2‖Σ‖`.
pub fn scaling_estimate(l_sites: usize, sigma_norm: f64) -> f64 {
    2.0 * sigma_norm / l_sites as f64
}

/// Matrix elements `⟨E_s|σᶻ_site|E_t⟩` of the tower, used to check
/// [`d_coefficient`] by brute force.
pub fn tower_sz_elements(n_rungs: usize) -> Result<Array2<f64>> {
    let t = dicke_scar_states(n_rungs)?;
    let size = 1usize << n_rungs;
    let z: Vec<f64> = (0..size).map(|c| if c & 1 == 0 { 1.0 } else { -1.0 }).collect();
    let mut out = Array2::zeros((n_rungs + 1, n_rungs + 1));
    for a in 0..=n_rungs {
        for b in 0..=n_rungs {
            out[[a, b]] = (0..size).map(|c| t.coefficients[[c, a]] * z[c] * t.coefficients[[c, b]]).sum();
        }
    }
    Ok(out)
}
