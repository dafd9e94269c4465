//! Eigenmode tracking across a dephasing sweep and LPTS-breaking detection.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{eigensolve, ModeClass, ModeLabel, Seeds, SolveOptions, SpectrumRecord};
use crate::error::{Error, Result};
use crate::linalg::adjoint;
use crate::liouv::LiouvBlock;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Bisection depth for steps whose best overlap is too small.
    pub max_depth: usize,
    pub min_overlap: f64,
    /// Cap on extra eigensolves spent on refinement over the whole sweep.
    pub max_refinements: usize,
    /// Eigenvalues closer than this are one degenerate cluster.
    pub cluster_tol: f64,
    pub verify: bool,
    pub budget: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { max_depth: 8, min_overlap: 0.5, max_refinements: 64, cluster_tol: 1e-8, verify: false, budget: super::DEFAULT_DENSE_BUDGET }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackedMode {
    pub label: ModeLabel,
    /// Unshifted eigenvalue at each grid point; `None` once broken.
    pub eigenvalues: Vec<Option<C64>>,
    /// Grid index where tracking failed.
    pub broken_at: Option<usize>,
    /// Smallest accepted overlap along the trajectory.
    pub min_overlap: f64,
}

impl TrackedMode {
    /// `|Re(λ'/γ)|` along the grid.
    pub fn scaled_real(&self, grid: &[f64], shift_per_gamma: f64) -> Vec<Option<f64>> {
        self.eigenvalues.iter().zip(grid).map(|(l, g)| l.map(|l| ((l.re + g * shift_per_gamma) / g).abs())).collect()
    }

    pub fn is_broken(&self) -> bool {
        self.broken_at.is_some()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BreakingPoint {
    pub gamma: f64,
    pub peak_gamma: f64,
    pub peak_velocity: f64,
    /// Trajectory indices of the bifurcating pair.
    pub pair: (usize, usize),
    pub plateau: f64,
    pub post: f64,
    pub confirmed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub sector: String,
    pub gamma_grid: Vec<f64>,
    pub shift_per_gamma: f64,
    pub trajectories: Vec<TrackedMode>,
    /// Class mean of `|Re(λ'/γ)|` over the untracked (thermal) modes.
    pub thermal_mean: Vec<f64>,
    pub refinements: usize,
    pub breaking_points: Vec<BreakingPoint>,
}

impl SweepResult {
    pub fn scaled(&self, k: usize) -> Vec<Option<f64>> {
        self.trajectories[k].scaled_real(&self.gamma_grid, self.shift_per_gamma)
    }

    pub fn broken_count(&self) -> usize {
        self.trajectories.iter().filter(|t| t.is_broken()).count()
    }
}

struct Tracker<'a> {
    block: &'a LiouvBlock,
    cfg: SweepConfig,
    refinements: usize,
}

fn clusters(values: &[C64], tol: f64) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].im.total_cmp(&values[b].im).then(values[a].re.total_cmp(&values[b].re)));
    let mut id = vec![usize::MAX; n];
    let mut next = 0;
    for (pos, &k) in order.iter().enumerate() {
        if id[k] != usize::MAX {
            continue;
        }
        id[k] = next;
        for &j in &order[pos + 1..] {
            if values[j].im - values[k].im > tol {
                break;
            }
            if id[j] == usize::MAX && (values[j] - values[k]).norm() < tol {
                id[j] = next;
            }
        }
        next += 1;
    }
    id
}

impl Tracker<'_> {
    fn solve(&self, gamma: f64) -> Result<SpectrumRecord> {
        eigensolve(self.block, gamma, SolveOptions { budget: self.cfg.budget, verify: self.cfg.verify, tol: 1e-8 })
    }

    /// Greedy maximal-overlap assignment; overlaps inside a degenerate
    /// cluster of the new spectrum are measured on the whole cluster.
    fn greedy(&self, prev: &Array2<C64>, active: &[bool], rec: &SpectrumRecord) -> Vec<Option<(usize, f64)>> {
        let o = adjoint(prev).dot(&rec.right).mapv(|v| v.norm_sqr());
        let scale = 1.0 + rec.eigenvalues.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let cl = clusters(rec.eigenvalues.as_slice().expect("contiguous"), self.cfg.cluster_tol * scale);
        let n_cl = cl.iter().max().map_or(0, |m| m + 1);
        let m = prev.ncols();
        let mut cand = Vec::new();
        for t in 0..m {
            if !active[t] {
                continue;
            }
            let mut per = vec![0.0; n_cl];
            for k in 0..rec.len() {
                per[cl[k]] += o[[t, k]];
            }
            for k in 0..rec.len() {
                if o[[t, k]] > 1e-3 {
                    cand.push((o[[t, k]], per[cl[k]].sqrt(), t, k));
                }
            }
        }
        cand.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut out = vec![None; m];
        let mut taken = vec![false; rec.len()];
        for (_, cluster_ov, t, k) in cand {
            if out[t].is_none() && !taken[k] {
                out[t] = Some((k, cluster_ov.min(1.0)));
                taken[k] = true;
            }
        }
        out
    }

    fn track(&mut self, prev: &Array2<C64>, active: &[bool], g0: f64, g1: f64, rec1: &SpectrumRecord, depth: usize) -> Result<Vec<Option<(usize, f64)>>> {
        let assign = self.greedy(prev, active, rec1);
        let weak = (0..prev.ncols()).any(|t| active[t] && assign[t].is_none_or(|(_, o)| o < self.cfg.min_overlap));
        if !weak {
            return Ok(assign);
        }
        if depth >= self.cfg.max_depth || self.refinements >= self.cfg.max_refinements {
            return Ok(assign.into_iter().map(|a| a.filter(|&(_, o)| o >= self.cfg.min_overlap)).collect());
        }
        let mid = if g0 > 0.0 { (g0 * g1).sqrt() } else { 0.5 * g1 };
        let recm = self.solve(mid)?;
        self.refinements += 1;
        log::debug!("refining sweep step {g0:.3e} -> {g1:.3e} at {mid:.3e}");
        let am = self.track(prev, active, g0, mid, &recm, depth + 1)?;
        let mut prev_mid = Array2::zeros(prev.raw_dim());
        let active_mid: Vec<bool> = am.iter().map(|a| a.is_some()).collect();
        for (t, a) in am.iter().enumerate() {
            if let Some((k, _)) = a {
                prev_mid.column_mut(t).assign(&recm.right.column(*k));
            }
        }
        let a1 = self.track(&prev_mid, &active_mid, mid, g1, rec1, depth + 1)?;
        Ok(a1
            .into_iter()
            .zip(am)
            .map(|(a, b)| match (a, b) {
                (Some((k, o1)), Some((_, o0))) => Some((k, o1.min(o0))),
                _ => None,
            })
            .collect())
    }
}

/// Track the scar seeds of `seeds` along `grid` (all rates positive and
/// increasing). The first step starts from the exact γ = 0 pair modes:
/// each mode at `grid[0]` is attributed to the degenerate γ = 0 cluster it
/// projects onto most, and every cluster hands its scar seeds to the
/// modes carrying the most scar weight.
pub fn sweep_gamma(block: &LiouvBlock, grid: &[f64], seeds: &Seeds, cfg: SweepConfig) -> Result<SweepResult> {
    if grid.is_empty() || grid[0] <= 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sweep grid must be positive and strictly increasing".into()));
    }
    if seeds.vectors.nrows() != block.dim() {
        return Err(Error::Dimension { expected: block.dim(), got: seeds.vectors.nrows() });
    }
    let mut tr = Tracker { block, cfg, refinements: 0 };
    let rec0 = tr.solve(grid[0])?;
    let n = rec0.len();
    let scale = 1.0 + seeds.eigenvalues.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let seed_cl = clusters(&seeds.eigenvalues, cfg.cluster_tol * scale);
    let n_cl = seed_cl.iter().max().map_or(0, |m| m + 1);
    let o = adjoint(&seeds.vectors).dot(&rec0.right).mapv(|v| v.norm_sqr());

    let mut home = vec![0usize; n];
    let mut scar_w = vec![0.0; n];
    let mut best_layer = vec![None; n];
    for k in 0..n {
        let mut per = vec![0.0; n_cl];
        for p in 0..seeds.pairs.len() {
            per[seed_cl[p]] += o[[p, k]];
        }
        let c = (0..n_cl).max_by(|&a, &b| per[a].total_cmp(&per[b])).unwrap_or(0);
        home[k] = c;
        let mut best = 0.0;
        for p in 0..seeds.pairs.len() {
            if seed_cl[p] == c && seeds.layers[p].is_some() {
                scar_w[k] += o[[p, k]];
                if o[[p, k]] > best {
                    best = o[[p, k]];
                    best_layer[k] = seeds.layers[p];
                }
            }
        }
    }
    let mut quota = vec![0usize; n_cl];
    for p in 0..seeds.pairs.len() {
        if seeds.layers[p].is_some() {
            quota[seed_cl[p]] += 1;
        }
    }
    let mut trajectories = Vec::new();
    let mut current: Vec<Option<usize>> = Vec::new();
    for c in 0..n_cl {
        if quota[c] == 0 {
            continue;
        }
        let mut cand: Vec<usize> = (0..n).filter(|&k| home[k] == c).collect();
        cand.sort_by(|&a, &b| scar_w[b].total_cmp(&scar_w[a]));
        for i in 0..quota[c] {
            let k = cand.get(i).copied();
            let w = k.map_or(0.0, |k| scar_w[k]);
            let class = if w < 0.4 {
                ModeClass::Thermal
            } else if w <= 0.6 {
                ModeClass::Ambiguous
            } else {
                ModeClass::Scar
            };
            let label = ModeLabel { class, sector: block.label.tag(), layer: k.and_then(|k| best_layer[k]), weight: w };
            let mut eigenvalues = vec![None; grid.len()];
            eigenvalues[0] = k.map(|k| rec0.eigenvalues[k]);
            trajectories.push(TrackedMode { label, eigenvalues, broken_at: if k.is_none() { Some(0) } else { None }, min_overlap: w.sqrt() });
            current.push(k);
        }
    }

    let thermal = |rec: &SpectrumRecord, used: &[Option<usize>]| -> f64 {
        let mut mark = vec![false; rec.len()];
        for k in used.iter().flatten() {
            mark[*k] = true;
        }
        let (s, c) = (0..rec.len()).filter(|&k| !mark[k]).fold((0.0, 0usize), |(s, c), k| (s + ((rec.eigenvalues[k].re + rec.shift) / rec.gamma).abs(), c + 1));
        if c == 0 {
            0.0
        } else {
            s / c as f64
        }
    };
    let mut thermal_mean = vec![thermal(&rec0, &current)];
    let mut prev_rec = rec0;
    for i in 1..grid.len() {
        let rec = tr.solve(grid[i])?;
        let m = current.len();
        let mut prev = Array2::zeros((n, m));
        let active: Vec<bool> = current.iter().map(|c| c.is_some()).collect();
        for (t, c) in current.iter().enumerate() {
            if let Some(k) = c {
                prev.column_mut(t).assign(&prev_rec.right.column(*k));
            }
        }
        let assign = tr.track(&prev, &active, grid[i - 1], grid[i], &rec, 0)?;
        for t in 0..m {
            if !active[t] {
                continue;
            }
            match assign[t] {
                Some((k, ov)) => {
                    trajectories[t].eigenvalues[i] = Some(rec.eigenvalues[k]);
                    trajectories[t].min_overlap = trajectories[t].min_overlap.min(ov);
                    current[t] = Some(k);
                }
                None => {
                    trajectories[t].broken_at = Some(i);
                    current[t] = None;
                }
            }
        }
        thermal_mean.push(thermal(&rec, &current));
        prev_rec = rec;
    }
    let mut out = SweepResult {
        sector: block.label.tag(),
        gamma_grid: grid.to_vec(),
        shift_per_gamma: block.shift_per_gamma,
        trajectories,
        thermal_mean,
        refinements: tr.refinements,
        breaking_points: Vec::new(),
    };
    out.breaking_points = detect_breaking_points(&out, &DetectConfig::default());
    Ok(out)
}

/// Derivative on a nonuniform grid: three-point central formula inside,
/// one-sided at the ends.
pub fn derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut d = vec![0.0; n];
    d[0] = (y[1] - y[0]) / (x[1] - x[0]);
    d[n - 1] = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
    for i in 1..n - 1 {
        let (h1, h2) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        d[i] = (h1 * h1 * y[i + 1] - h2 * h2 * y[i - 1] + (h2 * h2 - h1 * h1) * y[i]) / (h1 * h2 * (h1 + h2));
    }
    d
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassSeries {
    pub gamma: Vec<f64>,
    pub mean: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Trajectories left out because tracking broke.
    pub excluded: usize,
}

/// Class-averaged `|Re(λ'/γ)|` and its γ derivative.
pub fn mean_velocity(sweep: &SweepResult, class: ModeClass) -> Result<ClassSeries> {
    mean_velocity_where(sweep, class, |_| true)
}

/// As [`mean_velocity`], restricted to scar trajectories accepted by `keep`.
pub fn mean_velocity_where(sweep: &SweepResult, class: ModeClass, keep: impl Fn(&TrackedMode) -> bool) -> Result<ClassSeries> {
    let g = &sweep.gamma_grid;
    if g.len() < 3 {
        return Err(Error::InvalidArgument("velocity needs at least three grid points".into()));
    }
    let (mean, excluded) = match class {
        ModeClass::Thermal => (sweep.thermal_mean.clone(), 0),
        _ => {
            let picked: Vec<usize> = (0..sweep.trajectories.len()).filter(|&k| sweep.trajectories[k].label.class == class && keep(&sweep.trajectories[k])).collect();
            let good: Vec<usize> = picked.iter().copied().filter(|&k| !sweep.trajectories[k].is_broken()).collect();
            let mut mean = vec![0.0; g.len()];
            if !good.is_empty() {
                for &k in &good {
                    for (m, v) in mean.iter_mut().zip(sweep.scaled(k)) {
                        *m += v.unwrap_or(0.0);
                    }
                }
                mean.iter_mut().for_each(|m| *m /= good.len() as f64);
            }
            (mean, picked.len() - good.len())
        }
    };
    let velocity = derivative(g, &mean);
    Ok(ClassSeries { gamma: g.clone(), mean, velocity, excluded })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DetectConfig {
    /// Onset is where the velocity first exceeds this fraction of the peak.
    pub onset_fraction: f64,
    /// A peak must exceed this multiple of the median |velocity|.
    pub peak_factor: f64,
    pub confirm_ratio: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { onset_fraction: 0.25, peak_factor: 5.0, confirm_ratio: 10.0 }
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    s.sort_by(f64::total_cmp);
    if s.is_empty() {
        0.0
    } else {
        s[s.len() / 2]
    }
}

/// Velocity peaks of a series: local maxima above `peak_factor` times the
/// median magnitude.
pub fn velocity_peaks(v: &[f64], peak_factor: f64) -> Vec<usize> {
    let med = median(v);
    let top = v.iter().copied().fold(0.0, f64::max);
    let floor = (peak_factor * med).max(1e-9 * top).max(1e-12);
    (1..v.len().saturating_sub(1)).filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > floor).collect()
}

/// Onsets of the scar-class velocity peaks, with the bifurcating pair and
/// its plateau-to-post-onset ratio.
pub fn detect_breaking_points(sweep: &SweepResult, cfg: &DetectConfig) -> Vec<BreakingPoint> {
    let Ok(series) = mean_velocity(sweep, ModeClass::Scar) else {
        return Vec::new();
    };
    let (g, v) = (&series.gamma, &series.velocity);
    let peaks = velocity_peaks(v, cfg.peak_factor);
    let scaled: Vec<Vec<Option<f64>>> = (0..sweep.trajectories.len()).map(|k| sweep.scaled(k)).collect();
    let mut out = Vec::new();
    let mut floor_idx = 0;
    for &p in &peaks {
        let target = cfg.onset_fraction * v[p];
        let mut lo = p;
        while lo > floor_idx && v[lo - 1] <= v[lo] && v[lo - 1] > target {
            lo -= 1;
        }
        let gamma = if lo > 0 && v[lo - 1] < target {
            let t = (target - v[lo - 1]) / (v[lo] - v[lo - 1]);
            g[lo - 1] + t * (g[lo] - g[lo - 1])
        } else {
            g[lo]
        };
        let before = lo.saturating_sub(1);
        let after = (p + 1).min(g.len() - 1);
        let mut rise: Vec<(f64, usize)> = scaled
            .iter()
            .enumerate()
            .filter(|(k, _)| sweep.trajectories[*k].label.class == ModeClass::Scar)
            .filter_map(|(k, s)| Some((s[after]? - s[before]?, k)))
            .collect();
        rise.sort_by(|a, b| b.0.total_cmp(&a.0));
        if rise.is_empty() {
            continue;
        }
        let a = rise[0].1;
        let b = rise.get(1).map_or(a, |x| x.1);
        let plateau = (0..lo).filter_map(|i| scaled[a][i]).fold(0.0, f64::max);
        let post = (p..(p + 4).min(g.len())).filter_map(|i| scaled[a][i]).fold(0.0, f64::max);
        let confirmed = post > cfg.confirm_ratio * plateau.max(1e-14);
        out.push(BreakingPoint { gamma, peak_gamma: g[p], peak_velocity: v[p], pair: (a, b), plateau, post, confirmed });
        floor_idx = p;
    }
    out.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_is_exact_for_quadratics() {
        let x = [0.0, 0.1, 0.3, 0.35, 0.8, 1.0];
        let y: Vec<f64> = x.iter().map(|t| 3.0 * t * t - t + 2.0).collect();
        let d = derivative(&x, &y);
        for i in 1..x.len() - 1 {
            assert!((d[i] - (6.0 * x[i] - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_clusters() {
        let v = [C64::new(0.0, 1.0), C64::new(1e-12, 1.0), C64::new(0.0, 2.0)];
        let c = clusters(&v, 1e-9);
        assert_eq!(c[0], c[1]);
        assert_ne!(c[0], c[2]);
    }

    #[test]
    fn peaks_of_a_step_profile() {
        let g: Vec<f64> = (0..40).map(|i| 1e-4 * 1.2f64.powi(i)).collect();
        let y: Vec<f64> = g.iter().map(|&x| if x < 2e-3 { 0.0 } else { ((x - 2e-3) / x).sqrt() }).collect();
        let v = derivative(&g, &y);
        let p = velocity_peaks(&v, 5.0);
        assert_eq!(p.len(), 1);
        assert!(g[p[0]] > 2e-3 && g[p[0]] < 3e-3);
    }
}
