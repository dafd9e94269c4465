//! Command dispatch. Workers compute, the caller writes.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use liouvscar::dynamics::{self, Dp45Options, LindbladRhs, Method, Revival};
use liouvscar::greens::{self, DysonOptions, SelfEnergy};
use liouvscar::linalg::{adjoint, eigh, r};
use liouvscar::liouv::{build_liouvillean, BlockDecomposition, HamiltonianEigen};
use liouvscar::models::{dicke_scar_states, flh, pxp, scl, Couplings, Family, ModelSpec};
use liouvscar::spectra::{self, stats, sweep, ModeClass, ScarStates, Seeds, SolveOptions, SweepConfig, SweepResult};
use liouvscar::spinlat::{build_sectors, check_commutes, OperatorMatrix, SpinBasis, Symmetry};

use crate::config::{Command, Initial, RunConfig, SigmaSource, SymmetryChoice};
use crate::error::CliError;
use crate::output::{file_tag, num, opt, Emitter};

const GIB: f64 = (1u64 << 30) as f64;

/// Bytes held per dense block of dimension `d`: the generator, both
/// eigenvector sets, the seed pairs and solver workspace.
pub fn dense_block_bytes(d: usize) -> f64 {
    80.0 * (d as f64).powi(2)
}

#[derive(Clone, Copy, Debug)]
pub struct Budget {
    /// `None` when lifted by `--override-budget`.
    pub bytes: Option<f64>,
}

impl Budget {
    pub fn new(gib: f64, lifted: bool) -> Self {
        Self { bytes: if lifted { None } else { Some(gib * GIB) } }
    }

    pub fn check(&self, what: &str, d: usize) -> Result<(), CliError> {
        match self.bytes {
            Some(b) if dense_block_bytes(d) > b => Err(CliError::Budget(format!(
                "{what} of dimension {d} needs about {:.2} GiB, budget is {:.2} GiB; pass --override-budget to run anyway",
                dense_block_bytes(d) / GIB,
                b / GIB
            ))),
            _ => Ok(()),
        }
    }

    /// Largest dense dimension within budget.
    pub fn dense_limit(&self) -> usize {
        match self.bytes {
            Some(b) => (b / 80.0).sqrt() as usize,
            None => usize::MAX,
        }
    }
}

/// A point that failed without stopping the rest of the command.
#[derive(Clone, Debug, Serialize)]
pub struct Gap {
    pub command: &'static str,
    pub sector: Option<String>,
    pub gamma: Option<f64>,
    pub error: String,
}

struct System {
    model: ModelSpec,
    basis: Arc<SpinBasis>,
    h: OperatorMatrix,
    symmetries: Vec<Symmetry>,
    dec: BlockDecomposition,
    eig: HamiltonianEigen,
    scars: ScarStates,
    selected: Vec<usize>,
}

fn symmetries(cfg: &RunConfig, basis: &SpinBasis) -> Vec<Symmetry> {
    let m = &cfg.model;
    let flip_ok = matches!(m.family(), Family::Scl | Family::Flh) && basis.up_count.is_none_or(|u| 2 * u as usize == basis.n_sites);
    let choice = cfg.sectors.symmetries.clone().unwrap_or_else(|| {
        let mut c = vec![SymmetryChoice::Spatial];
        if flip_ok {
            c.push(SymmetryChoice::SpinFlip);
        }
        c
    });
    let mut out = Vec::new();
    for c in choice {
        match c {
            SymmetryChoice::Spatial => out.extend(m.spatial_symmetries()),
            SymmetryChoice::SpinFlip => out.push(Symmetry::spin_flip(basis.n_sites)),
            SymmetryChoice::Magnetization => out.push(Symmetry::magnetization()),
        }
    }
    out
}

fn empty_scars(d: usize) -> ScarStates {
    ScarStates { energies: Vec::new(), vectors: Array2::zeros((d, 0)), eigen_index: Vec::new(), overlaps: Vec::new() }
}

fn unit(basis: &SpinBasis, pattern: u64) -> Result<Array1<C64>, CliError> {
    let i = basis.index(pattern).ok_or_else(|| CliError::Config(format!("reference state {pattern:#b} is not in the basis")))?;
    let mut v = Array1::zeros(basis.dim());
    v[i] = r(1.0);
    Ok(v)
}

fn find_scars(model: &ModelSpec, dec: &BlockDecomposition, eig: &mut HamiltonianEigen, h: &OperatorMatrix) -> Result<ScarStates, CliError> {
    let d = dec.basis.dim();
    Ok(match model.family() {
        Family::Scl => spectra::scl_scar_states(dec, eig, model.l / 2)?,
        Family::Pxp | Family::Dpxp => {
            let z2 = unit(&dec.basis, pxp::z2_state(model.l))?;
            spectra::pxp_scar_states(dec, eig, &z2, model.l + 1)?
        }
        Family::Flh => {
            let refs = flh::local_fragment_basis(h, 2);
            if refs.ncols() == 0 {
                empty_scars(d)
            } else {
                spectra::subspace_states(dec, eig, &refs, refs.ncols())?
            }
        }
        Family::Tfh => empty_scars(d),
    })
}

fn model_with_seed(cfg: &RunConfig) -> ModelSpec {
    let mut m = cfg.model.clone();
    if m.rng_seed.is_none() {
        m.rng_seed = cfg.rng_seed;
    }
    m
}

fn basis_for(cfg: &RunConfig, model: &ModelSpec) -> Result<Arc<SpinBasis>, CliError> {
    let up = if cfg.sectors.half_filling { model.half_filling() } else { None };
    Ok(model.basis(up)?)
}

fn build_system(cfg: &RunConfig) -> Result<System, CliError> {
    let model = model_with_seed(cfg);
    let basis = basis_for(cfg, &model)?;
    let h = model.hamiltonian(&basis)?;
    let symmetries = symmetries(cfg, &basis);
    let sectors = build_sectors(&basis, &symmetries).map_err(|e| CliError::Config(format!("sectors: {e}")))?;
    let dec = BlockDecomposition::new(&h, &model.jump_sites(), sectors)?;
    let selected: Vec<usize> = if cfg.sectors.blocks.is_empty() {
        (0..dec.n_blocks()).collect()
    } else {
        let mut s = Vec::new();
        for tag in &cfg.sectors.blocks {
            let k = dec.find(|lb| &lb.tag() == tag);
            if k.is_empty() {
                let known: Vec<String> = dec.labels.iter().map(|l| l.tag()).collect();
                return Err(CliError::Config(format!("sectors.blocks: no block tagged {tag:?}; available: {}", known.join(" "))));
            }
            s.extend(k);
        }
        s
    };
    let eig = dec.hamiltonian_eigen()?;
    Ok(System { model, basis, h, symmetries, dec, eig, scars: empty_scars(0), selected })
}

/// Checks every dense allocation the commands will make.
fn preflight(cfg: &RunConfig, sys: &System, budget: &Budget) -> Result<(), CliError> {
    let needs_blocks = cfg.commands.iter().any(|c| matches!(c, Command::Spectrum | Command::Sweep));
    if needs_blocks {
        for &k in &sys.selected {
            budget.check(&format!("block {}", sys.dec.labels[k].tag()), sys.dec.members[k].len())?;
        }
    }
    if cfg.commands.contains(&Command::Dynamics) && cfg.dynamics.as_ref().is_some_and(|d| d.method == Method::Spectral) {
        for k in 0..sys.dec.n_blocks() {
            budget.check(&format!("block {}", sys.dec.labels[k].tag()), sys.dec.members[k].len())?;
        }
    }
    if let Some(s) = cfg.scaling.as_ref().filter(|_| cfg.commands.contains(&Command::Scaling)) {
        for &l in &s.sizes {
            let mut m = cfg.model.clone();
            m.l = l;
            let b = basis_for(cfg, &m)?;
            budget.check(&format!("Hamiltonian at L = {l}"), b.dim())?;
        }
    }
    Ok(())
}

pub struct Outcome {
    pub gaps: Vec<Gap>,
    pub files: Vec<String>,
}

pub fn run(cfg: &RunConfig, budget: Budget, out: &mut Emitter) -> Result<Outcome, CliError> {
    let mut sys = build_system(cfg)?;
    preflight(cfg, &sys, &budget)?;
    sys.scars = find_scars(&sys.model, &sys.dec, &mut sys.eig, &sys.h)?;
    log::info!("{} blocks, {} scar states", sys.dec.n_blocks(), sys.scars.len());
    let mut gaps = Vec::new();
    for &c in &cfg.commands {
        log::info!("running {}", c.name());
        match c {
            Command::Spectrum => spectrum(cfg, &sys, &budget, out, &mut gaps)?,
            Command::Sweep => sweep_cmd(cfg, &sys, &budget, out, &mut gaps)?,
            Command::Perturb => perturb(cfg, &sys, out)?,
            Command::Dynamics => dynamics_cmd(cfg, &sys, out, &mut gaps)?,
            Command::Scaling => scaling(cfg, out)?,
            Command::SymmetryCheck => symmetry_check(cfg, &sys, &budget, out)?,
        }
    }
    let blocks: Vec<serde_json::Value> = (0..sys.dec.n_blocks())
        .map(|k| serde_json::json!({ "sector": sys.dec.labels[k].tag(), "dim": sys.dec.members[k].len(), "selected": sys.selected.contains(&k) }))
        .collect();
    let manifest = serde_json::json!({
        "commands": cfg.commands.iter().map(|c| c.name()).collect::<Vec<_>>(),
        "model": sys.model,
        "basis_dim": sys.basis.dim(),
        "blocks": blocks,
        "scar_energies": sys.scars.energies,
        "files": out.written(),
        "gaps": gaps,
    });
    out.json("manifest.json", "manifest", &manifest)?;
    Ok(Outcome { gaps, files: out.written().to_vec() })
}

fn solve_options(cfg: &RunConfig, budget: &Budget) -> SolveOptions {
    SolveOptions { budget: budget.dense_limit(), verify: true, tol: cfg.tolerances.eigen_residual }
}

fn scar_band(cfg: &RunConfig) -> (f64, f64) {
    let t = cfg.tolerances.scar_threshold;
    ((t - 0.1).max(0.0), (t + 0.1).min(1.0))
}

#[derive(Serialize)]
struct ModeOut {
    re: f64,
    im: f64,
    re_shifted: f64,
    class: ModeClass,
    weight: f64,
    layer: Option<(i32, usize)>,
}

#[derive(Serialize)]
struct BlockSpectrum {
    sector: String,
    shift: f64,
    residual: f64,
    biorthogonality: f64,
    modes: Vec<ModeOut>,
}

fn class_name(c: ModeClass) -> &'static str {
    match c {
        ModeClass::Scar => "scar",
        ModeClass::Thermal => "thermal",
        ModeClass::Ambiguous => "ambiguous",
    }
}

fn spectrum(cfg: &RunConfig, sys: &System, budget: &Budget, out: &mut Emitter, gaps: &mut Vec<Gap>) -> Result<(), CliError> {
    let grid = cfg.gammas();
    let opts = solve_options(cfg, budget);
    let seeds: Vec<liouvscar::Result<Seeds>> = sys.selected.par_iter().map(|&k| Seeds::new(&sys.dec, k, &sys.eig, &sys.scars)).collect();
    let tasks: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..sys.selected.len()).map(move |b| (g, b))).collect();
    let results: Vec<liouvscar::Result<BlockSpectrum>> = tasks
        .par_iter()
        .map(|&(g, b)| {
            let k = sys.selected[b];
            let mut rec = spectra::eigensolve(&sys.dec.block(k), grid[g], opts)?;
            let s = seeds[b].as_ref().map_err(|e| liouvscar::Error::InvalidArgument(e.to_string()))?;
            let (pairs, layers) = s.scar_pairs();
            spectra::classify_modes(&mut rec, &pairs, &layers, cfg.tolerances.scar_threshold, scar_band(cfg));
            let modes = rec
                .eigenvalues
                .iter()
                .zip(&rec.labels)
                .map(|(l, lb)| ModeOut { re: l.re, im: l.im, re_shifted: l.re + rec.shift, class: lb.class, weight: lb.weight, layer: lb.layer })
                .collect();
            Ok(BlockSpectrum { sector: rec.sector, shift: rec.shift, residual: rec.residual, biorthogonality: rec.biorthogonality, modes })
        })
        .collect();
    let columns = [("sector", "str"), ("index", "int"), ("re", "f64"), ("im", "f64"), ("re_shifted", "f64"), ("class", "str"), ("weight", "f64"), ("layer_l", "int"), ("layer_s", "int")];
    let mut it = results.into_iter();
    for (gi, &gamma) in grid.iter().enumerate() {
        let mut rows = Vec::new();
        let mut blocks = Vec::new();
        for b in 0..sys.selected.len() {
            match it.next().expect("one result per task") {
                Ok(bs) => {
                    for (i, m) in bs.modes.iter().enumerate() {
                        let (ll, ls) = m.layer.map(|(l, s)| (l.to_string(), s.to_string())).unwrap_or_default();
                        rows.push(vec![bs.sector.clone(), i.to_string(), num(m.re), num(m.im), num(m.re_shifted), class_name(m.class).into(), num(m.weight), ll, ls]);
                    }
                    blocks.push(bs);
                }
                Err(e) => gaps.push(Gap { command: "spectrum", sector: Some(sys.dec.labels[sys.selected[b]].tag()), gamma: Some(gamma), error: e.to_string() }),
            }
        }
        out.csv(&format!("spectrum_{gi:03}.csv"), "spectrum", &columns, &rows)?;
        out.json(&format!("spectrum_{gi:03}.json"), "spectrum-record", &serde_json::json!({ "gamma": gamma, "blocks": blocks }))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary {
    sector: String,
    file_tag: String,
    modes: usize,
    broken: usize,
    refinements: usize,
    scar_velocity_peaks: Vec<f64>,
    scar_excluded: usize,
}

fn sweep_cmd(cfg: &RunConfig, sys: &System, budget: &Budget, out: &mut Emitter, gaps: &mut Vec<Gap>) -> Result<(), CliError> {
    let grid = cfg.gammas();
    let scfg = SweepConfig { min_overlap: cfg.tolerances.min_overlap, cluster_tol: cfg.tolerances.cluster, budget: budget.dense_limit(), ..SweepConfig::default() };
    // without an explicit block list, only blocks holding scar pairs are swept
    let blocks: Vec<usize> = sys.selected.clone();
    let results: Vec<(usize, liouvscar::Result<Option<SweepResult>>)> = blocks
        .par_iter()
        .map(|&k| {
            let r = Seeds::new(&sys.dec, k, &sys.eig, &sys.scars).and_then(|s| {
                if s.n_scar() == 0 && cfg.sectors.blocks.is_empty() {
                    return Ok(None);
                }
                spectra::sweep_gamma(&sys.dec.block(k), &grid, &s, scfg).map(Some)
            });
            (k, r)
        })
        .collect();
    let mut summaries = Vec::new();
    let mut all_breaks = Vec::new();
    for (k, r) in results {
        let tag = sys.dec.labels[k].tag();
        let sw = match r {
            Ok(Some(sw)) => sw,
            Ok(None) => continue,
            Err(e) => {
                gaps.push(Gap { command: "sweep", sector: Some(tag), gamma: None, error: e.to_string() });
                continue;
            }
        };
        let ft = file_tag(&tag);
        let mut rows = Vec::new();
        for (i, tm) in sw.trajectories.iter().enumerate() {
            let scaled = sw.scaled(i);
            let (ll, ls) = tm.label.layer.map(|(l, s)| (l.to_string(), s.to_string())).unwrap_or_default();
            for (g, (l, s)) in tm.eigenvalues.iter().zip(&scaled).enumerate() {
                let status = if l.is_some() { "ok" } else { "gap" };
                rows.push(vec![i.to_string(), num(grid[g]), opt(l.map(|v| v.re)), opt(l.map(|v| v.im)), opt(*s), class_name(tm.label.class).into(), num(tm.label.weight), ll.clone(), ls.clone(), status.into()]);
            }
            if let Some(b) = tm.broken_at {
                gaps.push(Gap { command: "sweep", sector: Some(tag.clone()), gamma: Some(grid[b]), error: format!("mode {i} lost, overlap below {}", cfg.tolerances.min_overlap) });
            }
        }
        let columns = [("mode", "int"), ("gamma", "f64"), ("re", "f64"), ("im", "f64"), ("abs_re_shifted_over_gamma", "f64"), ("class", "str"), ("weight", "f64"), ("layer_l", "int"), ("layer_s", "int"), ("status", "str")];
        out.csv(&format!("sweep_{ft}.csv"), "sweep", &columns, &rows)?;

        let scar = sweep::mean_velocity(&sw, ModeClass::Scar)?;
        let thermal = sweep::mean_velocity(&sw, ModeClass::Thermal)?;
        let rows: Vec<Vec<String>> = (0..grid.len()).map(|g| vec![num(grid[g]), num(scar.mean[g]), num(scar.velocity[g]), num(thermal.mean[g]), num(thermal.velocity[g])]).collect();
        let columns = [("gamma", "f64"), ("scar_mean", "f64"), ("scar_velocity", "f64"), ("thermal_mean", "f64"), ("thermal_velocity", "f64")];
        out.csv(&format!("velocity_{ft}.csv"), "velocity", &columns, &rows)?;

        let rows: Vec<Vec<String>> = sw
            .breaking_points
            .iter()
            .map(|b| vec![tag.clone(), num(b.gamma), num(b.peak_gamma), num(b.peak_velocity), b.pair.0.to_string(), b.pair.1.to_string(), num(b.plateau), num(b.post), b.confirmed.to_string()])
            .collect();
        all_breaks.extend(rows.iter().cloned());
        let columns = [("sector", "str"), ("gamma", "f64"), ("peak_gamma", "f64"), ("peak_velocity", "f64"), ("mode_a", "int"), ("mode_b", "int"), ("plateau", "f64"), ("post", "f64"), ("confirmed", "bool")];
        out.csv(&format!("breaking_{ft}.csv"), "breaking-points", &columns, &rows)?;

        summaries.push(SweepSummary {
            sector: tag,
            file_tag: ft,
            modes: sw.trajectories.len(),
            broken: sw.broken_count(),
            refinements: sw.refinements,
            scar_velocity_peaks: sweep::velocity_peaks(&scar.velocity, 5.0).iter().map(|&i| grid[i]).collect(),
            scar_excluded: scar.excluded,
        });
    }
    out.json("sweep.json", "sweep-summary", &serde_json::json!({ "gamma_grid": grid, "blocks": summaries }))?;
    Ok(())
}

fn scl_couplings(model: &ModelSpec) -> Result<(f64, Vec<f64>), CliError> {
    match &model.couplings {
        Couplings::Scl { j, .. } => Ok((*j, model.jx_values()?)),
        _ => Err(CliError::Config("perturb: the layer analysis is defined for the SCL family only".into())),
    }
}

fn perturb(cfg: &RunConfig, sys: &System, out: &mut Emitter) -> Result<(), CliError> {
    let (j, jx) = scl_couplings(&sys.model)?;
    let n = sys.model.l / 2;
    let sigma = match cfg.perturb.sigma {
        SigmaSource::Dyson => greens::self_energy_scl(n, j, &jx, &DysonOptions { eta: cfg.perturb.dyson_eta, ..DysonOptions::default() })?,
        SigmaSource::Exact => SelfEnergy::from_scar_energies(&sys.scars.energies, j),
        SigmaSource::Given => SelfEnergy::given(&cfg.perturb.values, j),
    };
    let re = sigma.real_parts();
    let rows: Vec<Vec<String>> = (0..re.len()).map(|s| vec![s.to_string(), num(sigma.energies[s]), num(sigma.sigma_diag[s].re), num(sigma.sigma_diag[s].im)]).collect();
    out.csv("self_energy.csv", "self-energy", &[("s", "int"), ("energy", "f64"), ("sigma_re", "f64"), ("sigma_im", "f64")], &rows)?;

    let grid = cfg.gammas();
    let mut rows = Vec::new();
    for l in 0..=n as i32 {
        for &g in &grid {
            let layer = greens::build_layer_matrix(n, l, g, &re)?;
            for (i, v) in greens::first_order_spectrum(&layer)?.iter().enumerate() {
                rows.push(vec![l.to_string(), num(g), num(layer.gamma_eff), i.to_string(), num(v.re), num(v.im)]);
            }
        }
    }
    out.csv("layers.csv", "layer-spectra", &[("l", "int"), ("gamma", "f64"), ("gamma_eff", "f64"), ("index", "int"), ("re", "f64"), ("im", "f64")], &rows)?;

    let positive: Vec<f64> = grid.iter().copied().filter(|&g| g > 0.0).collect();
    let rows: Vec<Vec<String>> = match (positive.first(), positive.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => greens::predict_breaking_points(n, &re, lo, hi)?.iter().map(|p| vec![p.l.to_string(), num(p.gamma), p.immediate.to_string()]).collect(),
        _ => {
            log::warn!("perturb: grid has fewer than two positive rates, no breaking points predicted");
            Vec::new()
        }
    };
    out.csv("predicted.csv", "predicted-breaking-points", &[("l", "int"), ("gamma_star", "f64"), ("immediate", "bool")], &rows)
}

struct DynRun {
    gamma: f64,
    t: Vec<f64>,
    fidelity: Vec<f64>,
    imbalance: Vec<f64>,
    linear: Vec<f64>,
    trace_drift: f64,
    min_eigenvalue: f64,
}

fn dynamics_cmd(cfg: &RunConfig, sys: &System, out: &mut Emitter, gaps: &mut Vec<Gap>) -> Result<(), CliError> {
    let d = cfg.dynamics.as_ref().expect("validated");
    let pattern = match d.initial {
        Initial::Pi => scl::pi_state(sys.model.l / 2),
        Initial::Z2 => pxp::z2_state(sys.model.l),
    };
    let rho0 = dynamics::product_state(&sys.basis, pattern).map_err(|e| CliError::Config(format!("dynamics.initial: {e}")))?;
    let steps = (d.t_max / d.dt).round() as usize;
    let t: Vec<f64> = (0..=steps).map(|i| i as f64 * d.dt).collect();
    let sites = sys.model.jump_sites();
    let tag = format!("{:?}", d.initial).to_lowercase();
    let opts = Dp45Options { tol: cfg.tolerances.integrator, ..Dp45Options::default() };
    let grid = cfg.gammas();
    let runs: Vec<liouvscar::Result<DynRun>> = grid
        .par_iter()
        .map(|&gamma| {
            let traj = match d.method {
                Method::Integrator => dynamics::evolve(&LindbladRhs::new(&sys.h, &sites, gamma)?, &rho0, &t, opts, &tag)?,
                Method::Spectral => dynamics::evolve_spectral(&sys.dec, gamma, &rho0, &t, &tag)?,
            };
            Ok(DynRun {
                gamma,
                fidelity: dynamics::fidelity_series(&traj),
                imbalance: dynamics::imbalance_series(&traj, &sys.basis, &sites)?,
                linear: dynamics::linear_imbalance_series(&traj, &sys.basis, &sites)?,
                trace_drift: traj.trace_drift(),
                min_eigenvalue: traj.min_eigenvalue()?,
                t: traj.t_grid,
            })
        })
        .collect();
    let window = d.window.unwrap_or(if sys.model.family() == Family::Scl { (0.0, 3.2) } else { (0.0, 5.0) });
    let mut fit_rows = Vec::new();
    for (gi, run) in runs.into_iter().enumerate() {
        let run = match run {
            Ok(r) => r,
            Err(e) => {
                gaps.push(Gap { command: "dynamics", sector: None, gamma: Some(grid[gi]), error: e.to_string() });
                continue;
            }
        };
        let rows: Vec<Vec<String>> = (0..run.t.len()).map(|i| vec![num(run.t[i]), num(run.fidelity[i]), num(run.imbalance[i]), num(run.linear[i])]).collect();
        out.csv(&format!("dynamics_{gi:03}.csv"), "dynamics", &[("t", "f64"), ("fidelity", "f64"), ("imbalance", "f64"), ("linear_imbalance", "f64")], &rows)?;
        let (rt, rf) = match dynamics::first_revival(&run.t, &run.fidelity, sys.model.n_sites()) {
            Revival::Found { time, fidelity, .. } => (Some(time), Some(fidelity)),
            Revival::NoRevival => (None, None),
        };
        let (beta, omega, rms, status) = match dynamics::fit_damped_cosine(&run.t, &run.linear, window) {
            Ok(f) => (Some(f.beta), Some(f.omega), Some(f.rms), "ok".to_string()),
            Err(e) => {
                gaps.push(Gap { command: "dynamics", sector: None, gamma: Some(run.gamma), error: format!("fit: {e}") });
                (None, None, None, "gap".to_string())
            }
        };
        fit_rows.push(vec![num(run.gamma), opt(beta), opt(omega), opt(rms), num(window.0), num(window.1), opt(rt), opt(rf), num(run.trace_drift), num(run.min_eigenvalue), status]);
    }
    let columns = [("gamma", "f64"), ("beta", "f64"), ("omega", "f64"), ("rms", "f64"), ("window_start", "f64"), ("window_end", "f64"), ("revival_time", "f64"), ("revival_fidelity", "f64"), ("trace_drift", "f64"), ("min_eigenvalue", "f64"), ("status", "str")];
    out.csv("fits.csv", "dynamics-fits", &columns, &fit_rows)
}

/// Eigenstates carrying the scar tower, by largest overlap with the
/// family's reference states.
fn scar_indices(model: &ModelSpec, basis: &Arc<SpinBasis>, v: &Array2<C64>) -> Result<Vec<usize>, CliError> {
    let refs = match model.family() {
        Family::Scl => dicke_scar_states(model.l / 2)?.vectors_in(basis)?,
        Family::Pxp | Family::Dpxp => {
            let z2 = unit(basis, pxp::z2_state(model.l))?;
            let ov: Vec<f64> = v.columns().into_iter().map(|c| c.iter().zip(z2.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr()).collect();
            let mut idx: Vec<usize> = (0..ov.len()).collect();
            idx.sort_by(|&a, &b| ov[b].total_cmp(&ov[a]));
            idx.truncate(model.l + 1);
            return Ok(idx);
        }
        _ => return Err(CliError::Config("scaling: scar identification is available for SCL, PXP and DPXP".into())),
    };
    let ov = adjoint(v).dot(&refs).mapv(|x| x.norm_sqr());
    Ok((0..refs.ncols()).map(|s| (0..v.ncols()).max_by(|&a, &c| ov[[a, s]].total_cmp(&ov[[c, s]])).expect("nonempty")).collect())
}

fn scaling(cfg: &RunConfig, out: &mut Emitter) -> Result<(), CliError> {
    let sizes = &cfg.scaling.as_ref().expect("validated").sizes;
    let base = model_with_seed(cfg);
    let rows: Vec<Result<(usize, usize, f64, f64, Option<f64>), CliError>> = sizes
        .par_iter()
        .map(|&l| {
            let mut m = base.clone();
            m.l = l;
            let b = basis_for(cfg, &m)?;
            let h = m.hamiltonian(&b)?;
            let (e, v) = eigh(&h.to_dense())?;
            let picked = scar_indices(&m, &b, &v)?;
            let (mut tv, mut sv) = (Vec::new(), Vec::new());
            for a in 0..e.len() {
                for c in 0..e.len() {
                    match (picked.contains(&a), picked.contains(&c)) {
                        (true, true) => sv.push(e[a] - e[c]),
                        (false, false) => tv.push(e[a] - e[c]),
                        _ => {}
                    }
                }
            }
            let thermal = stats::mean_spacing(&tv, cfg.tolerances.cluster)?;
            let scar = stats::mean_spacing(&sv, cfg.tolerances.cluster)?;
            let estimate = match scl_couplings(&m) {
                Ok((j, jx)) => Some(greens::scaling_estimate(l, greens::sigma_norm_scl(l / 2, j, &jx, &DysonOptions::default())?)),
                Err(_) => None,
            };
            Ok((l, e.len(), thermal, scar, estimate))
        })
        .collect();
    let mut table = Vec::new();
    for r in rows {
        table.push(r?);
    }
    let csv_rows: Vec<Vec<String>> = table.iter().map(|(l, d, t, s, g)| vec![l.to_string(), d.to_string(), num(*t), num(*s), opt(*g)]).collect();
    out.csv("scaling.csv", "spacing-scaling", &[("L", "int"), ("D", "int"), ("thermal_spacing", "f64"), ("scar_spacing", "f64"), ("gamma_star_estimate", "f64")], &csv_rows)?;
    let points: Vec<(f64, f64)> = table.iter().map(|r| (r.1 as f64, r.2)).collect();
    let slope = stats::scaling_fit(&points)?;
    let scar: Vec<f64> = table.iter().map(|r| r.3).collect();
    let ratio = scar.iter().copied().fold(0.0, f64::max) / scar.iter().copied().fold(f64::INFINITY, f64::min);
    out.json("scaling.json", "spacing-scaling-summary", &serde_json::json!({ "thermal_slope": slope, "scar_max_over_min": ratio }))
}

#[derive(Serialize)]
struct Commutation {
    symmetry: String,
    value: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct TMinusOut {
    gamma: f64,
    residual: Option<f64>,
    pairing: Option<f64>,
    error: Option<String>,
}

fn symmetry_check(cfg: &RunConfig, sys: &System, budget: &Budget, out: &mut Emitter) -> Result<(), CliError> {
    let commutation: Vec<Commutation> = sys
        .symmetries
        .iter()
        .map(|s| {
            let r = check_commutes(&sys.h, s, 1e-10);
            Commutation { symmetry: format!("{:?}", s.kind), value: r.as_ref().ok().copied(), error: r.err().map(|e| e.to_string()) }
        })
        .collect();
    let (leak, _, _) = sys.dec.leakage(16);
    let mut grid = cfg.gammas();
    if grid.is_empty() {
        grid.push(0.0);
    }
    let limit = budget.dense_limit().min(10_000);
    let sites = sys.model.jump_sites();
    let t_minus: Vec<TMinusOut> = grid
        .par_iter()
        .map(|&g| {
            let rep = build_liouvillean(&sys.h, g, &sites).and_then(|sup| stats::check_t_minus(&sup, &sys.basis, 1, limit));
            match rep {
                Ok(r) => TMinusOut { gamma: g, residual: Some(r.residual), pairing: r.pairing, error: None },
                Err(e) => TMinusOut { gamma: g, residual: None, pairing: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    out.json("symmetry.json", "symmetry-check", &serde_json::json!({ "commutation": commutation, "block_leakage": leak, "t_minus": t_minus }))
}
