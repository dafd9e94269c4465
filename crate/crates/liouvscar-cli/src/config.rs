//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use liouvscar::dynamics::Method;
use liouvscar::models::ModelSpec;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Sweep,
    Perturb,
    Dynamics,
    Scaling,
    SymmetryCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
            Command::Perturb => "perturb",
            Command::Dynamics => "dynamics",
            Command::Scaling => "scaling",
            Command::SymmetryCheck => "symmetry-check",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaGrid {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, count: usize, spacing: Spacing },
}

impl GammaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GammaGrid::Values(v) => v.clone(),
            GammaGrid::Range { start, stop, count, spacing } => {
                let n = *count;
                if n == 1 {
                    return vec![*start];
                }
                (0..n)
                    .map(|i| {
                        let f = i as f64 / (n - 1) as f64;
                        match spacing {
                            Spacing::Linear => start + f * (stop - start),
                            Spacing::Log => start * (stop / start).powf(f),
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryChoice {
    Spatial,
    SpinFlip,
    Magnetization,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sectors {
    /// Restrict to half filling where the model conserves magnetization.
    #[serde(default = "yes")]
    pub half_filling: bool,
    /// Defaults to the spatial symmetries, plus spin flip at half filling.
    #[serde(default)]
    pub symmetries: Option<Vec<SymmetryChoice>>,
    /// Only these block tags (e.g. `m4,4|p+|x+`); all blocks when empty.
    #[serde(default)]
    pub blocks: Vec<String>,
}

impl Default for Sectors {
    fn default() -> Self {
        Self { half_filling: true, symmetries: None, blocks: Vec::new() }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_cluster")]
    pub cluster: f64,
    #[serde(default = "default_overlap")]
    pub min_overlap: f64,
    #[serde(default = "default_integrator")]
    pub integrator: f64,
    #[serde(default = "default_eigen")]
    pub eigen_residual: f64,
    #[serde(default = "default_scar_threshold")]
    pub scar_threshold: f64,
}

fn default_cluster() -> f64 {
    1e-8
}
fn default_overlap() -> f64 {
    0.5
}
fn default_integrator() -> f64 {
    1e-10
}
fn default_eigen() -> f64 {
    1e-8
}
fn default_scar_threshold() -> f64 {
    0.5
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { cluster: default_cluster(), min_overlap: default_overlap(), integrator: default_integrator(), eigen_residual: default_eigen(), scar_threshold: default_scar_threshold() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaSource {
    /// Self-consistent Dyson solution on the dimer hypercube.
    Dyson,
    /// Scar energies from exact diagonalization of the ladder.
    Exact,
    Given,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturb {
    #[serde(default = "default_sigma")]
    pub sigma: SigmaSource,
    /// Real parts of `Σ_s`, one per tower state, for `sigma = "given"`.
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default = "default_dyson_eta")]
    pub dyson_eta: f64,
}

fn default_sigma() -> SigmaSource {
    SigmaSource::Dyson
}
fn default_dyson_eta() -> f64 {
    1e-6
}

impl Default for Perturb {
    fn default() -> Self {
        Self { sigma: default_sigma(), values: Vec::new(), dyson_eta: default_dyson_eta() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initial {
    /// One up spin per rung on the first leg.
    Pi,
    /// Néel state of the Rydberg chain.
    Z2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dynamics {
    pub initial: Initial,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Fit window; defaults to `[0, 3.2]` for ladders and `[0, 5]` otherwise.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    #[serde(default = "default_method")]
    pub method: Method,
}

fn default_t_max() -> f64 {
    5.0
}
fn default_dt() -> f64 {
    0.02
}
fn default_method() -> Method {
    Method::Integrator
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scaling {
    /// Site counts; the model's other parameters are kept.
    pub sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub gamma_grid: Option<GammaGrid>,
    pub commands: Vec<Command>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub rng_seed: Option<u64>,
    #[serde(default = "default_budget")]
    pub memory_budget_gib: f64,
    #[serde(default)]
    pub sectors: Sectors,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub perturb: Perturb,
    #[serde(default)]
    pub dynamics: Option<Dynamics>,
    #[serde(default)]
    pub scaling: Option<Scaling>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_budget() -> f64 {
    8.0
}

impl RunConfig {
    /// Reads the file without validating, so flags can still override fields.
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok((cfg, text))
    }

    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.gamma_grid.as_ref().map(|g| g.values()).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let field = |name: &str, msg: String| Err(CliError::Config(format!("{name}: {msg}")));
        if self.commands.is_empty() {
            return field("commands", "at least one command is required".into());
        }
        self.model.validate().map_err(|e| CliError::Config(format!("model: {e}")))?;
        if let Some(GammaGrid::Range { start, stop, count, spacing }) = &self.gamma_grid {
            if *count == 0 {
                return field("gamma_grid.count", "must be positive".into());
            }
            if *spacing == Spacing::Log && (*start <= 0.0 || *stop <= 0.0) {
                return field("gamma_grid", "log spacing needs positive start and stop".into());
            }
        }
        let g = self.gammas();
        if g.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return field("gamma_grid", "rates must be finite and non-negative".into());
        }
        if g.windows(2).any(|w| w[1] <= w[0]) {
            return field("gamma_grid", "must be strictly increasing".into());
        }
        let needs_grid = [Command::Spectrum, Command::Sweep, Command::Perturb, Command::Dynamics];
        if g.is_empty() && self.commands.iter().any(|c| needs_grid.contains(c)) {
            return field("gamma_grid", "required by the requested commands".into());
        }
        if self.commands.contains(&Command::Sweep) && g.first().is_some_and(|&v| v <= 0.0) {
            return field("gamma_grid", "sweeps need strictly positive rates".into());
        }
        let t = &self.tolerances;
        for (name, v) in [("cluster", t.cluster), ("min_overlap", t.min_overlap), ("integrator", t.integrator), ("eigen_residual", t.eigen_residual), ("scar_threshold", t.scar_threshold)] {
            if !(v > 0.0) {
                return field(&format!("tolerances.{name}"), format!("must be positive, got {v}"));
            }
        }
        if !(self.memory_budget_gib > 0.0) {
            return field("memory_budget_gib", "must be positive".into());
        }
        if self.workers == Some(0) {
            return field("workers", "must be at least 1".into());
        }
        if self.perturb.sigma == SigmaSource::Given && self.commands.contains(&Command::Perturb) && self.perturb.values.len() != self.model.l / 2 + 1 {
            return field("perturb.values", format!("need {} values for sigma = \"given\"", self.model.l / 2 + 1));
        }
        if self.commands.contains(&Command::Dynamics) {
            let Some(d) = &self.dynamics else {
                return field("dynamics", "section required by the dynamics command".into());
            };
            if !(d.dt > 0.0) || !(d.t_max > d.dt) {
                return field("dynamics", "need 0 < dt < t_max".into());
            }
        }
        if self.commands.contains(&Command::Scaling) {
            match &self.scaling {
                Some(s) if s.sizes.len() >= 3 => {}
                _ => return field("scaling.sizes", "at least three sizes are required".into()),
            }
        }
        Ok(())
    }
}
