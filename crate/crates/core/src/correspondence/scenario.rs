//! Declarative scenario files (TOML).

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, PhaseSpaceGrid, PhysicalConstants, SpatialGrid};
use crate::kinetics::InteractionMatrix;
use crate::manybody::{EnvelopeFunctionND, Statistics};
use crate::schrodinger::{PacketSpec, PotentialSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub constants: PhysicalConstants,
    pub grid: SpatialGrid,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub packets: Vec<PacketSpec>,
    #[serde(default)]
    pub phase_space: PhaseSpaceSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub liouville: LiouvilleSpec,
    pub barrier: Option<BarrierSpec>,
    pub kinetics: Option<KineticsSpec>,
    pub manybody: Option<ManybodySpec>,
    pub fock: Option<FockSpec>,
    pub kernel: Option<KernelSpec>,
}

/// Window layout of the envelope grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpaceSpec {
    #[serde(default = "default_window")]
    pub window_points: usize,
    /// Momentum the rows are centred on; defaults to the first packet's `p_c`.
    pub p_offset: Option<f64>,
    /// Number of momentum rows; defaults to `window_points`.
    pub p_rows: Option<usize>,
    /// `dx_window * dp_half`; defaults to `pi hbar`.
    pub cell_product: Option<f64>,
}

fn default_window() -> usize {
    16
}

impl Default for PhaseSpaceSpec {
    fn default() -> Self {
        Self { window_points: default_window(), p_offset: None, p_rows: None, cell_product: None }
    }
}

/// Time window. Samples are `k t_end / samples` for `k = 0..=samples`
/// unless `times` lists them explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    /// Schrödinger step.
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub times: Option<Vec<f64>>,
}

fn default_samples() -> usize {
    4
}

impl TimeSpec {
    pub fn sample_times(&self) -> Result<Vec<f64>> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Scenario(format!("time.dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Scenario("time.t_end must be nonnegative".into()));
        }
        let times = match &self.times {
            Some(t) => t.clone(),
            None => {
                if self.samples == 0 {
                    return Err(Error::Scenario("time.samples must be positive".into()));
                }
                (0..=self.samples).map(|k| self.t_end * k as f64 / self.samples as f64).collect()
            }
        };
        if times.is_empty() || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Scenario("sample times must be ascending".into()));
        }
        if times.iter().any(|&t| t < 0.0 || t > self.t_end * (1.0 + 1e-12)) {
            return Err(Error::Scenario("sample times must lie within [0, t_end]".into()));
        }
        Ok(times)
    }
}

/// Cell-centred grid covering a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoveringGrid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub nx: usize,
    pub p_lo: f64,
    pub p_hi: f64,
    pub np: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

impl CoveringGrid {
    pub fn build(&self, c: PhysicalConstants) -> Result<PhaseSpaceGrid> {
        Ok(PhaseSpaceGrid::covering((self.x_lo, self.x_hi), self.nx, (self.p_lo, self.p_hi), self.np, c)?
            .with_boundary(self.boundary))
    }
}

/// Gaussian phase-space blob `exp(-(x-x_c)^2/2 sx^2 - (p-p_c)^2/2 sp^2)`,
/// normalized to unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseGaussian {
    pub x_c: f64,
    pub p_c: f64,
    pub sigma_x: f64,
    pub sigma_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiouvilleSpec {
    /// Verlet substep bound; defaults to `time.dt`.
    pub characteristic_dt: Option<f64>,
    #[serde(default)]
    pub boundary: Boundary,
    /// Standalone grid and initial density for the `liouville` run; the
    /// envelope of the initial wave function is used when absent.
    pub grid: Option<CoveringGrid>,
    pub initial: Option<PhaseGaussian>,
    /// Also evolve back to the start and report the return error.
    #[serde(default)]
    pub reverse: bool,
}

impl Default for LiouvilleSpec {
    fn default() -> Self {
        Self { characteristic_dt: None, boundary: Boundary::Zero, grid: None, initial: None, reverse: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSpec {
    /// Split point for T and R; defaults to the barrier centre.
    pub x_split: Option<f64>,
    /// When lobes are segmented; defaults to the time the incident centre
    /// is eight widths past the barrier.
    pub segmentation_time: Option<f64>,
    /// Tracking window after segmentation, in units of `m sigma / |p_c|`.
    #[serde(default = "default_track")]
    pub track_timescales: f64,
    #[serde(default = "default_track_samples")]
    pub track_samples: usize,
}

fn default_track() -> f64 {
    3.0
}

fn default_track_samples() -> usize {
    6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KineticsMode {
    /// Streaming plus collisions on a phase-space density.
    #[default]
    Boltzmann,
    /// Master equation on a bare state space.
    Master,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InteractionSpec {
    /// Every off-diagonal element equal to `strength`.
    Uniform { strength: f64 },
    /// Seeded random Hermitian couplings with moduli below `scale`.
    Random { scale: f64 },
    /// No collisions.
    None,
}

impl InteractionSpec {
    pub fn build(&self, k: usize, seed: u64) -> InteractionMatrix {
        use rand::SeedableRng;
        match *self {
            InteractionSpec::Uniform { strength } => InteractionMatrix::uniform(k, strength),
            InteractionSpec::Random { scale } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                InteractionMatrix::random(k, scale, &mut rng)
            }
            InteractionSpec::None => InteractionMatrix::uniform(k, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KineticInitial {
    /// `|A|^2` of the initial wave function on the envelope grid.
    Envelope,
    /// x-uniform drifting Maxwellian on `kinetics.grid`.
    DriftingMaxwellian { density: f64, drift: f64, sigma_p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticsSpec {
    #[serde(default)]
    pub mode: KineticsMode,
    pub interaction: InteractionSpec,
    /// Broadening; defaults to the mean level spacing.
    pub eta: Option<f64>,
    /// Splitting step; defaults to the characteristic step.
    pub split_dt: Option<f64>,
    #[serde(default = "default_initial")]
    pub initial: KineticInitial,
    pub grid: Option<CoveringGrid>,
    /// Master mode: state energies (random in `[0, K)` when only `states` is given).
    pub energies: Option<Vec<f64>>,
    pub states: Option<usize>,
    /// Master mode: initial occupations (all mass in state 0 by default).
    pub occupations: Option<Vec<f64>>,
    /// Master mode: also apply the time-reversed evolution and report the return error.
    #[serde(default)]
    pub reverse: bool,
}

fn default_initial() -> KineticInitial {
    KineticInitial::Envelope
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManybodySpec {
    #[serde(default = "default_particles")]
    pub particles: Vec<usize>,
    #[serde(default = "default_statistics")]
    pub statistics: Vec<Statistics>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: EnvelopeFunctionND,
    /// Central-difference steps for the convergence table.
    #[serde(default = "default_steps")]
    pub steps: Vec<f64>,
    #[serde(default = "default_scale")]
    pub momentum_scale: f64,
    #[serde(default = "default_scale")]
    pub coordinate_scale: f64,
}

fn default_particles() -> Vec<usize> {
    vec![2, 3]
}

fn default_statistics() -> Vec<Statistics> {
    vec![Statistics::Fermion, Statistics::Boson]
}

fn default_trials() -> usize {
    8
}

fn default_amplitude() -> EnvelopeFunctionND {
    EnvelopeFunctionND::GaussianOfSum { alpha: 0.3 }
}

fn default_steps() -> Vec<f64> {
    vec![1e-2, 5e-3, 2.5e-3]
}

fn default_scale() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockSpec {
    pub modes: usize,
    pub max_occupation: u8,
    /// Ensemble sizes for the decay table.
    pub draws: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_repeats() -> usize {
    16
}

/// Sampling of the carrier-overlap kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub window: f64,
    /// Half-range of `q = (p - p0) window / hbar`.
    #[serde(default = "default_q_max")]
    pub q_max: f64,
    #[serde(default = "default_kernel_points")]
    pub points: usize,
}

fn default_q_max() -> f64 {
    8.0 * PI
}

fn default_kernel_points() -> usize {
    1025
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    /// Reads a scenario and applies `KEY=VALUE` overrides addressed by
    /// dotted paths (`grid.n=2048`, `kinetics.eta=0.1`). Values are parsed
    /// as TOML and fall back to plain strings.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_with_overrides(&text, overrides)
    }

    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Scenario(e.to_string()))?;
        for ov in overrides {
            apply_override(&mut doc, ov)?;
        }
        let s: Scenario = doc.try_into().map_err(|e: toml::de::Error| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let scen = |e: Error| match e {
            Error::Scenario(_) => e,
            other => Error::Scenario(other.to_string()),
        };
        self.constants.validate().map_err(scen)?;
        self.grid.validate().map_err(scen)?;
        self.potential.validate().map_err(scen)?;
        self.time.sample_times()?;
        if let Some(dt) = self.liouville.characteristic_dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Scenario("liouville.characteristic_dt must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn characteristic_dt(&self) -> f64 {
        self.liouville.characteristic_dt.unwrap_or(self.time.dt)
    }

    /// Envelope grid tiling the spatial grid.
    pub fn envelope_grid(&self) -> Result<PhaseSpaceGrid> {
        let ps = &self.phase_space;
        let p_offset = ps.p_offset.or_else(|| self.packets.first().map(|p| p.p_c)).unwrap_or(0.0);
        let product = ps.cell_product.unwrap_or(PI * self.constants.hbar);
        Ok(PhaseSpaceGrid::windows_with_product(
            &self.grid,
            ps.window_points,
            p_offset,
            ps.p_rows,
            product,
            self.constants,
        )?
        .with_boundary(self.liouville.boundary))
    }

    /// `2 m sigma^2 / hbar` of the first packet.
    pub fn dispersion_time(&self) -> Option<f64> {
        self.packets.first().map(|p| 2.0 * self.constants.mass * p.sigma * p.sigma / self.constants.hbar)
    }
}

fn apply_override(doc: &mut toml::Table, ov: &str) -> Result<()> {
    let (key, raw) = ov.split_once('=').ok_or_else(|| Error::Scenario(format!("override `{ov}` is not KEY=VALUE")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = parse_value(raw);
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Scenario(format!("empty key in `{ov}`")))?;
    let mut table = doc;
    for part in parts {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Scenario(format!("override `{key}`: `{part}` is not a table"))),
        };
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
