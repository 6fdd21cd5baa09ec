//! Split-step Fourier solver for the 1D time-dependent Schrödinger equation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{conjugate_momentum_grid, sum_compensated, Fourier, PhysicalConstants, SpatialGrid};

/// Closed-form external potentials.
///
/// Free, linear and harmonic forms are smooth; the Gaussian barrier is
/// flagged sharp and is only accepted by the quantum solver.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    #[default]
    Free,
    /// `U = force * x`, so the particle is pushed towards `-force`.
    Linear {
        force: f64,
    },
    /// `U = k x^2 / 2`.
    Harmonic {
        k: f64,
    },
    /// `U = V0 exp(-(x - x_b)^2 / 2 w^2)`.
    GaussianBarrier {
        height: f64,
        center: f64,
        width: f64,
    },
    Sum {
        terms: Vec<PotentialSpec>,
    },
}

impl PotentialSpec {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::Linear { force } => force * x,
            PotentialSpec::Harmonic { k } => 0.5 * k * x * x,
            PotentialSpec::GaussianBarrier { height, center, width } => {
                let d = (x - center) / width;
                height * (-0.5 * d * d).exp()
            }
            PotentialSpec::Sum { terms } => terms.iter().map(|t| t.value(x)).sum(),
        }
    }

    /// `dU/dx`.
    pub fn gradient(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::Linear { force } => *force,
            PotentialSpec::Harmonic { k } => k * x,
            PotentialSpec::GaussianBarrier { height, center, width } => {
                let d = (x - center) / width;
                -height * d / width * (-0.5 * d * d).exp()
            }
            PotentialSpec::Sum { terms } => terms.iter().map(|t| t.gradient(x)).sum(),
        }
    }

    pub fn is_smooth(&self) -> bool {
        match self {
            PotentialSpec::GaussianBarrier { .. } => false,
            PotentialSpec::Sum { terms } => terms.iter().all(PotentialSpec::is_smooth),
            _ => true,
        }
    }

    /// The potential with every sharp term removed.
    pub fn smooth_part(&self) -> PotentialSpec {
        match self {
            PotentialSpec::GaussianBarrier { .. } => PotentialSpec::Free,
            PotentialSpec::Sum { terms } => PotentialSpec::Sum {
                terms: terms
                    .iter()
                    .filter(|t| t.is_smooth() || matches!(t, PotentialSpec::Sum { .. }))
                    .map(PotentialSpec::smooth_part)
                    .collect(),
            },
            other => other.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            PotentialSpec::Free => true,
            PotentialSpec::Linear { force } => force.is_finite(),
            PotentialSpec::Harmonic { k } => k.is_finite() && *k >= 0.0,
            PotentialSpec::GaussianBarrier { height, center, width } => {
                height.is_finite() && center.is_finite() && width.is_finite() && *width > 0.0
            }
            PotentialSpec::Sum { terms } => {
                for t in terms {
                    t.validate()?;
                }
                true
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("potential", format!("non-finite or out-of-range parameters in {self:?}")))
        }
    }
}

/// Parameters of one Gaussian packet. `weight` is its share of the total
/// probability when several packets are superposed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub x_c: f64,
    pub p_c: f64,
    pub sigma: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// Complex field on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: SpatialGrid,
    constants: PhysicalConstants,
    values: Vec<Complex64>,
    pub time: f64,
}

impl WaveFunction {
    pub fn new(grid: SpatialGrid, constants: PhysicalConstants, values: Vec<Complex64>, time: f64) -> Result<Self> {
        grid.validate()?;
        constants.validate()?;
        if values.len() != grid.n {
            return Err(Error::GridMismatch(format!("{} samples for a grid of {} points", values.len(), grid.n)));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("wave function"));
        }
        Ok(Self { grid, constants, values, time })
    }

    pub fn from_fn(grid: SpatialGrid, constants: PhysicalConstants, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.points().map(f).collect();
        Self::new(grid, constants, values, 0.0)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Probability in the `margin` samples nearest either end of the grid.
    pub fn edge_probability(&self, margin: usize) -> f64 {
        let n = self.values.len();
        let m = margin.min(n / 2);
        let head = self.values[..m].iter().map(|z| z.norm_sqr());
        let tail = self.values[n - m..].iter().map(|z| z.norm_sqr());
        sum_compensated(head.chain(tail)) * self.grid.dx
    }

    /// `psi -> c psi`.
    pub fn scaled(mut self, c: Complex64) -> Self {
        for z in &mut self.values {
            *z *= c;
        }
        self
    }

    /// Momentum amplitudes in FFT order, scaled so that
    /// `sum |phi_k|^2 = sum |psi_j|^2`.
    fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        Fourier::new(self.grid.n).forward(&mut buf);
        let s = 1.0 / (self.grid.n as f64).sqrt();
        for z in &mut buf {
            *z *= s;
        }
        buf
    }

    /// Momentum-space probability `|psi_hat(p)|^2` on the ascending
    /// conjugate grid, normalized to unit sum.
    pub fn momentum_distribution(&self) -> (Vec<f64>, Vec<f64>) {
        let spec = self.spectrum();
        let mg = conjugate_momentum_grid(&self.grid, &self.constants);
        let n = self.grid.n;
        let total = sum_compensated(spec.iter().map(|z| z.norm_sqr()));
        let mut prob = vec![0.0; n];
        for (k, z) in spec.iter().enumerate() {
            let j = (k + n / 2) % n;
            prob[j] = if total > 0.0 { z.norm_sqr() / total } else { 0.0 };
        }
        (mg.values().to_vec(), prob)
    }
}

/// `(sum |psi|^2 dx)^(1/2)`.
pub fn l2_norm(psi: &WaveFunction) -> f64 {
    (sum_compensated(psi.values.iter().map(|z| z.norm_sqr())) * psi.grid.dx).sqrt()
}

/// L2 distance between two fields on the same grid.
pub fn l2_distance(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch("wave functions live on different grids".into()));
    }
    let s = sum_compensated(a.values.iter().zip(&b.values).map(|(u, v)| (u - v).norm_sqr()));
    Ok((s * a.grid.dx).sqrt())
}

/// Normalized Gaussian packet `exp(-(x - x_c)^2 / 4 sigma^2) exp(i p_c x / hbar)`.
pub fn init_gaussian_packet(
    x_c: f64,
    p_c: f64,
    sigma: f64,
    g: &SpatialGrid,
    c: &PhysicalConstants,
) -> Result<WaveFunction> {
    superpose_packets(&[PacketSpec { x_c, p_c, sigma, weight: 1.0 }], g, c)
}

/// Normalized superposition `sum sqrt(w_i) phi_i` of Gaussian packets.
///
/// Each packet is checked for resolution (`sigma >= 4 dx`) and for edge
/// clearance: its density at either end of the grid, relative to its peak,
/// must stay below `1e-10`.
pub fn superpose_packets(packets: &[PacketSpec], g: &SpatialGrid, c: &PhysicalConstants) -> Result<WaveFunction> {
    g.validate()?;
    c.validate()?;
    if packets.is_empty() {
        return Err(Error::invalid("packets", "at least one packet is required"));
    }
    let mut values = vec![Complex64::new(0.0, 0.0); g.n];
    for pk in packets {
        if !(pk.x_c.is_finite() && pk.p_c.is_finite() && pk.sigma.is_finite()) {
            return Err(Error::invalid("packet", "parameters must be finite"));
        }
        if !(pk.weight.is_finite() && pk.weight >= 0.0) {
            return Err(Error::invalid("weight", "must be nonnegative"));
        }
        if pk.sigma < 4.0 * g.dx {
            return Err(Error::UnresolvedPacket { sigma: pk.sigma, min: 4.0 * g.dx });
        }
        let edge = (pk.x_c - g.x_min).abs().min((g.x_max() - pk.x_c).abs());
        let inside = pk.x_c > g.x_min && pk.x_c < g.x_max();
        let ratio = if inside { (-edge * edge / (2.0 * pk.sigma * pk.sigma)).exp() } else { 1.0 };
        if ratio >= 1e-10 {
            return Err(Error::EdgeOverlap { ratio });
        }
        let mut one = vec![Complex64::new(0.0, 0.0); g.n];
        for (i, z) in one.iter_mut().enumerate() {
            let x = g.x(i);
            let d = x - pk.x_c;
            *z = Complex64::from_polar((-d * d / (4.0 * pk.sigma * pk.sigma)).exp(), pk.p_c * x / c.hbar);
        }
        let norm = (sum_compensated(one.iter().map(|z| z.norm_sqr())) * g.dx).sqrt();
        let s = pk.weight.sqrt() / norm;
        for (v, z) in values.iter_mut().zip(&one) {
            *v += z * s;
        }
    }
    let psi = WaveFunction::new(*g, *c, values, 0.0)?;
    let norm = l2_norm(&psi);
    if norm == 0.0 {
        return Err(Error::invalid("weight", "total packet weight is zero"));
    }
    Ok(psi.scaled(Complex64::new(1.0 / norm, 0.0)))
}

fn norm_sq(psi: &WaveFunction) -> f64 {
    sum_compensated(psi.values.iter().map(|z| z.norm_sqr())) * psi.grid.dx
}

/// `<x>`.
pub fn expectation_x(psi: &WaveFunction) -> f64 {
    let g = &psi.grid;
    let num = sum_compensated(psi.values.iter().enumerate().map(|(i, z)| g.x(i) * z.norm_sqr())) * g.dx;
    num / norm_sq(psi)
}

/// `<p>`, evaluated spectrally.
pub fn expectation_p(psi: &WaveFunction) -> f64 {
    let spec = psi.spectrum();
    let mg = conjugate_momentum_grid(&psi.grid, &psi.constants);
    let num = sum_compensated(spec.iter().enumerate().map(|(k, z)| mg.fft_bin(k) * z.norm_sqr()));
    let den = sum_compensated(spec.iter().map(|z| z.norm_sqr()));
    num / den
}

/// `<H>` with the kinetic part evaluated spectrally.
pub fn energy(psi: &WaveFunction, v: &PotentialSpec) -> f64 {
    let g = &psi.grid;
    let c = &psi.constants;
    let spec = psi.spectrum();
    let mg = conjugate_momentum_grid(g, c);
    let kin_num = sum_compensated(spec.iter().enumerate().map(|(k, z)| {
        let p = mg.fft_bin(k);
        p * p / (2.0 * c.mass) * z.norm_sqr()
    }));
    let kin = kin_num / sum_compensated(spec.iter().map(|z| z.norm_sqr()));
    let pot = sum_compensated(psi.values.iter().enumerate().map(|(i, z)| v.value(g.x(i)) * z.norm_sqr())) * g.dx;
    kin + pot / norm_sq(psi)
}

/// Probability right (`T`) and left (`R`) of `x_split`, each summed
/// separately, so `T + R` is the norm of `psi` and checks unitarity.
pub fn transmission_reflection(psi: &WaveFunction, x_split: f64) -> (f64, f64) {
    let g = &psi.grid;
    let side = |right: bool| {
        sum_compensated(
            psi.values.iter().enumerate().filter(|(i, _)| (g.x(*i) > x_split) == right).map(|(_, z)| z.norm_sqr()),
        ) * g.dx
    };
    (side(true), side(false))
}

/// `|dt| E_max / hbar` with `E_max = (pi hbar / dx)^2 / 2m`, the largest
/// kinetic energy the grid resolves.
pub fn step_ratio(g: &SpatialGrid, c: &PhysicalConstants, dt: f64) -> f64 {
    let p_max = std::f64::consts::PI * c.hbar / g.dx;
    dt.abs() * p_max * p_max / (2.0 * c.mass) / c.hbar
}

/// Reusable Strang propagator `exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2)`.
#[derive(Debug, Clone)]
pub struct SplitStep {
    fourier: Fourier,
    kinetic: Vec<Complex64>,
    half_potential: Vec<Complex64>,
    full_potential: Vec<Complex64>,
    dt: f64,
}

/// Samples closer than this fraction of the grid to either end are
/// watched by the edge guard.
pub const EDGE_FRACTION: usize = 64;
/// Edge probability above which evolution reports [`Error::EdgeContact`].
pub const EDGE_TOLERANCE: f64 = 1e-6;
/// Steps between edge and norm checks during evolution.
pub const GUARD_INTERVAL: usize = 32;
/// Relative norm change above which evolution reports [`Error::NormDrift`].
pub const NORM_TOLERANCE: f64 = 1e-8;

impl SplitStep {
    pub fn new(g: &SpatialGrid, c: &PhysicalConstants, v: &PotentialSpec, dt: f64) -> Result<Self> {
        g.validate()?;
        c.validate()?;
        v.validate()?;
        if !dt.is_finite() || dt == 0.0 {
            return Err(Error::invalid("dt", "must be finite and nonzero"));
        }
        let ratio = step_ratio(g, c, dt);
        if ratio >= 0.5 {
            return Err(Error::StepTooLarge { ratio });
        }
        let mg = conjugate_momentum_grid(g, c);
        let kinetic = (0..g.n)
            .map(|k| {
                let p = mg.fft_bin(k);
                Complex64::from_polar(1.0, -p * p / (2.0 * c.mass) * dt / c.hbar)
            })
            .collect();
        let phase = |scale: f64| -> Vec<Complex64> {
            g.points().map(|x| Complex64::from_polar(1.0, -v.value(x) * scale * dt / c.hbar)).collect()
        };
        Ok(Self { fourier: Fourier::new(g.n), kinetic, half_potential: phase(0.5), full_potential: phase(1.0), dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `psi` by `steps` steps in place, fusing adjacent potential
    /// half steps. No diagnostics.
    pub fn advance(&self, values: &mut [Complex64], steps: usize) {
        if steps == 0 {
            return;
        }
        multiply(values, &self.half_potential);
        for s in 0..steps {
            self.fourier.forward(values);
            multiply(values, &self.kinetic);
            self.fourier.inverse(values);
            let last = s + 1 == steps;
            multiply(values, if last { &self.half_potential } else { &self.full_potential });
        }
    }
}

fn multiply(values: &mut [Complex64], phase: &[Complex64]) {
    const CHUNK: usize = 1024;
    if values.len() >= 8 * CHUNK {
        values.par_chunks_mut(CHUNK).zip(phase.par_chunks(CHUNK)).for_each(|(v, p)| {
            for (a, b) in v.iter_mut().zip(p) {
                *a *= b;
            }
        });
    } else {
        for (a, b) in values.iter_mut().zip(phase) {
            *a *= b;
        }
    }
}

/// Evolves `psi` by `steps` steps of size `dt` (negative `dt` runs backward).
///
/// Fails with [`Error::StepTooLarge`] when `dt` violates the stability
/// precondition, [`Error::NormDrift`] when the norm changes by more than
/// `1e-8` relative, and [`Error::EdgeContact`] when more than `1e-6` of the
/// probability sits within `n/64` samples of the grid ends.
pub fn evolve(psi: &WaveFunction, v: &PotentialSpec, dt: f64, steps: usize) -> Result<WaveFunction> {
    let prop = SplitStep::new(&psi.grid, &psi.constants, v, dt)?;
    evolve_with(psi, &prop, steps)
}

/// As [`evolve`] with a prepared propagator.
pub fn evolve_with(psi: &WaveFunction, prop: &SplitStep, steps: usize) -> Result<WaveFunction> {
    let n0 = l2_norm(psi);
    let mut out = psi.clone();
    let mut done = 0;
    // Periodic FFT boundaries let a packet wrap silently, so the guard runs
    // every few steps rather than only at the end.
    while done < steps {
        let chunk = GUARD_INTERVAL.min(steps - done);
        prop.advance(&mut out.values, chunk);
        done += chunk;
        out.time = psi.time + prop.dt * done as f64;
        check_health(&out, n0)?;
    }
    Ok(out)
}

fn check_health(psi: &WaveFunction, n0: f64) -> Result<()> {
    if psi.values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("wave function"));
    }
    let n1 = l2_norm(psi);
    let drift = if n0 > 0.0 { (n1 - n0).abs() / n0 } else { n1 };
    if drift > NORM_TOLERANCE {
        return Err(Error::NormDrift { drift });
    }
    let mass = psi.edge_probability(psi.grid.n / EDGE_FRACTION) / (n1 * n1).max(f64::MIN_POSITIVE);
    if mass > EDGE_TOLERANCE {
        return Err(Error::EdgeContact { mass });
    }
    Ok(())
}

/// Evolves to each of the ascending `times`, using the largest step not
/// exceeding `dt` that lands exactly on every sample.
pub fn evolve_to_times(psi: &WaveFunction, v: &PotentialSpec, dt: f64, times: &[f64]) -> Result<Vec<WaveFunction>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut cur = psi.clone();
    for &t in times {
        let span = t - cur.time;
        if span < -1e-12 * dt {
            return Err(Error::invalid("times", "sample times must be ascending and not before the initial time"));
        }
        if span.abs() > 1e-12 * dt {
            let steps = (span / dt).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            cur = evolve(&cur, v, h, steps)?;
        }
        cur.time = t;
        out.push(cur.clone());
    }
    Ok(out)
}
