//! Windowed Fourier envelopes.
//!
//! Over each window `[x0, x0 + dx_w)` the wave function is projected onto
//! the carriers `exp(i p0 x / hbar)`:
//!
//! `A(x0, p0) = exp(i E0 t / hbar) / dx_w * integral exp(-i p0 x / hbar) psi(x) dx`
//!
//! with `E0 = p0^2 / 2m + U(x0)`. A unit plane wave with momentum `p0` gives
//! `A = 1`. The integral is the rectangle rule over the window's samples;
//! with momentum rows spaced `2 pi hbar / dx_w` across a full Brillouin zone
//! that rule makes `sum |A|^2 dmu` equal the norm exactly.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sum_compensated, PhaseSpaceDensity, PhaseSpaceGrid, PhysicalConstants, SpatialGrid};
use crate::schrodinger::{PotentialSpec, WaveFunction};

/// Both scale ratios must stay at or below this value.
pub const SCALE_THRESHOLD: f64 = 0.25;

/// Overlap of two carriers over a window of length `dx_w`, normalized to
/// one at `p = p0`: `(exp(iq) - 1) / (iq)` with `q = (p - p0) dx_w / hbar`.
pub fn chi_kernel(p: f64, p0: f64, dx_w: f64, c: &PhysicalConstants) -> Complex64 {
    let q = (p - p0) * dx_w / c.hbar;
    if q.abs() < 1e-4 {
        // 1 + iq/2 - q^2/6 - iq^3/24
        let q2 = q * q;
        Complex64::new(1.0 - q2 / 6.0, q / 2.0 - q * q2 / 24.0)
    } else {
        let num = Complex64::new(q.cos() - 1.0, q.sin());
        num / Complex64::new(0.0, q)
    }
}

/// The kernel referenced to the window centre, `exp(-iq/2) chi = sinc(q/2)`.
pub fn chi_kernel_centered(p: f64, p0: f64, dx_w: f64, c: &PhysicalConstants) -> f64 {
    let h = 0.5 * (p - p0) * dx_w / c.hbar;
    if h.abs() < 1e-4 {
        1.0 - h * h / 6.0
    } else {
        h.sin() / h
    }
}

/// One on the cell `p0 - dp_half < p <= p0 + dp_half`, zero elsewhere. A
/// point on a shared boundary belongs to the lower cell.
pub fn indicator_kernel(p: f64, p0: f64, dp_half: f64) -> f64 {
    let d = p - p0;
    if d > -dp_half && d <= dp_half {
        1.0
    } else {
        0.0
    }
}

/// A projection window `[x0, x0 + width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub width: f64,
}

impl Window {
    /// Index range of the samples inside the window. The width must be a
    /// whole number (at least 16) of grid steps and the window must lie on
    /// the grid.
    pub fn sample_range(&self, g: &SpatialGrid) -> Result<std::ops::Range<usize>> {
        let outside = || Error::WindowOutsideGrid { start: self.x0, end: self.x0 + self.width };
        let w = self.width / g.dx;
        let wi = w.round();
        if (w - wi).abs() > 1e-9 * w.max(1.0) || wi < 16.0 {
            return Err(Error::invalid(
                "window",
                format!("width must be a multiple of dx of at least 16 steps, got {w} steps"),
            ));
        }
        let s = (self.x0 - g.x_min) / g.dx;
        let si = s.round();
        if (s - si).abs() > 1e-9 * s.abs().max(1.0) || si < 0.0 {
            return Err(outside());
        }
        let (start, len) = (si as usize, wi as usize);
        if start + len > g.n {
            return Err(outside());
        }
        Ok(start..start + len)
    }
}

/// Complex envelope on a phase-space grid, x-major like [`PhaseSpaceDensity`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeField {
    grid: PhaseSpaceGrid,
    values: Vec<Complex64>,
    pub time: f64,
}

impl EnvelopeField {
    pub fn new(grid: PhaseSpaceGrid, values: Vec<Complex64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} cells", values.len(), grid.len())));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("envelope"));
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: PhaseSpaceGrid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![Complex64::new(0.0, 0.0); n], time: 0.0 }
    }

    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, ix: usize, ip: usize) -> Complex64 {
        self.values[self.grid.index(ix, ip)]
    }

    /// `A -> exp(i theta) A`.
    pub fn rotated(mut self, theta: f64) -> Self {
        let r = Complex64::from_polar(1.0, theta);
        for z in &mut self.values {
            *z *= r;
        }
        self
    }
}

/// Projects `psi` onto the carriers of `grid`.
///
/// The x cells of `grid` are the windows; each must cover a whole number of
/// samples (at least 16) inside the spatial grid. A failed [`scale_check`]
/// is logged as a warning; the envelope is computed regardless.
pub fn extract_envelope(psi: &WaveFunction, grid: &PhaseSpaceGrid, potential: &PotentialSpec) -> Result<EnvelopeField> {
    grid.validate()?;
    let sg = psi.grid();
    let c = psi.constants();
    let ranges = (0..grid.nx)
        .map(|ix| Window { x0: grid.x_edge(ix), width: grid.dx }.sample_range(sg))
        .collect::<Result<Vec<_>>>()?;
    let report = scale_check(psi, grid);
    if !report.satisfied() {
        log::warn!(
            "scale separation not satisfied (wavelength ratio {:?}, envelope ratio {:.3})",
            report.wavelength_ratio,
            report.envelope_ratio
        );
    }
    let psi_vals = psi.values();
    let t = psi.time;
    let rows: Vec<Vec<Complex64>> = ranges
        .par_iter()
        .enumerate()
        .map(|(ix, range)| {
            let x0 = grid.x_edge(ix);
            let u0 = potential.value(x0);
            (0..grid.np)
                .map(|ip| {
                    let p0 = grid.p_center(ip);
                    let mut re = Vec::with_capacity(range.len());
                    let mut im = Vec::with_capacity(range.len());
                    for i in range.clone() {
                        let x = sg.x(i);
                        let z = psi_vals[i] * Complex64::from_polar(1.0, -p0 * x / c.hbar);
                        re.push(z.re);
                        im.push(z.im);
                    }
                    let s = Complex64::new(sum_compensated(re), sum_compensated(im)) * (sg.dx / grid.dx);
                    let e0 = p0 * p0 / (2.0 * c.mass) + u0;
                    s * Complex64::from_polar(1.0, e0 * t / c.hbar)
                })
                .collect()
        })
        .collect();
    let values = rows.into_iter().flatten().collect();
    EnvelopeField::new(grid.clone(), values, t)
}

/// `rho = |A|^2 (2 pi hbar / dp)` cellwise.
///
/// `|A|^2` is a probability per unit length in one momentum row; the factor
/// converts it to an occupation per quantum state, so that a normalized
/// wave function gives unit mass under the `dx dp / (2 pi hbar)` measure.
/// On the default grid (`dx dp = 2 pi hbar`) the factor is the window width.
pub fn envelope_density(a: &EnvelopeField) -> PhaseSpaceDensity {
    let factor = a.grid.constants.planck() / a.grid.dp;
    let values = a.values.iter().map(|z| z.norm_sqr() * factor).collect();
    PhaseSpaceDensity::from_parts_unchecked(a.grid.clone(), values, a.time)
}

/// A function of momentum that can be probed at arbitrary points.
pub trait MomentumProfile {
    /// Value at `p`, or `None` outside the sampled range.
    fn sample(&self, p: f64) -> Option<f64>;
}

impl<F: Fn(f64) -> f64> MomentumProfile for F {
    fn sample(&self, p: f64) -> Option<f64> {
        Some(self(p))
    }
}

/// Uniform samples `f(p_min + j dp)`, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub p_min: f64,
    pub dp: f64,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn from_fn(p_min: f64, dp: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        Self { p_min, dp, values: (0..n).map(|j| f(p_min + j as f64 * dp)).collect() }
    }
}

impl MomentumProfile for SampledFunction {
    fn sample(&self, p: f64) -> Option<f64> {
        let n = self.values.len();
        let u = (p - self.p_min) / self.dp;
        let last = n.checked_sub(1)? as f64;
        if u < -1e-9 || u > last + 1e-9 {
            return None;
        }
        if n == 1 {
            return Some(self.values[0]);
        }
        let u = u.clamp(0.0, last);
        let j = (u.floor() as usize).min(n - 2);
        let w = u - j as f64;
        Some(self.values[j] * (1.0 - w) + self.values[j + 1] * w)
    }
}

/// Central difference `(f(p0 + dp) - f(p0 - dp)) / 2 dp`.
pub fn smoothed_derivative(f: &impl MomentumProfile, p0: f64, dp: f64) -> Result<f64> {
    if !(dp.is_finite() && dp > 0.0) {
        return Err(Error::invalid("dp", "must be positive"));
    }
    let hi = f.sample(p0 + dp).ok_or(Error::StencilOutOfRange { p: p0 + dp })?;
    let lo = f.sample(p0 - dp).ok_or(Error::StencilOutOfRange { p: p0 - dp })?;
    Ok((hi - lo) / (2.0 * dp))
}

/// Scale-separation diagnostics of a wave function relative to a window.
///
/// `wavelength` is the reduced carrier wavelength `hbar / |p_dom|` at the
/// peak of the momentum distribution, or `None` when that peak sits at zero.
/// `envelope_scale` is the inverse RMS log-derivative of `|psi|` weighted by
/// `|psi|^2` (`2 sigma` for a Gaussian), or `None` for a constant modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub dominant_momentum: f64,
    pub wavelength: Option<f64>,
    pub envelope_scale: Option<f64>,
    pub wavelength_ratio: Option<f64>,
    pub envelope_ratio: f64,
}

impl ScaleReport {
    pub fn satisfied(&self) -> bool {
        matches!(self.wavelength_ratio, Some(r) if r <= SCALE_THRESHOLD) && self.envelope_ratio <= SCALE_THRESHOLD
    }

    /// `Err(ScaleCheckFailed)` describing the violated ratio.
    pub fn require(&self) -> Result<()> {
        if self.satisfied() {
            return Ok(());
        }
        let msg = match self.wavelength_ratio {
            None => "carrier momentum is zero, wavelength undefined".to_string(),
            Some(r) if r > SCALE_THRESHOLD => format!("wavelength / window = {r:.3} > {SCALE_THRESHOLD}"),
            _ => format!("window / envelope scale = {:.3} > {SCALE_THRESHOLD}", self.envelope_ratio),
        };
        Err(Error::ScaleCheckFailed(msg))
    }
}

pub fn scale_check(psi: &WaveFunction, grid: &PhaseSpaceGrid) -> ScaleReport {
    let hbar = psi.constants().hbar;
    let (ps, prob) = psi.momentum_distribution();
    let mut best = 0;
    for (j, &w) in prob.iter().enumerate() {
        if w > prob[best] {
            best = j;
        }
    }
    let p_dom = ps[best];
    let wavelength = (p_dom != 0.0).then(|| hbar / p_dom.abs());

    let dx = psi.grid().dx;
    let modulus: Vec<f64> = psi.values().iter().map(|z| z.norm()).collect();
    let n = modulus.len();
    let grad_sq = sum_compensated((1..n - 1).map(|i| {
        let d = (modulus[i + 1] - modulus[i - 1]) / (2.0 * dx);
        d * d
    }));
    let mass = sum_compensated(modulus[1..n - 1].iter().map(|m| m * m));
    let rms = if mass > 0.0 { (grad_sq / mass).sqrt() } else { 0.0 };
    let envelope_scale = (rms > 1e-300).then(|| 1.0 / rms);
    ScaleReport {
        dominant_momentum: p_dom,
        wavelength,
        envelope_scale,
        wavelength_ratio: wavelength.map(|l| l / grid.dx),
        envelope_ratio: grid.dx * rms,
    }
}
