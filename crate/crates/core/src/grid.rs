//! Grids, measures and physical constants shared by every solver.
//!
//! Spatial grids are uniform with a power-of-two point count so that the
//! spectral kinetic step and the window tiling line up exactly. Phase-space
//! grids are cell-centred; the measure of one cell is `dx * dp / (2 pi hbar)`,
//! so a density that integrates to one under this measure describes one
//! particle.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// hbar, mass and charge. Natural units (all one) by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
    pub charge: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0, charge: 1.0 }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64, charge: f64) -> Result<Self> {
        let c = Self { hbar, mass, charge };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hbar", self.hbar), ("mass", self.mass), ("charge", self.charge)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and positive, got {v}")));
            }
        }
        Ok(())
    }

    /// The phase-space measure denominator `2 pi hbar`.
    pub fn planck(&self) -> f64 {
        2.0 * PI * self.hbar
    }
}

/// Uniform spatial grid `x_i = x_min + i dx`, `i in 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialGrid {
    pub x_min: f64,
    pub dx: f64,
    pub n: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, dx: f64, n: usize) -> Result<Self> {
        let g = Self { x_min, dx, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx.is_finite() && self.dx > 0.0) {
            return Err(Error::invalid("dx", format!("must be positive, got {}", self.dx)));
        }
        if !self.x_min.is_finite() {
            return Err(Error::invalid("x_min", "must be finite"));
        }
        if self.n < 8 || !self.n.is_power_of_two() {
            return Err(Error::invalid("n", format!("must be a power of two >= 8, got {}", self.n)));
        }
        Ok(())
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// Periodic length `L = n dx`.
    pub fn length(&self) -> f64 {
        self.n as f64 * self.dx
    }

    /// Last sample point (not `x_min + L`, which is the periodic image of `x_min`).
    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }
}

/// Momenta conjugate to a [`SpatialGrid`], in ascending order
/// `p_j = 2 pi hbar j / L` for `j in [-n/2, n/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    values: Vec<f64>,
    spacing: f64,
}

impl MomentumGrid {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn p_max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn p_min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Momentum carried by FFT output bin `k` (standard wrap-around ordering).
    pub fn fft_bin(&self, k: usize) -> f64 {
        let n = self.values.len();
        let j = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
        j as f64 * self.spacing
    }
}

pub fn conjugate_momentum_grid(g: &SpatialGrid, c: &PhysicalConstants) -> MomentumGrid {
    let spacing = c.planck() / g.length();
    let half = (g.n / 2) as i64;
    let values = (-half..half).map(|j| j as f64 * spacing).collect();
    MomentumGrid { values, spacing }
}

/// Cached forward/inverse transforms for one grid size.
///
/// `forward` is unnormalized; `inverse` divides by `n`, so the pair is the
/// identity up to rounding.
#[derive(Clone)]
pub struct Fourier {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("n", &self.n).finish()
    }
}

impl Fourier {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let scale = 1.0 / self.n as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }
}

/// Treatment of the x axis of a phase-space grid when characteristics leave it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Density outside the grid is zero.
    #[default]
    Zero,
    /// The x axis wraps around.
    Periodic,
}

/// Cell-centred phase-space grid.
///
/// Cells are indexed `(ix, ip)`; x cell `ix` spans
/// `[x_min + ix dx, x_min + (ix + 1) dx)` and momentum row `ip` is centred at
/// `p_min + ip dp`. For envelope grids a cell is one window of width `dx`
/// and one momentum cell of width `dp = 2 * dp_half`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub x_min: f64,
    pub dx: f64,
    pub nx: usize,
    pub p_min: f64,
    pub dp: f64,
    pub np: usize,
    pub constants: PhysicalConstants,
    #[serde(default)]
    pub boundary: Boundary,
}

impl PhaseSpaceGrid {
    /// Grid from its left x edge, first momentum centre and cell sizes.
    pub fn new(
        x_min: f64,
        dx: f64,
        nx: usize,
        p_min: f64,
        dp: f64,
        np: usize,
        constants: PhysicalConstants,
    ) -> Result<Self> {
        let g = Self { x_min, dx, nx, p_min, dp, np, constants, boundary: Boundary::Zero };
        g.validate()?;
        Ok(g)
    }

    /// Grid covering `[x_lo, x_hi) x [p_lo, p_hi)` with `nx * np` cells.
    pub fn covering(
        (x_lo, x_hi): (f64, f64),
        nx: usize,
        (p_lo, p_hi): (f64, f64),
        np: usize,
        constants: PhysicalConstants,
    ) -> Result<Self> {
        if !(x_hi > x_lo && p_hi > p_lo) {
            return Err(Error::invalid("extent", "upper bounds must exceed lower bounds"));
        }
        let dx = (x_hi - x_lo) / nx as f64;
        let dp = (p_hi - p_lo) / np as f64;
        Self::new(x_lo, dx, nx, p_lo + 0.5 * dp, dp, np, constants)
    }

    /// Envelope grid tiling `spatial` with windows of `window_points` samples.
    ///
    /// Momentum cells have width `2 pi hbar / dx_window`, i.e. the half width
    /// `dp_half` satisfies `dx_window * dp_half = pi hbar`. Rows are centred
    /// on `p_offset + j dp`; `p_rows` defaults to `window_points`, which
    /// covers the whole Brillouin zone of the spatial grid.
    pub fn windows(
        spatial: &SpatialGrid,
        window_points: usize,
        p_offset: f64,
        p_rows: Option<usize>,
        constants: PhysicalConstants,
    ) -> Result<Self> {
        Self::windows_with_product(spatial, window_points, p_offset, p_rows, PI * constants.hbar, constants)
    }

    /// As [`PhaseSpaceGrid::windows`] with an explicit `dx_window * dp_half` product.
    pub fn windows_with_product(
        spatial: &SpatialGrid,
        window_points: usize,
        p_offset: f64,
        p_rows: Option<usize>,
        cell_product: f64,
        constants: PhysicalConstants,
    ) -> Result<Self> {
        spatial.validate()?;
        constants.validate()?;
        if window_points < 16 {
            return Err(Error::invalid(
                "window_points",
                format!("window must span at least 16 samples, got {window_points}"),
            ));
        }
        if spatial.n % window_points != 0 {
            return Err(Error::invalid(
                "window_points",
                format!("{window_points} does not divide the grid size {}", spatial.n),
            ));
        }
        if !(cell_product.is_finite() && cell_product > 0.0) {
            return Err(Error::invalid("cell_product", "must be positive"));
        }
        let width = window_points as f64 * spatial.dx;
        let dp = 2.0 * cell_product / width;
        let rows = p_rows.unwrap_or(window_points);
        if rows == 0 {
            return Err(Error::invalid("p_rows", "must be positive"));
        }
        let p_min = p_offset - (rows / 2) as f64 * dp;
        Self::new(spatial.x_min, width, spatial.n / window_points, p_min, dp, rows, constants)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if !(self.dx.is_finite() && self.dx > 0.0 && self.dp.is_finite() && self.dp > 0.0) {
            return Err(Error::invalid("cell size", "dx and dp must be positive"));
        }
        if self.nx == 0 || self.np == 0 {
            return Err(Error::invalid("cell count", "grid needs at least one cell per axis"));
        }
        if !(self.x_min.is_finite() && self.p_min.is_finite()) {
            return Err(Error::invalid("origin", "must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, ip: usize) -> usize {
        ix * self.np + ip
    }

    /// Left edge of x cell `ix` (the window start `x0` for envelope grids).
    #[inline]
    pub fn x_edge(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.dx
    }

    #[inline]
    pub fn x_center(&self, ix: usize) -> f64 {
        self.x_min + (ix as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn p_center(&self, ip: usize) -> f64 {
        self.p_min + ip as f64 * self.dp
    }

    pub fn x_centers(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x_center(i)).collect()
    }

    pub fn p_centers(&self) -> Vec<f64> {
        (0..self.np).map(|j| self.p_center(j)).collect()
    }

    /// Half width of a momentum cell; the indicator-kernel width.
    pub fn dp_half(&self) -> f64 {
        0.5 * self.dp
    }

    /// `dx dp / (2 pi hbar)`.
    pub fn cell_measure(&self) -> f64 {
        self.dx * self.dp / self.constants.planck()
    }

    /// x extent `[x_min, x_min + nx dx)`.
    pub fn x_range(&self) -> (f64, f64) {
        (self.x_min, self.x_min + self.nx as f64 * self.dx)
    }

    /// Row index mirrored through p = 0, if the momentum rows are symmetric.
    pub fn mirrored_row(&self, ip: usize) -> Option<usize> {
        let mirror = self.np - 1 - ip;
        let tol = 1e-9 * self.dp;
        ((self.p_center(ip) + self.p_center(mirror)).abs() <= tol).then_some(mirror)
    }

    pub fn has_symmetric_momenta(&self) -> bool {
        self.mirrored_row(0).is_some()
    }

    /// Same cell layout (constants and boundary may differ).
    pub fn same_layout(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.np == other.np
            && self.x_min == other.x_min
            && self.dx == other.dx
            && self.p_min == other.p_min
            && self.dp == other.dp
    }

    pub(crate) fn check_layout(&self, other: &Self) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch("phase-space grids have different cell layouts".into()))
        }
    }
}

/// Real nonnegative density on a [`PhaseSpaceGrid`], stored x-major
/// (`values[ix * np + ip]`).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceDensity {
    grid: PhaseSpaceGrid,
    values: Vec<f64>,
    pub time: f64,
}

impl PhaseSpaceDensity {
    pub fn new(grid: PhaseSpaceGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for a grid of {} cells", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let _ = i;
            return Err(Error::NonFinite("phase-space density"));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeDensity { index, value });
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: PhaseSpaceGrid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n], time: 0.0 }
    }

    /// Samples `f(x, p)` at cell centres. Negative samples are rejected.
    pub fn from_fn(grid: PhaseSpaceGrid, time: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for ix in 0..grid.nx {
            let x = grid.x_center(ix);
            for ip in 0..grid.np {
                values.push(f(x, grid.p_center(ip)));
            }
        }
        Self::new(grid, values, time)
    }

    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, ix: usize, ip: usize) -> f64 {
        self.values[self.grid.index(ix, ip)]
    }

    /// Momentum slice `f(x_ix, .)`.
    pub fn row(&self, ix: usize) -> &[f64] {
        let start = ix * self.grid.np;
        &self.values[start..start + self.grid.np]
    }

    /// Total mass `sum rho dx dp / (2 pi hbar)`.
    pub fn mass(&self) -> f64 {
        phase_space_mass(self)
    }

    /// Bilinear interpolation between cell centres. Outside the grid the
    /// density is zero in p, and zero or periodic in x according to the
    /// grid's [`Boundary`].
    pub fn interpolate(&self, x: f64, p: f64) -> f64 {
        let g = &self.grid;
        let u = (x - g.x_min) / g.dx - 0.5;
        let v = (p - g.p_min) / g.dp;
        let iu = u.floor();
        let iv = v.floor();
        let wu = u - iu;
        let wv = v - iv;
        let iu = iu as i64;
        let iv = iv as i64;
        let mut acc = 0.0;
        for (dxi, wx) in [(0, 1.0 - wu), (1, wu)] {
            if wx == 0.0 {
                continue;
            }
            let Some(ix) = self.resolve_x(iu + dxi) else { continue };
            for (dpi, wp) in [(0, 1.0 - wv), (1, wv)] {
                if wp == 0.0 {
                    continue;
                }
                let jp = iv + dpi;
                if jp < 0 || jp >= g.np as i64 {
                    continue;
                }
                acc += wx * wp * self.values[g.index(ix, jp as usize)];
            }
        }
        acc
    }

    fn resolve_x(&self, ix: i64) -> Option<usize> {
        let nx = self.grid.nx as i64;
        match self.grid.boundary {
            Boundary::Zero => (0..nx).contains(&ix).then_some(ix as usize),
            Boundary::Periodic => Some(ix.rem_euclid(nx) as usize),
        }
    }

    /// `sum |a - b| dmu`.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        self.grid.check_layout(&other.grid)?;
        let d = sum_compensated(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()));
        Ok(d * self.grid.cell_measure())
    }

    /// `(sum |a - b|^2 dmu)^(1/2)`.
    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        self.grid.check_layout(&other.grid)?;
        let d = sum_compensated(self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)));
        Ok((d * self.grid.cell_measure()).sqrt())
    }

    /// Gibbs entropy `-sum rho ln rho dmu` with `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        let s = sum_compensated(self.values.iter().map(|&v| if v > 0.0 { -v * v.ln() } else { 0.0 }));
        s * self.grid.cell_measure()
    }

    /// Mass-weighted centre `(<x>, <p>)`; `None` for a zero density.
    pub fn center(&self) -> Option<(f64, f64)> {
        self.center_where(|_, _| true)
    }

    /// Centre of the cells selected by `keep(ix, ip)`.
    pub fn center_where(&self, keep: impl Fn(usize, usize) -> bool) -> Option<(f64, f64)> {
        let g = &self.grid;
        let (mut m, mut mx, mut mp) = (0.0, 0.0, 0.0);
        for ix in 0..g.nx {
            for ip in 0..g.np {
                if !keep(ix, ip) {
                    continue;
                }
                let v = self.get(ix, ip);
                m += v;
                mx += v * g.x_center(ix);
                mp += v * g.p_center(ip);
            }
        }
        (m > 0.0).then(|| (mx / m, mp / m))
    }

    /// Mass of the cells selected by `keep(ix, ip)`.
    pub fn mass_where(&self, keep: impl Fn(usize, usize) -> bool) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for ix in 0..g.nx {
            for ip in 0..g.np {
                if keep(ix, ip) {
                    s += self.get(ix, ip);
                }
            }
        }
        s * g.cell_measure()
    }

    /// Time reversal `rho(x, p) -> rho(x, -p)`. Needs momentum rows that
    /// are symmetric about zero.
    pub fn momentum_reversed(&self) -> Result<Self> {
        let g = &self.grid;
        if !g.has_symmetric_momenta() {
            return Err(Error::GridMismatch("momentum rows are not symmetric about p = 0".into()));
        }
        let mut values = vec![0.0; g.len()];
        for ix in 0..g.nx {
            for ip in 0..g.np {
                values[g.index(ix, g.np - 1 - ip)] = self.get(ix, ip);
            }
        }
        Ok(Self { grid: g.clone(), values, time: self.time })
    }

    /// Same values on a grid with a different constants/boundary but equal layout.
    pub fn with_grid(self, grid: PhaseSpaceGrid) -> Result<Self> {
        self.grid.check_layout(&grid)?;
        Ok(Self { grid, values: self.values, time: self.time })
    }

    pub(crate) fn from_parts_unchecked(grid: PhaseSpaceGrid, values: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values, time }
    }
}

/// `sum rho dx dp / (2 pi hbar)` over all cells.
pub fn phase_space_mass(rho: &PhaseSpaceDensity) -> f64 {
    sum_compensated(rho.values.iter().copied()) * rho.grid.cell_measure()
}

/// Neumaier-compensated sum in iteration order (deterministic).
pub fn sum_compensated(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn momentum_spacing_for_eight_points() {
        let g = SpatialGrid::new(0.0, 1.0, 8).unwrap();
        let m = conjugate_momentum_grid(&g, &unit());
        assert!((m.spacing() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert_eq!(m.len(), 8);
        assert_eq!(m.values()[4], 0.0);
        assert!((m.spacing() * g.dx * g.n as f64 - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn nyquist_momentum() {
        let g = SpatialGrid::new(0.0, 0.05, 2048).unwrap();
        let m = conjugate_momentum_grid(&g, &unit());
        assert!((-m.p_min() - PI / 0.05).abs() < 1e-9);
        assert!((-m.p_min() - 62.83).abs() < 0.01);
    }

    #[test]
    fn doubling_points_halves_spacing() {
        let a = SpatialGrid::new(0.0, 0.1, 256).unwrap();
        let b = SpatialGrid::new(0.0, 0.1, 512).unwrap();
        let ma = conjugate_momentum_grid(&a, &unit());
        let mb = conjugate_momentum_grid(&b, &unit());
        assert!((ma.spacing() - 2.0 * mb.spacing()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SpatialGrid::new(0.0, 1.0, 12).is_err());
        assert!(SpatialGrid::new(0.0, 1.0, 4).is_err());
        assert!(SpatialGrid::new(0.0, -1.0, 16).is_err());
        assert!(PhysicalConstants::new(0.0, 1.0, 1.0).is_err());
        assert!(PhysicalConstants::new(1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn zero_density_has_zero_mass() {
        let g = PhaseSpaceGrid::covering((0.0, 1.0), 4, (-1.0, 1.0), 4, unit()).unwrap();
        assert_eq!(phase_space_mass(&PhaseSpaceDensity::zeros(g)), 0.0);
    }

    #[test]
    fn single_cell_of_planck_area_has_unit_mass() {
        let c = unit();
        let g = PhaseSpaceGrid::new(0.0, 1.0, 1, 0.0, c.planck(), 1, c).unwrap();
        let rho = PhaseSpaceDensity::new(g, vec![1.0], 0.0).unwrap();
        assert!((phase_space_mass(&rho) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fourier_round_trip() {
        let f = Fourier::new(256);
        let orig: Vec<Complex64> =
            (0..256).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let mut data = orig.clone();
        f.forward(&mut data);
        f.inverse(&mut data);
        let err: f64 = orig.iter().zip(&data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = orig.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / norm < 1e-12);
    }

    #[test]
    fn window_grid_geometry() {
        let s = SpatialGrid::new(-8.0, 0.25, 256).unwrap();
        let g = PhaseSpaceGrid::windows(&s, 16, 0.0, None, unit()).unwrap();
        assert_eq!(g.nx, 16);
        assert_eq!(g.np, 16);
        assert!((g.dx - 4.0).abs() < 1e-15);
        // dx_window * dp_half = pi hbar
        assert!((g.dx * g.dp_half() - PI).abs() < 1e-12);
        assert!((g.cell_measure() - 1.0).abs() < 1e-12);
        assert!(PhaseSpaceGrid::windows(&s, 8, 0.0, None, unit()).is_err());
        assert!(PhaseSpaceGrid::windows(&s, 48, 0.0, None, unit()).is_err());
    }

    #[test]
    fn interpolation_reproduces_cell_values() {
        let g = PhaseSpaceGrid::covering((0.0, 4.0), 4, (0.0, 4.0), 4, unit()).unwrap();
        let rho = PhaseSpaceDensity::from_fn(g.clone(), 0.0, |x, p| x + 2.0 * p).unwrap();
        for ix in 0..4 {
            for ip in 0..4 {
                assert_eq!(rho.interpolate(g.x_center(ix), g.p_center(ip)), rho.get(ix, ip));
            }
        }
        // bilinear is exact for bilinear data in the interior
        assert!((rho.interpolate(1.7, 2.2) - (1.7 + 4.4)).abs() < 1e-12);
    }

    #[test]
    fn periodic_interpolation_wraps() {
        let g =
            PhaseSpaceGrid::covering((0.0, 4.0), 4, (0.0, 1.0), 1, unit()).unwrap().with_boundary(Boundary::Periodic);
        let rho = PhaseSpaceDensity::new(g, vec![1.0, 2.0, 3.0, 4.0], 0.0).unwrap();
        // halfway between the last and the first centre
        assert!((rho.interpolate(4.0, 0.5) - 2.5).abs() < 1e-12);
        assert!((rho.interpolate(0.0, 0.5) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn negative_values_rejected() {
        let g = PhaseSpaceGrid::covering((0.0, 1.0), 1, (0.0, 1.0), 2, unit()).unwrap();
        assert!(matches!(
            PhaseSpaceDensity::new(g, vec![1.0, -1e-3], 0.0),
            Err(Error::NegativeDensity { index: 1, .. })
        ));
    }

    #[test]
    fn compensated_sum_is_exact_on_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum_compensated(v), 2.0);
    }
}
