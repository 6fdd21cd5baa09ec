//! Classical transport of phase-space densities along Hamilton's flow.
//!
//! Trajectories use velocity Verlet. Densities are moved semi-Lagrangian:
//! every target cell centre is traced back to time zero and the initial
//! density is interpolated bilinearly there.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sum_compensated, Boundary, PhaseSpaceDensity, PhaseSpaceGrid};
use crate::schrodinger::PotentialSpec;

/// Upper limit on `|t| / dt` for one trajectory.
pub const MAX_STEPS: f64 = 1e7;

/// Mass fraction in a boundary line of cells above which characteristics
/// leaving through that side are treated as an error.
pub const OUTFLOW_TOLERANCE: f64 = 1e-6;

/// `H(x, p) = p^2 / 2m + U(x)` for a smooth `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    mass: f64,
    potential: PotentialSpec,
}

impl HamiltonianSpec {
    /// Rejects potentials flagged sharp.
    pub fn new(mass: f64, potential: PotentialSpec) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::invalid("mass", "must be positive"));
        }
        potential.validate()?;
        if !potential.is_smooth() {
            return Err(Error::SharpPotential);
        }
        Ok(Self { mass, potential })
    }

    pub fn free(mass: f64) -> Result<Self> {
        Self::new(mass, PotentialSpec::Free)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn energy(&self, x: f64, p: f64) -> f64 {
        p * p / (2.0 * self.mass) + self.potential.value(x)
    }

    pub fn dh_dx(&self, x: f64) -> f64 {
        self.potential.gradient(x)
    }

    pub fn dh_dp(&self, p: f64) -> f64 {
        p / self.mass
    }

    pub fn is_free(&self) -> bool {
        match &self.potential {
            PotentialSpec::Free => true,
            PotentialSpec::Sum { terms } => terms.iter().all(|t| matches!(t, PotentialSpec::Free)),
            _ => false,
        }
    }

    /// One velocity-Verlet step of signed size `h`.
    #[inline]
    fn verlet(&self, x: f64, p: f64, h: f64) -> (f64, f64) {
        let p_half = p - 0.5 * h * self.dh_dx(x);
        let x1 = x + h * p_half / self.mass;
        let p1 = p_half - 0.5 * h * self.dh_dx(x1);
        (x1, p1)
    }
}

/// Sampled trajectory with the density value it carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characteristic {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub rho: f64,
}

impl Characteristic {
    pub fn end(&self) -> (f64, f64) {
        (*self.x.last().unwrap_or(&f64::NAN), *self.p.last().unwrap_or(&f64::NAN))
    }

    /// Phase-space point at time `t` by linear interpolation between samples.
    pub fn at(&self, t: f64) -> Option<(f64, f64)> {
        let n = self.t.len();
        if n == 0 {
            return None;
        }
        let forward = self.t[n - 1] >= self.t[0];
        let key = |s: f64| if forward { s } else { -s };
        let k = self.t.partition_point(|&s| key(s) < key(t));
        if k == 0 {
            return (key(t) >= key(self.t[0]) - 1e-12).then(|| (self.x[0], self.p[0]));
        }
        if k == n {
            return ((key(t) - key(self.t[n - 1])).abs() <= 1e-12 * key(t).abs().max(1.0))
                .then(|| (self.x[n - 1], self.p[n - 1]));
        }
        let w = (t - self.t[k - 1]) / (self.t[k] - self.t[k - 1]);
        Some((self.x[k - 1] + w * (self.x[k] - self.x[k - 1]), self.p[k - 1] + w * (self.p[k] - self.p[k - 1])))
    }
}

fn step_plan(t: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    if !t.is_finite() {
        return Err(Error::invalid("t", "must be finite"));
    }
    if t.abs() / dt > MAX_STEPS {
        return Err(Error::invalid("dt", format!("|t| / dt = {:.3e} exceeds {MAX_STEPS:e}", t.abs() / dt)));
    }
    if t == 0.0 {
        return Ok((0, 0.0));
    }
    let n = (t.abs() / dt).ceil().max(1.0) as usize;
    Ok((n, t / n as f64))
}

/// Integrates Hamilton's equations from `(x0, p0)` for signed time `t`
/// with steps no longer than `dt`, recording every step.
pub fn hamilton_flow(x0: f64, p0: f64, t: f64, dt: f64, h: &HamiltonianSpec) -> Result<Characteristic> {
    let (n, step) = step_plan(t, dt)?;
    let mut out = Characteristic {
        t: Vec::with_capacity(n + 1),
        x: Vec::with_capacity(n + 1),
        p: Vec::with_capacity(n + 1),
        rho: 0.0,
    };
    let (mut x, mut p) = (x0, p0);
    out.t.push(0.0);
    out.x.push(x);
    out.p.push(p);
    for k in 1..=n {
        (x, p) = h.verlet(x, p, step);
        if !(x.is_finite() && p.is_finite()) {
            return Err(Error::NonFinite("characteristic"));
        }
        out.t.push(if k == n { t } else { k as f64 * step });
        out.x.push(x);
        out.p.push(p);
    }
    Ok(out)
}

/// Time-`t` flow map evaluated on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub hamiltonian: HamiltonianSpec,
    pub t: f64,
    pub dt: f64,
}

impl FlowMap {
    pub fn new(hamiltonian: HamiltonianSpec, t: f64, dt: f64) -> Result<Self> {
        step_plan(t, dt)?;
        Ok(Self { hamiltonian, t, dt })
    }

    pub fn apply(&self, x: f64, p: f64) -> (f64, f64) {
        let (n, step) = step_plan(self.t, self.dt).expect("validated at construction");
        flow_point(&self.hamiltonian, x, p, n, step)
    }

    pub fn inverse(&self) -> Self {
        Self { hamiltonian: self.hamiltonian.clone(), t: -self.t, dt: self.dt }
    }
}

#[inline]
fn flow_point(h: &HamiltonianSpec, mut x: f64, mut p: f64, n: usize, step: f64) -> (f64, f64) {
    if h.is_free() {
        return (x + n as f64 * step * p / h.mass, p);
    }
    for _ in 0..n {
        (x, p) = h.verlet(x, p, step);
    }
    (x, p)
}

/// Determinant of the flow map's Jacobian by central differences.
pub fn flow_jacobian(x0: f64, p0: f64, t: f64, dt: f64, h: &HamiltonianSpec) -> Result<f64> {
    let (n, step) = step_plan(t, dt)?;
    let ex = 1e-5 * x0.abs().max(1.0);
    let ep = 1e-5 * p0.abs().max(1.0);
    let f = |x: f64, p: f64| flow_point(h, x, p, n, step);
    let (xa, pa) = f(x0 + ex, p0);
    let (xb, pb) = f(x0 - ex, p0);
    let (xc, pc) = f(x0, p0 + ep);
    let (xd, pd) = f(x0, p0 - ep);
    let j = [[(xa - xb) / (2.0 * ex), (xc - xd) / (2.0 * ep)], [(pa - pb) / (2.0 * ex), (pc - pd) / (2.0 * ep)]];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if !det.is_finite() {
        return Err(Error::NonFinite("flow jacobian"));
    }
    Ok(det)
}

/// Fraction of the mass that sits in the outermost ring of cells (the x
/// ring is skipped on periodic grids).
pub fn boundary_mass_fraction(rho: &PhaseSpaceDensity) -> f64 {
    let g = rho.grid();
    let total = sum_compensated(rho.values().iter().copied());
    if total <= 0.0 {
        return 0.0;
    }
    let x_edge = g.boundary == Boundary::Zero;
    let ring = rho.mass_where(|ix, ip| ip == 0 || ip + 1 == g.np || (x_edge && (ix == 0 || ix + 1 == g.nx)));
    ring / (total * g.cell_measure())
}

/// Which grid sides a foot point lies beyond: `[x_low, x_high, p_low, p_high]`.
fn exits(g: &PhaseSpaceGrid, x: f64, p: f64) -> [bool; 4] {
    let (lo, hi) = g.x_range();
    let zero = g.boundary == Boundary::Zero;
    let p_lo = g.p_min - 0.5 * g.dp;
    let p_hi = g.p_center(g.np - 1) + 0.5 * g.dp;
    [zero && x < lo, zero && x > hi, p < p_lo, p > p_hi]
}

/// Mass fraction in the outermost cell line on each side, in the order of [`exits`].
fn side_mass_fractions(rho: &PhaseSpaceDensity) -> [f64; 4] {
    let g = rho.grid();
    let total = rho.mass();
    if total <= 0.0 {
        return [0.0; 4];
    }
    [
        rho.mass_where(|ix, _| ix == 0) / total,
        rho.mass_where(|ix, _| ix + 1 == g.nx) / total,
        rho.mass_where(|_, ip| ip == 0) / total,
        rho.mass_where(|_, ip| ip + 1 == g.np) / total,
    ]
}

/// Transports `rho0` for signed time `t`: `rho(z, t) = rho0(Phi_{-t}(z))`.
///
/// Each cell centre is traced back with Verlet steps no longer than `dt`
/// and `rho0` is interpolated bilinearly at the foot of the characteristic.
/// Fails with [`Error::Outflow`] when foot points leave the grid through a
/// side whose outermost line of cells holds more than `1e-6` of the mass.
pub fn evolve_liouville(rho0: &PhaseSpaceDensity, h: &HamiltonianSpec, t: f64, dt: f64) -> Result<PhaseSpaceDensity> {
    let (n, step) = step_plan(-t, dt)?;
    let g = rho0.grid().clone();
    let feet: Vec<(f64, f64)> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let (ix, ip) = (k / g.np, k % g.np);
            flow_point(h, g.x_center(ix), g.p_center(ip), n, step)
        })
        .collect();
    let mut crossed = [false; 4];
    for &(x, p) in &feet {
        for (c, e) in crossed.iter_mut().zip(exits(&g, x, p)) {
            *c |= e;
        }
    }
    if crossed.iter().any(|&c| c) {
        let sides = side_mass_fractions(rho0);
        let mass = (0..4).filter(|&s| crossed[s]).map(|s| sides[s]).fold(0.0, f64::max);
        if mass > OUTFLOW_TOLERANCE {
            return Err(Error::Outflow { mass });
        }
    }
    let values: Vec<f64> = feet.par_iter().map(|&(x, p)| rho0.interpolate(x, p)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("transported density"));
    }
    let out = PhaseSpaceDensity::from_parts_unchecked(g, values, rho0.time + t);
    let m0 = rho0.mass();
    if m0 > 0.0 {
        log::debug!("liouville mass drift {:.3e}", (out.mass() - m0) / m0);
    }
    Ok(out)
}

/// Bilinear interpolation error estimate `sum (|d2x rho| + |d2p rho|) / 8 dmu`
/// from one-sided-free second differences over interior cells.
pub fn interpolation_bound(rho: &PhaseSpaceDensity) -> f64 {
    let g = rho.grid();
    let mut terms = Vec::with_capacity(g.len());
    for ix in 0..g.nx {
        for ip in 0..g.np {
            terms.push(second_differences(rho, ix, ip) / 8.0);
        }
    }
    sum_compensated(terms) * g.cell_measure()
}

/// Pointwise version of [`interpolation_bound`]: the largest
/// `(|d2x rho| + |d2p rho|) / 8` over the grid.
pub fn interpolation_bound_max(rho: &PhaseSpaceDensity) -> f64 {
    let g = rho.grid();
    let mut m = 0.0f64;
    for ix in 0..g.nx {
        for ip in 0..g.np {
            m = m.max(second_differences(rho, ix, ip) / 8.0);
        }
    }
    m
}

fn second_differences(rho: &PhaseSpaceDensity, ix: usize, ip: usize) -> f64 {
    let g = rho.grid();
    let at = |i: i64, j: i64| -> f64 {
        let i = match g.boundary {
            Boundary::Periodic => i.rem_euclid(g.nx as i64),
            Boundary::Zero => i,
        };
        if i < 0 || j < 0 || i >= g.nx as i64 || j >= g.np as i64 {
            0.0
        } else {
            rho.get(i as usize, j as usize)
        }
    };
    let (i, j) = (ix as i64, ip as i64);
    let c = at(i, j);
    (at(i + 1, j) - 2.0 * c + at(i - 1, j)).abs() + (at(i, j + 1) - 2.0 * c + at(i, j - 1)).abs()
}

/// Hamiltonian over several degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub enum NdHamiltonian {
    /// Sum of one-dimensional Hamiltonians, one per axis.
    Separable(Vec<HamiltonianSpec>),
    /// Axes coupled through the potential; not supported by the solver.
    Coupled { axes: usize, description: String },
}

/// `sum_r w_r prod_a rho_{r,a}(x_a, p_a)`: a low-rank density over up to
/// three degrees of freedom, each factor living on its own axis grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableDensity {
    terms: Vec<(f64, Vec<PhaseSpaceDensity>)>,
}

impl SeparableDensity {
    pub fn new(terms: Vec<(f64, Vec<PhaseSpaceDensity>)>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::invalid("terms", "at least one product term is required"))?;
        let axes = first.1.len();
        if axes == 0 || axes > 3 {
            return Err(Error::invalid("axes", format!("1 to 3 degrees of freedom supported, got {axes}")));
        }
        for (w, factors) in &terms {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::invalid("weight", "term weights must be nonnegative"));
            }
            if factors.len() != axes {
                return Err(Error::GridMismatch("product terms have different numbers of axes".into()));
            }
            for (a, f) in factors.iter().enumerate() {
                f.grid().check_layout(first.1[a].grid())?;
            }
        }
        Ok(Self { terms })
    }

    pub fn product(factors: Vec<PhaseSpaceDensity>) -> Result<Self> {
        Self::new(vec![(1.0, factors)])
    }

    pub fn axes(&self) -> usize {
        self.terms[0].1.len()
    }

    pub fn terms(&self) -> &[(f64, Vec<PhaseSpaceDensity>)] {
        &self.terms
    }

    pub fn axis_grid(&self, a: usize) -> &PhaseSpaceGrid {
        self.terms[0].1[a].grid()
    }

    /// Density at cell `(ix_a, ip_a)` on every axis.
    pub fn value(&self, cells: &[(usize, usize)]) -> f64 {
        self.terms
            .iter()
            .map(|(w, fs)| w * fs.iter().zip(cells).map(|(f, &(ix, ip))| f.get(ix, ip)).product::<f64>())
            .sum()
    }

    pub fn mass(&self) -> f64 {
        self.terms.iter().map(|(w, fs)| w * fs.iter().map(PhaseSpaceDensity::mass).product::<f64>()).sum()
    }

    fn axis_sizes(&self) -> Vec<usize> {
        (0..self.axes()).map(|a| self.axis_grid(a).len()).collect()
    }

    fn for_each_cell(&self, mut f: impl FnMut(&[(usize, usize)])) {
        let sizes = self.axis_sizes();
        let total: usize = sizes.iter().product();
        let mut cells = vec![(0usize, 0usize); sizes.len()];
        for mut k in 0..total {
            for (a, &s) in sizes.iter().enumerate().rev() {
                let flat = k % s;
                k /= s;
                let np = self.axis_grid(a).np;
                cells[a] = (flat / np, flat % np);
            }
            f(&cells);
        }
    }

    fn measure(&self) -> f64 {
        (0..self.axes()).map(|a| self.axis_grid(a).cell_measure()).product()
    }

    /// L1 distance over the full tensor grid (cost grows as the product of
    /// the axis sizes).
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        if self.axes() != other.axes() {
            return Err(Error::GridMismatch("different numbers of axes".into()));
        }
        for a in 0..self.axes() {
            self.axis_grid(a).check_layout(other.axis_grid(a))?;
        }
        let mut acc = Vec::new();
        self.for_each_cell(|cells| acc.push((self.value(cells) - other.value(cells)).abs()));
        Ok(sum_compensated(acc) * self.measure())
    }

    /// Largest `|rho(z_1, z_2, ...) - rho(z_2, z_1, ...)|` over all cells,
    /// for densities whose first two axes share a layout.
    pub fn exchange_asymmetry(&self) -> Result<f64> {
        if self.axes() < 2 || !self.axis_grid(0).same_layout(self.axis_grid(1)) {
            return Err(Error::GridMismatch("exchange needs two axes with equal grids".into()));
        }
        let mut worst = 0.0f64;
        self.for_each_cell(|cells| {
            let mut swapped = cells.to_vec();
            swapped.swap(0, 1);
            worst = worst.max((self.value(cells) - self.value(&swapped)).abs());
        });
        Ok(worst)
    }
}

/// Applies [`evolve_liouville`] to every factor with its axis Hamiltonian.
/// Exact for separable dynamics; coupled Hamiltonians are rejected.
pub fn evolve_liouville_nd(rho0: &SeparableDensity, h: &NdHamiltonian, t: f64, dt: f64) -> Result<SeparableDensity> {
    let axes = match h {
        NdHamiltonian::Separable(axes) => axes,
        NdHamiltonian::Coupled { description, .. } => return Err(Error::NonSeparable(description.clone())),
    };
    if axes.len() != rho0.axes() {
        return Err(Error::NonSeparable(format!(
            "{} axis Hamiltonians for a {}-axis density",
            axes.len(),
            rho0.axes()
        )));
    }
    let terms = rho0
        .terms
        .iter()
        .map(|(w, fs)| {
            let moved =
                fs.iter().zip(axes).map(|(f, ha)| evolve_liouville(f, ha, t, dt)).collect::<Result<Vec<_>>>()?;
            Ok((*w, moved))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeparableDensity { terms })
}
