use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::master::propagator_uniformized;
use super::rates::RateMatrix;
use crate::error::{Error, Result};
use crate::grid::{PhaseSpaceDensity, PhaseSpaceGrid};
use crate::liouville::{evolve_liouville, HamiltonianSpec};

/// x-uniform drifting Maxwellian with density `n`, drift velocity `u` and
/// momentum spread `sigma_p`, normalized so that
/// `sum_p f dp / (2 pi hbar) = n` in the continuum limit.
pub fn drifting_maxwellian(grid: &PhaseSpaceGrid, n: f64, u: f64, sigma_p: f64) -> Result<PhaseSpaceDensity> {
    if !(n.is_finite() && n >= 0.0 && u.is_finite() && sigma_p.is_finite() && sigma_p > 0.0) {
        return Err(Error::invalid("maxwellian", "n >= 0, finite drift and positive spread required"));
    }
    let c = grid.constants;
    let amp = n * c.planck() / (sigma_p * (2.0 * PI).sqrt());
    let p0 = c.mass * u;
    PhaseSpaceDensity::from_fn(grid.clone(), 0.0, |_, p| amp * (-0.5 * ((p - p0) / sigma_p).powi(2)).exp())
}

/// One Strang splitting plan: half streaming, local collisions, half streaming.
pub struct BoltzmannStep<'a> {
    hamiltonian: &'a HamiltonianSpec,
    collisions: Option<DMatrix<f64>>,
    steps: usize,
    t: f64,
    h: f64,
    dt: f64,
}

impl<'a> BoltzmannStep<'a> {
    /// Plans evolution over `t >= 0` in steps no longer than `dt`; `dt` also
    /// bounds the Verlet substeps of the streaming part.
    pub fn new(
        hamiltonian: &'a HamiltonianSpec,
        q: &RateMatrix,
        grid: &PhaseSpaceGrid,
        t: f64,
        dt: f64,
    ) -> Result<Self> {
        if q.len() != grid.np {
            return Err(Error::GridMismatch(format!("{}-state rate matrix for {} momentum rows", q.len(), grid.np)));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::invalid("t", "Boltzmann evolution runs forward in time only"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        let steps = if t == 0.0 { 0 } else { (t / dt).ceil().max(1.0) as usize };
        let h = if steps == 0 { 0.0 } else { t / steps as f64 };
        let collisions = (!q.is_zero() && steps > 0).then(|| propagator_uniformized(q, h));
        Ok(Self { hamiltonian, collisions, steps, t, h, dt })
    }

    pub fn run(&self, f0: &PhaseSpaceDensity) -> Result<PhaseSpaceDensity> {
        let Some(p) = &self.collisions else {
            return evolve_liouville(f0, self.hamiltonian, self.t, self.dt);
        };
        let mut f = evolve_liouville(f0, self.hamiltonian, 0.5 * self.h, self.dt)?;
        for s in 0..self.steps {
            f = collide(&f, p);
            let span = if s + 1 == self.steps { 0.5 * self.h } else { self.h };
            f = evolve_liouville(&f, self.hamiltonian, span, self.dt)?;
        }
        f.time = f0.time + self.t;
        Ok(f)
    }
}

fn collide(f: &PhaseSpaceDensity, p: &DMatrix<f64>) -> PhaseSpaceDensity {
    let g = f.grid().clone();
    let np = g.np;
    let mut values = vec![0.0; g.len()];
    values.par_chunks_mut(np).enumerate().for_each(|(ix, out)| {
        let col = f.row(ix);
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (l, v) in col.iter().enumerate() {
                acc += p[(k, l)] * v;
            }
            *o = acc;
        }
    });
    PhaseSpaceDensity::from_parts_unchecked(g, values, f.time)
}

/// Evolves `f0` for time `t` under streaming by `h` and collisions by `q`
/// acting on the momentum rows at every x.
///
/// A zero rate matrix reduces exactly to [`evolve_liouville`] with the same
/// `t` and `dt`.
pub fn evolve_boltzmann(
    f0: &PhaseSpaceDensity,
    h: &HamiltonianSpec,
    q: &RateMatrix,
    t: f64,
    dt: f64,
) -> Result<PhaseSpaceDensity> {
    BoltzmannStep::new(h, q, f0.grid(), t, dt)?.run(f0)
}
