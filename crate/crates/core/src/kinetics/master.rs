//! `d rho_k / dt = sum_l Q_lk rho_l`, i.e. `rho' = Q^T rho`.

use nalgebra::{DMatrix, DVector};

use super::rates::RateMatrix;
use crate::error::{Error, Result};
use crate::grid::sum_compensated;

/// Up to this many states [`evolve_master`] uses the matrix exponential.
pub const EXPM_MAX_STATES: usize = 64;

/// Poisson mass per uniformization substep.
const SUBSTEP_LOAD: f64 = 8.0;
const TAIL: f64 = 1e-17;

fn check_input(rho0: &[f64], q: &RateMatrix, t: f64) -> Result<()> {
    if rho0.len() != q.len() {
        return Err(Error::GridMismatch(format!("{} occupations for {} states", rho0.len(), q.len())));
    }
    if let Some((index, &value)) = rho0.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeOccupation { index, value });
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("t", "master evolution runs forward in time only"));
    }
    Ok(())
}

/// Solves the master equation from `rho0` for time `t >= 0`.
///
/// Uses the matrix exponential for up to [`EXPM_MAX_STATES`] states and
/// uniformization beyond.
pub fn evolve_master(rho0: &[f64], q: &RateMatrix, t: f64) -> Result<Vec<f64>> {
    if q.len() <= EXPM_MAX_STATES {
        evolve_master_expm(rho0, q, t)
    } else {
        evolve_master_uniformized(rho0, q, t)
    }
}

fn generator(q: &RateMatrix) -> DMatrix<f64> {
    let k = q.len();
    DMatrix::from_fn(k, k, |i, j| q.get(j, i))
}

/// `exp(Q^T t)` by scaling and squaring.
pub fn propagator_expm(q: &RateMatrix, t: f64) -> DMatrix<f64> {
    (generator(q) * t).exp()
}

pub fn evolve_master_expm(rho0: &[f64], q: &RateMatrix, t: f64) -> Result<Vec<f64>> {
    check_input(rho0, q, t)?;
    let out = propagator_expm(q, t) * DVector::from_column_slice(rho0);
    finish(out.as_slice())
}

fn finish(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("occupations"));
    }
    Ok(v.to_vec())
}

/// Uniformization: with `lambda >= max |Q_kk|`, `P = I + Q^T / lambda` is
/// a nonnegative column-stochastic matrix and
/// `exp(Q^T t) = sum_n Poisson(n; lambda t) P^n`. Every term is
/// nonnegative, so occupations stay nonnegative.
struct Uniformized {
    p: DMatrix<f64>,
    lambda: f64,
}

impl Uniformized {
    fn new(q: &RateMatrix) -> Self {
        let k = q.len();
        let lambda = q.max_escape_rate();
        let p = if lambda > 0.0 {
            DMatrix::from_fn(k, k, |i, j| {
                let base = q.get(j, i) / lambda;
                if i == j {
                    // 1 + Q_ii / lambda, clamped against rounding below zero
                    (1.0 + base).max(0.0)
                } else {
                    base
                }
            })
        } else {
            DMatrix::identity(k, k)
        };
        Self { p, lambda }
    }

    /// Applies `exp(Q^T t)` to each column of `x`.
    fn apply(&self, mut x: DMatrix<f64>, t: f64) -> DMatrix<f64> {
        if self.lambda == 0.0 || t == 0.0 {
            return x;
        }
        let total = self.lambda * t;
        let substeps = (total / SUBSTEP_LOAD).ceil().max(1.0) as usize;
        let load = total / substeps as f64;
        for _ in 0..substeps {
            x = self.poisson_series(&x, load);
        }
        x
    }

    fn poisson_series(&self, x: &DMatrix<f64>, load: f64) -> DMatrix<f64> {
        let mut weight = (-load).exp();
        let mut cumulative = weight;
        let mut term = x.clone();
        let mut acc = x * weight;
        let max_terms = (load + 12.0 * load.sqrt() + 40.0) as usize;
        for n in 1..=max_terms {
            term = &self.p * &term;
            weight *= load / n as f64;
            acc += &term * weight;
            cumulative += weight;
            if 1.0 - cumulative < TAIL && n as f64 > load {
                break;
            }
        }
        acc
    }
}

/// `exp(Q^T t)` by uniformization; entries are nonnegative.
pub fn propagator_uniformized(q: &RateMatrix, t: f64) -> DMatrix<f64> {
    let k = q.len();
    Uniformized::new(q).apply(DMatrix::identity(k, k), t)
}

pub fn evolve_master_uniformized(rho0: &[f64], q: &RateMatrix, t: f64) -> Result<Vec<f64>> {
    check_input(rho0, q, t)?;
    let x = DMatrix::from_column_slice(rho0.len(), 1, rho0);
    let out = Uniformized::new(q).apply(x, t);
    finish(out.as_slice())
}

/// `-sum rho ln rho` with `0 ln 0 = 0`.
pub fn entropy(rho: &[f64]) -> f64 {
    sum_compensated(rho.iter().map(|&r| if r > 0.0 { -r * r.ln() } else { 0.0 }))
}
