use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sum_compensated, PhysicalConstants};

/// Discrete states with their energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    energies: Vec<f64>,
}

impl StateSpace {
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::invalid("energies", "at least two states are required"));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("energies", "must be finite"));
        }
        Ok(Self { energies })
    }

    /// Free-particle states `E = p^2 / 2m` on the given momentum cells.
    pub fn momentum_cells(momenta: &[f64], mass: f64) -> Result<Self> {
        Self::new(momenta.iter().map(|p| p * p / (2.0 * mass)).collect())
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// `(E_max - E_min) / (K - 1)`, the default broadening.
    pub fn mean_level_spacing(&self) -> f64 {
        let lo = self.energies.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / (self.energies.len() - 1) as f64
    }
}

/// Hermitian coupling matrix with zero diagonal, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    k: usize,
    values: Vec<Complex64>,
}

impl InteractionMatrix {
    pub fn new(k: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != k * k {
            return Err(Error::invalid("interaction", format!("{} entries for a {k}x{k} matrix", values.len())));
        }
        for i in 0..k {
            if values[i * k + i].norm() != 0.0 {
                return Err(Error::invalid("interaction", "diagonal entries must vanish"));
            }
            for j in i + 1..k {
                let (a, b) = (values[i * k + j], values[j * k + i]);
                if !(a.re.is_finite() && a.im.is_finite()) || (a - b.conj()).norm() > 1e-12 * a.norm().max(1.0) {
                    return Err(Error::invalid("interaction", format!("entry ({i}, {j}) breaks hermiticity")));
                }
            }
        }
        Ok(Self { k, values })
    }

    /// Every off-diagonal entry equal to `v`.
    pub fn uniform(k: usize, v: f64) -> Self {
        let values = (0..k * k)
            .map(|idx| if idx / k == idx % k { Complex64::new(0.0, 0.0) } else { Complex64::new(v, 0.0) })
            .collect();
        Self { k, values }
    }

    /// Random Hermitian couplings with moduli uniform in `[0, scale)` and
    /// uniform phases.
    pub fn random(k: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut values = vec![Complex64::new(0.0, 0.0); k * k];
        for i in 0..k {
            for j in i + 1..k {
                let r = scale * rng.random::<f64>();
                let th = 2.0 * PI * rng.random::<f64>();
                let z = Complex64::from_polar(r, th);
                values[i * k + j] = z;
                values[j * k + i] = z.conj();
            }
        }
        Self { k, values }
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.k + j]
    }
}

/// Unit-mass Gaussian `exp(-e^2 / 2 eta^2) / (eta sqrt(2 pi))`.
pub fn gaussian_delta(e: f64, eta: f64) -> f64 {
    (-0.5 * (e / eta).powi(2)).exp() / (eta * (2.0 * PI).sqrt())
}

/// Generator of a continuous-time Markov chain: nonnegative off-diagonal
/// rates, each diagonal entry minus its row's off-diagonal sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    k: usize,
    values: Vec<f64>,
    pub energies: Vec<f64>,
    pub eta: f64,
    pub hbar: f64,
}

impl RateMatrix {
    /// From off-diagonal rates (row-major, diagonal ignored and rebuilt).
    pub fn from_rates(k: usize, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != k * k || k < 2 {
            return Err(Error::invalid("rates", format!("{} entries for a {k}x{k} rate matrix", values.len())));
        }
        for i in 0..k {
            for j in 0..k {
                let v = values[i * k + j];
                if i != j && !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(
                        "rates",
                        format!("off-diagonal rate ({i}, {j}) = {v} must be nonnegative"),
                    ));
                }
            }
        }
        fill_diagonal(k, &mut values);
        Ok(Self { k, values, energies: Vec::new(), eta: 0.0, hbar: 1.0 })
    }

    pub fn zero(k: usize) -> Self {
        Self { k, values: vec![0.0; k * k], energies: Vec::new(), eta: 0.0, hbar: 1.0 }
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.k + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Largest `|sum_l Q_kl|` over rows.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.k)
            .map(|i| sum_compensated(self.values[i * self.k..(i + 1) * self.k].iter().copied()).abs())
            .fold(0.0, f64::max)
    }

    /// Largest total escape rate `max_k |Q_kk|`.
    pub fn max_escape_rate(&self) -> f64 {
        (0..self.k).map(|i| -self.get(i, i)).fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.k).all(|i| (i + 1..self.k).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

fn fill_diagonal(k: usize, values: &mut [f64]) {
    for i in 0..k {
        let row = &values[i * k..(i + 1) * k];
        let off = sum_compensated(row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v));
        values[i * k + i] = -off;
    }
}

/// Fermi-rule rates `Q_kl = (2 pi / hbar) |V_kl|^2 delta_eta(E_k - E_l)`.
///
/// `eta` defaults to the mean level spacing of `states` when `None`.
pub fn fermi_rates(
    v: &InteractionMatrix,
    states: &StateSpace,
    eta: Option<f64>,
    c: &PhysicalConstants,
) -> Result<RateMatrix> {
    let k = states.len();
    if v.len() != k {
        return Err(Error::GridMismatch(format!("{}x{} interaction for {k} states", v.len(), v.len())));
    }
    let eta = match eta {
        Some(e) => e,
        None => states.mean_level_spacing(),
    };
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::invalid("eta", format!("broadening must be positive, got {eta}")));
    }
    let e = states.energies();
    let mut values = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                values[i * k + j] = 2.0 * PI / c.hbar * v.get(i, j).norm_sqr() * gaussian_delta(e[i] - e[j], eta);
            }
        }
    }
    fill_diagonal(k, &mut values);
    Ok(RateMatrix { k, values, energies: e.to_vec(), eta, hbar: c.hbar })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coupling_gives_zero_rates() {
        let s = StateSpace::new(vec![0.0, 1.0, 2.0]).unwrap();
        let q = fermi_rates(&InteractionMatrix::uniform(3, 0.0), &s, Some(0.5), &PhysicalConstants::default()).unwrap();
        assert!(q.is_zero());
    }

    #[test]
    fn degenerate_pair_closed_form() {
        let s = StateSpace::new(vec![1.0, 1.0]).unwrap();
        let (v, eta) = (0.3, 0.2);
        let q = fermi_rates(&InteractionMatrix::uniform(2, v), &s, Some(eta), &PhysicalConstants::default()).unwrap();
        let expect = 2.0 * PI * v * v / (eta * (2.0 * PI).sqrt());
        assert!((q.get(0, 1) - expect).abs() < 1e-14);
        assert_eq!(q.get(0, 1), q.get(1, 0));
        assert_eq!(q.max_row_sum(), 0.0);
    }

    #[test]
    fn far_detuned_pair_is_suppressed() {
        let eta = 0.1;
        let s = StateSpace::new(vec![0.0, 10.0 * eta]).unwrap();
        let q = fermi_rates(&InteractionMatrix::uniform(2, 1.0), &s, Some(eta), &PhysicalConstants::default()).unwrap();
        assert!(q.get(0, 1) < 1e-20);
    }

    #[test]
    fn rejects_non_hermitian_and_negative_rates() {
        let z = Complex64::new(0.0, 0.0);
        let bad = vec![z, Complex64::new(1.0, 1.0), Complex64::new(1.0, 1.0), z];
        assert!(InteractionMatrix::new(2, bad).is_err());
        assert!(RateMatrix::from_rates(2, vec![0.0, -1.0, 1.0, 0.0]).is_err());
    }
}
