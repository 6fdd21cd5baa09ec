//! Determinant and permanent carriers for a handful of particles, and the
//! algebraic identities that let a symmetric envelope pass through the
//! many-body kinetic operator.
//!
//! The carrier matrix has entries `M[k][l] = exp(i p_k x_l / hbar)`: rows
//! are momenta, columns are coordinates. The carrier is `Det M / n!` for
//! fermions and `Perm M / n!` for bosons. Indices are zero-based.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::{smoothed_derivative, MomentumProfile, Window};
use crate::error::{Error, Result};

/// Largest supported particle number.
pub const MAX_PARTICLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Fermion,
    Boson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierState {
    statistics: Statistics,
    momenta: Vec<f64>,
    hbar: f64,
}

impl CarrierState {
    pub fn new(statistics: Statistics, momenta: Vec<f64>, hbar: f64) -> Result<Self> {
        let n = momenta.len();
        if n == 0 || n > MAX_PARTICLES {
            return Err(Error::invalid("momenta", format!("1 to {MAX_PARTICLES} particles supported, got {n}")));
        }
        if !(hbar.is_finite() && hbar > 0.0) || momenta.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("momenta", "momenta and hbar must be finite, hbar positive"));
        }
        if statistics == Statistics::Fermion {
            for i in 0..n {
                for j in i + 1..n {
                    if momenta[i] == momenta[j] {
                        return Err(Error::DuplicateMomenta(i, j));
                    }
                }
            }
        }
        Ok(Self { statistics, momenta, hbar })
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    pub fn len(&self) -> usize {
        self.momenta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.momenta.is_empty()
    }

    /// `phi_k(x) = exp(i p_k x / hbar)`.
    pub fn phi(&self, k: usize, x: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.momenta[k] * x / self.hbar)
    }

    fn check_coords(&self, xs: &[f64]) -> Result<()> {
        if xs.len() != self.len() {
            return Err(Error::invalid("xs", format!("{} coordinates for {} particles", xs.len(), self.len())));
        }
        Ok(())
    }

    fn matrix(&self, xs: &[f64]) -> DMatrix<Complex64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |k, l| self.phi(k, xs[l]))
    }

    fn combine(&self, m: DMatrix<Complex64>) -> Complex64 {
        match self.statistics {
            Statistics::Fermion => determinant(m),
            Statistics::Boson => permanent(&m),
        }
    }

    /// Cofactor sign for fermions, one for bosons.
    fn sign(&self, k: usize, l: usize) -> f64 {
        match self.statistics {
            Statistics::Fermion if (k + l) % 2 == 1 => -1.0,
            _ => 1.0,
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn determinant(m: DMatrix<Complex64>) -> Complex64 {
    if m.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    m.lu().determinant()
}

/// Ryser's formula with a Gray-code walk over column subsets.
pub fn permanent(m: &DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray = 0usize;
    for step in 1..(1usize << n) {
        let next = step ^ (step >> 1);
        let col = (gray ^ next).trailing_zeros() as usize;
        let adding = next & (1 << col) != 0;
        for (i, s) in row_sums.iter_mut().enumerate() {
            if adding {
                *s += m[(i, col)];
            } else {
                *s -= m[(i, col)];
            }
        }
        gray = next;
        let prod: Complex64 = row_sums.iter().product();
        let size = next.count_ones() as usize;
        if (n - size) % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}

/// `Det[phi_k(x_l)] / n!` (fermions) or `Perm[phi_k(x_l)] / n!` (bosons).
pub fn carrier_value(s: &CarrierState, xs: &[f64]) -> Result<Complex64> {
    s.check_coords(xs)?;
    Ok(s.combine(s.matrix(xs)) / factorial(s.len()))
}

/// Determinant (or permanent) of the carrier matrix with row `i` and
/// column `j` removed. Zero-based indices.
pub fn minor_value(s: &CarrierState, xs: &[f64], i: usize, j: usize) -> Result<Complex64> {
    s.check_coords(xs)?;
    let n = s.len();
    if n < 2 {
        return Err(Error::invalid("n", "minors need at least two particles"));
    }
    if i >= n || j >= n {
        return Err(Error::IndexOutOfRange { row: i, col: j, n });
    }
    Ok(raw_minor(s, xs, i, j))
}

fn raw_minor(s: &CarrierState, xs: &[f64], i: usize, j: usize) -> Complex64 {
    let m = s.matrix(xs).remove_row(i).remove_column(j);
    s.combine(m)
}

/// Test amplitudes `A(x_1, ..., x_n)` with closed-form derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeFunctionND {
    /// `exp(-alpha (sum x)^2)`.
    GaussianOfSum { alpha: f64 },
    /// `cos(k sum x)`.
    CosineOfSum { wavenumber: f64 },
    /// `exp(-alpha (sum w_i x_i)^2)`; symmetric only when all weights agree.
    WeightedGaussian { weights: Vec<f64>, alpha: f64 },
}

impl EnvelopeFunctionND {
    fn weight(&self, i: usize) -> f64 {
        match self {
            EnvelopeFunctionND::WeightedGaussian { weights, .. } => weights.get(i).copied().unwrap_or(1.0),
            _ => 1.0,
        }
    }

    fn argument(&self, xs: &[f64]) -> f64 {
        xs.iter().enumerate().map(|(i, x)| self.weight(i) * x).sum()
    }

    pub fn value(&self, xs: &[f64]) -> f64 {
        let u = self.argument(xs);
        match self {
            EnvelopeFunctionND::GaussianOfSum { alpha } | EnvelopeFunctionND::WeightedGaussian { alpha, .. } => {
                (-alpha * u * u).exp()
            }
            EnvelopeFunctionND::CosineOfSum { wavenumber } => (wavenumber * u).cos(),
        }
    }

    /// `dA/dx_l`.
    pub fn derivative(&self, xs: &[f64], l: usize) -> f64 {
        let u = self.argument(xs);
        let outer = match self {
            EnvelopeFunctionND::GaussianOfSum { alpha } | EnvelopeFunctionND::WeightedGaussian { alpha, .. } => {
                -2.0 * alpha * u * (-alpha * u * u).exp()
            }
            EnvelopeFunctionND::CosineOfSum { wavenumber } => -wavenumber * (wavenumber * u).sin(),
        };
        outer * self.weight(l)
    }

    /// Central difference `(A(x + h e_l) - A(x - h e_l)) / 2h`.
    pub fn central_derivative(&self, xs: &[f64], l: usize, h: f64) -> f64 {
        let mut a = xs.to_vec();
        let mut b = xs.to_vec();
        a[l] += h;
        b[l] -= h;
        (self.value(&a) - self.value(&b)) / (2.0 * h)
    }

    /// All partial derivatives agree wherever they are evaluated.
    pub fn is_symmetric(&self) -> bool {
        match self {
            EnvelopeFunctionND::WeightedGaussian { weights, .. } => weights.windows(2).all(|w| w[0] == w[1]),
            _ => true,
        }
    }
}

/// How the envelope derivatives on the expanded side are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Derivatives {
    Analytic,
    Central { h: f64 },
}

/// Relative residual of the kinetic cross-term identity
///
/// `sum_l dA/dx_l * D_l = (sum_l p_l dA/dx_l) * psi`
///
/// where `D_l` is the carrier with column `l` replaced by
/// `p_k phi_k(x_l)`. The right side always uses analytic derivatives.
/// Non-symmetric amplitudes are rejected; see
/// [`kinetic_cross_term_residual`] for the unchecked form.
pub fn kinetic_cross_term_check(
    s: &CarrierState,
    a: &EnvelopeFunctionND,
    xs: &[f64],
    derivatives: Derivatives,
) -> Result<f64> {
    if !a.is_symmetric() {
        return Err(Error::NonSymmetricAmplitude);
    }
    kinetic_cross_term_residual(s, a, xs, derivatives)
}

/// [`kinetic_cross_term_check`] without the symmetry precondition.
pub fn kinetic_cross_term_residual(
    s: &CarrierState,
    a: &EnvelopeFunctionND,
    xs: &[f64],
    derivatives: Derivatives,
) -> Result<f64> {
    s.check_coords(xs)?;
    let n = s.len();
    let nf = factorial(n);
    let base = s.matrix(xs);
    let mut lhs = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for l in 0..n {
        let mut m = base.clone();
        for k in 0..n {
            m[(k, l)] *= s.momenta[k];
        }
        let d_l = s.combine(m) / nf;
        let da = match derivatives {
            Derivatives::Analytic => a.derivative(xs, l),
            Derivatives::Central { h } => a.central_derivative(xs, l, h),
        };
        lhs += d_l * da;
        scale += (d_l * da).norm();
    }
    let psi = s.combine(base) / nf;
    let weight: f64 = (0..n).map(|l| s.momenta[l] * a.derivative(xs, l)).sum();
    let rhs = psi * weight;
    let diff = (lhs - rhs).norm();
    let scale = scale + rhs.norm();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// Relative residual between `x_l psi` and the minor expansion
///
/// `(-i hbar / n!) sum_k s_kl (d phi_k / d p_k)(x_l) M_kl`
///
/// with `d phi_k / d p_k = (i x_l / hbar) phi_k(x_l)` and cofactor signs
/// `s_kl = (-1)^(k+l)` for fermions (one for bosons).
pub fn position_minor_identity_check(s: &CarrierState, xs: &[f64], l: usize) -> Result<f64> {
    s.check_coords(xs)?;
    let n = s.len();
    if l >= n {
        return Err(Error::IndexOutOfRange { row: 0, col: l, n });
    }
    let x = xs[l];
    let lhs = carrier_value(s, xs)? * x;
    let prefactor = Complex64::new(0.0, -s.hbar) / factorial(n);
    let mut rhs = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for k in 0..n {
        let minor = if n == 1 { Complex64::new(1.0, 0.0) } else { raw_minor(s, xs, k, l) };
        let dphi = Complex64::new(0.0, x / s.hbar) * s.phi(k, x);
        let term = prefactor * dphi * minor * s.sign(k, l);
        rhs += term;
        scale += term.norm();
    }
    let diff = (lhs - rhs).norm();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// Outcome of [`windowed_orthogonality_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowedOrthogonality {
    /// `K_m(p_k) * (f(p_k + dp) - f(p_k - dp)) / 2dp` with `dp = pi hbar / width`.
    pub value: Complex64,
    /// `|value|` for distinct momenta, `|value - stencil|` for equal ones.
    pub residual: f64,
    /// Whether the window holds a whole number of beat wavelengths
    /// `2 pi hbar / |p_m - p_k|` (always true for equal momenta).
    pub commensurate: bool,
}

/// Composite Simpson rule over `[a, b]` with `n` (even) panels.
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Complex64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// Overlap of two carriers over `window`, acting on a probe function of
/// momentum through the smoothed derivative.
///
/// The window-normalized overlap `K_m(p_k) = (1 / width) * integral
/// conj(phi_m) phi_k dx` is integrated numerically. For distinct momenta it
/// vanishes on commensurate windows; for equal momenta it is one and the
/// result reduces to the smoothed derivative of the probe at `p_k`.
pub fn windowed_orthogonality_check(
    p_m: f64,
    p_k: f64,
    window: Window,
    probe: &impl MomentumProfile,
    hbar: f64,
) -> Result<WindowedOrthogonality> {
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::invalid("hbar", "must be positive"));
    }
    if !(window.width.is_finite() && window.width >= 0.0 && window.x0.is_finite()) {
        return Err(Error::invalid("window", "width must be finite and nonnegative"));
    }
    let beats = (p_m - p_k) * window.width / (2.0 * PI * hbar);
    let commensurate = p_m == p_k || (beats.abs() >= 0.5 && (beats - beats.round()).abs() < 1e-9);
    if window.width == 0.0 {
        return Ok(WindowedOrthogonality { value: Complex64::new(0.0, 0.0), residual: 0.0, commensurate });
    }
    let panels = 2 * (64usize.max((beats.abs().ceil() as usize) * 32));
    let overlap =
        simpson(window.x0, window.x0 + window.width, panels, |x| Complex64::from_polar(1.0, (p_k - p_m) * x / hbar))
            / window.width;
    let stencil = smoothed_derivative(probe, p_k, PI * hbar / window.width)?;
    let value = overlap * stencil;
    let residual = if p_m == p_k { (value - stencil).norm() } else { value.norm() };
    Ok(WindowedOrthogonality { value, residual, commensurate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permanent_of_ones() {
        for n in 1..=5 {
            let m = DMatrix::from_element(n, n, Complex64::new(1.0, 0.0));
            assert!((permanent(&m).re - factorial(n)).abs() < 1e-9);
        }
    }

    #[test]
    fn permanent_matches_expansion_for_3x3() {
        let m = DMatrix::from_fn(3, 3, |i, j| Complex64::new((i * 3 + j) as f64 + 1.0, 0.5 * i as f64));
        let mut brute = Complex64::new(0.0, 0.0);
        for p in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            brute += m[(0, p[0])] * m[(1, p[1])] * m[(2, p[2])];
        }
        assert!((permanent(&m) - brute).norm() < 1e-10);
    }

    #[test]
    fn single_particle_carrier() {
        let s = CarrierState::new(Statistics::Fermion, vec![1.3], 1.0).unwrap();
        let v = carrier_value(&s, &[0.7]).unwrap();
        assert!((v - Complex64::from_polar(1.0, 1.3 * 0.7)).norm() < 1e-15);
    }

    #[test]
    fn duplicate_fermion_momenta_rejected() {
        assert!(matches!(
            CarrierState::new(Statistics::Fermion, vec![1.0, 2.0, 1.0], 1.0),
            Err(Error::DuplicateMomenta(0, 2))
        ));
        assert!(CarrierState::new(Statistics::Boson, vec![1.0, 1.0], 1.0).is_ok());
    }

    #[test]
    fn minor_bounds() {
        let s = CarrierState::new(Statistics::Fermion, vec![1.0, 2.0], 1.0).unwrap();
        assert!(matches!(minor_value(&s, &[0.0, 1.0], 2, 0), Err(Error::IndexOutOfRange { .. })));
        let m = minor_value(&s, &[0.3, 0.9], 0, 0).unwrap();
        assert!((m - s.phi(1, 0.9)).norm() < 1e-15);
    }

    #[test]
    fn weighted_gaussian_symmetry_flag() {
        assert!(EnvelopeFunctionND::WeightedGaussian { weights: vec![1.0, 1.0], alpha: 1.0 }.is_symmetric());
        let a = EnvelopeFunctionND::WeightedGaussian { weights: vec![1.0, 2.0], alpha: 1.0 };
        assert!(!a.is_symmetric());
        let s = CarrierState::new(Statistics::Fermion, vec![1.0, 2.0], 1.0).unwrap();
        assert!(matches!(
            kinetic_cross_term_check(&s, &a, &[0.1, 0.2], Derivatives::Analytic),
            Err(Error::NonSymmetricAmplitude)
        ));
    }
}
