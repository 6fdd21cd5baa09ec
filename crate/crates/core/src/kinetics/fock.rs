use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sum_kl conj(A_k) O_kl A_l` (coherent) or `sum_k |A_k|^2 O_kk`
/// (incoherent). `o` is row-major and Hermitian, so the result is real.
pub fn incoherent_average(a: &[Complex64], o: &[Complex64], coherent: bool) -> Result<f64> {
    let k = a.len();
    if o.len() != k * k {
        return Err(Error::GridMismatch(format!("{}-entry operator for {k} amplitudes", o.len())));
    }
    if coherent {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..k {
            for j in 0..k {
                acc += a[i].conj() * o[i * k + j] * a[j];
            }
        }
        Ok(acc.re)
    } else {
        Ok((0..k).map(|i| a[i].norm_sqr() * o[i * k + i].re).sum())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

impl MonteCarloEstimate {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var =
            if samples.len() > 1 { samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self { mean, std_error: (var / n).sqrt(), draws: samples.len() }
    }
}

/// Coherent mean value averaged over `draws` independent uniform phase
/// assignments `A_k -> exp(i theta_k) A_k`.
pub fn random_phase_average(a: &[Complex64], o: &[Complex64], draws: usize, seed: u64) -> Result<MonteCarloEstimate> {
    if draws == 0 {
        return Err(Error::invalid("draws", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(draws);
    let mut buf = a.to_vec();
    for _ in 0..draws {
        for (b, z) in buf.iter_mut().zip(a) {
            *b = z * Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>());
        }
        samples.push(incoherent_average(&buf, o, true)?);
    }
    Ok(MonteCarloEstimate::from_samples(&samples))
}

/// Random-phase superpositions over a truncated bosonic Fock space.
///
/// Basis states are occupation vectors over `modes` modes with at most
/// `max_occupation` quanta per mode. Every member has amplitude moduli
/// `sqrt(w_S)` for the fixed basis weights and independent uniform phases.
#[derive(Debug, Clone, PartialEq)]
pub struct FockEnsemble {
    modes: usize,
    max_occupation: u8,
    basis: Vec<Vec<u8>>,
    members: Vec<Vec<Complex64>>,
}

fn enumerate_basis(modes: usize, max_occupation: u8) -> Vec<Vec<u8>> {
    let base = max_occupation as usize + 1;
    let total = base.pow(modes as u32);
    (0..total)
        .map(|mut idx| {
            (0..modes)
                .map(|_| {
                    let d = (idx % base) as u8;
                    idx /= base;
                    d
                })
                .collect()
        })
        .collect()
}

impl FockEnsemble {
    fn check_shape(modes: usize, max_occupation: u8) -> Result<()> {
        if modes == 0 || modes > 6 || max_occupation == 0 || (max_occupation as usize + 1).pow(modes as u32) > 4096 {
            return Err(Error::invalid("fock space", "1 to 6 modes, positive cutoff, at most 4096 basis states"));
        }
        Ok(())
    }

    /// `draws` members with weights `w` (uniform when `None`) and seeded
    /// random phases.
    pub fn random_phase(
        modes: usize,
        max_occupation: u8,
        weights: Option<&[f64]>,
        draws: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::check_shape(modes, max_occupation)?;
        if draws == 0 {
            return Err(Error::invalid("draws", "must be positive"));
        }
        let basis = enumerate_basis(modes, max_occupation);
        let w: Vec<f64> = match weights {
            Some(w) if w.len() == basis.len() && w.iter().all(|x| x.is_finite() && *x >= 0.0) => w.to_vec(),
            Some(_) => return Err(Error::invalid("weights", "one nonnegative weight per basis state")),
            None => vec![1.0; basis.len()],
        };
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("weights", "total weight must be positive"));
        }
        let moduli: Vec<f64> = w.iter().map(|x| (x / total).sqrt()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let members = (0..draws)
            .map(|_| moduli.iter().map(|&r| Complex64::from_polar(r, 2.0 * PI * rng.random::<f64>())).collect())
            .collect();
        Ok(Self { modes, max_occupation, basis, members })
    }

    /// A one-member ensemble holding the basis state `occupations`.
    pub fn basis_state(modes: usize, max_occupation: u8, occupations: &[u8]) -> Result<Self> {
        Self::check_shape(modes, max_occupation)?;
        let basis = enumerate_basis(modes, max_occupation);
        let idx = basis
            .iter()
            .position(|b| b.as_slice() == occupations)
            .ok_or_else(|| Error::invalid("occupations", "not a basis state of this space"))?;
        let mut amp = vec![Complex64::new(0.0, 0.0); basis.len()];
        amp[idx] = Complex64::new(1.0, 0.0);
        Ok(Self { modes, max_occupation, basis, members: vec![amp] })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn draws(&self) -> usize {
        self.members.len()
    }

    pub fn basis(&self) -> &[Vec<u8>] {
        &self.basis
    }

    fn index_of(&self, occ: &[u8]) -> usize {
        let base = self.max_occupation as usize + 1;
        occ.iter().rev().fold(0, |acc, &d| acc * base + d as usize)
    }

    /// `<S| a_p^dag a_q |S>` for one member (zero-based modes).
    pub fn member_correlator(&self, member: usize, p: usize, q: usize) -> Complex64 {
        let amp = &self.members[member];
        if p == q {
            let n = self.basis.iter().zip(amp).map(|(occ, c)| c.norm_sqr() * occ[q] as f64).sum::<f64>();
            return Complex64::new(n, 0.0);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (s, occ) in self.basis.iter().enumerate() {
            let c = amp[s];
            if c.norm_sqr() == 0.0 || occ[q] == 0 {
                continue;
            }
            let mut target = occ.clone();
            let lower = (target[q] as f64).sqrt();
            target[q] -= 1;
            if target[p] == self.max_occupation {
                continue;
            }
            target[p] += 1;
            let raise = (target[p] as f64).sqrt();
            acc += amp[self.index_of(&target)].conj() * c * lower * raise;
        }
        acc
    }

    /// Mean of [`FockEnsemble::member_correlator`] over the first `draws` members.
    pub fn correlator_prefix(&self, p: usize, q: usize, draws: usize) -> Complex64 {
        let n = draws.min(self.members.len()).max(1);
        (0..n).map(|m| self.member_correlator(m, p, q)).sum::<Complex64>() / n as f64
    }

    /// Per-member magnitude scale `sum_S |c_S'| |c_S| sqrt(n_q) sqrt(n_p + 1)`,
    /// the largest value the correlator of one member can take.
    pub fn correlator_scale(&self, p: usize, q: usize) -> f64 {
        let amp = &self.members[0];
        let mut acc = 0.0;
        for (s, occ) in self.basis.iter().enumerate() {
            if occ[q] == 0 {
                continue;
            }
            let mut target = occ.clone();
            let lower = (target[q] as f64).sqrt();
            target[q] -= 1;
            if target[p] == self.max_occupation {
                continue;
            }
            target[p] += 1;
            acc += amp[self.index_of(&target)].norm() * amp[s].norm() * lower * (target[p] as f64).sqrt();
        }
        acc
    }
}

/// Ensemble mean of `<a_p^dag a_q>`.
pub fn number_correlator(ens: &FockEnsemble, p: usize, q: usize) -> Result<Complex64> {
    if p >= ens.modes || q >= ens.modes {
        return Err(Error::invalid("mode", format!("modes {p}, {q} outside 0..{}", ens.modes)));
    }
    Ok(ens.correlator_prefix(p, q, ens.draws()))
}
