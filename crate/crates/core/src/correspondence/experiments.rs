use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::report::*;
use super::scenario::{KineticInitial, KineticsMode, KineticsSpec, Scenario};
use crate::envelope::{envelope_density, extract_envelope, scale_check, EnvelopeField, ScaleReport, Window};
use crate::error::{Error, Result};
use crate::grid::{PhaseSpaceDensity, PhaseSpaceGrid};
use crate::kinetics::{
    current_profile, drifting_maxwellian, entropy, evolve_boltzmann, evolve_master, evolve_master_expm,
    evolve_master_uniformized, fermi_rates, FockEnsemble, RateMatrix, StateSpace,
};
use crate::liouville::{
    evolve_liouville, flow_jacobian, hamilton_flow, interpolation_bound, Characteristic, HamiltonianSpec,
};
use crate::manybody::{
    kinetic_cross_term_check, kinetic_cross_term_residual, position_minor_identity_check, windowed_orthogonality_check,
    CarrierState, Derivatives, EnvelopeFunctionND, Statistics,
};
use crate::schrodinger::{
    evolve_to_times, expectation_p, expectation_x, superpose_packets, transmission_reflection, PotentialSpec,
    WaveFunction,
};

/// Initial wave function of a scenario.
pub fn initial_wavefunction(s: &Scenario) -> Result<WaveFunction> {
    if s.packets.is_empty() {
        return Err(Error::Scenario("scenario defines no packets".into()));
    }
    superpose_packets(&s.packets, &s.grid, &s.constants)
}

fn smooth_hamiltonian(s: &Scenario) -> Result<HamiltonianSpec> {
    HamiltonianSpec::new(s.constants.mass, s.potential.clone())
}

fn relative_drift(m: f64, m0: f64) -> f64 {
    if m0 > 0.0 {
        (m - m0) / m0
    } else {
        m
    }
}

fn center_or_nan(rho: &PhaseSpaceDensity) -> (f64, f64) {
    rho.center().unwrap_or((f64::NAN, f64::NAN))
}

/// Everything a correspondence run produces.
#[derive(Debug, Clone)]
pub struct CorrespondenceOutput {
    pub report: CorrespondenceReport,
    pub wavefunctions: Vec<WaveFunction>,
    pub envelopes: Vec<EnvelopeField>,
    /// `|A|^2` at each sample time.
    pub quantum: Vec<PhaseSpaceDensity>,
    /// Liouville transport of the initial envelope density to each sample time.
    pub classical: Vec<PhaseSpaceDensity>,
}

/// Runs the wave function and the classical density side by side.
///
/// The quantum branch evolves the initial wave function and extracts the
/// envelope density at every sample time. The classical branch transports
/// the initial envelope density with one backtrace per sample time. A
/// failed scale check is an error unless `force` is set.
pub fn run_correspondence(s: &Scenario, force: bool) -> Result<CorrespondenceOutput> {
    let h = smooth_hamiltonian(s)?;
    let psi0 = initial_wavefunction(s)?;
    let grid = s.envelope_grid()?;
    let scale = scale_check(&psi0, &grid);
    if !force {
        scale.require()?;
    }
    let times = s.time.sample_times()?;
    let dt_char = s.characteristic_dt();

    let a0 = extract_envelope(&psi0, &grid, &s.potential)?;
    let rho0 = envelope_density(&a0);

    let (quantum, classical) = rayon::join(
        || -> Result<(Vec<WaveFunction>, Vec<EnvelopeField>)> {
            let psis = evolve_to_times(&psi0, &s.potential, s.time.dt, &times)?;
            let envs =
                psis.par_iter().map(|psi| extract_envelope(psi, &grid, &s.potential)).collect::<Result<Vec<_>>>()?;
            Ok((psis, envs))
        },
        || -> Result<Vec<PhaseSpaceDensity>> {
            times.iter().map(|&t| evolve_liouville(&rho0, &h, t, dt_char)).collect()
        },
    );
    let (wavefunctions, envelopes) = quantum?;
    let classical = classical?;
    let quantum: Vec<PhaseSpaceDensity> = envelopes.iter().map(envelope_density).collect();

    let x0 = expectation_x(&psi0);
    let p0 = expectation_p(&psi0);
    let t_end = *times.last().expect("at least one sample");
    let track = hamilton_flow(x0, p0, t_end, dt_char, &h)?;
    let m_env0 = quantum[0].mass();
    let m_cl0 = rho0.mass();

    let mut samples = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let (qx, qp) = (expectation_x(&wavefunctions[i]), expectation_p(&wavefunctions[i]));
        let (cx, cp) = track.at(t).ok_or(Error::NonFinite("classical track"))?;
        let (ex, ep) = center_or_nan(&quantum[i]);
        let (lx, lp) = center_or_nan(&classical[i]);
        samples.push(SampleMetrics {
            t,
            l1: quantum[i].l1_distance(&classical[i])?,
            l2: quantum[i].l2_distance(&classical[i])?,
            quantum_x: qx,
            quantum_p: qp,
            classical_x: cx,
            classical_p: cp,
            x_error: (qx - cx).abs(),
            p_error: (qp - cp).abs(),
            envelope_x: ex,
            envelope_p: ep,
            liouville_x: lx,
            liouville_p: lp,
            envelope_mass: quantum[i].mass(),
            liouville_mass: classical[i].mass(),
            envelope_mass_drift: relative_drift(quantum[i].mass(), m_env0),
            liouville_mass_drift: relative_drift(classical[i].mass(), m_cl0),
            interpolation_bound: interpolation_bound(&classical[i]),
        });
    }
    let report = CorrespondenceReport { name: s.name.clone(), dispersion_time: s.dispersion_time(), scale, samples };
    Ok(CorrespondenceOutput { report, wavefunctions, envelopes, quantum, classical })
}

/// Output of [`barrier_split_experiment`].
#[derive(Debug, Clone)]
pub struct BarrierOutput {
    pub report: BarrierReport,
    pub times: Vec<f64>,
    pub densities: Vec<PhaseSpaceDensity>,
}

fn find_barrier(v: &PotentialSpec) -> Option<(f64, f64, f64)> {
    match v {
        PotentialSpec::GaussianBarrier { height, center, width } => Some((*height, *center, *width)),
        PotentialSpec::Sum { terms } => terms.iter().find_map(find_barrier),
        _ => None,
    }
}

/// Sends a packet at a Gaussian barrier and follows the two outgoing lobes.
///
/// After the segmentation time the envelope density is split by the sign of
/// the momentum (relative to the incident direction), with a dead band of
/// half a momentum cell around zero. Each lobe's centre is then compared
/// with the characteristic of the smooth part of the potential started from
/// that centre.
pub fn barrier_split_experiment(s: &Scenario, force: bool) -> Result<BarrierOutput> {
    let (_, x_b, _) = find_barrier(&s.potential)
        .ok_or_else(|| Error::Scenario("barrier experiment needs a gaussian_barrier term in the potential".into()))?;
    let spec = s.barrier.clone().unwrap_or(super::scenario::BarrierSpec {
        x_split: None,
        segmentation_time: None,
        track_timescales: 3.0,
        track_samples: 6,
    });
    let psi0 = initial_wavefunction(s)?;
    let packet = s.packets[0];
    if packet.p_c == 0.0 {
        return Err(Error::Scenario("incident packet has zero momentum".into()));
    }
    let grid = s.envelope_grid()?;
    let scale = scale_check(&psi0, &grid);
    if !force {
        scale.require()?;
    }
    let m = s.constants.mass;
    let speed = packet.p_c.abs() / m;
    let timescale = packet.sigma / speed;
    let t_seg = spec.segmentation_time.unwrap_or(((x_b - packet.x_c).abs() + 8.0 * packet.sigma) / speed);
    let span = spec.track_timescales * timescale;
    let n = spec.track_samples.max(1);
    let times: Vec<f64> = (0..=n).map(|k| t_seg + span * k as f64 / n as f64).collect();

    let psis = evolve_to_times(&psi0, &s.potential, s.time.dt, &times)?;
    let (transmission, reflection) = transmission_reflection(&psis[0], spec.x_split.unwrap_or(x_b));
    let densities = psis
        .par_iter()
        .map(|psi| extract_envelope(psi, &grid, &s.potential).map(|a| envelope_density(&a)))
        .collect::<Result<Vec<_>>>()?;

    let dir = packet.p_c.signum();
    let dead = grid.dp_half();
    let g = grid.clone();
    let side = move |ip: usize| -> i8 {
        let p = dir * g.p_center(ip);
        if p > dead {
            1
        } else if p < -dead {
            -1
        } else {
            0
        }
    };
    let rho_seg = &densities[0];
    let total = rho_seg.mass();
    let misplaced = rho_seg.mass_where(|ix, ip| {
        let ahead = dir * (grid.x_center(ix) - x_b) > 0.0;
        match side(ip) {
            0 => true,
            1 => !ahead,
            _ => ahead,
        }
    });
    let overlap_mass = if total > 0.0 { misplaced / total } else { 0.0 };

    let h_smooth = HamiltonianSpec::new(m, s.potential.smooth_part())?;
    let dt_char = s.characteristic_dt();
    let mut lobes = Vec::new();
    for (label, sign) in [("transmitted", 1i8), ("reflected", -1i8)] {
        let mass = rho_seg.mass_where(|_, ip| side(ip) == sign);
        if total <= 0.0 || mass / total < 1e-3 {
            continue;
        }
        let (x0, p0) = rho_seg.center_where(|_, ip| side(ip) == sign).expect("lobe has mass");
        let path = hamilton_flow(x0, p0, span, dt_char, &h_smooth)?;
        let mut samples = Vec::with_capacity(times.len());
        for (rho, &t) in densities.iter().zip(&times) {
            let (ex, ep) = rho.center_where(|_, ip| side(ip) == sign).unwrap_or((f64::NAN, f64::NAN));
            let (cx, cp) = path.at(t - t_seg).ok_or(Error::NonFinite("lobe track"))?;
            samples.push(LobeSample {
                t,
                envelope_x: ex,
                envelope_p: ep,
                classical_x: cx,
                classical_p: cp,
                x_error: (ex - cx).abs(),
                mass: rho.mass_where(|_, ip| side(ip) == sign),
            });
        }
        let max_x_error = samples.iter().map(|s| s.x_error).fold(0.0, f64::max);
        lobes.push(LobeTrack { label: label.to_string(), mass: mass / total, samples, max_x_error });
    }
    let report = BarrierReport {
        name: s.name.clone(),
        transmission,
        reflection,
        segmentation_time: t_seg,
        timescale,
        sigma: packet.sigma,
        overlap_mass,
        separable: overlap_mass <= 0.1,
        lobes,
        scale,
    };
    Ok(BarrierOutput { report, times, densities })
}

/// Output of [`kinetic_scenario`].
#[derive(Debug, Clone)]
pub struct KineticOutput {
    pub report: KineticReport,
    pub rates: RateMatrix,
    /// Phase-space densities per sample (Boltzmann mode).
    pub densities: Vec<PhaseSpaceDensity>,
    /// `(t, occupations)`; x-integrated momentum-cell occupations in
    /// Boltzmann mode.
    pub occupations: Vec<(f64, Vec<f64>)>,
}

fn kinetics_spec(s: &Scenario) -> Result<&KineticsSpec> {
    s.kinetics.as_ref().ok_or_else(|| Error::Scenario("scenario has no [kinetics] section".into()))
}

/// Stationary occupations of a symmetric rate matrix: the initial mass of
/// every connected component (rates above `1e-12` of the largest) spread
/// uniformly over it.
pub fn shell_equilibrium(q: &RateMatrix, rho0: &[f64]) -> Vec<f64> {
    let k = q.len();
    let max = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| q.get(i, j))
        .fold(0.0, f64::max);
    let cut = 1e-12 * max;
    let mut label = vec![usize::MAX; k];
    let mut next = 0;
    for start in 0..k {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(i) = stack.pop() {
            for (j, l) in label.iter_mut().enumerate() {
                if j != i && *l == usize::MAX && max > 0.0 && q.get(i, j).max(q.get(j, i)) > cut {
                    *l = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    let mut mass = vec![0.0; next];
    let mut count = vec![0usize; next];
    for i in 0..k {
        mass[label[i]] += rho0[i];
        count[label[i]] += 1;
    }
    (0..k).map(|i| mass[label[i]] / count[label[i]] as f64).collect()
}

fn x_integrated(rho: &PhaseSpaceDensity) -> Vec<f64> {
    let g = rho.grid();
    let mut out = vec![0.0; g.np];
    for ix in 0..g.nx {
        for (o, v) in out.iter_mut().zip(rho.row(ix)) {
            *o += v;
        }
    }
    out.iter().map(|v| v * g.cell_measure()).collect()
}

/// Streaming with Fermi-rule collisions (Boltzmann mode) or a bare master
/// equation (master mode).
pub fn kinetic_scenario(s: &Scenario, force: bool) -> Result<KineticOutput> {
    let spec = kinetics_spec(s)?;
    match spec.mode {
        KineticsMode::Boltzmann => boltzmann_run(s, spec, force),
        KineticsMode::Master => master_run(s, spec),
    }
}

fn boltzmann_run(s: &Scenario, spec: &KineticsSpec, force: bool) -> Result<KineticOutput> {
    let h = smooth_hamiltonian(s)?;
    let f0 = match spec.initial {
        KineticInitial::Envelope => {
            let psi0 = initial_wavefunction(s)?;
            let grid = s.envelope_grid()?;
            if !force {
                scale_check(&psi0, &grid).require()?;
            }
            envelope_density(&extract_envelope(&psi0, &grid, &s.potential)?)
        }
        KineticInitial::DriftingMaxwellian { density, drift, sigma_p } => {
            let cover = spec.grid.ok_or_else(|| Error::Scenario("a drifting Maxwellian needs kinetics.grid".into()))?;
            drifting_maxwellian(&cover.build(s.constants)?, density, drift, sigma_p)?
        }
    };
    let grid = f0.grid().clone();
    let states = StateSpace::momentum_cells(&grid.p_centers(), s.constants.mass)?;
    let v = spec.interaction.build(grid.np, s.seed);
    let q = fermi_rates(&v, &states, spec.eta, &s.constants)?;
    let dt = spec.split_dt.unwrap_or_else(|| s.characteristic_dt());
    let times = s.time.sample_times()?;

    let densities: Vec<PhaseSpaceDensity> = if q.is_zero() {
        // one backtrace per sample, exactly as the classical branch
        times.iter().map(|&t| evolve_boltzmann(&f0, &h, &q, t, dt)).collect::<Result<_>>()?
    } else {
        let mut out = Vec::with_capacity(times.len());
        let mut cur = f0.clone();
        for &t in &times {
            let span = t - cur.time;
            if span > 0.0 {
                cur = evolve_boltzmann(&cur, &h, &q, span, dt)?;
            }
            cur.time = t;
            out.push(cur.clone());
        }
        out
    };
    let m0 = f0.mass();
    let samples = densities
        .iter()
        .zip(&times)
        .map(|(f, &t)| {
            let j = current_profile(f);
            KineticSample {
                t,
                mass: f.mass(),
                mass_drift: relative_drift(f.mass(), m0),
                entropy: f.entropy(),
                current: Some(j.iter().sum::<f64>() / j.len() as f64),
            }
        })
        .collect();
    let occupations: Vec<(f64, Vec<f64>)> = densities.iter().zip(&times).map(|(f, &t)| (t, x_integrated(f))).collect();
    let equilibrium = shell_equilibrium(&q, &occupations[0].1);
    let c = &s.constants;
    let eq_current = c.charge / c.mass * grid.p_centers().iter().zip(&equilibrium).map(|(p, n)| p * n).sum::<f64>()
        / (grid.nx as f64 * grid.dx);
    let report = KineticReport {
        name: s.name.clone(),
        mode: "boltzmann".into(),
        states: q.len(),
        eta: q.eta,
        max_row_sum: q.max_row_sum(),
        symmetric_rates: q.is_symmetric(1e-14),
        samples,
        equilibrium_current: Some(eq_current),
        method_agreement: None,
        reversal_l1: None,
    };
    Ok(KineticOutput { report, rates: q, densities, occupations })
}

fn master_run(s: &Scenario, spec: &KineticsSpec) -> Result<KineticOutput> {
    let energies = match (&spec.energies, spec.states) {
        (Some(e), _) => e.clone(),
        (None, Some(k)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            (0..k).map(|_| k as f64 * rng.random::<f64>()).collect()
        }
        (None, None) => return Err(Error::Scenario("master mode needs kinetics.energies or kinetics.states".into())),
    };
    let states = StateSpace::new(energies)?;
    let k = states.len();
    let v = spec.interaction.build(k, s.seed);
    let q = fermi_rates(&v, &states, spec.eta, &s.constants)?;
    let rho0 = match &spec.occupations {
        Some(o) => o.clone(),
        None => {
            let mut o = vec![0.0; k];
            o[0] = 1.0;
            o
        }
    };
    let times = s.time.sample_times()?;
    let history = times.iter().map(|&t| evolve_master(&rho0, &q, t).map(|r| (t, r))).collect::<Result<Vec<_>>>()?;
    let m0: f64 = rho0.iter().sum();
    let samples = history
        .iter()
        .map(|(t, r)| {
            let m: f64 = r.iter().sum();
            KineticSample { t: *t, mass: m, mass_drift: relative_drift(m, m0), entropy: entropy(r), current: None }
        })
        .collect();
    let t_end = *times.last().expect("at least one sample");
    let a = evolve_master_expm(&rho0, &q, t_end)?;
    let b = evolve_master_uniformized(&rho0, &q, t_end)?;
    let agreement = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let reversal = if spec.reverse {
        let back = evolve_master(&history.last().expect("sample").1, &q, t_end)?;
        Some(back.iter().zip(&rho0).map(|(x, y)| (x - y).abs()).sum())
    } else {
        None
    };
    let report = KineticReport {
        name: s.name.clone(),
        mode: "master".into(),
        states: k,
        eta: q.eta,
        max_row_sum: q.max_row_sum(),
        symmetric_rates: q.is_symmetric(1e-14),
        samples,
        equilibrium_current: None,
        method_agreement: Some(agreement),
        reversal_l1: reversal,
    };
    Ok(KineticOutput { report, rates: q, densities: Vec::new(), occupations: history })
}

/// Output of [`run_liouville`].
#[derive(Debug, Clone)]
pub struct LiouvilleOutput {
    pub report: LiouvilleReport,
    pub densities: Vec<PhaseSpaceDensity>,
    pub trajectory: Characteristic,
    pub hamiltonian: HamiltonianSpec,
}

/// Normalized phase-space Gaussian sampled at cell centres.
pub fn phase_gaussian(grid: &PhaseSpaceGrid, x_c: f64, p_c: f64, sx: f64, sp: f64) -> Result<PhaseSpaceDensity> {
    let rho = PhaseSpaceDensity::from_fn(grid.clone(), 0.0, |x, p| {
        (-0.5 * ((x - x_c) / sx).powi(2) - 0.5 * ((p - p_c) / sp).powi(2)).exp()
    })?;
    let m = rho.mass();
    if m <= 0.0 {
        return Err(Error::Scenario("initial phase-space density has no mass on the grid".into()));
    }
    let values = rho.values().iter().map(|v| v / m).collect();
    PhaseSpaceDensity::new(grid.clone(), values, 0.0)
}

/// Liouville transport of the scenario's initial density to every sample time.
pub fn run_liouville(s: &Scenario) -> Result<LiouvilleOutput> {
    let h = smooth_hamiltonian(s)?;
    let rho0 = match (&s.liouville.grid, &s.liouville.initial) {
        (Some(cover), Some(g0)) => phase_gaussian(&cover.build(s.constants)?, g0.x_c, g0.p_c, g0.sigma_x, g0.sigma_p)?,
        (None, None) => {
            let psi0 = initial_wavefunction(s)?;
            envelope_density(&extract_envelope(&psi0, &s.envelope_grid()?, &s.potential)?)
        }
        _ => return Err(Error::Scenario("liouville.grid and liouville.initial must be given together".into())),
    };
    let times = s.time.sample_times()?;
    let dt = s.characteristic_dt();
    let densities = times.par_iter().map(|&t| evolve_liouville(&rho0, &h, t, dt)).collect::<Result<Vec<_>>>()?;
    let (x0, p0) = center_or_nan(&rho0);
    let t_end = *times.last().expect("at least one sample");
    let trajectory = hamilton_flow(x0, p0, t_end, dt, &h)?;
    let m0 = rho0.mass();
    let mut samples = Vec::with_capacity(times.len());
    for (rho, &t) in densities.iter().zip(&times) {
        let (cx, cp) = center_or_nan(rho);
        let (tx, tp) = trajectory.at(t).ok_or(Error::NonFinite("trajectory"))?;
        samples.push(LiouvilleSample {
            t,
            mass: rho.mass(),
            mass_drift: relative_drift(rho.mass(), m0),
            interpolation_bound: interpolation_bound(rho),
            center_x: cx,
            center_p: cp,
            classical_x: tx,
            classical_p: tp,
            jacobian: flow_jacobian(x0, p0, t, dt, &h)?,
        });
    }
    let (reversal_l1, reversal_bound) = if s.liouville.reverse {
        let fwd = evolve_liouville(&rho0, &h, t_end, dt)?;
        let back = evolve_liouville(&fwd, &h, -t_end, dt)?;
        (Some(back.l1_distance(&rho0)?), Some(2.0 * interpolation_bound(&rho0)))
    } else {
        (None, None)
    };
    let report = LiouvilleReport { name: s.name.clone(), samples, reversal_l1, reversal_bound };
    Ok(LiouvilleOutput { report, densities, trajectory, hamiltonian: h })
}

fn statistics_name(s: Statistics) -> &'static str {
    match s {
        Statistics::Fermion => "fermion",
        Statistics::Boson => "boson",
    }
}

/// Distinct momenta spaced at least `0.1 scale` apart, drawn in `[-scale, scale]`.
fn random_momenta(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(n);
    while out.len() < n {
        let p = scale * (2.0 * rng.random::<f64>() - 1.0);
        if out.iter().all(|q| (q - p).abs() > 0.1 * scale) {
            out.push(p);
        }
    }
    out
}

/// Residual table of the many-body identities over seeded random
/// configurations.
pub fn run_manybody_check(s: &Scenario) -> Result<Vec<ResidualRow>> {
    let spec = s.manybody.clone().ok_or_else(|| Error::Scenario("scenario has no [manybody] section".into()))?;
    let hbar = s.constants.hbar;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut rows = Vec::new();
    let mut push = |check: &str, st: &str, n: usize, trial: usize, parameter: f64, residual: f64| {
        rows.push(ResidualRow { check: check.into(), statistics: st.into(), n, trial, parameter, residual });
    };
    for &stats in &spec.statistics {
        let st = statistics_name(stats);
        for &n in &spec.particles {
            for trial in 0..spec.trials {
                let momenta = random_momenta(&mut rng, n, spec.momentum_scale);
                let xs: Vec<f64> = (0..n).map(|_| spec.coordinate_scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
                let carrier = CarrierState::new(stats, momenta.clone(), hbar)?;
                let r = kinetic_cross_term_check(&carrier, &spec.amplitude, &xs, Derivatives::Analytic)?;
                push("cross_term_analytic", st, n, trial, 0.0, r);
                for &h in &spec.steps {
                    let r = kinetic_cross_term_check(&carrier, &spec.amplitude, &xs, Derivatives::Central { h })?;
                    push("cross_term_central", st, n, trial, h, r);
                }
                let skew = EnvelopeFunctionND::WeightedGaussian {
                    weights: (0..n).map(|i| 1.0 + i as f64).collect(),
                    alpha: 0.3,
                };
                let r = kinetic_cross_term_residual(&carrier, &skew, &xs, Derivatives::Analytic)?;
                push("negative_control", st, n, trial, 0.0, r);
                if n <= 4 {
                    for l in 0..n {
                        let r = position_minor_identity_check(&carrier, &xs, l)?;
                        push("position_minor", st, n, trial, l as f64, r);
                    }
                }
            }
        }
    }
    let width = 16.0;
    for j in 1..=3 {
        let p_k = 0.5;
        let p_m = p_k + 2.0 * PI * hbar * j as f64 / width;
        let probe = |p: f64| 1.7 * p;
        let w = windowed_orthogonality_check(p_m, p_k, Window { x0: 3.0, width }, &probe, hbar)?;
        push("windowed_orthogonality", "-", 1, j, p_m - p_k, w.residual);
    }
    let probe = |p: f64| 1.7 * p;
    let w = windowed_orthogonality_check(0.5, 0.5, Window { x0: 3.0, width }, &probe, hbar)?;
    push("windowed_derivative", "-", 1, 0, 0.0, (w.value - Complex64::new(1.7, 0.0)).norm());
    Ok(rows)
}

/// Root-mean-square off-diagonal number correlator against ensemble size.
pub fn run_fock(s: &Scenario) -> Result<FockReport> {
    let spec = s.fock.clone().ok_or_else(|| Error::Scenario("scenario has no [fock] section".into()))?;
    if spec.modes < 2 {
        return Err(Error::Scenario("fock.modes must be at least 2".into()));
    }
    let max_draws = *spec.draws.iter().max().ok_or_else(|| Error::Scenario("fock.draws is empty".into()))?;
    let ensembles = (0..spec.repeats.max(1))
        .into_par_iter()
        .map(|r| {
            FockEnsemble::random_phase(spec.modes, spec.max_occupation, None, max_draws, s.seed.wrapping_add(r as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for &n in &spec.draws {
        let off: Vec<f64> = ensembles.par_iter().map(|e| e.correlator_prefix(0, 1, n).norm_sqr()).collect();
        let diag: Vec<f64> = ensembles.par_iter().map(|e| e.correlator_prefix(0, 0, n).re).collect();
        rows.push(CorrelatorRow {
            draws: n,
            rms_off_diagonal: (off.iter().sum::<f64>() / off.len() as f64).sqrt(),
            mean_diagonal: diag.iter().sum::<f64>() / diag.len() as f64,
            scale: ensembles[0].correlator_scale(0, 1),
        });
    }
    let slope = log_slope(&rows.iter().map(|r| (r.draws as f64, r.rms_off_diagonal)).collect::<Vec<_>>());
    Ok(FockReport { rows, slope })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Samples of the carrier-overlap kernel: `(q, chi, centred chi)`.
pub fn kernel_table(s: &Scenario) -> Result<Vec<(f64, Complex64, f64)>> {
    let spec = s.kernel.clone().ok_or_else(|| Error::Scenario("scenario has no [kernel] section".into()))?;
    if !(spec.window > 0.0) || spec.points < 2 {
        return Err(Error::Scenario("kernel.window must be positive and kernel.points at least 2".into()));
    }
    let c = &s.constants;
    Ok((0..spec.points)
        .map(|i| {
            let q = -spec.q_max + 2.0 * spec.q_max * i as f64 / (spec.points - 1) as f64;
            let p = q * c.hbar / spec.window;
            (
                q,
                crate::envelope::chi_kernel(p, 0.0, spec.window, c),
                crate::envelope::chi_kernel_centered(p, 0.0, spec.window, c),
            )
        })
        .collect())
}

/// Scale report of the scenario's initial wave function.
pub fn initial_scale(s: &Scenario) -> Result<ScaleReport> {
    Ok(scale_check(&initial_wavefunction(s)?, &s.envelope_grid()?))
}
