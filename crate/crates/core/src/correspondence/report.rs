use serde::{Deserialize, Serialize};

use crate::envelope::ScaleReport;

/// Metrics of one sample time of a correspondence run.
///
/// `quantum_*` are wave-function expectations, `classical_*` the
/// characteristic started from the initial expectations, `envelope_*` and
/// `liouville_*` the centres of the two densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
    pub quantum_x: f64,
    pub quantum_p: f64,
    pub classical_x: f64,
    pub classical_p: f64,
    pub x_error: f64,
    pub p_error: f64,
    pub envelope_x: f64,
    pub envelope_p: f64,
    pub liouville_x: f64,
    pub liouville_p: f64,
    pub envelope_mass: f64,
    pub liouville_mass: f64,
    pub envelope_mass_drift: f64,
    pub liouville_mass_drift: f64,
    pub interpolation_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceReport {
    pub name: String,
    pub dispersion_time: Option<f64>,
    pub scale: ScaleReport,
    pub samples: Vec<SampleMetrics>,
}

impl CorrespondenceReport {
    pub fn max_l1(&self) -> f64 {
        self.samples.iter().map(|s| s.l1).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobeSample {
    pub t: f64,
    pub envelope_x: f64,
    pub envelope_p: f64,
    pub classical_x: f64,
    pub classical_p: f64,
    pub x_error: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobeTrack {
    /// `transmitted` or `reflected`.
    pub label: String,
    pub mass: f64,
    pub samples: Vec<LobeSample>,
    pub max_x_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub name: String,
    pub transmission: f64,
    pub reflection: f64,
    pub segmentation_time: f64,
    pub timescale: f64,
    pub sigma: f64,
    /// Mass in the dead band or on the wrong side of the barrier, as a
    /// fraction of the total.
    pub overlap_mass: f64,
    pub separable: bool,
    pub lobes: Vec<LobeTrack>,
    pub scale: ScaleReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticSample {
    pub t: f64,
    pub mass: f64,
    pub mass_drift: f64,
    pub entropy: f64,
    /// x-averaged current density (Boltzmann mode only).
    pub current: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticReport {
    pub name: String,
    pub mode: String,
    pub states: usize,
    pub eta: f64,
    pub max_row_sum: f64,
    pub symmetric_rates: bool,
    pub samples: Vec<KineticSample>,
    /// Current carried by the stationary occupations of the rate matrix.
    pub equilibrium_current: Option<f64>,
    /// Largest difference between the matrix exponential and uniformization.
    pub method_agreement: Option<f64>,
    /// L1 distance between the initial occupations and the result of
    /// forward then time-reversed evolution.
    pub reversal_l1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleSample {
    pub t: f64,
    pub mass: f64,
    pub mass_drift: f64,
    pub interpolation_bound: f64,
    pub center_x: f64,
    pub center_p: f64,
    pub classical_x: f64,
    pub classical_p: f64,
    pub jacobian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleReport {
    pub name: String,
    pub samples: Vec<LiouvilleSample>,
    /// L1 distance after evolving forward to `t_end` and back.
    pub reversal_l1: Option<f64>,
    /// Twice the interpolation bound of the initial density.
    pub reversal_bound: Option<f64>,
}

/// One line of the many-body residual table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub check: String,
    pub statistics: String,
    pub n: usize,
    pub trial: usize,
    pub parameter: f64,
    pub residual: f64,
}

/// Off-diagonal number correlator magnitude for one ensemble size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorRow {
    pub draws: usize,
    pub rms_off_diagonal: f64,
    pub mean_diagonal: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockReport {
    pub rows: Vec<CorrelatorRow>,
    /// Least-squares slope of `ln rms` against `ln draws`.
    pub slope: f64,
}
