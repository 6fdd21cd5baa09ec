//! File formats: little-endian binary dumps with JSON sidecars, CSV tables,
//! and atomic writes (temporary file in the target directory, then rename).

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::EnvelopeField;
use crate::error::{Error, Result};
use crate::grid::{PhaseSpaceDensity, PhaseSpaceGrid, PhysicalConstants, SpatialGrid};
use crate::kinetics::RateMatrix;
use crate::liouville::{Characteristic, HamiltonianSpec};
use crate::schrodinger::WaveFunction;

/// Writes `bytes` to `path` through a sibling temporary file and a rename,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp: PathBuf = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Builds a CSV table in memory and writes it atomically.
pub fn write_csv<R: AsRef<[String]>>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.as_ref())?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

/// One CSV row per record, header from the field names.
pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Shortest round-trip decimal for `v`.
pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn complex_bytes(values: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 16);
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn real_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn read_f64s(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Scenario(format!("{} is not a whole number of f64 values", path.display())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight"))).collect())
}

/// Sidecar of a wave-function dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub grid: SpatialGrid,
    pub time: f64,
    pub units: PhysicalConstants,
}

/// `<stem>.bin` holds `(re, im)` pairs; `<stem>.json` the sidecar.
pub fn write_field_dump(dir: &Path, stem: &str, psi: &WaveFunction) -> Result<()> {
    write_atomic(&dir.join(format!("{stem}.bin")), &complex_bytes(psi.values()))?;
    let side = FieldSidecar { grid: *psi.grid(), time: psi.time, units: *psi.constants() };
    write_json(&dir.join(format!("{stem}.json")), &side)
}

pub fn read_field_dump(dir: &Path, stem: &str) -> Result<WaveFunction> {
    let side: FieldSidecar = read_json(&dir.join(format!("{stem}.json")))?;
    let raw = read_f64s(&dir.join(format!("{stem}.bin")))?;
    let values = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    WaveFunction::new(side.grid, side.units, values, side.time)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Sidecar of a phase-space dump. `x0` are the left cell edges (window
/// starts), `p0` the momentum centres; `dp` is the full cell width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceSidecar {
    pub x0: Vec<f64>,
    pub p0: Vec<f64>,
    pub dx: f64,
    pub dp: f64,
    pub time: f64,
    pub complex: bool,
    pub grid: PhaseSpaceGrid,
}

fn phase_sidecar(g: &PhaseSpaceGrid, time: f64, complex: bool) -> PhaseSpaceSidecar {
    PhaseSpaceSidecar {
        x0: (0..g.nx).map(|i| g.x_edge(i)).collect(),
        p0: g.p_centers(),
        dx: g.dx,
        dp: g.dp,
        time,
        complex,
        grid: g.clone(),
    }
}

/// Row-major (x-major) binary dump of a density.
pub fn write_density_dump(dir: &Path, stem: &str, rho: &PhaseSpaceDensity) -> Result<()> {
    write_atomic(&dir.join(format!("{stem}.bin")), &real_bytes(rho.values()))?;
    write_json(&dir.join(format!("{stem}.json")), &phase_sidecar(rho.grid(), rho.time, false))
}

pub fn read_density_dump(dir: &Path, stem: &str) -> Result<PhaseSpaceDensity> {
    let side: PhaseSpaceSidecar = read_json(&dir.join(format!("{stem}.json")))?;
    let values = read_f64s(&dir.join(format!("{stem}.bin")))?;
    PhaseSpaceDensity::new(side.grid, values, side.time)
}

pub fn write_envelope_dump(dir: &Path, stem: &str, a: &EnvelopeField) -> Result<()> {
    write_atomic(&dir.join(format!("{stem}.bin")), &complex_bytes(a.values()))?;
    write_json(&dir.join(format!("{stem}.json")), &phase_sidecar(a.grid(), a.time, true))
}

/// Columns `x0,p0,re,im`.
pub fn write_envelope_csv(path: &Path, a: &EnvelopeField) -> Result<()> {
    let g = a.grid();
    let rows = (0..g.nx).flat_map(|ix| {
        (0..g.np).map(move |ip| {
            let z = a.get(ix, ip);
            vec![fmt(g.x_edge(ix)), fmt(g.p_center(ip)), fmt(z.re), fmt(z.im)]
        })
    });
    write_csv(path, &["x0", "p0", "re", "im"], rows)
}

/// Columns `x0,p0,rho`.
pub fn write_density_csv(path: &Path, rho: &PhaseSpaceDensity) -> Result<()> {
    let g = rho.grid();
    let rows = (0..g.nx)
        .flat_map(|ix| (0..g.np).map(move |ip| vec![fmt(g.x_edge(ix)), fmt(g.p_center(ip)), fmt(rho.get(ix, ip))]));
    write_csv(path, &["x0", "p0", "rho"], rows)
}

/// Columns `t,x,p,H`.
pub fn write_trajectory_csv(path: &Path, c: &Characteristic, h: &HamiltonianSpec) -> Result<()> {
    let rows = (0..c.t.len()).map(|i| vec![fmt(c.t[i]), fmt(c.x[i]), fmt(c.p[i]), fmt(h.energy(c.x[i], c.p[i]))]);
    write_csv(path, &["t", "x", "p", "H"], rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSidecar {
    pub energies: Vec<f64>,
    pub eta: f64,
    pub hbar: f64,
}

/// K x K CSV without header plus `{energies, eta, hbar}` sidecar.
pub fn write_rate_matrix(dir: &Path, stem: &str, q: &RateMatrix) -> Result<()> {
    let k = q.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    for i in 0..k {
        w.write_record((0..k).map(|j| fmt(q.get(i, j))))?;
    }
    let path = dir.join(format!("{stem}.csv"));
    let bytes = w.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
    write_atomic(&path, &bytes)?;
    let side = RateSidecar { energies: q.energies.clone(), eta: q.eta, hbar: q.hbar };
    write_json(&dir.join(format!("{stem}.json")), &side)
}

/// Reads a rate matrix back; the diagonal is rebuilt from the off-diagonal rates.
pub fn read_rate_matrix(dir: &Path, stem: &str) -> Result<RateMatrix> {
    let path = dir.join(format!("{stem}.csv"));
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(&path)?;
    let mut values = Vec::new();
    let mut k = 0;
    for rec in r.records() {
        let rec = rec?;
        k += 1;
        for field in rec.iter() {
            values.push(field.trim().parse::<f64>().map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?);
        }
    }
    let side: RateSidecar = read_json(&dir.join(format!("{stem}.json")))?;
    let mut q = RateMatrix::from_rates(k, values)?;
    q.energies = side.energies;
    q.eta = side.eta;
    q.hbar = side.hbar;
    Ok(q)
}

/// Long-form occupation history with columns `t,k,rho`.
pub fn write_occupations_csv(path: &Path, history: &[(f64, Vec<f64>)]) -> Result<()> {
    let rows = history
        .iter()
        .flat_map(|(t, rho)| rho.iter().enumerate().map(move |(k, r)| vec![fmt(*t), k.to_string(), fmt(*r)]));
    write_csv(path, &["t", "k", "rho"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip_format() {
        assert_eq!(fmt(0.1), "0.1");
        assert_eq!(fmt(1.0), "1.0");
        let v = 1.0 / 3.0;
        assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
    }
}
