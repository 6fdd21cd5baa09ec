use std::path::PathBuf;

use num_complex::Complex64;
use proptest::prelude::*;

use semiclassical::correspondence::{kinetic_scenario, log_slope, run_liouville, run_manybody_check, Scenario};
use semiclassical::grid::{PhaseSpaceDensity, PhaseSpaceGrid};
use semiclassical::io::{
    fmt, read_density_dump, read_field_dump, read_rate_matrix, write_atomic, write_density_dump, write_field_dump,
    write_rate_matrix,
};
use semiclassical::kinetics::RateMatrix;
use semiclassical::schrodinger::init_gaussian_packet;
use semiclassical::{Error, PhysicalConstants, SpatialGrid};

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str, overrides: &[&str]) -> Scenario {
    let ov: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    Scenario::load(&scenario_dir().join(name), &ov).unwrap()
}

const MINIMAL: &str = r#"
name = "minimal"
[grid]
x_min = -16.0
dx = 0.25
n = 128
[time]
dt = 0.005
t_end = 1.0
"#;

#[test]
fn every_shipped_scenario_parses() {
    let mut count = 0;
    for entry in std::fs::read_dir(scenario_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            Scenario::load(&path, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert_eq!(count, 12);
}

#[test]
fn overrides_address_nested_keys() {
    let s = Scenario::parse_with_overrides(MINIMAL, &["grid.n=256".into(), "time.samples=8".into(), "seed=7".into()])
        .unwrap();
    assert_eq!(s.grid.n, 256);
    assert_eq!(s.time.samples, 8);
    assert_eq!(s.seed, 7);
    assert_eq!(s.time.sample_times().unwrap().len(), 9);
}

#[test]
fn malformed_scenarios_are_scenario_errors() {
    let cases: &[&[&str]] = &[
        &["grid.spacing=0.5"],
        &["time.dt=-1.0"],
        &["grid.dx=0.0"],
        &["time=3"],
        &["not-an-assignment"],
        &["time.times=[0.5, 0.2]"],
    ];
    for ov in cases {
        let ov: Vec<String> = ov.iter().map(|s| s.to_string()).collect();
        let err = Scenario::parse_with_overrides(MINIMAL, &ov).unwrap_err();
        assert!(matches!(err, Error::Scenario(_)), "{ov:?}: {err}");
        assert!(!err.is_numerical());
    }
    let missing = Scenario::load(&scenario_dir().join("no_such_file.toml"), &[]).unwrap_err();
    assert!(matches!(missing, Error::Io { .. }));
}

#[test]
fn liouville_runs_are_deterministic() {
    let s = load("04_oracle_equivalence.toml", &["time.t_end=0.5"]);
    let a = run_liouville(&s).unwrap();
    let b = run_liouville(&s).unwrap();
    assert_eq!(a.report, b.report);
    for (x, y) in a.densities.iter().zip(&b.densities) {
        assert_eq!(x.values(), y.values());
    }
}

#[test]
fn seeded_kinetics_reproduce_and_seeds_matter() {
    let s = load("07_rate_matrix.toml", &[]);
    let a = kinetic_scenario(&s, false).unwrap();
    let b = kinetic_scenario(&s, false).unwrap();
    assert_eq!(a.report, b.report);
    let other = load("07_rate_matrix.toml", &["seed=12345"]);
    assert_ne!(kinetic_scenario(&other, false).unwrap().report, a.report);
}

#[test]
fn manybody_scenario_residuals_are_small_except_the_control() {
    let rows = run_manybody_check(&load("06_manybody.toml", &[])).unwrap();
    assert!(!rows.is_empty());
    for row in &rows {
        let r = row.residual;
        match row.check.as_str() {
            "negative_control" => assert!(r > 1e-3, "{row:?}"),
            // second-order stencil with step `parameter`
            "cross_term_central" => assert!(r < row.parameter.powi(2), "{row:?}"),
            "windowed_derivative" => assert!(r < 1e-6, "{row:?}"),
            _ => assert!(r < 1e-10, "{row:?}"),
        }
    }
}

#[test]
fn wave_function_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let g = SpatialGrid::new(-16.0, 0.25, 128).unwrap();
    let mut psi = init_gaussian_packet(1.0, 0.7, 2.0, &g, &PhysicalConstants::default()).unwrap();
    psi.time = 0.3;
    write_field_dump(dir.path(), "psi", &psi).unwrap();
    assert_eq!(read_field_dump(dir.path(), "psi").unwrap(), psi);
}

#[test]
fn density_and_rate_dumps_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = PhaseSpaceGrid::covering((-2.0, 2.0), 8, (-1.0, 3.0), 4, PhysicalConstants::default()).unwrap();
    let rho = PhaseSpaceDensity::from_fn(g, 1.25, |x, p| (x * p).cos().abs()).unwrap();
    write_density_dump(dir.path(), "rho", &rho).unwrap();
    assert_eq!(read_density_dump(dir.path(), "rho").unwrap(), rho);

    let q = RateMatrix::from_rates(3, vec![0.0, 0.1, 0.2, 0.3, 0.0, 0.4, 0.5, 0.6, 0.0]).unwrap();
    write_rate_matrix(dir.path(), "q", &q).unwrap();
    assert_eq!(read_rate_matrix(dir.path(), "q").unwrap().values(), q.values());
}

#[test]
fn atomic_writes_leave_no_temporaries() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/out.txt");
    write_atomic(&path, b"first").unwrap();
    write_atomic(&path, b"second").unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), b"second");
    let names: Vec<_> = std::fs::read_dir(path.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1);
}

#[test]
fn truncated_dump_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let g = SpatialGrid::new(-16.0, 0.25, 128).unwrap();
    let psi = init_gaussian_packet(0.0, 0.0, 2.0, &g, &PhysicalConstants::default()).unwrap();
    write_field_dump(dir.path(), "psi", &psi).unwrap();
    let bin = dir.path().join("psi.bin");
    let bytes = std::fs::read(&bin).unwrap();
    std::fs::write(&bin, &bytes[..bytes.len() - 16]).unwrap();
    assert!(read_field_dump(dir.path(), "psi").is_err());
}

proptest! {
    #[test]
    fn float_text_round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn log_slope_recovers_power_laws(a in 0.1f64..10.0, k in -2.0f64..2.0) {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0, 10000.0].iter().map(|&n: &f64| (n, a * n.powf(k))).collect();
        prop_assert!((log_slope(&pts) - k).abs() < 1e-10);
    }

    #[test]
    fn complex_dump_preserves_bits(re in -1e3f64..1e3, im in -1e3f64..1e3) {
        let dir = tempfile::tempdir().unwrap();
        let g = SpatialGrid::new(0.0, 1.0, 8).unwrap();
        let z = Complex64::new(re, im);
        let psi = semiclassical::schrodinger::WaveFunction::new(g, PhysicalConstants::default(), vec![z; 8], 0.0).unwrap();
        write_field_dump(dir.path(), "z", &psi).unwrap();
        let back = read_field_dump(dir.path(), "z").unwrap();
        prop_assert_eq!(back.values(), psi.values());
    }
}
