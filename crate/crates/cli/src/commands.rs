use std::path::Path;

use anyhow::{bail, Context as _, Result};
use log::info;
use semiclassical::correspondence::{self as corr, Scenario};
use semiclassical::envelope::{envelope_density, extract_envelope, scale_check};
use semiclassical::io::{self, fmt};
use semiclassical::liouville::{hamilton_flow, HamiltonianSpec};
use semiclassical::schrodinger::{energy, evolve_to_times, expectation_p, expectation_x, l2_norm};

pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub out: &'a Path,
    pub force: bool,
    pub dump_binary: bool,
}

impl Context<'_> {
    fn file(&self, name: &str) -> std::path::PathBuf {
        self.out.join(name)
    }
}

pub fn schrodinger(ctx: &Context) -> Result<()> {
    let s = ctx.scenario;
    let psi0 = corr::initial_wavefunction(s)?;
    let times = s.time.sample_times()?;
    let psis = evolve_to_times(&psi0, &s.potential, s.time.dt, &times)?;
    // classical characteristic from the initial centre, when the potential allows one
    let track = match HamiltonianSpec::new(s.constants.mass, s.potential.clone()) {
        Ok(h) => {
            let t_end = *times.last().expect("at least one sample");
            Some(hamilton_flow(expectation_x(&psi0), expectation_p(&psi0), t_end, s.characteristic_dt(), &h)?)
        }
        Err(_) => None,
    };
    let rows = psis.iter().map(|psi| {
        let (xc, pc) = track.as_ref().and_then(|c| c.at(psi.time)).unwrap_or((f64::NAN, f64::NAN));
        vec![
            fmt(psi.time),
            fmt(l2_norm(psi)),
            fmt(expectation_x(psi)),
            fmt(expectation_p(psi)),
            fmt(energy(psi, &s.potential)),
            fmt(xc),
            fmt(pc),
        ]
    });
    io::write_csv(
        &ctx.file("observables.csv"),
        &["t", "norm", "x", "p", "energy", "classical_x", "classical_p"],
        rows,
    )?;
    let last = psis.last().expect("at least one sample");
    let g = last.grid();
    let rows = last.values().iter().enumerate().map(|(i, z)| vec![fmt(g.x(i)), fmt(z.re), fmt(z.im)]);
    io::write_csv(&ctx.file("psi_final.csv"), &["x", "re", "im"], rows)?;
    if ctx.dump_binary {
        for (k, psi) in psis.iter().enumerate() {
            io::write_field_dump(ctx.out, &format!("psi_{k:03}"), psi)?;
        }
    }
    info!("wrote {} samples to {}", psis.len(), ctx.out.display());
    Ok(())
}

pub fn envelope(ctx: &Context) -> Result<()> {
    let s = ctx.scenario;
    let mut wrote = false;
    if !s.packets.is_empty() {
        let psi0 = corr::initial_wavefunction(s)?;
        let grid = s.envelope_grid()?;
        let scale = scale_check(&psi0, &grid);
        io::write_json(&ctx.file("scale.json"), &scale)?;
        if !ctx.force {
            scale.require()?;
        }
        let a = extract_envelope(&psi0, &grid, &s.potential)?;
        io::write_envelope_csv(&ctx.file("envelope.csv"), &a)?;
        let rho = envelope_density(&a);
        io::write_density_csv(&ctx.file("density.csv"), &rho)?;
        if ctx.dump_binary {
            io::write_envelope_dump(ctx.out, "envelope", &a)?;
            io::write_density_dump(ctx.out, "density", &rho)?;
        }
        wrote = true;
    }
    if s.kernel.is_some() {
        let rows = corr::kernel_table(s)?
            .into_iter()
            .map(|(q, chi, centred)| vec![fmt(q), fmt(chi.re), fmt(chi.im), fmt(centred)]);
        io::write_csv(&ctx.file("kernel.csv"), &["q", "re", "im", "centered"], rows)?;
        wrote = true;
    }
    if !wrote {
        bail!("scenario `{}` has neither packets nor a [kernel] section", s.name);
    }
    Ok(())
}

pub fn liouville(ctx: &Context) -> Result<()> {
    let out = corr::run_liouville(ctx.scenario)?;
    io::write_json(&ctx.file("report.json"), &out.report)?;
    io::write_records(&ctx.file("liouville.csv"), &out.report.samples)?;
    io::write_trajectory_csv(&ctx.file("trajectory.csv"), &out.trajectory, &out.hamiltonian)?;
    let last = out.densities.last().expect("at least one sample");
    io::write_density_csv(&ctx.file("density_final.csv"), last)?;
    if ctx.dump_binary {
        for (k, rho) in out.densities.iter().enumerate() {
            io::write_density_dump(ctx.out, &format!("density_{k:03}"), rho)?;
        }
    }
    if let (Some(r), Some(b)) = (out.report.reversal_l1, out.report.reversal_bound) {
        println!("reversal_l1,{},bound,{}", fmt(r), fmt(b));
    }
    Ok(())
}

pub fn manybody_check(ctx: &Context) -> Result<()> {
    let rows = corr::run_manybody_check(ctx.scenario)?;
    let path = ctx.file("residuals.csv");
    io::write_records(&path, &rows)?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading back {}", path.display()))?;
    print!("{text}");
    Ok(())
}

pub fn kinetics(ctx: &Context) -> Result<()> {
    let s = ctx.scenario;
    if s.kinetics.is_none() && s.fock.is_none() {
        bail!("scenario `{}` has neither a [kinetics] nor a [fock] section", s.name);
    }
    if s.kinetics.is_some() {
        let out = corr::kinetic_scenario(s, ctx.force)?;
        io::write_json(&ctx.file("report.json"), &out.report)?;
        io::write_records(&ctx.file("kinetics.csv"), &out.report.samples)?;
        io::write_rate_matrix(ctx.out, "rates", &out.rates)?;
        io::write_occupations_csv(&ctx.file("occupations.csv"), &out.occupations)?;
        if ctx.dump_binary {
            for (k, rho) in out.densities.iter().enumerate() {
                io::write_density_dump(ctx.out, &format!("density_{k:03}"), rho)?;
            }
        }
    }
    if s.fock.is_some() {
        let report = corr::run_fock(s)?;
        io::write_json(&ctx.file("fock.json"), &report)?;
        io::write_records(&ctx.file("fock.csv"), &report.rows)?;
    }
    Ok(())
}

pub fn compare(ctx: &Context) -> Result<()> {
    let out = corr::run_correspondence(ctx.scenario, ctx.force)?;
    io::write_json(&ctx.file("report.json"), &out.report)?;
    io::write_records(&ctx.file("metrics.csv"), &out.report.samples)?;
    let (q, c) = (out.quantum.last(), out.classical.last());
    if let (Some(q), Some(c)) = (q, c) {
        io::write_density_csv(&ctx.file("envelope_density_final.csv"), q)?;
        io::write_density_csv(&ctx.file("liouville_density_final.csv"), c)?;
    }
    if ctx.dump_binary {
        for (k, (q, c)) in out.quantum.iter().zip(&out.classical).enumerate() {
            io::write_density_dump(ctx.out, &format!("envelope_{k:03}"), q)?;
            io::write_density_dump(ctx.out, &format!("liouville_{k:03}"), c)?;
        }
    }
    println!("max_l1,{}", fmt(out.report.max_l1()));
    Ok(())
}

pub fn barrier(ctx: &Context) -> Result<()> {
    let out = corr::barrier_split_experiment(ctx.scenario, ctx.force)?;
    let r = &out.report;
    io::write_json(&ctx.file("report.json"), r)?;
    let rows = r.lobes.iter().flat_map(|lobe| {
        lobe.samples.iter().map(move |s| {
            vec![
                lobe.label.clone(),
                fmt(s.t),
                fmt(s.envelope_x),
                fmt(s.envelope_p),
                fmt(s.classical_x),
                fmt(s.classical_p),
                fmt(s.x_error),
                fmt(s.mass),
            ]
        })
    });
    io::write_csv(
        &ctx.file("lobes.csv"),
        &["lobe", "t", "envelope_x", "envelope_p", "classical_x", "classical_p", "x_error", "mass"],
        rows,
    )?;
    if !r.separable {
        log::warn!("lobes overlap: {:.3} of the mass is ambiguous", r.overlap_mass);
    }
    println!("transmission,{},reflection,{}", fmt(r.transmission), fmt(r.reflection));
    Ok(())
}
