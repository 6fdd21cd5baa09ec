use crate::error::{Error, Result};
use crate::grid::{sum_compensated, PhaseSpaceDensity, PhaseSpaceGrid};

/// One-dimensional current density `j = e sum_p (p / m) f(p) dp / (2 pi hbar)`
/// of the momentum slice `f` on `grid`'s momentum rows.
///
/// This is the 1D reduction of the kinetic-theory formula; in three
/// dimensions the measure would be `d^3p / (2 pi hbar)^3`. Positive and
/// negative momenta are summed separately in order of increasing `|p|`, so
/// an even `f` on a symmetric grid gives exactly zero.
pub fn current_density(f: &[f64], grid: &PhaseSpaceGrid) -> Result<f64> {
    if f.len() != grid.np {
        return Err(Error::GridMismatch(format!("{} samples for {} momentum rows", f.len(), grid.np)));
    }
    if let Some((index, &value)) = f.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeDensity { index, value });
    }
    let c = &grid.constants;
    let mut order: Vec<usize> = (0..grid.np).collect();
    order.sort_by(|&a, &b| grid.p_center(a).abs().total_cmp(&grid.p_center(b).abs()));
    let plus = sum_compensated(order.iter().filter(|&&j| grid.p_center(j) > 0.0).map(|&j| grid.p_center(j) * f[j]));
    let minus = sum_compensated(order.iter().filter(|&&j| grid.p_center(j) < 0.0).map(|&j| -grid.p_center(j) * f[j]));
    Ok(c.charge / c.mass * (plus - minus) * grid.dp / c.planck())
}

/// [`current_density`] at every x cell of `rho`.
pub fn current_profile(rho: &PhaseSpaceDensity) -> Vec<f64> {
    let g = rho.grid();
    (0..g.nx).map(|ix| current_density(rho.row(ix), g).expect("density rows are valid slices")).collect()
}
