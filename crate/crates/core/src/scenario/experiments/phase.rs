//! Phase of a wave function from its local currents (E4).

use num_complex::Complex64 as C64;

use super::{grid_system, Output};
use crate::error::{Error, Result};
use crate::hilbert::{density_on_grid, StateVector};
use crate::scenario::bundle::{Check, Table};
use crate::scenario::config::ScenarioConfig;
use crate::weak::current::current_density;
use crate::weak::reconstruct_phase;

/// Largest phase error accepted, in radians.
pub const PHASE_TOLERANCE: f64 = 1e-2;

pub(super) fn run(config: &ScenarioConfig) -> Result<Output> {
    let ph = *config.phase.as_ref().expect("validated");
    let sys = grid_system(&config.system)?;
    let grid = sys.grid;
    let theta = move |x: f64| ph.amplitude * (ph.wavenumber * x).sin() + ph.chirp * x * x;
    let amps = sys
        .ground
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| a * C64::from_polar(1.0, theta(grid.x(i))))
        .collect();
    let psi = StateVector::new(amps)?;

    let rec = reconstruct_phase(&psi, &grid)?;
    let (a, b) = rec
        .main_segment()
        .ok_or_else(|| Error::NumericalIntegrity("no grid point above the density floor".into()))?;
    // the reconstruction is defined up to a constant: align on the mean
    let offset = (a..=b).map(|i| rec.phase[i].expect("inside segment") - theta(grid.x(i))).sum::<f64>() / (b - a + 1) as f64;
    let current = current_density(&psi, &grid)?;
    let density = density_on_grid(&psi, &grid);

    let mut table = Table::new(&["index", "x", "density", "current", "imprinted", "recovered", "error"]);
    let mut worst = 0.0f64;
    for i in 0..grid.n_points() {
        let x = grid.x(i);
        let (recovered, error) = match rec.phase[i] {
            Some(p) if (a..=b).contains(&i) => {
                let e = p - offset - theta(x);
                worst = worst.max(e.abs());
                ((p - offset).into(), e.into())
            }
            _ => (crate::scenario::bundle::Value::Null, crate::scenario::bundle::Value::Null),
        };
        table.push(vec![i.into(), x.into(), density[i].into(), current[i].into(), theta(x).into(), recovered, error]);
    }
    let mut out = Output::default();
    out.table("phase", table);
    out.put("segment_start", grid.x(a));
    out.put("segment_end", grid.x(b));
    out.put("segments", rec.segments.len());
    out.put("max_phase_error", worst);
    out.check(Check::below("phase_error", worst, PHASE_TOLERANCE, "max |recovered - imprinted| over the main segment, radians"));
    Ok(out)
}
