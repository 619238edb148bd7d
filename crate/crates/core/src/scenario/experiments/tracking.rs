//! Tracking a protected state that drifts with the trap (E8).

use super::{run_options, target_indices, Output};
use crate::error::Result;
use crate::hilbert::{position_density, Grid1D, GridHamiltonian};
use crate::protection::{Envelope, ProtectionScheme, SystemDynamics};
use crate::scenario::bundle::{Check, Table};
use crate::scenario::config::{ScenarioConfig, SystemSection};
use crate::weak::tracking::TrackingOptions;
use crate::weak::{track_nonstationary, CouplingSpec, TrackingRecord};

/// Largest centroid deviation accepted, relative to the drift.
pub const TRACKING_TOLERANCE: f64 = 0.1;

fn track(config: &ScenarioConfig, grid: Grid1D, omega: f64, duration: f64, ramp: f64) -> Result<TrackingRecord> {
    let m = config.measurement.as_ref().expect("validated");
    let drift = config.drift.as_ref().expect("validated");
    let shift = drift.shift;
    let dynamics = SystemDynamics::Grid(GridHamiltonian::moving_harmonic(grid, omega, move |t| shift * t / duration));
    let scheme = ProtectionScheme::hamiltonian(dynamics, 0)?;
    let psi = scheme.protected_state()?;
    let idx = target_indices(&grid, m.targets)?;
    let env = Envelope::new(0.0, duration, ramp)?;
    let strength = m.total_strength.expect("validated");
    let targets = idx
        .iter()
        .map(|&i| Ok(CouplingSpec::continuous(position_density(&grid, i)?, strength, env)?.with_label(format!("x{i}"))))
        .collect::<Result<Vec<_>>>()?;
    let floor = config.protection.as_ref().map_or(0.9, |p| p.fidelity_floor);
    let run = run_options(config.pointer.as_ref().expect("validated"), m.dt, m.trace_samples, false, floor)?;
    let options = TrackingOptions { run, windows: drift.windows, positions: idx.iter().map(|&i| grid.x(i)).collect() };
    track_nonstationary(&psi, &scheme, &targets, &options)
}

pub(super) fn run(config: &ScenarioConfig) -> Result<Output> {
    let SystemSection::Oscillator { points, x_min, x_max, omega } = config.system else {
        unreachable!("validated")
    };
    let grid = Grid1D::new(points, x_min, x_max)?;
    let m = config.measurement.as_ref().expect("validated");
    let drift = config.drift.as_ref().expect("validated");

    let duration = m.duration.expect("validated");
    let mut runs = vec![("slow", track(config, grid, omega, duration, m.ramp)?)];
    if let Some(fast) = drift.fast_duration {
        // same protocol, compressed in time
        runs.push(("fast", track(config, grid, omega, fast, m.ramp * fast / duration)?));
    }

    let mut out = Output::default();
    let mut table = Table::new(&["run", "window", "t_start", "t_end", "centroid", "reference_centroid", "error"]);
    for (name, rec) in &runs {
        for (w, win) in rec.windows.iter().enumerate() {
            table.push(vec![
                (*name).into(),
                w.into(),
                win.t_start.into(),
                win.t_end.into(),
                win.centroid.into(),
                win.reference_centroid.into(),
                win.error.into(),
            ]);
        }
        out.put(&format!("{name}_centroid_error"), rec.centroid_tracking_error());
        out.put(&format!("{name}_adiabaticity"), rec.adiabaticity.unwrap_or(f64::INFINITY));
        out.put(&format!("{name}_warnings"), rec.warnings.join("; "));
    }
    out.table("tracking", table);

    let slow = &runs[0].1;
    out.check(Check::below("slow_drift_tracked", slow.centroid_tracking_error(), TRACKING_TOLERANCE, "max centroid deviation relative to the drift"));
    out.check(Check {
        name: "slow_drift_adiabatic".into(),
        passed: slow.warnings.is_empty(),
        value: slow.adiabaticity.unwrap_or(f64::INFINITY),
        threshold: crate::weak::tracking::ADIABATIC_RATIO,
        detail: "no adiabaticity warning on the slow run".into(),
    });
    if let Some((_, fast)) = runs.get(1) {
        out.check(Check {
            name: "fast_drift_flagged".into(),
            passed: !fast.warnings.is_empty(),
            value: fast.adiabaticity.unwrap_or(f64::INFINITY),
            threshold: crate::weak::tracking::ADIABATIC_RATIO,
            detail: "the fast run carries an adiabaticity warning".into(),
        });
    }
    Ok(out)
}
