//! Pointer velocity in postselected subensembles (E5).

use super::{correlation, grid_system, relative_spread, run_options, stream_rng, target_indices, Output};
use crate::error::Result;
use crate::hilbert::{density_on_grid, position_density, Operator};
use crate::protection::{Envelope, ProtectionScheme};
use crate::scenario::bundle::{Check, Table};
use crate::scenario::config::{PostselectionFamily, ScenarioConfig};
use crate::tsvf::{subensemble_analysis, SubensembleAnalysis};
use crate::weak::CouplingSpec;

/// Allowed relative wobble of a "constant" velocity, and relative error of the final reading.
pub const CONSTANT_VELOCITY_TOLERANCE: f64 = 0.05;
/// Smallest correlation between a bin's velocity and its weak-value prediction.
pub const WEAK_VALUE_CORRELATION: f64 = 0.9;

fn velocities(a: &SubensembleAnalysis, bin: usize) -> Vec<f64> {
    a.bins[bin].pointer_velocity_trace.iter().map(|p| p.1).collect()
}

/// Interior samples only: at the switching instants the rate jumps and
/// one-sided differences do not see it.
fn interior<T: Copy>(v: &[T]) -> &[T] {
    &v[1..v.len() - 1]
}

pub(super) fn run(config: &ScenarioConfig) -> Result<Output> {
    let m = config.measurement.as_ref().expect("validated");
    let ps = config.postselection.as_ref().expect("validated");
    let sys = grid_system(&config.system)?;
    let grid = sys.grid;
    let index = target_indices(&grid, m.targets)?[0];
    let strength = m.total_strength.expect("validated");
    let duration = m.duration.expect("validated");
    let target = CouplingSpec::continuous(position_density(&grid, index)?, strength, Envelope::new(0.0, duration, m.ramp)?)?
        .with_label(format!("x{index}"));
    let scheme = ProtectionScheme::hamiltonian(sys.dynamics.clone(), 0)?;
    let psi = scheme.protected_state()?;
    let steps = (duration / m.dt).ceil() as usize;
    let samples = (steps / ps.sample_every).max(2);
    let floor = config.protection.as_ref().map_or(0.9, |p| p.fidelity_floor);
    let options = run_options(config.pointer.as_ref().expect("validated"), m.dt, samples, false, floor)?;
    let density = density_on_grid(&psi, &grid)[index];
    let expected_velocity = strength / (duration - m.ramp) * density;
    let seed = config.scenario.seed;
    let trials = config.scenario.trials;

    let mut out = Output::default();
    out.put("target_index", index);
    out.put("target_x", grid.x(index));
    out.put("density", density);

    // postselection on the prepared state always succeeds
    let pre = Operator::projector(&psi);
    let rest = Operator::identity(psi.dim()).combine(1.0.into(), &pre, (-1.0).into())?;
    let family = vec![("preselected".to_string(), pre), ("orthogonal".to_string(), rest)];
    let a = subensemble_analysis(&psi, &scheme, &target, &family, trials, &options, &mut stream_rng(seed, 0))?;
    let v = velocities(&a, 0);
    let mut table = Table::new(&["time", "mean", "velocity", "predicted"]);
    for (s, &(t, vel)) in a.bins[0].pointer_velocity_trace.iter().enumerate() {
        table.push(vec![t.into(), a.bins[0].means[s].into(), vel.into(), a.bins[0].predicted_velocity[s].into()]);
    }
    out.table("preselected", table);
    let spread = relative_spread(&v);
    let final_error = (a.bins[0].mean_final / strength - density).abs() / density;
    out.put("preselected_velocity", v.iter().sum::<f64>() / v.len() as f64);
    out.put("expected_velocity", expected_velocity);
    out.put("preselected_final", a.bins[0].mean_final);
    out.check(Check::below("preselected_velocity_constant", spread, CONSTANT_VELOCITY_TOLERANCE, "max relative deviation of the velocity trace"));
    out.check(Check::below(
        "preselected_final_value",
        final_error,
        CONSTANT_VELOCITY_TOLERANCE,
        "relative error of final mean / strength against |psi(x)|^2 / dx",
    ));

    if ps.family == PostselectionFamily::Position {
        let family: Vec<(String, Operator)> = (0..grid.n_points())
            .map(|j| Ok((format!("x{j}"), Operator::basis_projector(grid.n_points(), j, 1.0)?)))
            .collect::<Result<_>>()?;
        let a = subensemble_analysis(&psi, &scheme, &target, &family, trials, &options, &mut stream_rng(seed, 1))?;
        let mut bins = Table::new(&["label", "count", "probability", "distortion", "correlation", "spread", "mean_final"]);
        let mut traces = Table::new(&["label", "time", "mean", "velocity", "predicted", "weak_value_re", "weak_value_im"]);
        let mut worst_corr = f64::INFINITY;
        let mut least_spread = f64::INFINITY;
        for (k, bin) in a.bins.iter().enumerate() {
            let v = velocities(&a, k);
            let corr = correlation(interior(&v), interior(&bin.predicted_velocity));
            let spread = relative_spread(&v);
            worst_corr = worst_corr.min(corr);
            least_spread = least_spread.min(spread);
            bins.push(vec![
                bin.postselection_label.as_str().into(),
                bin.count.into(),
                bin.probability.into(),
                bin.distortion.into(),
                corr.into(),
                spread.into(),
                bin.mean_final.into(),
            ]);
            for (s, &(t, vel)) in bin.pointer_velocity_trace.iter().enumerate() {
                traces.push(vec![
                    bin.postselection_label.as_str().into(),
                    t.into(),
                    bin.means[s].into(),
                    vel.into(),
                    bin.predicted_velocity[s].into(),
                    bin.weak_value_re[s].into(),
                    bin.weak_value_im[s].into(),
                ]);
            }
        }
        let mut agg = Table::new(&["time", "aggregate", "unconditioned", "velocity"]);
        for (s, &(t, vel)) in a.aggregate_velocity.iter().enumerate() {
            agg.push(vec![t.into(), a.aggregate[s].into(), a.unconditioned[s].into(), vel.into()]);
        }
        let av: Vec<f64> = a.aggregate_velocity.iter().map(|p| p.1).collect();
        let agg_spread = relative_spread(&av);
        let agg_final = (a.aggregate.last().copied().unwrap_or(f64::NAN) / strength - density).abs() / density;
        let identity = a
            .aggregate
            .iter()
            .zip(&a.unconditioned)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        out.table("bins", bins);
        out.table("bin_traces", traces);
        out.table("aggregate", agg);
        out.put("reported_bins", a.bins.len());
        out.put("omitted_bins", a.omitted.len());
        out.put("backaction", a.backaction);
        out.put("backaction_flag", a.backaction_flag);
        out.put("total_probability_defect", identity);
        out.check(Check::above("bin_weak_value_correlation", worst_corr, WEAK_VALUE_CORRELATION, "smallest correlation of bin velocity with g Re(P_x)_w(t)"));
        out.check(Check::above("bin_velocity_varies", least_spread, CONSTANT_VELOCITY_TOLERANCE, "smallest relative velocity spread over bins"));
        out.check(Check::below("aggregate_velocity_constant", agg_spread, CONSTANT_VELOCITY_TOLERANCE, "max relative deviation of the aggregate velocity"));
        out.check(Check::below("aggregate_final_value", agg_final, CONSTANT_VELOCITY_TOLERANCE, "relative error of aggregate final mean"));
        out.check(Check::below("total_probability_identity", identity, 1e-10, "max |aggregate - unconditioned| pointer mean"));
    }
    Ok(out)
}
