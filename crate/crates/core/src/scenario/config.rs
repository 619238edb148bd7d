//! Scenario files: typed TOML sections and their validation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Experiment {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::E1,
        Experiment::E2,
        Experiment::E3,
        Experiment::E4,
        Experiment::E5,
        Experiment::E6,
        Experiment::E7,
        Experiment::E8,
    ];

    pub fn description(self) -> &'static str {
        match self {
            Experiment::E1 => "ground-state density reconstruction under Zeno protection",
            Experiment::E2 => "survival probability of a full Zeno run versus coupling strength",
            Experiment::E3 => "ground-state density reconstruction under Hamiltonian protection with adiabatic switching",
            Experiment::E4 => "phase recovery from local probability currents",
            Experiment::E5 => "pointer velocity of postselected subensembles",
            Experiment::E6 => "nondemolition Bell verification and its disturbance of unequal superpositions",
            Experiment::E7 => "protection of a two-state vector by a non-Hermitian effective Hamiltonian",
            Experiment::E8 => "tracking a slowly moving protected state",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub system: SystemSection,
    pub protection: Option<ProtectionSection>,
    pub measurement: Option<MeasurementSection>,
    pub pointer: Option<PointerSection>,
    pub postselection: Option<PostselectionSection>,
    pub survival: Option<SurvivalSection>,
    pub phase: Option<PhaseSection>,
    pub bell: Option<BellSection>,
    pub two_state: Option<TwoStateSection>,
    pub drift: Option<DriftSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    pub experiment: Experiment,
    pub trials: usize,
    pub seed: u64,
    /// Tables to emit; empty means all.
    #[serde(default)]
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemSection {
    /// `p²/2 + ω² x²/2` on a periodic grid.
    Oscillator { points: usize, x_min: f64, x_max: f64, omega: f64 },
    /// Hard walls at the ends of the grid (finite differences).
    Box { points: usize, x_min: f64, x_max: f64 },
    Qubits { n: usize },
    /// Hermitian matrix given by rows of real and (optional) imaginary parts.
    Custom {
        real: Vec<Vec<f64>>,
        #[serde(default)]
        imag: Option<Vec<Vec<f64>>>,
    },
}

impl SystemSection {
    pub fn kind(&self) -> &'static str {
        match self {
            SystemSection::Oscillator { .. } => "oscillator",
            SystemSection::Box { .. } => "box",
            SystemSection::Qubits { .. } => "qubits",
            SystemSection::Custom { .. } => "custom",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SystemSection::Oscillator { points, .. } | SystemSection::Box { points, .. } => *points,
            SystemSection::Qubits { n } => 1usize.checked_shl(*n as u32).unwrap_or(usize::MAX),
            SystemSection::Custom { real, .. } => real.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtectionKind {
    Zeno,
    Hamiltonian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtectionSection {
    pub kind: ProtectionKind,
    /// Time between Zeno verifications.
    #[serde(default = "default_period")]
    pub period: f64,
    /// Fresh samples requested after a failed run.
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    /// A continuous run survives if the final system fidelity stays above this.
    #[serde(default = "default_floor")]
    pub fidelity_floor: f64,
}

fn default_period() -> f64 {
    0.01
}
fn default_retries() -> usize {
    10
}
fn default_floor() -> f64 {
    0.9
}

/// Evenly spaced target positions, snapped to grid points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetRange {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub targets: TargetRange,
    /// Strength per pulse of impulsive couplings; `round(1/epsilon)` pulses.
    pub epsilon: Option<f64>,
    /// Integrated strength of continuous couplings.
    pub total_strength: Option<f64>,
    pub duration: Option<f64>,
    #[serde(default)]
    pub ramp: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub parallel: bool,
    #[serde(default = "default_trace")]
    pub trace_samples: usize,
    /// Also run the unprotected negative control.
    #[serde(default)]
    pub control: bool,
}

fn default_dt() -> f64 {
    0.05
}
fn default_trace() -> usize {
    20
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerSection {
    pub points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostselectionFamily {
    /// One projector per grid point.
    Position,
    /// The prepared state and its complement.
    Preselection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostselectionSection {
    pub family: PostselectionFamily,
    /// Evolution steps between pointer samples.
    #[serde(default = "default_every")]
    pub sample_every: usize,
}

fn default_every() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalSection {
    pub epsilons: Vec<f64>,
    pub delta: f64,
}

/// Imprinted phase `amplitude sin(wavenumber x) + chirp x²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    pub amplitude: f64,
    pub wavenumber: f64,
    #[serde(default)]
    pub chirp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellSection {
    /// `[re, im]` of the `|↑↑>` amplitude of the unequal superposition.
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    /// Zeno verifications applied to each Bell state.
    #[serde(default = "default_bell_steps")]
    pub zeno_steps: usize,
}

fn default_bell_steps() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoStateSection {
    /// Amplitudes as `[re, im]` pairs.
    pub forward: Vec<[f64; 2]>,
    pub backward: Vec<[f64; 2]>,
    /// Real parts of the eigenvalues of `H_eff`, protected one first.
    pub energies: Vec<f64>,
    /// Decay rates of the unprotected eigenvalues (the protected one has none).
    pub decay: Vec<f64>,
    /// Duration in units of `1 / min(decay)`.
    #[serde(default = "default_gap_times")]
    pub gap_times: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_gap_times() -> f64 {
    100.0
}
fn default_samples() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    /// Displacement of the trap centre over the run.
    pub shift: f64,
    pub windows: usize,
    /// Optional run of the same protocol compressed to this duration, expected to be flagged.
    pub fast_duration: Option<f64>,
}

fn err(field: &str, message: impl Into<String>) -> Error {
    Error::validation(field, message)
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(err(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(err(field, format!("must be finite, got {v}")))
    }
}

fn require<'a, T>(section: &'a Option<T>, name: &str, experiment: Experiment) -> Result<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| err(name, format!("section is required by experiment {experiment}")))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| format!("bytes {}..{}", s.start, s.end)).unwrap_or_else(|| "config".into());
            Error::validation(field, e.message().trim().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn experiment(&self) -> Experiment {
        self.scenario.experiment
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        if s.name.trim().is_empty() {
            return Err(err("scenario.name", "must not be empty"));
        }
        if s.trials == 0 {
            return Err(err("scenario.trials", "must be at least 1"));
        }
        self.validate_system()?;
        let e = s.experiment;
        match e {
            Experiment::E1 | Experiment::E3 => {
                self.grid_system(e)?;
                let p = require(&self.protection, "protection", e)?;
                let want = if e == Experiment::E1 { ProtectionKind::Zeno } else { ProtectionKind::Hamiltonian };
                if p.kind != want {
                    return Err(err("protection.kind", format!("experiment {e} uses {want:?} protection")));
                }
                self.validate_protection(p)?;
                let m = require(&self.measurement, "measurement", e)?;
                self.validate_measurement(m, want)?;
                self.validate_pointer(require(&self.pointer, "pointer", e)?)?;
            }
            Experiment::E2 => {
                let sv = require(&self.survival, "survival", e)?;
                if sv.epsilons.is_empty() {
                    return Err(err("survival.epsilons", "needs at least one value"));
                }
                for (i, &eps) in sv.epsilons.iter().enumerate() {
                    positive(&format!("survival.epsilons[{i}]"), eps)?;
                    if eps >= sv.delta {
                        return Err(err(&format!("survival.epsilons[{i}]"), "must be smaller than survival.delta"));
                    }
                }
                positive("survival.delta", sv.delta)?;
                if self.system.dim() < 2 {
                    return Err(err("system", "needs at least two levels"));
                }
                if let Some(p) = &self.protection {
                    if p.kind != ProtectionKind::Zeno {
                        return Err(err("protection.kind", "experiment E2 uses Zeno protection"));
                    }
                    self.validate_protection(p)?;
                }
            }
            Experiment::E4 => {
                self.grid_system(e)?;
                let ph = require(&self.phase, "phase", e)?;
                finite("phase.amplitude", ph.amplitude)?;
                finite("phase.wavenumber", ph.wavenumber)?;
                finite("phase.chirp", ph.chirp)?;
            }
            Experiment::E5 => {
                self.grid_system(e)?;
                let p = require(&self.protection, "protection", e)?;
                if p.kind != ProtectionKind::Hamiltonian {
                    return Err(err("protection.kind", "experiment E5 uses Hamiltonian protection"));
                }
                let m = require(&self.measurement, "measurement", e)?;
                self.validate_measurement(m, ProtectionKind::Hamiltonian)?;
                if m.targets.count != 1 {
                    return Err(err("measurement.targets.count", "experiment E5 couples a single target"));
                }
                self.validate_pointer(require(&self.pointer, "pointer", e)?)?;
                let ps = require(&self.postselection, "postselection", e)?;
                if ps.sample_every == 0 {
                    return Err(err("postselection.sample_every", "must be at least 1"));
                }
            }
            Experiment::E6 => {
                if !matches!(self.system, SystemSection::Qubits { n: 2 }) {
                    return Err(err("system", "experiment E6 needs kind = \"qubits\" with n = 2"));
                }
                let b = require(&self.bell, "bell", e)?;
                let norm = b.alpha[0].powi(2) + b.alpha[1].powi(2) + b.beta[0].powi(2) + b.beta[1].powi(2);
                if (norm - 1.0).abs() > 1e-10 {
                    return Err(err("bell.alpha", format!("|alpha|² + |beta|² = {norm}, expected 1")));
                }
            }
            Experiment::E7 => {
                if !matches!(self.system, SystemSection::Custom { .. }) {
                    return Err(err("system", "experiment E7 needs kind = \"custom\" (the Hermitian control)"));
                }
                let t = require(&self.two_state, "two_state", e)?;
                let d = self.system.dim();
                for (name, len) in [
                    ("two_state.forward", t.forward.len()),
                    ("two_state.backward", t.backward.len()),
                    ("two_state.energies", t.energies.len()),
                ] {
                    if len != d {
                        return Err(err(name, format!("has {len} entries for a {d}-level system")));
                    }
                }
                if t.decay.len() + 1 != d {
                    return Err(err("two_state.decay", format!("needs {} entries", d - 1)));
                }
                for (i, &g) in t.decay.iter().enumerate() {
                    positive(&format!("two_state.decay[{i}]"), g)?;
                }
                positive("two_state.gap_times", t.gap_times)?;
                if t.samples == 0 {
                    return Err(err("two_state.samples", "must be at least 1"));
                }
            }
            Experiment::E8 => {
                if !matches!(self.system, SystemSection::Oscillator { .. }) {
                    return Err(err("system", "experiment E8 needs an oscillator"));
                }
                let p = require(&self.protection, "protection", e)?;
                if p.kind != ProtectionKind::Hamiltonian {
                    return Err(err("protection.kind", "experiment E8 uses Hamiltonian protection"));
                }
                let m = require(&self.measurement, "measurement", e)?;
                self.validate_measurement(m, ProtectionKind::Hamiltonian)?;
                self.validate_pointer(require(&self.pointer, "pointer", e)?)?;
                let d = require(&self.drift, "drift", e)?;
                finite("drift.shift", d.shift)?;
                if d.windows == 0 {
                    return Err(err("drift.windows", "must be at least 1"));
                }
                if let Some(f) = d.fast_duration {
                    positive("drift.fast_duration", f)?;
                }
            }
        }
        Ok(())
    }

    fn validate_system(&self) -> Result<()> {
        match &self.system {
            SystemSection::Oscillator { points, x_min, x_max, omega } => {
                grid_fields(*points, *x_min, *x_max)?;
                positive("system.omega", *omega)
            }
            SystemSection::Box { points, x_min, x_max } => grid_fields(*points, *x_min, *x_max),
            SystemSection::Qubits { n } => {
                if *n == 0 || *n > 12 {
                    return Err(err("system.n", format!("must be between 1 and 12, got {n}")));
                }
                Ok(())
            }
            SystemSection::Custom { real, imag } => {
                let d = real.len();
                if d < 2 {
                    return Err(err("system.real", "needs at least a 2x2 matrix"));
                }
                for (i, row) in real.iter().enumerate() {
                    if row.len() != d {
                        return Err(err(&format!("system.real[{i}]"), format!("has {} entries, expected {d}", row.len())));
                    }
                }
                if let Some(imag) = imag {
                    if imag.len() != d || imag.iter().any(|r| r.len() != d) {
                        return Err(err("system.imag", format!("must be {d}x{d}")));
                    }
                }
                Ok(())
            }
        }
    }

    fn grid_system(&self, e: Experiment) -> Result<()> {
        match self.system {
            SystemSection::Oscillator { .. } | SystemSection::Box { .. } => Ok(()),
            _ => Err(err("system.kind", format!("experiment {e} needs a grid system (oscillator or box)"))),
        }
    }

    fn validate_protection(&self, p: &ProtectionSection) -> Result<()> {
        positive("protection.period", p.period)?;
        if !(0.0..1.0).contains(&p.fidelity_floor) {
            return Err(err("protection.fidelity_floor", "must lie in [0, 1)"));
        }
        Ok(())
    }

    fn validate_measurement(&self, m: &MeasurementSection, kind: ProtectionKind) -> Result<()> {
        let t = m.targets;
        finite("measurement.targets.from", t.from)?;
        finite("measurement.targets.to", t.to)?;
        if t.count == 0 {
            return Err(err("measurement.targets.count", "must be at least 1"));
        }
        if let SystemSection::Oscillator { x_min, x_max, .. } | SystemSection::Box { x_min, x_max, .. } = self.system {
            for (name, x) in [("measurement.targets.from", t.from), ("measurement.targets.to", t.to)] {
                if x < x_min || x > x_max {
                    return Err(err(name, format!("{x} lies outside the system grid [{x_min}, {x_max}]")));
                }
            }
        }
        match kind {
            ProtectionKind::Zeno => {
                let eps = m.epsilon.ok_or_else(|| err("measurement.epsilon", "required for Zeno protection"))?;
                positive("measurement.epsilon", eps)?;
            }
            ProtectionKind::Hamiltonian => {
                positive(
                    "measurement.total_strength",
                    m.total_strength.ok_or_else(|| err("measurement.total_strength", "required for Hamiltonian protection"))?,
                )?;
                let duration = m.duration.ok_or_else(|| err("measurement.duration", "required for Hamiltonian protection"))?;
                positive("measurement.duration", duration)?;
                if !(m.ramp >= 0.0) || 2.0 * m.ramp > duration {
                    return Err(err("measurement.ramp", "must lie in [0, duration / 2]"));
                }
            }
        }
        positive("measurement.dt", m.dt)?;
        if m.trace_samples == 0 {
            return Err(err("measurement.trace_samples", "must be at least 1"));
        }
        Ok(())
    }

    fn validate_pointer(&self, p: &PointerSection) -> Result<()> {
        grid_fields(p.points, p.x_min, p.x_max).map_err(|e| match e {
            Error::Validation { field, message } => err(&field.replace("system.", "pointer."), message),
            other => other,
        })?;
        positive("pointer.delta", p.delta)
    }
}

fn grid_fields(points: usize, x_min: f64, x_max: f64) -> Result<()> {
    if points < crate::hilbert::grid::MIN_GRID_POINTS {
        return Err(err("system.points", format!("need at least {} points", crate::hilbert::grid::MIN_GRID_POINTS)));
    }
    finite("system.x_min", x_min)?;
    finite("system.x_max", x_max)?;
    if x_min >= x_max {
        return Err(err("system.x_max", "must exceed x_min"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const E6: &str = r#"
[scenario]
name = "bell"
experiment = "E6"
trials = 10
seed = 3

[system]
kind = "qubits"
n = 2

[bell]
alpha = [0.6, 0.0]
beta = [0.8, 0.0]
"#;

    #[test]
    fn parses_minimal_config() {
        let c = ScenarioConfig::from_toml(E6).unwrap();
        assert_eq!(c.experiment(), Experiment::E6);
        assert_eq!(c.bell.as_ref().unwrap().zeno_steps, 100);
    }

    #[test]
    fn zero_trials_is_a_field_error() {
        let text = E6.replace("trials = 10", "trials = 0");
        match ScenarioConfig::from_toml(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "scenario.trials"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = E6.replace("n = 2", "n = 2\nspin = 1");
        let e = ScenarioConfig::from_toml(&text).unwrap_err();
        assert!(e.is_validation());
        assert!(e.to_string().contains("spin"), "{e}");
    }

    #[test]
    fn missing_section_named() {
        let text = E6.replace("[bell]\nalpha = [0.6, 0.0]\nbeta = [0.8, 0.0]\n", "");
        match ScenarioConfig::from_toml(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "bell"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unnormalized_bell_input_rejected() {
        let text = E6.replace("beta = [0.8, 0.0]", "beta = [0.9, 0.0]");
        match ScenarioConfig::from_toml(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "bell.alpha"),
            other => panic!("{other:?}"),
        }
    }
}
