//! Weak von Neumann coupling and the protective-measurement protocol.

pub mod composite;
pub mod continuous;
pub mod current;
pub mod protocol;
pub mod tracking;

use crate::error::{Error, Result};
use crate::hilbert::{Operator, Spectrum};
use crate::protection::Envelope;

pub use composite::{couple_weak, PointerSlot, SystemPointer};
pub use continuous::{evolve_continuous, ContinuousCoupling};
pub use current::{local_current, reconstruct_phase, PhaseReconstruction};
pub use protocol::{run_protective_measurement, Protection, ProtectiveRunRecord, RunOptions};
pub use tracking::{track_nonstationary, TrackingRecord, TrackingWindow};

/// How the coupling strength is delivered over a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    /// `pulses` kicks of strength ε each.
    Impulsive { pulses: usize },
    /// `g(t) = strength / envelope.integral() * envelope(t)`.
    Continuous(Envelope),
}

/// Eigen-data of a coupled observable, cached at construction.
#[derive(Clone, Debug)]
pub enum ObservableSpectrum {
    Diagonal(Vec<f64>),
    Eigen(Spectrum),
}

/// Weak coupling of one pointer to one system observable.
#[derive(Clone, Debug)]
pub struct CouplingSpec {
    observable: Operator,
    strength: f64,
    schedule: Schedule,
    label: String,
    spectrum: ObservableSpectrum,
}

impl CouplingSpec {
    fn build(observable: Operator, strength: f64, schedule: Schedule) -> Result<Self> {
        observable.require_hermitian("coupled observable")?;
        if !(strength > 0.0) || !strength.is_finite() {
            return Err(Error::Configuration(format!("coupling strength must be positive, got {strength}")));
        }
        let spectrum = if observable.is_diagonal() {
            ObservableSpectrum::Diagonal(observable.diagonal_real())
        } else {
            ObservableSpectrum::Eigen(observable.spectrum()?)
        };
        Ok(Self { observable, strength, schedule, label: String::new(), spectrum })
    }

    /// `round(1/ε)` kicks of strength `epsilon`.
    pub fn impulsive(observable: Operator, epsilon: f64) -> Result<Self> {
        let pulses = (1.0 / epsilon).round().max(1.0) as usize;
        Self::impulsive_pulses(observable, epsilon, pulses)
    }

    pub fn impulsive_pulses(observable: Operator, epsilon: f64, pulses: usize) -> Result<Self> {
        if pulses == 0 {
            return Err(Error::Configuration("an impulsive schedule needs at least one pulse".into()));
        }
        Self::build(observable, epsilon, Schedule::Impulsive { pulses })
    }

    /// Continuous coupling whose envelope integrates to `total_strength`.
    pub fn continuous(observable: Operator, total_strength: f64, envelope: Envelope) -> Result<Self> {
        let spec = Self::build(observable, total_strength, Schedule::Continuous(envelope))?;
        // quadrature check of the normalization
        let n = 20_000;
        let h = (envelope.t_off - envelope.t_on) / n as f64;
        let integral: f64 = (0..n)
            .map(|k| spec.rate(envelope.t_on + (k as f64 + 0.5) * h))
            .sum::<f64>()
            * h;
        if (integral - total_strength).abs() > 1e-9 * total_strength.max(1.0) {
            return Err(Error::NumericalIntegrity(format!(
                "envelope integrates to {integral}, expected {total_strength}"
            )));
        }
        Ok(spec)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn observable(&self) -> &Operator {
        &self.observable
    }

    /// ε per pulse (impulsive) or total integrated strength (continuous).
    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn spectrum(&self) -> &ObservableSpectrum {
        &self.spectrum
    }

    /// Total integrated strength delivered over the whole schedule.
    pub fn total_strength(&self) -> f64 {
        match self.schedule {
            Schedule::Impulsive { pulses } => self.strength * pulses as f64,
            Schedule::Continuous(_) => self.strength,
        }
    }

    /// Instantaneous coupling rate `g(t)` of a continuous schedule (zero for impulsive ones).
    pub fn rate(&self, t: f64) -> f64 {
        match self.schedule {
            Schedule::Impulsive { .. } => 0.0,
            Schedule::Continuous(env) => self.strength / env.integral() * env.value(t),
        }
    }
}
