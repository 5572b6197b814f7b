use serde::{Deserialize, Serialize};

use crate::heat::{FluxRing, HeatState};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub sensor: usize,
    pub value: f64,
}

/// Noisy flux data with a common noise standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    entries: Vec<Observation>,
    sigma: f64,
}

impl ObservationSet {
    pub fn new(entries: Vec<Observation>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma = {sigma} must be positive"
            )));
        }
        if entries.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(Error::InvalidParameter(
                "observation times must be nondecreasing".into(),
            ));
        }
        if entries
            .iter()
            .any(|e| !e.value.is_finite() || !e.time.is_finite())
        {
            return Err(Error::InvalidParameter("observations must be finite".into()));
        }
        Ok(Self { entries, sigma })
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn check_sensors(&self, n_theta: usize) -> Result<()> {
        match self.entries.iter().find(|e| e.sensor >= n_theta) {
            Some(e) => Err(Error::SensorOutOfRange {
                index: e.sensor,
                n_theta,
            }),
            None => Ok(()),
        }
    }

    /// `||d - g||^2 / (2 sigma^2)` for predictions aligned with the entries.
    pub fn potential(&self, predictions: &[f64]) -> Result<f64> {
        if predictions.len() != self.entries.len() {
            return Err(Error::InvalidParameter(format!(
                "{} predictions for {} observations",
                predictions.len(),
                self.entries.len()
            )));
        }
        let ss: f64 = self
            .entries
            .iter()
            .zip(predictions)
            .map(|(o, g)| (o.value - g) * (o.value - g))
            .sum();
        Ok(ss / (2.0 * self.sigma * self.sigma))
    }
}

/// Everything one forward evaluation produces.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    /// Predicted data, aligned with the observation entries.
    pub predictions: Vec<f64>,
    pub ring: Option<FluxRing>,
    pub field: Option<HeatState>,
}

impl ForwardOutput {
    pub fn predictions_only(predictions: Vec<f64>) -> Self {
        Self {
            predictions,
            ring: None,
            field: None,
        }
    }
}

/// Parameter-to-observable map. Must be reentrant: chains for separate
/// replicates call it from several threads.
pub trait ForwardMap: Sync {
    /// `Ok(None)` marks parameters outside the admissible set (zero prior mass).
    fn evaluate(&self, xi: &[f64]) -> Result<Option<ForwardOutput>>;
}

impl<F> ForwardMap for F
where
    F: Fn(&[f64]) -> Result<Option<ForwardOutput>> + Sync,
{
    fn evaluate(&self, xi: &[f64]) -> Result<Option<ForwardOutput>> {
        self(xi)
    }
}

/// Data misfit, or `+inf` for inadmissible parameters.
pub fn misfit<F: ForwardMap + ?Sized>(xi: &[f64], obs: &ObservationSet, forward: &F) -> Result<f64> {
    match forward.evaluate(xi)? {
        Some(out) => obs.potential(&out.predictions),
        None => Ok(f64::INFINITY),
    }
}
