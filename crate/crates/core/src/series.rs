use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Physical quantity carried by a [`TimeSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// m/s²
    Acceleration,
    /// µε
    Strain,
    /// V
    Voltage,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Acceleration => "acceleration",
            Quantity::Strain => "strain",
            Quantity::Voltage => "voltage",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "acceleration" => Some(Quantity::Acceleration),
            "strain" => Some(Quantity::Strain),
            "voltage" => Some(Quantity::Voltage),
            _ => None,
        }
    }
}

/// Uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub quantity: Quantity,
    pub start_time: f64,
    pub sample_rate: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    /// Validating constructor: positive sample rate and finite samples.
    pub fn new(quantity: Quantity, start_time: f64, sample_rate: f64, values: Vec<f64>) -> Result<Self> {
        let ts = Self { quantity, start_time, sample_rate, values };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(invalid("sample_rate", "must be positive"));
        }
        if !self.start_time.is_finite() {
            return Err(invalid("start_time", "must be finite"));
        }
        if let Some(index) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: self.quantity.name(), index });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.sample_rate
    }

    /// Time of the last sample.
    pub fn end_time(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    /// Record length `len / sample_rate`.
    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    /// `count` samples starting at index `first`.
    pub fn slice(&self, first: usize, count: usize) -> Option<Self> {
        let end = first.checked_add(count)?;
        if end > self.len() {
            return None;
        }
        Some(Self {
            quantity: self.quantity,
            start_time: self.time(first),
            sample_rate: self.sample_rate,
            values: self.values[first..end].to_vec(),
        })
    }

    pub fn map(&self, quantity: Quantity, f: impl Fn(f64) -> f64) -> Self {
        Self {
            quantity,
            start_time: self.start_time,
            sample_rate: self.sample_rate,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan_and_bad_rate() {
        assert!(TimeSeries::new(Quantity::Voltage, 0.0, 600.0, alloc::vec![0.0, f64::NAN]).is_err());
        assert!(TimeSeries::new(Quantity::Voltage, 0.0, 0.0, alloc::vec![0.0]).is_err());
    }

    #[test]
    fn slicing_keeps_absolute_time() {
        let ts = TimeSeries::new(Quantity::Strain, 2.0, 10.0, (0..50).map(|i| i as f64).collect())
            .unwrap();
        let s = ts.slice(10, 5).unwrap();
        assert_eq!(s.start_time, 3.0);
        assert_eq!(s.values, alloc::vec![10.0, 11.0, 12.0, 13.0, 14.0]);
        assert!(ts.slice(48, 5).is_none());
    }
}
