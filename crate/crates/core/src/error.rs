use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("assembly failed along {dimension}: {reason}")]
    Assembly { dimension: &'static str, reason: String },

    #[error("eigen-solver did not converge after {iterations} iterations (dofs = {dofs})")]
    EigenNonConvergence { iterations: usize, dofs: usize },

    #[error("singular system matrix at {frequency_hz} Hz")]
    SingularFrequency { frequency_hz: f64 },

    #[error("step size underflow at t = {time} s (h = {step:e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("non-finite value at index {index} of {what}")]
    NonFinite { what: &'static str, index: usize },

    #[error("window [{start}, {end}] s lies outside the series [{series_start}, {series_end}] s")]
    WindowOutOfRange { start: f64, end: f64, series_start: f64, series_end: f64 },

    #[error("frequency {frequency_hz} Hz outside (0, {nyquist_hz}] Hz")]
    FrequencyOutOfRange { frequency_hz: f64, nyquist_hz: f64 },

    #[error("unreliable delay estimate: correlation peak {peak:.3} below {threshold}")]
    UnreliableCorrelation { peak: f64, threshold: f64 },

    #[error("non-positive transit delay {delay_s} s (sensor order reversed?)")]
    Direction { delay_s: f64 },

    #[error("scalogram does not cover {what}")]
    Coverage { what: String },

    #[error("training data has a single class")]
    SingleClass,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Validation { field, reason: reason.into() }
}
