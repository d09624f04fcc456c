use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the formula it feeds.
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A truncated photon-number sum leaves too much probability mass behind.
    #[error("truncation at n = {n_trunc} leaves tail mass {tail:e} (limit {limit:e})")]
    Truncation { n_trunc: usize, tail: f64, limit: f64 },

    #[error("no sign change of {what} on [{lo}, {hi}]")]
    NoRoot { what: &'static str, lo: f64, hi: f64 },

    #[error("unknown preset `{name}`; available: {}", .available.join(", "))]
    UnknownPreset { name: String, available: Vec<String> },

    #[error("preset file: {0}")]
    PresetFormat(String),

    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("counter overflow while merging simulation batches")]
    CounterOverflow,
}

impl Error {
    pub fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }
}

/// Rejects NaN and values outside `[lo, hi]`.
pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64, expected: &'static str) -> Result<f64> {
    if value.is_nan() || value < lo || value > hi {
        Err(Error::domain(name, value, expected))
    } else {
        Ok(value)
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_nan() || value <= 0.0 || value.is_infinite() {
        Err(Error::domain(name, value, "> 0 and finite"))
    } else {
        Ok(value)
    }
}
