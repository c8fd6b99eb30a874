use thiserror::Error;

/// Invalid numeric parameter or distribution descriptor.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("{0}")]
    Invalid(String),
}

/// Failure of a small dense linear solve.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular (pivot {pivot:e} below tolerance at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("signal sample for neuron {neuron} -> {target} is not strictly positive: {value}")]
    NonPositiveSignal {
        neuron: usize,
        target: usize,
        value: f64,
    },
    #[error("spike-rate explosion: neuron {neuron} exceeded {limit} spikes by t = {time}")]
    SpikeExplosion {
        neuron: usize,
        limit: u64,
        time: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluidError {
    #[error("mean matrix restricted to active set {active:?} is singular")]
    Rank { active: Vec<usize> },
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("mean matrix is singular")]
    Rank,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("subset enumeration supports at most {max} neurons, got {n}")]
    Size { n: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ParamError::NonFinite { name, value })
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64, ParamError> {
    require_finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(ParamError::NonPositive { name, value })
    }
}

pub(crate) fn require_nonnegative(name: &'static str, value: f64) -> Result<f64, ParamError> {
    require_finite(name, value)?;
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(ParamError::Negative { name, value })
    }
}
