use thiserror::Error;

/// Errors raised by the analytic routines and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported order {0}")]
    UnsupportedOrder(u32),

    #[error("argument {arg} is outside the domain of {what}")]
    Domain { what: &'static str, arg: f64 },

    #[error("unstable system: rho = {rho:.9} (must be below 1)")]
    Unstable { rho: f64 },

    #[error("analytic evaluation requires identical service and repair laws for every source")]
    HeterogeneousLaws,

    #[error("no source with index {0}")]
    UnknownSource(usize),

    #[error("invalid simulation config: {0}")]
    Config(String),

    #[error("simulator invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
