//! Error type shared by all simulator components.

use crate::sinr::StationId;

/// Errors surfaced by geometry, the SINR engine, protocol runs and the
/// experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller passed a value outside an operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A network violates a structural invariant (duplicate ids,
    /// coincident positions, ids outside the declared domain, ...).
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    /// Physical-model parameters outside the regime the algorithms
    /// support (most prominently `alpha <= 2`).
    #[error("unsupported parameters: {0}")]
    UnsupportedParameters(String),

    /// SINR was queried for a receiver that is itself transmitting.
    #[error("undefined receiver: station {0} is in the transmitter set")]
    UndefinedReceiver(StationId),

    /// A protocol asked the runtime for something its own rules forbid
    /// (asleep transmitter, two leaders in one box, ...).
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    /// A broadcast was started on a network that fails the model's
    /// admissibility condition (disconnected communication graph).
    #[error("inadmissible network: {0}")]
    InadmissibleNetwork(String),

    /// The harness could not produce an admissible network within its
    /// retry budget.
    #[error("generation failure: {0}")]
    GenerationFailure(String),

    /// Exhaustive verification was requested for a family too large to
    /// enumerate.
    #[error("refusing to enumerate: {0}")]
    RefuseToEnumerate(String),

    /// The per-run round budget ran out. `run_protocol` converts this
    /// into a timeout outcome carrying the partial results.
    #[error("round budget of {0} exhausted")]
    BudgetExhausted(u64),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A file did not parse as the expected format.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid_arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
