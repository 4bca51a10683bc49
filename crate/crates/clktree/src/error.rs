use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by every layer of the framework. The CLI prints these as
/// one-line `ERROR <code>: <message>` records, so each variant carries a
/// stable code name.
#[derive(Debug, Error)]
pub enum Error {
    #[error("logical value {0} is outside the mapping domain")]
    OutOfDomain(u64),
    #[error("register value {0:#x} has no logical preimage")]
    UnknownRegisterValue(u32),
    #[error("descriptor sub-field exceeds its bit budget")]
    FieldOverflow,
    #[error("register index {0} is out of bounds")]
    BadRegisterIndex(u8),
    #[error("value {value:#x} does not fit in {width} bits")]
    ValueTooWide { value: u32, width: u8 },
    #[error("unknown platform '{0}'")]
    UnknownPlatform(String),
    #[error("invalid platform model: {0}")]
    InvalidModel(String),
    #[error("unknown clock '{0}'")]
    UnknownClock(String),
    #[error("clock '{0}' is gated off on its active path")]
    ClockDisabled(String),
    #[error("clock '{0}' has no configured parent")]
    Unconfigured(String),
    #[error("clock '{0}' is not scalable")]
    NotScalable(String),
    #[error("clock '{0}' is not muxable")]
    NotMuxable(String),
    #[error("clock '{0}' is not gateable")]
    NotGateable(String),
    #[error("'{parent}' is not a parent candidate of '{clock}'")]
    NotACandidate { clock: String, parent: String },
    #[error("parent '{0}' is not ready")]
    ParentNotReady(String),
    #[error("gate '{0}' still feeds enabled consumers")]
    GateInUse(String),
    #[error("scaler '{0}' cannot change while downstream consumers run")]
    NotOnTheFly(String),
    #[error("constraint violation: {}", .0.join("; "))]
    ConstraintViolation(Vec<String>),
    #[error("configuration yields a non-integer frequency")]
    DivisionInexact,
    #[error("target configuration is not in the explored set")]
    Unreachable,
    #[error("transition vetoed by hook on '{0}'")]
    Vetoed(String),
    #[error("ready bit did not set within {0} ns")]
    ReadyTimeout(u64),
    #[error("transition manager reentered")]
    ReentrantTransition,
    #[error("phase boundary left the core in an invalid state: {}", .0.join("; "))]
    PhaseViolation(Vec<String>),
    #[error("negative slice duration rejected")]
    NegativeDuration,
    #[error("no samples recorded for task '{0}'")]
    NoData(String),
    #[error("zero busy time at the reference frequency")]
    ZeroBusy,
    #[error("assessment needs at least two distinct frequencies")]
    InsufficientFrequencies,
    #[error("task '{0}' has not been assessed")]
    NotAssessed(String),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("payload of {0} bytes exceeds the 256 byte maximum")]
    PayloadTooLarge(u32),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-parsable code, used by the CLI error stream.
    pub fn code(&self) -> &'static str {
        match self {
            Error::OutOfDomain(_) => "OutOfDomain",
            Error::UnknownRegisterValue(_) => "UnknownRegisterValue",
            Error::FieldOverflow => "FieldOverflow",
            Error::BadRegisterIndex(_) => "BadRegisterIndex",
            Error::ValueTooWide { .. } => "ValueTooWide",
            Error::UnknownPlatform(_) => "UnknownPlatform",
            Error::InvalidModel(_) => "InvalidModel",
            Error::UnknownClock(_) => "UnknownClock",
            Error::ClockDisabled(_) => "ClockDisabled",
            Error::Unconfigured(_) => "Unconfigured",
            Error::NotScalable(_) => "NotScalable",
            Error::NotMuxable(_) => "NotMuxable",
            Error::NotGateable(_) => "NotGateable",
            Error::NotACandidate { .. } => "NotACandidate",
            Error::ParentNotReady(_) => "ParentNotReady",
            Error::GateInUse(_) => "GateInUse",
            Error::NotOnTheFly(_) => "NotOnTheFly",
            Error::ConstraintViolation(_) => "ConstraintViolation",
            Error::DivisionInexact => "DivisionInexact",
            Error::Unreachable => "Unreachable",
            Error::Vetoed(_) => "Vetoed",
            Error::ReadyTimeout(_) => "ReadyTimeout",
            Error::ReentrantTransition => "ReentrantTransition",
            Error::PhaseViolation(_) => "PhaseViolation",
            Error::NegativeDuration => "NegativeDuration",
            Error::NoData(_) => "NoData",
            Error::ZeroBusy => "ZeroBusy",
            Error::InsufficientFrequencies => "InsufficientFrequencies",
            Error::NotAssessed(_) => "NotAssessed",
            Error::UnknownScenario(_) => "UnknownScenario",
            Error::PayloadTooLarge(_) => "PayloadTooLarge",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
