use thiserror::Error;

use crate::embeddings::Embedding;

/// Errors surfaced by the strata engine. Report-style checks (datum and
/// module validation) return violation lists instead.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid embedding index {0} for this field shape")]
    InvalidIndex(String),
    #[error("degenerate cycle: the avoid set covers the whole orbit of prime {prime}")]
    DegenerateCycle { prime: usize },
    #[error("not a stratum pair: I \u{222a} J misses {missing} at prime {prime}")]
    NotAStratumPair { prime: usize, missing: Embedding },
    #[error("bottom stratum at prime {prime}: I \u{2229} J covers the whole cycle; use the bottom classification")]
    BottomStratum { prime: usize },
    #[error("prime {prime} is not a bottom stratum component")]
    NotBottom { prime: usize },
    #[error("enumeration guard exceeded: {size} positions > {limit}")]
    SizeGuard { size: usize, limit: usize },
    #[error("sub-datum condition fails at slot {slot}: {which} must vanish")]
    SubDatumCondition { slot: usize, which: &'static str },
    #[error("invalid Raynaud datum: {0}")]
    InvalidDatum(String),
    #[error("requested case is inconsistent with the T' construction")]
    InconsistentCase,
    #[error("pairing is not perfect")]
    NonPerfectPairing,
    #[error("dimension violation: {0}")]
    DimensionViolation(String),
    #[error("map is not invertible where the case table requires it")]
    SingularMap,
    #[error("no filtration of the requested type exists on this module")]
    NoSuchFiltration,
    #[error("signature must be 1 at this position")]
    SignatureNotOne,
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
