use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("a peer-to-peer federation needs a minimum of two participants, got {0}")]
    TooFewParticipants(usize),

    #[error("missing {what} for participant {index}")]
    MissingStats { what: &'static str, index: usize },

    #[error("invalid value for {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("column `{0}` has no values")]
    ColumnEntirelyMissing(String),

    #[error("label column `{0}` not found")]
    MissingLabelColumn(String),

    #[error("row {row} has no label")]
    MissingLabel { row: usize },

    #[error("no features left after preprocessing")]
    NoFeatures,

    #[error("split infeasible: {0}")]
    InfeasibleSplit(String),

    #[error(
        "consensus violation: peer {peer} differs from peer {reference} at layer {layer}, {part} element {index}"
    )]
    ConsensusViolation {
        reference: u32,
        peer: u32,
        layer: usize,
        part: &'static str,
        index: usize,
    },
}
