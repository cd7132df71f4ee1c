use alloc::string::String;

use crate::grammar::NtId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("sentence pair {id}: {reason}")]
    InvalidSentence { id: usize, reason: String },
    #[error("sentence pair {id}: alignment link {src}-{tgt} out of range for lengths {src_len}x{tgt_len}")]
    AlignmentOutOfRange {
        id: usize,
        src: u32,
        tgt: u32,
        src_len: usize,
        tgt_len: usize,
    },
    #[error("sentence pair {id}: duplicate alignment link {src}-{tgt}")]
    DuplicateLink { id: usize, src: u32, tgt: u32 },
    #[error("bitext has {pairs} sentence pairs but {alignments} alignment lines")]
    LengthMismatch { pairs: usize, alignments: usize },
    #[error("token `{0}` has no word class")]
    UnknownToken(String),
    #[error("unknown non-terminal {0}")]
    UnknownNonTerminal(NtId),
    #[error("non-terminal {0} has productions but a zero count")]
    ZeroCount(NtId),
    #[error("non-terminal {0} has no productions")]
    NoProductions(NtId),
    #[error("production is malformed: {0}")]
    MalformedProduction(String),
    #[error("grammar has no probabilities; run estimate_probabilities first")]
    Unscored,
    #[error("invalid merge plan: {0}")]
    InvalidPlan(String),
    #[error("k-medoids needs k <= n_top <= plain non-terminals (k={k}, n_top={n_top}, available={available})")]
    ClusterSize {
        k: usize,
        n_top: usize,
        available: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("chart budget of {0} span-pair items exhausted")]
    BudgetExceeded(usize),
}
