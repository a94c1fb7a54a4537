use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::treebank::TreeParseError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("duplicate utterance id {0:?}")]
    DuplicateId(String),
    #[error("embedding {key:?} has length {found}, table dimension is {expected}")]
    EmbeddingDimension {
        key: String,
        expected: usize,
        found: usize,
    },
    #[error("embedding {0:?} contains a non-finite value")]
    NonFiniteEmbedding(String),
    #[error("missing embeddings for keys: {}", .0.join(", "))]
    MissingKeys(Vec<String>),
    #[error("expected {expected} ratios, got {found}")]
    RatioCount { expected: usize, found: usize },
    #[error("invalid ratio {0} (must be positive and finite)")]
    InvalidRatio(f64),
    #[error("corpus {0:?} is too small to satisfy its balancing ratio")]
    CorpusTooSmall(String),
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("token {token:?} is absent from the {which} distribution")]
    TokenAbsent { token: String, which: &'static str },
    #[error("threshold {name} = {value} must lie in [0, 1]")]
    InvalidThreshold { name: &'static str, value: f64 },
    #[error(transparent)]
    TreeParse(#[from] TreeParseError),
    #[error("invalid production {0:?}")]
    InvalidProduction(String),
    #[error("empty table")]
    EmptyTable,
    #[error("rule {0} is absent from the style model")]
    RuleAbsent(String),
    #[error("invalid LLR inputs: {0}")]
    InvalidLlr(&'static str),
    #[error("mapping line {line}: {message}")]
    Mapping { line: usize, message: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("vector contains a non-finite value")]
    NonFinite,
    #[error("need at least 2 examples in each split, got train={train} validation={validation}")]
    SplitTooSmall { train: usize, validation: usize },
    #[error("non-finite loss at epoch {epoch} (train={train_loss}, validation={validation_loss})")]
    NonFiniteLoss {
        epoch: usize,
        train_loss: f64,
        validation_loss: f64,
    },
    #[error("example {index} has no active gold label")]
    NoGoldLabel { index: usize },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("character mismatch: {0:?} vs {1:?}")]
    CharacterMismatch(String, String),
    #[error("sample size {requested} exceeds corpus size {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("sample sizes must be non-empty and strictly increasing")]
    InvalidSizes,
    #[error("no comparable style component (all zero-norm or empty)")]
    NoComparableComponent,
    #[error("{0}")]
    Alignment(String),
    #[error(
        "oversampling target {target} for {character:?} is below its source count {source_count}"
    )]
    TargetBelowSource {
        character: String,
        target: usize,
        source_count: usize,
    },
    #[error("no pairs eligible for oversampling for {0:?}")]
    NoEligiblePairs(String),
    #[error("CoT trace has {0} characters, limit is 100")]
    TraceTooLong(usize),
    #[error("negative input {0} to the H-score")]
    NegativeHInput(f64),
    #[error("no samples")]
    NoSamples,
    #[error("invalid score {0}")]
    InvalidScore(f64),
    #[error("empty grid")]
    EmptyGrid,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}
