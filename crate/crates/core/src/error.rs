use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid information structure: {0}")]
    InvalidStructure(String),

    #[error("invalid belief vector: {0}")]
    InvalidBelief(String),

    #[error("unknown signal `{0}`")]
    UnknownSignal(String),

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("unreachable signal `{0}`")]
    UnreachableSignal(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("compound space too large: {size} compound signals exceeds cap {cap}")]
    CompoundSpaceTooLarge { size: u128, cap: u64 },

    #[error("invalid block size {0}")]
    InvalidBlockSize(usize),

    #[error("invalid population size {0}")]
    InvalidPopulationSize(usize),

    #[error("misspecification overlaps state means: half width {half_width} (effective {effective}) must stay below {limit}")]
    MisspecOverlap { half_width: f64, effective: f64, limit: f64 },

    #[error("degenerate reporter pair: agents {0} and {1} hold the same belief")]
    DegenerateReporterPair(usize, usize),

    #[error("ambiguous state match: best distance {best}, runner-up {runner_up}")]
    AmbiguousMatch { best: f64, runner_up: f64 },

    #[error("rank-deficient population: found {found} independent belief rows, need {needed}")]
    RankDeficientPopulation { found: usize, needed: usize },

    #[error("herding detected: no pair of agents with opposite votes")]
    HerdingDetected,

    #[error("degenerate grouping: {0}")]
    DegenerateGrouping(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("no surprise: realized mean equals the reporter's expectation")]
    NoSurprise,

    #[error("undefined normalization: predicted share V[{0}][{1}] is not positive")]
    UndefinedNormalization(usize, usize),

    #[error("agent {0} is a designated reporter but has no second-order report")]
    MissingSecondOrder(usize),

    #[error("invalid procedure input: {0}")]
    InvalidInput(String),

    #[error("invalid partition model: {0}")]
    InvalidModel(String),

    #[error("incompatible profile: cell intersection has zero prior mass")]
    IncompatibleProfile,

    #[error("unidentifiable hierarchy: player {player} has distinct cells sharing one belief hierarchy")]
    UnidentifiableHierarchy { player: usize },

    #[error("zero-probability profile")]
    ZeroProbabilityProfile,

    #[error("reported hierarchies are not consistent with any common prior")]
    InconsistentHierarchies,

    #[error("invalid order {0}: construction needs m >= 2")]
    InvalidOrder(usize),

    #[error("{}", match .line { Some(l) => format!("parse error at line {l}: {}", .message), None => format!("parse error: {}", .message) })]
    Parse { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable name used when tallying failures across trials.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidStructure(_) => "invalid_structure",
            Error::InvalidBelief(_) => "invalid_belief",
            Error::UnknownSignal(_) => "unknown_signal",
            Error::UnknownState(_) => "unknown_state",
            Error::UnreachableSignal(_) => "unreachable_signal",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::CompoundSpaceTooLarge { .. } => "compound_space_too_large",
            Error::InvalidBlockSize(_) => "invalid_block_size",
            Error::InvalidPopulationSize(_) => "invalid_population_size",
            Error::MisspecOverlap { .. } => "misspec_overlap",
            Error::DegenerateReporterPair(..) => "degenerate_reporter_pair",
            Error::AmbiguousMatch { .. } => "ambiguous_match",
            Error::RankDeficientPopulation { .. } => "rank_deficient",
            Error::HerdingDetected => "herding",
            Error::DegenerateGrouping(_) => "degenerate_grouping",
            Error::Singular(_) => "singular",
            Error::NoSurprise => "no_surprise",
            Error::UndefinedNormalization(..) => "undefined_normalization",
            Error::MissingSecondOrder(_) => "missing_second_order",
            Error::InvalidInput(_) => "invalid_input",
            Error::InvalidModel(_) => "invalid_model",
            Error::IncompatibleProfile => "incompatible_profile",
            Error::UnidentifiableHierarchy { .. } => "unidentifiable_hierarchy",
            Error::ZeroProbabilityProfile => "zero_probability_profile",
            Error::InconsistentHierarchies => "inconsistent_hierarchies",
            Error::InvalidOrder(_) => "invalid_order",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn parse(message: impl Into<String>) -> Self {
        Error::Parse {
            line: None,
            message: message.into(),
        }
    }
}
