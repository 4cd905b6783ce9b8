use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),

    #[error("reaction `{0}` has identical source and target")]
    SelfLoop(String),

    #[error("rate constant must be positive and finite, got {0}")]
    InvalidRate(f64),

    #[error("reaction `{reaction}` appears with conflicting rate constants {first} and {second}")]
    ConflictingRates { reaction: String, first: f64, second: f64 },

    #[error("empty reaction network")]
    EmptyNetwork,

    #[error("negative concentration {value} for `{species}`")]
    NegativeConcentration { species: String, value: f64 },

    #[error("no concentration given for enzymatic species `{0}`")]
    MissingEnzyme(String),

    #[error("`{0}` is not an enzymatic species of this network")]
    NotAnEnzyme(String),

    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root solve for h={h}, q={q}, y={y} did not converge ({detail})")]
    RootNotConverged {
        h: f64,
        q: u32,
        y: f64,
        detail: &'static str,
    },

    #[error("activation {0} has no reaction-network implementation")]
    UnsupportedActivation(String),

    #[error("rate fit needs at least {required} samples above the noise floor, found {usable}; start further from the limit")]
    InsufficientSamples { usable: usize, required: usize },

    #[error("training diverged at iteration {0}: non-finite parameters")]
    Diverged(usize),

    #[error("label {0} is out of range 0..=9")]
    LabelOutOfRange(u8),
}
