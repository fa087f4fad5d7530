use thiserror::Error;

/// Errors raised by the encodings, operators, constructions and engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vector too wide for integer view ({0} bits, at most 63 supported)")]
    TooWide(usize),
    #[error("parity of empty vector undefined")]
    EmptyParity,
    #[error("broadcast impossible between lengths {0} and {1}")]
    Broadcast(usize, usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("program fell through without returning")]
    FellThrough,
    #[error("undefined name `{0}`")]
    UndefinedName(String),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parents structurally incompatible")]
    Incompatible,
    #[error("genome has no evolvable symbols")]
    EmptyGenome,
    #[error("operator not applicable: {0}")]
    NotApplicable(String),
    #[error("use sampled oracle: {found} disagreeing positions exceed the limit of {limit}")]
    TooManyDisagreements { found: usize, limit: usize },
    #[error("support of {support} points too large for L = {width}: increase ε or L override")]
    SupportTooLarge { support: usize, width: usize },
    #[error("increase gain constants: {0}")]
    Calibration(String),
    #[error("quantile bisection failed to bracket level {0}")]
    Bracket(f64),
    #[error("EA* defined for static fitness")]
    StarNeedsStatic,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("trial {trial} (seed {seed}, stream {stream}) failed: {message}")]
    Trial {
        trial: usize,
        seed: u64,
        stream: u64,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
