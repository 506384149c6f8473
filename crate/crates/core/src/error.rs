use thiserror::Error;

/// Errors produced by the library.
///
/// The variants are grouped so that callers (the CLI in particular) can map
/// them to distinct exit codes: parse errors, violated preconditions and
/// budget refusals.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A bad configuration entry; `at` is `line N` or a command-line flag.
    #[error("config error ({at}): {msg}")]
    Config { at: String, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fixed-point precision exhausted: need a width of at least {required_width} bits, have {width}")]
    PrecisionExhausted { required_width: u64, width: u64 },

    #[error("comparison within the fixed-point guard of the threshold is undecidable; rerun with a rational alpha")]
    UndecidableTie,

    #[error("estimated cost of {estimated} pairs exceeds the budget of {cap}")]
    BudgetExceeded { estimated: u128, cap: u128 },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for this error: 2 for parse or configuration
    /// errors, 4 for budget refusals, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Config { .. } => 2,
            Error::BudgetExceeded { .. } => 4,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
