use std::fmt;

use scorealign::align::AlignError;
use scorealign::audiofeat::AudioError;
use scorealign::eval::EvalError;
use scorealign::io::IoError;
use scorealign::misalign::MisalignError;
use scorealign::BudgetExceeded;

/// Command failure, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unusable input files (exit 2).
    Usage(String),
    /// Time or memory budget exhausted (exit 3).
    Budget(String),
    /// Anything else, e.g. an output file that cannot be written (exit 1).
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Internal(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "invalid",
            CliError::Budget(_) => "budget",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Budget(m) | CliError::Internal(m) => m,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.message())
    }
}

impl From<BudgetExceeded> for CliError {
    fn from(e: BudgetExceeded) -> Self {
        CliError::Budget(e.to_string())
    }
}

impl From<AlignError> for CliError {
    fn from(e: AlignError) -> Self {
        match e {
            AlignError::Budget(b) => b.into(),
            AlignError::Audio(AudioError::Io(io)) => CliError::Internal(io.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        AlignError::from(e).into()
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<MisalignError> for CliError {
    fn from(e: MisalignError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Failure to write an output file.
pub fn output_error(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::Internal(format!("cannot write {}: {e}", path.display()))
}
