use std::fmt;
use std::path::Path;

use frailty::FrailtyError;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or input schema.
    Usage(String),
    /// The fit did not converge; artifacts were written.
    NonConvergence(String),
    /// Covariance estimation failed.
    Variance(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Variance(_) => 4,
            CliError::Io(_) | CliError::Numerical(_) => 1,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    /// Attributes a library error to the flag that caused it.
    pub fn flag(flag: &str, e: FrailtyError) -> Self {
        match e {
            FrailtyError::InvalidParameter(_) | FrailtyError::InvalidData(_) | FrailtyError::Unsupported(_) => {
                CliError::Usage(format!("{flag}: {e}"))
            }
            other => other.into(),
        }
    }
}

impl From<FrailtyError> for CliError {
    fn from(e: FrailtyError) -> Self {
        match e {
            FrailtyError::InvalidParameter(_) | FrailtyError::InvalidData(_) | FrailtyError::Unsupported(_) => CliError::Usage(e.to_string()),
            FrailtyError::SingularJacobian | FrailtyError::TooFewConverged { .. } => CliError::Variance(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::NonConvergence(m) | CliError::Variance(m) | CliError::Io(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}
