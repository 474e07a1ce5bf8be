use segsel_core::Error as CoreError;

/// Failures of the command-line front end, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// malformed input data (exit 2)
    #[error("input error: {0}")]
    Input(String),
    /// incompatible or invalid settings (exit 3)
    #[error("config error: {0}")]
    Config(String),
    /// empty truncation, zero importance mass and similar (exit 4)
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Config(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

/// Whether a core error is a numerical degeneracy rather than bad input.
pub fn is_numerical(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::EmptyTruncation
            | CoreError::ZeroMass { .. }
            | CoreError::Infeasible { .. }
            | CoreError::NotPositiveDefinite
            | CoreError::IcNeverStopped(_)
            | CoreError::PathEnded { .. }
            | CoreError::NoAdmissibleSplit { .. }
    )
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::SeriesTooShort(_) | CoreError::NonFinite(_) | CoreError::ChromNotContiguous { .. } => {
                CliError::Input(e.to_string())
            }
            e if is_numerical(&e) => CliError::Numerical(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
