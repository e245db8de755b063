use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Core(#[from] np_spectra_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Usage(String),

    #[error("manifest mismatch for {0}")]
    Manifest(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 1 for I/O, 2 for bad input, 3 for numerical trouble.
    pub fn exit_code(&self) -> i32 {
        use np_spectra_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Manifest(_) => 1,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::UnsupportedOrder { .. } | E::Json(_) | E::Format(_) => 2,
                E::Io(_) => 1,
                E::SingularPoint | E::DegenerateChart { .. } | E::NumericFailure { .. } | E::InsufficientData { .. } => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Exit status when every step ran but a pass criterion failed under `--strict`.
pub const EXIT_CRITERION_FAILED: i32 = 4;

#[cfg(test)]
mod tests {
    use super::*;
    use np_spectra_core::Error as E;

    #[test]
    fn exit_codes_by_kind() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(E::InvalidArgument("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(E::SingularPoint).exit_code(), 3);
        assert_eq!(CliError::from(E::InsufficientData { usable: 1, required: 8 }).exit_code(), 3);
        let nf = E::NumericFailure { message: "no convergence".into(), context: "eig".into() };
        assert_eq!(CliError::from(nf).exit_code(), 3);
        assert_eq!(CliError::io("out", std::io::Error::other("disk")).exit_code(), 1);
    }
}
