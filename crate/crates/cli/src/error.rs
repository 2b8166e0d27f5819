use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] vecpop::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 0 success, 1 runtime failure, 2 validation, 3 no convergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        use vecpop::Error as E;
        match self {
            CliError::Validation(_) => 2,
            CliError::Io { .. } | CliError::Csv(_) => 4,
            CliError::Core(e) => match e {
                E::NoConvergence { .. } => 3,
                E::ActionOutOfRange { .. }
                | E::DimensionMismatch { .. }
                | E::InvalidGame(_)
                | E::InvalidSimplex(_)
                | E::InvalidHarsanyi(_)
                | E::ZeroProbabilityType(_)
                | E::InvalidEnsemble(_)
                | E::InvalidCost(_)
                | E::InvalidParameter(_)
                | E::NotApproachable(_)
                | E::EmptyEnsemble
                | E::ZeroDirection => 2,
                _ => 1,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Validation("x".into()).exit_code(), 2);
        let nc = vecpop::Error::NoConvergence {
            iterations: 3,
            lyapunov: 0.1,
        };
        assert_eq!(CliError::from(nc).exit_code(), 3);
        let io = CliError::io(Path::new("a"), std::io::Error::other("boom"));
        assert_eq!(io.exit_code(), 4);
        let left = vecpop::Error::LeftStateSpace {
            particle: 0,
            distance: 1.0,
            s: 0.0,
        };
        assert_eq!(CliError::from(left).exit_code(), 1);
    }
}
